//! Slice-level Poincaré-ball kernels and their reverse-mode rules.
//!
//! Every function takes the curvature magnitude `c > 0` as a bare `f64`; the
//! typed wrappers in the parent module do the validation. Outputs that live
//! on the ball are always passed through [`project`].

use crate::linalg::{axpy, dot, norm, norm_sq, Matrix};

/// Max-norm margin: points are kept at `‖x‖ ≤ (1 − BALL_EPS)/√c`.
pub const BALL_EPS: f64 = 1e-5;
/// Below this norm the analytic limit of `tanh(t)/t`, `atanh(t)/t` is used.
pub const MIN_NORM: f64 = 1e-12;
/// Upper clamp for every `atanh` argument.
pub const ATANH_MAX: f64 = 1.0 - 1e-12;

#[inline]
pub fn max_norm(c: f64) -> f64 {
    (1.0 - BALL_EPS) / c.sqrt()
}

pub fn project(x: &[f64], c: f64) -> Vec<f64> {
    let n = norm(x);
    let m = max_norm(c);
    if n > m {
        // rounding in the rescale can land an ulp outside; shrink until not
        let mut s = m / n;
        loop {
            let y: Vec<f64> = x.iter().map(|v| v * s).collect();
            if norm(&y) <= m {
                return y;
            }
            s *= 1.0 - f64::EPSILON;
        }
    } else {
        x.to_vec()
    }
}

pub fn project_vjp(x: &[f64], grad: &[f64], c: f64) -> Vec<f64> {
    let n = norm(x);
    let m = max_norm(c);
    if n > m {
        let s = m / n;
        let radial = dot(x, grad) / (n * n);
        x.iter()
            .zip(grad)
            .map(|(xi, gi)| s * (gi - radial * xi))
            .collect()
    } else {
        grad.to_vec()
    }
}

/// Clamped atanh argument plus whether the clamp is active.
#[inline]
fn clamp_atanh_arg(t: f64) -> (f64, bool) {
    if t > ATANH_MAX {
        (ATANH_MAX, true)
    } else {
        (t, false)
    }
}

fn exp0_raw(v: &[f64], c: f64) -> Vec<f64> {
    let n = norm(v);
    if n < MIN_NORM {
        return v.to_vec();
    }
    let sn = c.sqrt() * n;
    let k = sn.tanh() / sn;
    v.iter().map(|x| x * k).collect()
}

pub fn exp0(v: &[f64], c: f64) -> Vec<f64> {
    project(&exp0_raw(v, c), c)
}

pub fn exp0_vjp(v: &[f64], grad: &[f64], c: f64) -> Vec<f64> {
    let g = project_vjp(&exp0_raw(v, c), grad, c);
    let n = norm(v);
    if n < MIN_NORM {
        return g;
    }
    let a = c.sqrt();
    let an = a * n;
    let th = an.tanh();
    let k = th / an;
    let dk_dn = (an * (1.0 - th * th) - th) / (a * n * n);
    let mut out: Vec<f64> = g.iter().map(|x| x * k).collect();
    axpy(dk_dn * dot(v, &g) / n, v, &mut out);
    out
}

pub fn log0(x: &[f64], c: f64) -> Vec<f64> {
    let n = norm(x);
    if n < MIN_NORM {
        return x.to_vec();
    }
    let a = c.sqrt();
    let (t, _) = clamp_atanh_arg(a * n);
    let k = t.atanh() / (a * n);
    x.iter().map(|v| v * k).collect()
}

pub fn log0_vjp(x: &[f64], grad: &[f64], c: f64) -> Vec<f64> {
    let n = norm(x);
    if n < MIN_NORM {
        return grad.to_vec();
    }
    let a = c.sqrt();
    let an = a * n;
    let (t, clamped) = clamp_atanh_arg(an);
    let u = t.atanh();
    let du_dn = if clamped { 0.0 } else { a / (1.0 - t * t) };
    let k = u / an;
    let dk_dn = (du_dn * an - u * a) / (an * an);
    let mut out: Vec<f64> = grad.iter().map(|g| g * k).collect();
    axpy(dk_dn * dot(x, grad) / n, x, &mut out);
    out
}

struct AddTerms {
    x2: f64,
    y2: f64,
    num_x: f64,
    num_y: f64,
    den: f64,
}

#[inline]
fn add_terms(x: &[f64], y: &[f64], c: f64) -> AddTerms {
    let xy = dot(x, y);
    let x2 = dot(x, x);
    let y2 = dot(y, y);
    AddTerms {
        x2,
        y2,
        num_x: 1.0 + 2.0 * c * xy + c * y2,
        num_y: 1.0 - c * x2,
        den: 1.0 + 2.0 * c * xy + c * c * x2 * y2,
    }
}

fn mobius_add_raw(x: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let t = add_terms(x, y, c);
    x.iter()
        .zip(y)
        .map(|(a, b)| (t.num_x * a + t.num_y * b) / t.den)
        .collect()
}

pub fn mobius_add(x: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    project(&mobius_add_raw(x, y, c), c)
}

pub fn mobius_add_vjp(x: &[f64], y: &[f64], grad: &[f64], c: f64) -> (Vec<f64>, Vec<f64>) {
    let t = add_terms(x, y, c);
    let out: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| (t.num_x * a + t.num_y * b) / t.den)
        .collect();
    let g = project_vjp(&out, grad, c);

    let inv_den = 1.0 / t.den;
    let bar_num_x = dot(&g, x) * inv_den;
    let bar_num_y = dot(&g, y) * inv_den;
    let bar_den = -dot(&g, &out) * inv_den;

    let bar_xy = 2.0 * c * bar_num_x + 2.0 * c * bar_den;
    let bar_x2 = -c * bar_num_y + c * c * t.y2 * bar_den;
    let bar_y2 = c * bar_num_x + c * c * t.x2 * bar_den;

    let mut gx: Vec<f64> = g.iter().map(|v| v * t.num_x * inv_den).collect();
    let mut gy: Vec<f64> = g.iter().map(|v| v * t.num_y * inv_den).collect();
    axpy(bar_xy, y, &mut gx);
    axpy(2.0 * bar_x2, x, &mut gx);
    axpy(bar_xy, x, &mut gy);
    axpy(2.0 * bar_y2, y, &mut gy);
    (gx, gy)
}

fn scalar_mul_raw(r: f64, x: &[f64], c: f64) -> Vec<f64> {
    let n = norm(x);
    if n < MIN_NORM {
        return x.iter().map(|v| r * v).collect();
    }
    let a = c.sqrt();
    let (t, _) = clamp_atanh_arg(a * n);
    let k = (r * t.atanh()).tanh() / (a * n);
    x.iter().map(|v| v * k).collect()
}

pub fn mobius_scalar_mul(r: f64, x: &[f64], c: f64) -> Vec<f64> {
    project(&scalar_mul_raw(r, x, c), c)
}

/// Returns `(∂/∂r, ∂/∂x)`.
pub fn mobius_scalar_mul_vjp(r: f64, x: &[f64], grad: &[f64], c: f64) -> (f64, Vec<f64>) {
    let g = project_vjp(&scalar_mul_raw(r, x, c), grad, c);
    let n = norm(x);
    if n < MIN_NORM {
        return (dot(x, &g), g.iter().map(|v| r * v).collect());
    }
    let a = c.sqrt();
    let an = a * n;
    let (t, clamped) = clamp_atanh_arg(an);
    let u = t.atanh();
    let du_dn = if clamped { 0.0 } else { a / (1.0 - t * t) };
    let th = (r * u).tanh();
    let sech2 = 1.0 - th * th;
    let k = th / an;
    let dk_dr = sech2 * u / an;
    let dk_dn = (sech2 * r * du_dn * an - th * a) / (an * an);
    let xg = dot(x, &g);
    let mut gx: Vec<f64> = g.iter().map(|v| v * k).collect();
    axpy(dk_dn * xg / n, x, &mut gx);
    (xg * dk_dr, gx)
}

pub fn mobius_matvec(w: &Matrix, x: &[f64], c: f64) -> Vec<f64> {
    exp0(&w.matvec(&log0(x, c)), c)
}

/// Returns `(∂/∂W, ∂/∂x)`.
pub fn mobius_matvec_vjp(w: &Matrix, x: &[f64], grad: &[f64], c: f64) -> (Matrix, Vec<f64>) {
    let l = log0(x, c);
    let m = w.matvec(&l);
    let gm = exp0_vjp(&m, grad, c);
    let mut gw = Matrix::zeros(w.rows(), w.cols());
    gw.add_outer(1.0, &gm, &l);
    let gl = w.matvec_t(&gm);
    (gw, log0_vjp(x, &gl, c))
}

/// `‖(−x) ⊕ y‖² = A / D` with `A = ‖x − y‖²` and
/// `D = 1 − 2c⟨x,y⟩ + c²‖x‖²‖y‖²`. Evaluated in a form that is exactly
/// symmetric in floating point, so `d(x, y) == d(y, x)` bit for bit.
fn diff_terms(x: &[f64], y: &[f64], c: f64) -> (f64, f64) {
    let a: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    let d = 1.0 - 2.0 * c * dot(x, y) + c * c * (norm_sq(x) * norm_sq(y));
    (a, d.max(f64::MIN_POSITIVE))
}

/// Gradient of `A / D` with respect to `x` (swap arguments for `y`).
fn diff_sq_grad(x: &[f64], y: &[f64], a: f64, d: f64, c: f64) -> Vec<f64> {
    let ny = norm_sq(y);
    x.iter()
        .zip(y)
        .map(|(p, q)| {
            let da = 2.0 * (p - q);
            let dd = -2.0 * c * q + 2.0 * c * c * ny * p;
            da / d - a * dd / (d * d)
        })
        .collect()
}

fn diff_norm(x: &[f64], y: &[f64], c: f64) -> f64 {
    let (a, d) = diff_terms(x, y, c);
    (a / d).sqrt()
}

pub fn geodesic_dist(x: &[f64], y: &[f64], c: f64) -> f64 {
    let s = c.sqrt();
    let (t, _) = clamp_atanh_arg(s * diff_norm(x, y, c));
    2.0 / s * t.atanh()
}

/// Shared chain rule: `f(n)` with `n = √(A/D)`; `df_dn2` is `∂f/∂(n²)`.
fn through_diff(x: &[f64], y: &[f64], c: f64, df_dn2: f64) -> (Vec<f64>, Vec<f64>) {
    let (a, d) = diff_terms(x, y, c);
    let gx = diff_sq_grad(x, y, a, d, c);
    let gy = diff_sq_grad(y, x, a, d, c);
    (
        gx.into_iter().map(|v| v * df_dn2).collect(),
        gy.into_iter().map(|v| v * df_dn2).collect(),
    )
}

pub fn geodesic_dist_vjp(x: &[f64], y: &[f64], grad: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    let s = c.sqrt();
    let n = diff_norm(x, y, c);
    if n < MIN_NORM {
        // non-differentiable at x = y; zero subgradient
        return (vec![0.0; x.len()], vec![0.0; y.len()]);
    }
    let (t, clamped) = clamp_atanh_arg(s * n);
    let dd_dn = if clamped { 0.0 } else { 2.0 / (1.0 - t * t) };
    through_diff(x, y, c, grad * dd_dn / (2.0 * n))
}

pub fn gcs(x: &[f64], y: &[f64], c: f64) -> f64 {
    (0.5 * c.sqrt() * geodesic_dist(x, y, c)).cos()
}

pub fn gcs_vjp(x: &[f64], y: &[f64], grad: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    let s = c.sqrt();
    let n = diff_norm(x, y, c);
    let df_dn2 = if n < MIN_NORM {
        // cos(atanh(s n)) ≈ 1 − c n²/2 near the diagonal
        -0.5 * grad * c
    } else {
        let (t, clamped) = clamp_atanh_arg(s * n);
        let du_dn = if clamped { 0.0 } else { s / (1.0 - t * t) };
        -grad * t.atanh().sin() * du_dn / (2.0 * n)
    };
    through_diff(x, y, c, df_dn2)
}
