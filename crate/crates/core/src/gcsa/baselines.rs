//! Baseline fusion strategies: concatenation, Euclidean cross-attention and
//! Möbius-addition fusion, each with its reverse-mode rule where it has
//! trainable parameters.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hyperbolic::{ball, Curvature, EuclideanVector};
use crate::linalg::{add_into, axpy, dot, mean_of, Matrix};
use crate::params::{fan_in_bound, ParamSet};

use super::{check_tokens, softmax};

/// `code ‖ image`, code first.
pub fn baseline_concat(code: &EuclideanVector, img: &EuclideanVector) -> EuclideanVector {
    let mut out = code.as_slice().to_vec();
    out.extend_from_slice(img.as_slice());
    EuclideanVector::new(out).expect("finite inputs")
}

/// `log0(exp0(code) ⊕ exp0(img))` for equal-dimension vectors.
pub fn baseline_mobius_fuse(
    code: &EuclideanVector,
    img: &EuclideanVector,
    c: Curvature,
) -> Result<EuclideanVector> {
    if code.dim() != img.dim() {
        return Err(Error::Shape(format!(
            "Möbius fusion needs equal dimensions, got {} and {}",
            code.dim(),
            img.dim()
        )));
    }
    let c = c.value();
    let a = ball::exp0(code.as_slice(), c);
    let b = ball::exp0(img.as_slice(), c);
    EuclideanVector::new(ball::log0(&ball::mobius_add(&a, &b, c), c))
}

fn uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let b = fan_in_bound(cols);
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-b..b))
}

fn affine(w: &Matrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = w.matvec(x);
    add_into(&mut y, b);
    y
}

/// Flat-space query/key/value projections for cross-attention.
#[derive(Clone, Debug, PartialEq)]
pub struct XattnParams {
    pub w_q: Matrix,
    pub b_q: Vec<f64>,
    pub w_k: Matrix,
    pub b_k: Vec<f64>,
    pub w_v: Matrix,
    pub b_v: Vec<f64>,
}

impl XattnParams {
    pub fn init<R: Rng>(d_code: usize, d_img: usize, d_model: usize, rng: &mut R) -> Self {
        let w_q = uniform(d_model, d_code, rng);
        let w_k = uniform(d_model, d_img, rng);
        let w_v = uniform(d_model, d_img, rng);
        XattnParams {
            w_q,
            b_q: vec![0.0; d_model],
            w_k,
            b_k: vec![0.0; d_model],
            w_v,
            b_v: vec![0.0; d_model],
        }
    }

    pub fn d_model(&self) -> usize {
        self.w_q.rows()
    }
}

impl ParamSet for XattnParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_q.as_slice(),
            &self.b_q,
            self.w_k.as_slice(),
            &self.b_k,
            self.w_v.as_slice(),
            &self.b_v,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_q.as_mut_slice(),
            &mut self.b_q,
            self.w_k.as_mut_slice(),
            &mut self.b_k,
            self.w_v.as_mut_slice(),
            &mut self.b_v,
        ]
    }
}

/// Scaled dot-product attention in both directions. Code queries attend
/// over image keys and aggregate image values; each image key attends back
/// over the code queries and aggregates them. Both sides are mean-pooled
/// and concatenated, code side first.
#[derive(Clone, Debug)]
pub struct XattnCache {
    code: Vec<Vec<f64>>,
    img: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    /// softmax over keys, `[i][j]`
    attn_ci: Vec<Vec<f64>>,
    /// softmax over queries, `[j][i]`
    attn_ic: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl XattnCache {
    pub fn forward(p: &XattnParams, code: &[Vec<f64>], img: &[Vec<f64>]) -> Result<Self> {
        check_tokens(code, p.w_q.cols(), "code")?;
        check_tokens(img, p.w_k.cols(), "image")?;
        let dm = p.d_model();
        let inv_sqrt = 1.0 / (dm as f64).sqrt();
        let q: Vec<Vec<f64>> = code.iter().map(|x| affine(&p.w_q, &p.b_q, x)).collect();
        let k: Vec<Vec<f64>> = img.iter().map(|x| affine(&p.w_k, &p.b_k, x)).collect();
        let v: Vec<Vec<f64>> = img.iter().map(|x| affine(&p.w_v, &p.b_v, x)).collect();
        let scores: Vec<Vec<f64>> = q
            .iter()
            .map(|qi| k.iter().map(|kj| dot(qi, kj) * inv_sqrt).collect())
            .collect();
        let attn_ci: Vec<Vec<f64>> = scores.iter().map(|r| softmax(r)).collect();
        let attn_ic: Vec<Vec<f64>> = (0..k.len())
            .map(|j| softmax(&scores.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect();

        let z_code: Vec<Vec<f64>> = attn_ci
            .iter()
            .map(|row| {
                let mut z = vec![0.0; dm];
                for (a, vj) in row.iter().zip(&v) {
                    axpy(*a, vj, &mut z);
                }
                z
            })
            .collect();
        let z_img: Vec<Vec<f64>> = attn_ic
            .iter()
            .map(|row| {
                let mut z = vec![0.0; dm];
                for (b, qi) in row.iter().zip(&q) {
                    axpy(*b, qi, &mut z);
                }
                z
            })
            .collect();
        let mut out = mean_of(&z_code);
        out.extend(mean_of(&z_img));
        Ok(XattnCache {
            code: code.to_vec(),
            img: img.to_vec(),
            q,
            k,
            v,
            attn_ci,
            attn_ic,
            out,
        })
    }

    pub fn output(&self) -> &[f64] {
        &self.out
    }

    pub fn attention(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.attn_ci, &self.attn_ic)
    }

    #[allow(clippy::needless_range_loop)]
    pub fn backward(&self, p: &XattnParams, grad_out: &[f64]) -> XattnParams {
        let dm = p.d_model();
        let (tc, tv) = (self.q.len(), self.k.len());
        let inv_sqrt = 1.0 / (dm as f64).sqrt();
        let g_zc: Vec<f64> = grad_out[..dm].iter().map(|g| g / tc as f64).collect();
        let g_zi: Vec<f64> = grad_out[dm..].iter().map(|g| g / tv as f64).collect();

        let mut g_q = vec![vec![0.0; dm]; tc];
        let mut g_k = vec![vec![0.0; dm]; tv];
        let mut g_v = vec![vec![0.0; dm]; tv];
        let mut g_scores = vec![vec![0.0; tv]; tc];

        for i in 0..tc {
            let row = &self.attn_ci[i];
            let g_a: Vec<f64> = self.v.iter().map(|vj| dot(&g_zc, vj)).collect();
            for j in 0..tv {
                axpy(row[j], &g_zc, &mut g_v[j]);
            }
            let s: f64 = row.iter().zip(&g_a).map(|(a, g)| a * g).sum();
            for j in 0..tv {
                g_scores[i][j] += row[j] * (g_a[j] - s);
            }
        }
        for j in 0..tv {
            let row = &self.attn_ic[j];
            let g_b: Vec<f64> = self.q.iter().map(|qi| dot(&g_zi, qi)).collect();
            for i in 0..tc {
                axpy(row[i], &g_zi, &mut g_q[i]);
            }
            let s: f64 = row.iter().zip(&g_b).map(|(b, g)| b * g).sum();
            for i in 0..tc {
                g_scores[i][j] += row[i] * (g_b[i] - s);
            }
        }
        for i in 0..tc {
            for j in 0..tv {
                let g = g_scores[i][j] * inv_sqrt;
                axpy(g, &self.k[j], &mut g_q[i]);
                axpy(g, &self.q[i], &mut g_k[j]);
            }
        }

        let mut gp = p.zeros_like();
        for (x, g) in self.code.iter().zip(&g_q) {
            gp.w_q.add_outer(1.0, g, x);
            add_into(&mut gp.b_q, g);
        }
        for (x, (gk, gv)) in self.img.iter().zip(g_k.iter().zip(&g_v)) {
            gp.w_k.add_outer(1.0, gk, x);
            add_into(&mut gp.b_k, gk);
            gp.w_v.add_outer(1.0, gv, x);
            add_into(&mut gp.b_v, gv);
        }
        gp
    }
}

/// Euclidean cross-attention fusion on token sequences.
pub fn baseline_euclid_xattn(
    code: &[EuclideanVector],
    img: &[EuclideanVector],
    p: &XattnParams,
) -> Result<EuclideanVector> {
    let code: Vec<Vec<f64>> = code.iter().map(|v| v.as_slice().to_vec()).collect();
    let img: Vec<Vec<f64>> = img.iter().map(|v| v.as_slice().to_vec()).collect();
    EuclideanVector::new(XattnCache::forward(p, &code, &img)?.output().to_vec())
}

/// Learned flat projections to a shared width ahead of Möbius fusion.
#[derive(Clone, Debug, PartialEq)]
pub struct MobiusFuseParams {
    pub w_code: Matrix,
    pub b_code: Vec<f64>,
    pub w_img: Matrix,
    pub b_img: Vec<f64>,
    pub curvature: Curvature,
}

impl MobiusFuseParams {
    pub fn init<R: Rng>(
        d_code: usize,
        d_img: usize,
        d_model: usize,
        curvature: Curvature,
        rng: &mut R,
    ) -> Self {
        let w_code = uniform(d_model, d_code, rng);
        let w_img = uniform(d_model, d_img, rng);
        MobiusFuseParams {
            w_code,
            b_code: vec![0.0; d_model],
            w_img,
            b_img: vec![0.0; d_model],
            curvature,
        }
    }
}

impl ParamSet for MobiusFuseParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_code.as_slice(),
            &self.b_code,
            self.w_img.as_slice(),
            &self.b_img,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_code.as_mut_slice(),
            &mut self.b_code,
            self.w_img.as_mut_slice(),
            &mut self.b_img,
        ]
    }
}

/// Mean-pools each modality, projects both to `d_model`, then applies
/// [`baseline_mobius_fuse`].
#[derive(Clone, Debug)]
pub struct MobiusFuseCache {
    code_mean: Vec<f64>,
    img_mean: Vec<f64>,
    u_code: Vec<f64>,
    u_img: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    fused: Vec<f64>,
    out: Vec<f64>,
}

impl MobiusFuseCache {
    pub fn forward(p: &MobiusFuseParams, code: &[Vec<f64>], img: &[Vec<f64>]) -> Result<Self> {
        check_tokens(code, p.w_code.cols(), "code")?;
        check_tokens(img, p.w_img.cols(), "image")?;
        let c = p.curvature.value();
        let code_mean = mean_of(code);
        let img_mean = mean_of(img);
        let u_code = affine(&p.w_code, &p.b_code, &code_mean);
        let u_img = affine(&p.w_img, &p.b_img, &img_mean);
        let a = ball::exp0(&u_code, c);
        let b = ball::exp0(&u_img, c);
        let fused = ball::mobius_add(&a, &b, c);
        let out = ball::log0(&fused, c);
        Ok(MobiusFuseCache {
            code_mean,
            img_mean,
            u_code,
            u_img,
            a,
            b,
            fused,
            out,
        })
    }

    pub fn output(&self) -> &[f64] {
        &self.out
    }

    pub fn backward(&self, p: &MobiusFuseParams, grad_out: &[f64]) -> MobiusFuseParams {
        let c = p.curvature.value();
        let g_fused = ball::log0_vjp(&self.fused, grad_out, c);
        let (g_a, g_b) = ball::mobius_add_vjp(&self.a, &self.b, &g_fused, c);
        let g_uc = ball::exp0_vjp(&self.u_code, &g_a, c);
        let g_ui = ball::exp0_vjp(&self.u_img, &g_b, c);
        let mut gp = p.zeros_like();
        gp.w_code.add_outer(1.0, &g_uc, &self.code_mean);
        add_into(&mut gp.b_code, &g_uc);
        gp.w_img.add_outer(1.0, &g_ui, &self.img_mean);
        add_into(&mut gp.b_img, &g_ui);
        gp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ev(v: &[f64]) -> EuclideanVector {
        EuclideanVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn concat_dims_order_and_zeros() {
        let out = baseline_concat(&ev(&[1.0, 2.0, 3.0]), &ev(&[4.0, 5.0]));
        assert_eq!(out.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let z = baseline_concat(&ev(&[0.0; 3]), &ev(&[0.0; 2]));
        assert_eq!(z.as_slice(), &[0.0; 5]);
    }

    #[test]
    fn mobius_fuse_edge_cases() {
        let c = Curvature::default();
        let code = ev(&[0.3, -0.8, 0.1]);
        let out = baseline_mobius_fuse(&code, &ev(&[0.0; 3]), c).unwrap();
        for (a, b) in out.as_slice().iter().zip(code.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        let z = baseline_mobius_fuse(&ev(&[0.0; 2]), &ev(&[0.0; 2]), c).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0]);
        assert!(baseline_mobius_fuse(&ev(&[0.0; 2]), &ev(&[0.0; 3]), c).is_err());
    }

    #[test]
    fn mobius_fuse_one_dimensional_rapidity_oracle() {
        // on a line, exp0/⊕/log0 with c = 1 reduce to adding rapidities
        let c = Curvature::default();
        for &(a, b) in &[(0.4, 0.7), (-1.2, 0.3), (2.0, -0.5)] {
            let out = baseline_mobius_fuse(&ev(&[a]), &ev(&[b]), c).unwrap();
            assert_abs_diff_eq!(out.as_slice()[0], a + b, epsilon = 1e-9);
        }
    }

    #[test]
    fn xattn_single_tokens_pass_values_and_queries_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = XattnParams::init(3, 2, 4, &mut rng);
        let code = vec![vec![0.2, -0.4, 0.9]];
        let img = vec![vec![0.5, 0.1]];
        let cache = XattnCache::forward(&p, &code, &img).unwrap();
        let v = affine(&p.w_v, &p.b_v, &img[0]);
        let q = affine(&p.w_q, &p.b_q, &code[0]);
        let expect: Vec<f64> = v.iter().chain(&q).cloned().collect();
        assert_eq!(cache.output(), &expect[..]);
    }

    #[test]
    fn xattn_softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = XattnParams::init(3, 3, 4, &mut rng);
        let code: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64, 0.5, -1.0]).collect();
        let img: Vec<Vec<f64>> = (0..2).map(|j| vec![0.1, j as f64, 0.3]).collect();
        let cache = XattnCache::forward(&p, &code, &img).unwrap();
        let (a, b) = cache.attention();
        for row in a.iter().chain(b) {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn xattn_two_by_two_hand_computation() {
        // identity projections, zero biases, d_model = 2
        let p = XattnParams {
            w_q: Matrix::identity(2),
            b_q: vec![0.0; 2],
            w_k: Matrix::identity(2),
            b_k: vec![0.0; 2],
            w_v: Matrix::identity(2),
            b_v: vec![0.0; 2],
        };
        let code = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let img = vec![vec![1.0, 1.0], vec![2.0, 0.0]];
        let out = XattnCache::forward(&p, &code, &img).unwrap().out;
        // scores/√2: q0·k = [1, 2]/√2, q1·k = [1, 0]/√2
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let sm = |a: f64, b: f64| {
            let (ea, eb) = (a.exp(), b.exp());
            (ea / (ea + eb), eb / (ea + eb))
        };
        let (a00, a01) = sm(r, 2.0 * r);
        let (a10, a11) = sm(r, 0.0);
        let zc0 = [a00 * 1.0 + a01 * 2.0, a00 * 1.0];
        let zc1 = [a10 * 1.0 + a11 * 2.0, a10 * 1.0];
        // column softmax over code tokens for each image key
        let (b00, b01) = sm(r, r);
        let (b10, b11) = sm(2.0 * r, 0.0);
        let zi0 = [b00, b01];
        let zi1 = [b10, b11];
        let expect = [
            (zc0[0] + zc1[0]) / 2.0,
            (zc0[1] + zc1[1]) / 2.0,
            (zi0[0] + zi1[0]) / 2.0,
            (zi0[1] + zi1[1]) / 2.0,
        ];
        for (a, b) in out.iter().zip(&expect) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }
}
