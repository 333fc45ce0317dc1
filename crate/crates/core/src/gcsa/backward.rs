//! Cached GCSA forward pass and its exact reverse-mode gradient.

use super::{check_tokens, fold_partials, linear_kernel, softmax, GcsaParams};
use crate::error::{Error, Result};
use crate::hyperbolic::ball;
use crate::linalg::{add_into, Matrix};
use crate::params::ParamSet;

/// Every intermediate of one forward pass needed by [`GcsaCache::backward`].
#[derive(Clone, Debug)]
pub struct GcsaCache {
    c: f64,
    code_in: Vec<Vec<f64>>,
    img_in: Vec<Vec<f64>>,
    code_ball: Vec<Vec<f64>>,
    img_ball: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    code_v: Option<Vec<Vec<f64>>>,
    /// `gcs(Q_i, K_j)`, indexed `[i][j]`.
    sim_ci: Vec<Vec<f64>>,
    /// `gcs(K_j, Q_i)`, indexed `[j][i]`.
    sim_ic: Vec<Vec<f64>>,
    s_ci: Vec<Vec<f64>>,
    s_ic: Vec<Vec<f64>>,
    code_terms: Vec<Vec<Vec<f64>>>,
    code_partials: Vec<Vec<Vec<f64>>>,
    img_terms: Vec<Vec<Vec<f64>>>,
    img_partials: Vec<Vec<Vec<f64>>>,
    z_code: Vec<Vec<f64>>,
    z_img: Vec<Vec<f64>>,
    pool_code: Vec<Vec<f64>>,
    pool_img: Vec<Vec<f64>>,
    fused: Vec<f64>,
    out: Vec<f64>,
}

/// Gradients of a scalar loss with respect to every GCSA parameter and to
/// the raw input tokens.
#[derive(Clone, Debug)]
pub struct GcsaGrads {
    pub params: GcsaParams,
    pub code_inputs: Vec<Vec<f64>>,
    pub img_inputs: Vec<Vec<f64>>,
}

fn last(v: &[Vec<f64>]) -> &[f64] {
    v.last().expect("nonempty fold")
}

impl GcsaCache {
    pub fn forward(p: &GcsaParams, code: &[Vec<f64>], img: &[Vec<f64>]) -> Result<Self> {
        check_tokens(code, p.d_code(), "code")?;
        check_tokens(img, p.d_img(), "image")?;
        let c = p.c();

        let code_ball: Vec<Vec<f64>> = code.iter().map(|t| ball::exp0(t, c)).collect();
        let img_ball: Vec<Vec<f64>> = img.iter().map(|t| ball::exp0(t, c)).collect();

        let map = |xs: &[Vec<f64>], w: &Matrix, b: &[f64]| -> Vec<Vec<f64>> {
            let bias = ball::exp0(b, c);
            xs.iter().map(|x| linear_kernel(w, &bias, x, c)).collect()
        };
        let q = map(&code_ball, &p.w_q, &p.b_q);
        let k = map(&img_ball, &p.w_k, &p.b_k);
        let v = map(&img_ball, &p.w_v, &p.b_v);
        let code_v = p.code_values.as_ref().map(|(w, b)| map(&code_ball, w, b));

        let sim_ci: Vec<Vec<f64>> = q
            .iter()
            .map(|qi| k.iter().map(|kj| ball::gcs(qi, kj, c)).collect())
            .collect();
        let sim_ic: Vec<Vec<f64>> = k
            .iter()
            .map(|kj| q.iter().map(|qi| ball::gcs(kj, qi, c)).collect())
            .collect();
        let scores = |sim: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            sim.iter()
                .map(|row| {
                    let raw: Vec<f64> = row.iter().map(|g| p.lambda * g).collect();
                    if p.options.row_softmax {
                        softmax(&raw)
                    } else {
                        raw
                    }
                })
                .collect()
        };
        let s_ci = scores(&sim_ci);
        let s_ic = scores(&sim_ic);

        let img_operands = code_v.as_ref().unwrap_or(&q);
        let weigh = |rows: &Vec<Vec<f64>>, operands: &[Vec<f64>]| -> Vec<Vec<Vec<f64>>> {
            rows.iter()
                .map(|row| {
                    row.iter()
                        .zip(operands)
                        .map(|(&s, o)| ball::mobius_scalar_mul(s, o, c))
                        .collect()
                })
                .collect()
        };
        let code_terms = weigh(&s_ci, &v);
        let img_terms = weigh(&s_ic, img_operands);
        let code_partials: Vec<_> = code_terms.iter().map(|t| fold_partials(t, c)).collect();
        let img_partials: Vec<_> = img_terms.iter().map(|t| fold_partials(t, c)).collect();
        let z_code: Vec<Vec<f64>> = code_partials.iter().map(|p| last(p).to_vec()).collect();
        let z_img: Vec<Vec<f64>> = img_partials.iter().map(|p| last(p).to_vec()).collect();

        let pool_code = fold_partials(&z_code, c);
        let pool_img = fold_partials(&z_img, c);
        let fused = ball::mobius_add(last(&pool_code), last(&pool_img), c);
        let out = ball::log0(&fused, c);

        Ok(GcsaCache {
            c,
            code_in: code.to_vec(),
            img_in: img.to_vec(),
            code_ball,
            img_ball,
            q,
            k,
            v,
            code_v,
            sim_ci,
            sim_ic,
            s_ci,
            s_ic,
            code_terms,
            code_partials,
            img_terms,
            img_partials,
            z_code,
            z_img,
            pool_code,
            pool_img,
            fused,
            out,
        })
    }

    /// Back-projected fused vector `log0(z)`.
    pub fn output(&self) -> &[f64] {
        &self.out
    }

    /// Fused ball point `z`.
    pub fn fused(&self) -> &[f64] {
        &self.fused
    }

    pub fn scores(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.s_ci, &self.s_ic)
    }

    pub fn queries(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn keys(&self) -> &[Vec<f64>] {
        &self.k
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// Every ball point produced along the way, for closure checks.
    pub fn ball_points(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.code_ball
            .iter()
            .chain(&self.img_ball)
            .chain(&self.q)
            .chain(&self.k)
            .chain(&self.v)
            .chain(self.code_terms.iter().flatten())
            .chain(self.img_terms.iter().flatten())
            .chain(&self.z_code)
            .chain(&self.z_img)
            .chain(std::iter::once(&self.fused))
    }

    pub fn backward(&self, p: &GcsaParams, grad_out: &[f64]) -> Result<GcsaGrads> {
        let c = self.c;
        let mut gp = p.zeros_like();

        let g_fused = ball::log0_vjp(&self.fused, grad_out, c);
        let (g_pc, g_pi) =
            ball::mobius_add_vjp(last(&self.pool_code), last(&self.pool_img), &g_fused, c);
        let g_zc = fold_backward(&self.z_code, &self.pool_code, g_pc, c);
        let g_zi = fold_backward(&self.z_img, &self.pool_img, g_pi, c);

        let dm = p.d_model();
        let mut g_q = vec![vec![0.0; dm]; self.q.len()];
        let mut g_k = vec![vec![0.0; dm]; self.k.len()];
        let mut g_v = vec![vec![0.0; dm]; self.v.len()];
        let mut g_cv = self.code_v.as_ref().map(|cv| vec![vec![0.0; dm]; cv.len()]);

        let mut g_s_ci = vec![vec![0.0; self.k.len()]; self.q.len()];
        for i in 0..self.q.len() {
            let g_terms = fold_backward(
                &self.code_terms[i],
                &self.code_partials[i],
                g_zc[i].clone(),
                c,
            );
            for (j, gt) in g_terms.iter().enumerate() {
                let (gs, gv) = ball::mobius_scalar_mul_vjp(self.s_ci[i][j], &self.v[j], gt, c);
                g_s_ci[i][j] = gs;
                add_into(&mut g_v[j], &gv);
            }
        }

        let mut g_s_ic = vec![vec![0.0; self.q.len()]; self.k.len()];
        for j in 0..self.k.len() {
            let g_terms = fold_backward(
                &self.img_terms[j],
                &self.img_partials[j],
                g_zi[j].clone(),
                c,
            );
            for (i, gt) in g_terms.iter().enumerate() {
                let (operand, sink) = match (&self.code_v, &mut g_cv) {
                    (Some(cv), Some(gcv)) => (&cv[i], &mut gcv[i]),
                    _ => (&self.q[i], &mut g_q[i]),
                };
                let (gs, go) = ball::mobius_scalar_mul_vjp(self.s_ic[j][i], operand, gt, c);
                g_s_ic[j][i] = gs;
                add_into(sink, &go);
            }
        }

        // scores → temperature and similarities
        let mut g_lambda = 0.0;
        let mut pre_grad = |s: &[f64], gs: &[f64], sim: &[f64]| -> Vec<f64> {
            let g_pre: Vec<f64> = if p.options.row_softmax {
                let dot: f64 = s.iter().zip(gs).map(|(a, b)| a * b).sum();
                s.iter().zip(gs).map(|(a, b)| a * (b - dot)).collect()
            } else {
                gs.to_vec()
            };
            g_lambda += g_pre.iter().zip(sim).map(|(a, b)| a * b).sum::<f64>();
            g_pre.iter().map(|g| p.lambda * g).collect()
        };
        let g_sim_ci: Vec<Vec<f64>> = (0..self.q.len())
            .map(|i| pre_grad(&self.s_ci[i], &g_s_ci[i], &self.sim_ci[i]))
            .collect();
        let g_sim_ic: Vec<Vec<f64>> = (0..self.k.len())
            .map(|j| pre_grad(&self.s_ic[j], &g_s_ic[j], &self.sim_ic[j]))
            .collect();
        gp.lambda = g_lambda;

        for i in 0..self.q.len() {
            for j in 0..self.k.len() {
                let (gq, gk) = ball::gcs_vjp(&self.q[i], &self.k[j], g_sim_ci[i][j], c);
                add_into(&mut g_q[i], &gq);
                add_into(&mut g_k[j], &gk);
                let (gk, gq) = ball::gcs_vjp(&self.k[j], &self.q[i], g_sim_ic[j][i], c);
                add_into(&mut g_q[i], &gq);
                add_into(&mut g_k[j], &gk);
            }
        }

        let mut g_code_ball = vec![vec![0.0; p.d_code()]; self.code_ball.len()];
        let mut g_img_ball = vec![vec![0.0; p.d_img()]; self.img_ball.len()];
        linear_backward(
            &p.w_q,
            &p.b_q,
            &self.code_ball,
            &g_q,
            &mut gp.w_q,
            &mut gp.b_q,
            &mut g_code_ball,
            c,
        );
        linear_backward(
            &p.w_k,
            &p.b_k,
            &self.img_ball,
            &g_k,
            &mut gp.w_k,
            &mut gp.b_k,
            &mut g_img_ball,
            c,
        );
        linear_backward(
            &p.w_v,
            &p.b_v,
            &self.img_ball,
            &g_v,
            &mut gp.w_v,
            &mut gp.b_v,
            &mut g_img_ball,
            c,
        );
        if let (Some((w, b)), Some((gw, gb)), Some(gcv)) =
            (&p.code_values, &mut gp.code_values, &g_cv)
        {
            linear_backward(w, b, &self.code_ball, gcv, gw, gb, &mut g_code_ball, c);
        }

        let code_inputs: Vec<Vec<f64>> = self
            .code_in
            .iter()
            .zip(&g_code_ball)
            .map(|(x, g)| ball::exp0_vjp(x, g, c))
            .collect();
        let img_inputs: Vec<Vec<f64>> = self
            .img_in
            .iter()
            .zip(&g_img_ball)
            .map(|(x, g)| ball::exp0_vjp(x, g, c))
            .collect();

        let grads = GcsaGrads {
            params: gp,
            code_inputs,
            img_inputs,
        };
        if !grads.params.is_finite()
            || grads
                .code_inputs
                .iter()
                .chain(&grads.img_inputs)
                .flatten()
                .any(|v| !v.is_finite())
        {
            return Err(Error::numerical("gcsa_backward", "non-finite gradient"));
        }
        Ok(grads)
    }
}

/// Reverse of [`fold_partials`]: gradients for each folded term.
fn fold_backward(
    terms: &[Vec<f64>],
    partials: &[Vec<f64>],
    grad_out: Vec<f64>,
    c: f64,
) -> Vec<Vec<f64>> {
    let n = terms.len();
    let mut grads = vec![Vec::new(); n];
    let mut g = grad_out;
    for k in (1..n).rev() {
        let (g_prev, g_term) = ball::mobius_add_vjp(&partials[k - 1], &terms[k], &g, c);
        grads[k] = g_term;
        g = g_prev;
    }
    grads[0] = g;
    grads
}

/// Backward through `x ↦ (W ⊗ x) ⊕ exp0(b_tangent)` for a batch of tokens.
#[allow(clippy::too_many_arguments)]
fn linear_backward(
    w: &Matrix,
    b_tangent: &[f64],
    xs: &[Vec<f64>],
    grads: &[Vec<f64>],
    gw: &mut Matrix,
    gb: &mut [f64],
    gx: &mut [Vec<f64>],
    c: f64,
) {
    let bias = ball::exp0(b_tangent, c);
    let mut g_bias = vec![0.0; bias.len()];
    for ((x, g), gxi) in xs.iter().zip(grads).zip(gx.iter_mut()) {
        let wx = ball::mobius_matvec(w, x, c);
        let (g_wx, g_b) = ball::mobius_add_vjp(&wx, &bias, g, c);
        add_into(&mut g_bias, &g_b);
        let (g_w, g_x) = ball::mobius_matvec_vjp(w, x, &g_wx, c);
        add_into(gw.as_mut_slice(), g_w.as_slice());
        add_into(gxi, &g_x);
    }
    add_into(gb, &ball::exp0_vjp(b_tangent, &g_bias, c));
}
