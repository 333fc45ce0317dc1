//! Geodesic-similarity cross-modal attention (GCSA) fusion.
//!
//! Pipeline for one sample:
//!
//! 1. lift each code and image token onto the ball with `exp0`;
//! 2. queries from code tokens, keys and values from image tokens, each via a
//!    Möbius linear map `(W ⊗ x) ⊕ b`;
//! 3. raw scores `s_ij = λ · GCS(Q_i, K_j)` in both directions (no softmax
//!    unless [`GcsaOptions::row_softmax`] is set);
//! 4. code tokens aggregate `s_ij ⊗ V_j` over `j`, image tokens aggregate
//!    `s_ji ⊗ Q_i` over `i`;
//! 5. each side is pooled, the two pooled points are Möbius-added and the
//!    result is mapped back with `log0`.
//!
//! Möbius addition is neither commutative nor associative, so every `⊕`-sum
//! here is a left fold in ascending token index.
//!
//! Trainable state is kept Euclidean: weight matrices, biases as tangent
//! vectors at the origin (`b = exp0(b_tangent)`), and the temperature `λ`.

mod backward;
pub mod baselines;
pub mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{ball, BallPoint, Curvature, EuclideanVector};
use crate::linalg::{all_finite, Matrix};
use crate::modality::Modality;
use crate::params::{fan_in_bound, ParamSet};

pub use backward::{GcsaCache, GcsaGrads};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcsaOptions {
    /// Softmax-normalise score rows before aggregation (ablation only).
    #[serde(default)]
    pub row_softmax: bool,
    /// Aggregate value projections of code tokens in the image→code
    /// direction instead of the queries.
    #[serde(default)]
    pub symmetric_values: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GcsaParams {
    pub w_q: Matrix,
    pub b_q: Vec<f64>,
    pub w_k: Matrix,
    pub b_k: Vec<f64>,
    pub w_v: Matrix,
    pub b_v: Vec<f64>,
    /// Value map for code tokens, present only with `symmetric_values`.
    pub code_values: Option<(Matrix, Vec<f64>)>,
    pub lambda: f64,
    pub curvature: Curvature,
    pub options: GcsaOptions,
}

impl GcsaParams {
    /// Uniform `±1/√d_in` weights, biases at the origin, `λ = 1`.
    pub fn init<R: Rng>(
        d_code: usize,
        d_img: usize,
        d_model: usize,
        curvature: Curvature,
        options: GcsaOptions,
        rng: &mut R,
    ) -> Self {
        let mut uniform = |rows: usize, cols: usize| {
            let b = fan_in_bound(cols);
            Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-b..b))
        };
        let w_q = uniform(d_model, d_code);
        let w_k = uniform(d_model, d_img);
        let w_v = uniform(d_model, d_img);
        let code_values = options
            .symmetric_values
            .then(|| (uniform(d_model, d_code), vec![0.0; d_model]));
        GcsaParams {
            w_q,
            b_q: vec![0.0; d_model],
            w_k,
            b_k: vec![0.0; d_model],
            w_v,
            b_v: vec![0.0; d_model],
            code_values,
            lambda: 1.0,
            curvature,
            options,
        }
    }

    /// Square identity weights, origin biases.
    pub fn identity(d: usize, lambda: f64, curvature: Curvature) -> Self {
        GcsaParams {
            w_q: Matrix::identity(d),
            b_q: vec![0.0; d],
            w_k: Matrix::identity(d),
            b_k: vec![0.0; d],
            w_v: Matrix::identity(d),
            b_v: vec![0.0; d],
            code_values: None,
            lambda,
            curvature,
            options: GcsaOptions::default(),
        }
    }

    pub fn d_model(&self) -> usize {
        self.w_q.rows()
    }

    pub fn d_code(&self) -> usize {
        self.w_q.cols()
    }

    pub fn d_img(&self) -> usize {
        self.w_k.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d_model();
        let ok = self.w_k.rows() == d
            && self.w_v.rows() == d
            && self.w_v.cols() == self.d_img()
            && self.b_q.len() == d
            && self.b_k.len() == d
            && self.b_v.len() == d
            && self
                .code_values
                .as_ref()
                .is_none_or(|(w, b)| w.rows() == d && w.cols() == self.d_code() && b.len() == d);
        if !ok {
            return Err(Error::Shape("inconsistent GCSA parameter shapes".into()));
        }
        if self.options.symmetric_values != self.code_values.is_some() {
            return Err(Error::InvalidInput(
                "symmetric_values requires code value parameters".into(),
            ));
        }
        if !self.is_finite() {
            return Err(Error::InvalidInput("non-finite GCSA parameter".into()));
        }
        Ok(())
    }

    fn c(&self) -> f64 {
        self.curvature.value()
    }

    fn bias_ball(&self, tangent: &[f64]) -> Vec<f64> {
        ball::exp0(tangent, self.c())
    }

    pub fn query_bias(&self) -> BallPoint {
        BallPoint::from_projected(self.bias_ball(&self.b_q), self.curvature)
    }

    pub fn key_bias(&self) -> BallPoint {
        BallPoint::from_projected(self.bias_ball(&self.b_k), self.curvature)
    }

    pub fn value_bias(&self) -> BallPoint {
        BallPoint::from_projected(self.bias_ball(&self.b_v), self.curvature)
    }
}

impl ParamSet for GcsaParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = vec![
            self.w_q.as_slice(),
            &self.b_q[..],
            self.w_k.as_slice(),
            &self.b_k[..],
            self.w_v.as_slice(),
            &self.b_v[..],
            std::slice::from_ref(&self.lambda),
        ];
        if let Some((w, b)) = &self.code_values {
            t.push(w.as_slice());
            t.push(b);
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = vec![
            self.w_q.as_mut_slice(),
            &mut self.b_q[..],
            self.w_k.as_mut_slice(),
            &mut self.b_k[..],
            self.w_v.as_mut_slice(),
            &mut self.b_v[..],
            std::slice::from_mut(&mut self.lambda),
        ];
        if let Some((w, b)) = &mut self.code_values {
            t.push(w.as_mut_slice());
            t.push(&mut b[..]);
        }
        t
    }
}

/// Ordered ball tokens of one modality.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperbolicSequence {
    pub tokens: Vec<BallPoint>,
    pub modality: Modality,
}

impl HyperbolicSequence {
    pub fn new(tokens: Vec<BallPoint>, modality: Modality) -> Result<Self> {
        let first = tokens
            .first()
            .ok_or_else(|| Error::InvalidInput("empty token sequence".into()))?;
        let (c, d) = (first.curvature(), first.dim());
        if tokens.iter().any(|t| t.curvature() != c || t.dim() != d) {
            return Err(Error::InvalidInput(
                "tokens must share curvature and dimension".into(),
            ));
        }
        Ok(HyperbolicSequence { tokens, modality })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.tokens[0].dim()
    }

    pub fn curvature(&self) -> Curvature {
        self.tokens[0].curvature()
    }

    fn coords(&self) -> Vec<Vec<f64>> {
        self.tokens.iter().map(|t| t.coords().to_vec()).collect()
    }
}

/// Scores in both directions; `img_to_code[j][i]` pairs image token `j`
/// with code token `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMatrix {
    pub code_to_img: Vec<Vec<f64>>,
    pub img_to_code: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    CodeToImage,
    ImageToCode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedEmbedding {
    pub z_hyp: BallPoint,
    pub z_euc: EuclideanVector,
}

fn check_uniform(seq: &[EuclideanVector]) -> Result<usize> {
    let d = seq
        .first()
        .ok_or_else(|| Error::InvalidInput("empty embedding sequence".into()))?
        .dim();
    if seq.iter().any(|v| v.dim() != d) {
        return Err(Error::InvalidInput(
            "embedding sequence has mixed dimensions".into(),
        ));
    }
    Ok(d)
}

/// Divides each token by `prescale` (1.0 to disable), then maps it onto the
/// ball with `exp0`.
pub fn lift(
    seq: &[EuclideanVector],
    c: Curvature,
    prescale: f64,
    modality: Modality,
) -> Result<HyperbolicSequence> {
    check_uniform(seq)?;
    if !(prescale.is_finite() && prescale > 0.0) {
        return Err(Error::InvalidInput(format!("bad prescale {prescale}")));
    }
    let tokens = seq
        .iter()
        .map(|v| {
            let scaled = scaled_token(v.as_slice(), prescale);
            BallPoint::from_projected(ball::exp0(&scaled, c.value()), c)
        })
        .collect();
    Ok(HyperbolicSequence { tokens, modality })
}

#[inline]
fn scaled_token(v: &[f64], prescale: f64) -> Vec<f64> {
    if prescale == 1.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / prescale).collect()
    }
}

#[inline]
pub(crate) fn linear_kernel(w: &Matrix, bias_ball: &[f64], x: &[f64], c: f64) -> Vec<f64> {
    ball::mobius_add(&ball::mobius_matvec(w, x, c), bias_ball, c)
}

/// Queries from code tokens; keys and values from image tokens.
pub fn compute_qkv(
    code: &HyperbolicSequence,
    img: &HyperbolicSequence,
    p: &GcsaParams,
) -> Result<(HyperbolicSequence, HyperbolicSequence, HyperbolicSequence)> {
    p.validate()?;
    if code.dim() != p.d_code() || img.dim() != p.d_img() {
        return Err(Error::Shape(format!(
            "GCSA expects code dim {} and image dim {}, got {} and {}",
            p.d_code(),
            p.d_img(),
            code.dim(),
            img.dim()
        )));
    }
    if code.curvature() != p.curvature || img.curvature() != p.curvature {
        return Err(Error::InvalidInput(
            "sequence curvature differs from parameters".into(),
        ));
    }
    let c = p.c();
    let map = |seq: &HyperbolicSequence, w: &Matrix, b: &[f64]| {
        let bias = p.bias_ball(b);
        HyperbolicSequence {
            tokens: seq
                .tokens
                .iter()
                .map(|t| {
                    BallPoint::from_projected(linear_kernel(w, &bias, t.coords(), c), p.curvature)
                })
                .collect(),
            modality: seq.modality,
        }
    };
    Ok((
        map(code, &p.w_q, &p.b_q),
        map(img, &p.w_k, &p.b_k),
        map(img, &p.w_v, &p.b_v),
    ))
}

/// Raw `λ·GCS` scores in both directions.
pub fn attention_scores(
    q: &HyperbolicSequence,
    k: &HyperbolicSequence,
    lambda: f64,
) -> Result<AttentionMatrix> {
    if q.dim() != k.dim() || q.curvature() != k.curvature() {
        return Err(Error::Shape(
            "queries and keys live in different balls".into(),
        ));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidInput("non-finite temperature".into()));
    }
    let c = q.curvature().value();
    let code_to_img = q
        .tokens
        .iter()
        .map(|qi| {
            k.tokens
                .iter()
                .map(|kj| lambda * ball::gcs(qi.coords(), kj.coords(), c))
                .collect()
        })
        .collect();
    let img_to_code = k
        .tokens
        .iter()
        .map(|kj| {
            q.tokens
                .iter()
                .map(|qi| lambda * ball::gcs(kj.coords(), qi.coords(), c))
                .collect()
        })
        .collect();
    Ok(AttentionMatrix {
        code_to_img,
        img_to_code,
    })
}

/// Row-wise softmax of both score matrices.
pub fn softmax_rows(scores: &AttentionMatrix) -> AttentionMatrix {
    AttentionMatrix {
        code_to_img: scores.code_to_img.iter().map(|r| softmax(r)).collect(),
        img_to_code: scores.img_to_code.iter().map(|r| softmax(r)).collect(),
    }
}

pub(crate) fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Left fold `((t_0 ⊕ t_1) ⊕ t_2) ⊕ …`; returns every partial sum.
pub(crate) fn fold_partials(terms: &[Vec<f64>], c: f64) -> Vec<Vec<f64>> {
    let mut partials: Vec<Vec<f64>> = Vec::with_capacity(terms.len());
    for t in terms {
        let next = match partials.last() {
            None => t.clone(),
            Some(acc) => ball::mobius_add(acc, t, c),
        };
        partials.push(next);
    }
    partials
}

/// Aggregates `operands` weighted by the score rows of `direction`: for
/// code→image, operands are the values `V_j` and output token `i` is
/// `⊕_j s_ij ⊗ V_j`; for image→code, operands are the queries `Q_i`.
pub fn aggregate(
    direction: Direction,
    scores: &AttentionMatrix,
    operands: &HyperbolicSequence,
) -> Result<HyperbolicSequence> {
    let rows = match direction {
        Direction::CodeToImage => &scores.code_to_img,
        Direction::ImageToCode => &scores.img_to_code,
    };
    if rows.iter().any(|r| r.len() != operands.len()) {
        return Err(Error::Shape(format!(
            "score rows do not match {} operands",
            operands.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Shape("empty score matrix".into()));
    }
    let c = operands.curvature();
    let ops = operands.coords();
    let modality = match direction {
        Direction::CodeToImage => Modality::Code,
        Direction::ImageToCode => Modality::Image,
    };
    let tokens = rows
        .iter()
        .map(|row| {
            let terms: Vec<Vec<f64>> = row
                .iter()
                .zip(&ops)
                .map(|(&s, v)| ball::mobius_scalar_mul(s, v, c.value()))
                .collect();
            let acc = fold_partials(&terms, c.value()).pop().expect("nonempty");
            BallPoint::from_projected(acc, c)
        })
        .collect();
    Ok(HyperbolicSequence { tokens, modality })
}

/// Pools each side by left fold, fuses `pooled_code ⊕ pooled_img` and maps
/// the result back to flat space.
pub fn pool_and_fuse(
    z_code: &HyperbolicSequence,
    z_img: &HyperbolicSequence,
) -> Result<FusedEmbedding> {
    if z_code.dim() != z_img.dim() || z_code.curvature() != z_img.curvature() {
        return Err(Error::Shape(
            "fused sequences live in different balls".into(),
        ));
    }
    let c = z_code.curvature();
    let pc = fold_partials(&z_code.coords(), c.value())
        .pop()
        .expect("nonempty");
    let pi = fold_partials(&z_img.coords(), c.value())
        .pop()
        .expect("nonempty");
    let z = ball::mobius_add(&pc, &pi, c.value());
    let z_euc = EuclideanVector::new(ball::log0(&z, c.value()))?;
    Ok(FusedEmbedding {
        z_hyp: BallPoint::from_projected(z, c),
        z_euc,
    })
}

/// Full GCSA forward on raw Euclidean token sequences.
pub fn gcsa_forward(
    code_euc: &[EuclideanVector],
    img_euc: &[EuclideanVector],
    p: &GcsaParams,
) -> Result<FusedEmbedding> {
    check_uniform(code_euc)?;
    check_uniform(img_euc)?;
    p.validate()?;
    let code: Vec<Vec<f64>> = code_euc.iter().map(|v| v.as_slice().to_vec()).collect();
    let img: Vec<Vec<f64>> = img_euc.iter().map(|v| v.as_slice().to_vec()).collect();
    let cache = GcsaCache::forward(p, &code, &img)?;
    Ok(FusedEmbedding {
        z_hyp: BallPoint::from_projected(cache.fused().to_vec(), p.curvature),
        z_euc: EuclideanVector::new(cache.output().to_vec())?,
    })
}

pub(crate) fn check_tokens(tokens: &[Vec<f64>], dim: usize, what: &str) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput(format!("empty {what} sequence")));
    }
    if tokens.iter().any(|t| t.len() != dim) {
        return Err(Error::Shape(format!(
            "{what} tokens must have dimension {dim}"
        )));
    }
    if tokens.iter().any(|t| !all_finite(t)) {
        return Err(Error::InvalidInput(format!("non-finite {what} token")));
    }
    Ok(())
}
