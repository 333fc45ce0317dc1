//! Classification heads, metrics and the training loop.
//!
//! Two heads sit on top of a fused (or unimodal) feature vector: a two-layer
//! 1-D convolution stack ([`cnn`]) and a one-hidden-layer fully connected
//! network ([`fcn`]). Both end in a softmax over classes and share the
//! [`Head`] interface so the training loop does not care which is used.

pub mod checkpoint;
pub mod cnn;
pub mod fcn;
pub mod metrics;
pub mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;

pub use cnn::{CnnCache, CnnParams};
pub use fcn::{FcnCache, FcnParams};
pub use metrics::{evaluate, ClassMetrics, MetricsReport};
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome, Trainable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Cnn,
    Fcn,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Cnn => "cnn",
            HeadKind::Fcn => "fcn",
        }
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(HeadKind::Cnn),
            "fcn" => Ok(HeadKind::Fcn),
            _ => Err(Error::InvalidInput(format!("unknown head {s:?}"))),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, with the gradient
/// with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::InvalidInput(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    let loss = lse - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, else
/// `1/(1−p)`. Entries are drawn in index order.
pub fn dropout_mask<R: Rng>(len: usize, p: f64, rng: &mut R) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Cnn(CnnParams),
    Fcn(FcnParams),
}

#[derive(Debug, Clone)]
pub enum HeadCache {
    Cnn(CnnCache),
    Fcn(FcnCache),
}

impl Head {
    /// `hidden` is the FCN hidden width; the CNN ignores it.
    pub fn init<R: Rng>(
        kind: HeadKind,
        input_len: usize,
        n_classes: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match kind {
            HeadKind::Cnn => Head::Cnn(CnnParams::init(
                input_len,
                n_classes,
                cnn::DEFAULT_POOL,
                rng,
            )?),
            HeadKind::Fcn => Head::Fcn(FcnParams::init(input_len, hidden, n_classes, rng)?),
        })
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Cnn(_) => HeadKind::Cnn,
            Head::Fcn(_) => HeadKind::Fcn,
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            Head::Cnn(p) => p.input_len(),
            Head::Fcn(p) => p.input_len(),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Head::Cnn(p) => p.n_classes(),
            Head::Fcn(p) => p.n_classes(),
        }
    }

    /// Width of the layer dropout applies to.
    pub fn dropout_width(&self) -> usize {
        match self {
            Head::Cnn(p) => p.flat_len(),
            Head::Fcn(p) => p.hidden(),
        }
    }

    /// `mask = None` is evaluation mode.
    pub fn forward(&self, x: &[f64], mask: Option<&[f64]>) -> Result<(Vec<f64>, HeadCache)> {
        match self {
            Head::Cnn(p) => {
                let c = CnnCache::forward(p, x, mask)?;
                Ok((c.logits().to_vec(), HeadCache::Cnn(c)))
            }
            Head::Fcn(p) => {
                let c = FcnCache::forward(p, x, mask)?;
                Ok((c.logits().to_vec(), HeadCache::Fcn(c)))
            }
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(x, None)?.0))
    }

    /// Gradients with respect to the head parameters and to its input.
    pub fn backward(&self, cache: &HeadCache, grad_logits: &[f64]) -> (Head, Vec<f64>) {
        match (self, cache) {
            (Head::Cnn(p), HeadCache::Cnn(c)) => {
                let (g, gx) = c.backward(p, grad_logits);
                (Head::Cnn(g), gx)
            }
            (Head::Fcn(p), HeadCache::Fcn(c)) => {
                let (g, gx) = c.backward(p, grad_logits);
                (Head::Fcn(g), gx)
            }
            _ => panic!("head cache does not belong to this head"),
        }
    }
}

impl ParamSet for Head {
    fn tensors(&self) -> Vec<&[f64]> {
        match self {
            Head::Cnn(p) => p.tensors(),
            Head::Fcn(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Head::Cnn(p) => p.tensors_mut(),
            Head::Fcn(p) => p.tensors_mut(),
        }
    }
}
