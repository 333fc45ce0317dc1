//! Fully connected head: dense → ReLU → dropout → dense → logits.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{add_into, Matrix};
use crate::params::{fan_in_bound, ParamSet};

#[derive(Debug, Clone, PartialEq)]
pub struct FcnParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl FcnParams {
    pub fn init<R: Rng>(
        input_len: usize,
        hidden: usize,
        n_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::zeros(input_len, hidden, n_classes)?;
        for w in [&mut p.w1, &mut p.w2] {
            let b = fan_in_bound(w.cols());
            w.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-b..b));
        }
        Ok(p)
    }

    pub fn zeros(input_len: usize, hidden: usize, n_classes: usize) -> Result<Self> {
        if input_len == 0 || hidden == 0 || n_classes < 2 {
            return Err(Error::InvalidInput(format!(
                "FCN head needs positive widths and ≥ 2 classes (got {input_len}, {hidden}, {n_classes})"
            )));
        }
        Ok(FcnParams {
            w1: Matrix::zeros(hidden, input_len),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(n_classes, hidden),
            b2: vec![0.0; n_classes],
        })
    }

    pub fn input_len(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.rows()
    }
}

impl ParamSet for FcnParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct FcnCache {
    x: Vec<f64>,
    pre: Vec<f64>,
    mask: Option<Vec<f64>>,
    h: Vec<f64>,
    logits: Vec<f64>,
}

impl FcnCache {
    pub fn forward(p: &FcnParams, x: &[f64], mask: Option<&[f64]>) -> Result<Self> {
        if x.len() != p.input_len() {
            return Err(Error::Shape(format!(
                "FCN expects input length {}, got {}",
                p.input_len(),
                x.len()
            )));
        }
        let mut pre = p.w1.matvec(x);
        add_into(&mut pre, &p.b1);
        let mut h: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        if let Some(m) = mask {
            if m.len() != h.len() {
                return Err(Error::Shape("dropout mask width mismatch".into()));
            }
            h.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
        }
        let mut logits = p.w2.matvec(&h);
        add_into(&mut logits, &p.b2);
        Ok(FcnCache {
            x: x.to_vec(),
            pre,
            mask: mask.map(|m| m.to_vec()),
            h,
            logits,
        })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn backward(&self, p: &FcnParams, gl: &[f64]) -> (FcnParams, Vec<f64>) {
        let mut g = p.zeros_like();
        g.w2.add_outer(1.0, gl, &self.h);
        g.b2.copy_from_slice(gl);
        let mut gh = p.w2.matvec_t(gl);
        if let Some(mask) = &self.mask {
            gh.iter_mut().zip(mask).for_each(|(a, b)| *a *= b);
        }
        for (v, pre) in gh.iter_mut().zip(&self.pre) {
            if *pre <= 0.0 {
                *v = 0.0;
            }
        }
        g.w1.add_outer(1.0, &gh, &self.x);
        g.b1.copy_from_slice(&gh);
        let gx = p.w1.matvec_t(&gh);
        (g, gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::softmax;

    #[test]
    fn hand_computed_case() {
        let mut p = FcnParams::zeros(2, 2, 2).unwrap();
        p.w1 = Matrix::from_vec(2, 2, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        p.b1 = vec![0.0, -3.0];
        p.w2 = Matrix::from_vec(2, 2, vec![2.0, 1.0, -1.0, 0.0]).unwrap();
        p.b2 = vec![0.1, 0.2];
        let c = FcnCache::forward(&p, &[2.0, 1.0], None).unwrap();
        // hidden = relu([1, -2]) = [1, 0]
        assert_eq!(c.logits(), &[2.1, -0.8]);
        let s: f64 = softmax(c.logits()).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let p = FcnParams::zeros(3, 4, 2).unwrap();
        assert!(FcnCache::forward(&p, &[1.0, 2.0], None).is_err());
        assert!(FcnCache::forward(&p, &[1.0, 2.0, 3.0], Some(&[1.0])).is_err());
        assert!(FcnParams::zeros(3, 4, 1).is_err());
    }
}
