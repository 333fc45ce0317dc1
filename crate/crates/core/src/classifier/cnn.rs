//! Two-layer 1-D convolution head.
//!
//! The input vector is read as a single channel of length `L`:
//! conv(64, k=3) → ReLU → max-pool → conv(128, k=3) → ReLU → max-pool →
//! flatten → dropout → dense → logits. Convolutions are "valid" (no
//! padding, stride 1); pooling windows do not overlap and a trailing
//! partial window is dropped.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::params::{fan_in_bound, ParamSet};

pub const FILTERS1: usize = 64;
pub const FILTERS2: usize = 128;
pub const KERNEL: usize = 3;
pub const DEFAULT_POOL: usize = 2;

/// Layer lengths `(conv1, pool1, conv2, pool2)` for an input of length `len`,
/// or `None` if the input is too short to leave at least one output.
fn lengths(len: usize, pool: usize) -> Option<(usize, usize, usize, usize)> {
    let l1 = len.checked_sub(KERNEL - 1)?;
    let p1 = l1 / pool;
    let l2 = p1.checked_sub(KERNEL - 1)?;
    let p2 = l2 / pool;
    (p2 >= 1).then_some((l1, p1, l2, p2))
}

/// Shortest input the stack accepts with the given pool window.
pub fn min_input_len(pool: usize) -> usize {
    (1..)
        .find(|&l| lengths(l, pool).is_some())
        .expect("some length fits")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    /// `64 × 3`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `128 × (64·3)`, column `f·3 + k`
    pub w2: Matrix,
    pub b2: Vec<f64>,
    /// `n_classes × (128·P2)`, column `g·P2 + q`
    pub w3: Matrix,
    pub b3: Vec<f64>,
    input_len: usize,
    pool: usize,
}

impl CnnParams {
    pub fn init<R: Rng>(
        input_len: usize,
        n_classes: usize,
        pool: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::zeros(input_len, n_classes, pool)?;
        for w in [&mut p.w1, &mut p.w2, &mut p.w3] {
            let b = fan_in_bound(w.cols());
            w.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-b..b));
        }
        Ok(p)
    }

    pub fn zeros(input_len: usize, n_classes: usize, pool: usize) -> Result<Self> {
        if pool == 0 || n_classes < 2 {
            return Err(Error::InvalidInput(
                "CNN head needs pool ≥ 1 and at least 2 classes".into(),
            ));
        }
        let (_, _, _, p2) = lengths(input_len, pool).ok_or_else(|| {
            Error::Shape(format!(
                "CNN input length {input_len} is below the minimum {} for pool {pool}",
                min_input_len(pool)
            ))
        })?;
        Ok(CnnParams {
            w1: Matrix::zeros(FILTERS1, KERNEL),
            b1: vec![0.0; FILTERS1],
            w2: Matrix::zeros(FILTERS2, FILTERS1 * KERNEL),
            b2: vec![0.0; FILTERS2],
            w3: Matrix::zeros(n_classes, FILTERS2 * p2),
            b3: vec![0.0; n_classes],
            input_len,
            pool,
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn pool(&self) -> usize {
        self.pool
    }

    pub fn n_classes(&self) -> usize {
        self.w3.rows()
    }

    pub fn flat_len(&self) -> usize {
        self.w3.cols()
    }
}

impl ParamSet for CnnParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
            self.w3.as_slice(),
            &self.b3,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
            self.w3.as_mut_slice(),
            &mut self.b3,
        ]
    }
}

/// Forward activations kept for the backward pass. Feature maps are
/// channel-major: entry `f·len + p`.
#[derive(Debug, Clone)]
pub struct CnnCache {
    x: Vec<f64>,
    a1: Vec<f64>,
    arg1: Vec<usize>,
    m1: Vec<f64>,
    a2: Vec<f64>,
    arg2: Vec<usize>,
    mask: Option<Vec<f64>>,
    h: Vec<f64>,
    logits: Vec<f64>,
    dims: (usize, usize, usize, usize),
}

/// Max over each non-overlapping window of a channel-major ReLU map.
fn relu_pool(
    a: &[f64],
    channels: usize,
    len: usize,
    pool: usize,
    out_len: usize,
) -> (Vec<f64>, Vec<usize>) {
    let mut m = vec![0.0; channels * out_len];
    let mut arg = vec![0; channels * out_len];
    for ch in 0..channels {
        for q in 0..out_len {
            let start = ch * len + q * pool;
            let mut best = start;
            for t in start + 1..start + pool {
                if a[t] > a[best] {
                    best = t;
                }
            }
            m[ch * out_len + q] = a[best].max(0.0);
            arg[ch * out_len + q] = best;
        }
    }
    (m, arg)
}

impl CnnCache {
    pub fn forward(p: &CnnParams, x: &[f64], mask: Option<&[f64]>) -> Result<Self> {
        if x.len() != p.input_len {
            return Err(Error::Shape(format!(
                "CNN expects input length {}, got {}",
                p.input_len,
                x.len()
            )));
        }
        let (l1, p1, l2, p2) = lengths(p.input_len, p.pool).expect("checked at construction");
        let w1 = p.w1.as_slice();
        let mut a1 = vec![0.0; FILTERS1 * l1];
        for f in 0..FILTERS1 {
            let (k0, k1, k2) = (w1[f * 3], w1[f * 3 + 1], w1[f * 3 + 2]);
            let row = &mut a1[f * l1..(f + 1) * l1];
            for (pos, out) in row.iter_mut().enumerate() {
                *out = p.b1[f] + k0 * x[pos] + k1 * x[pos + 1] + k2 * x[pos + 2];
            }
        }
        let (m1, arg1) = relu_pool(&a1, FILTERS1, l1, p.pool, p1);

        let mut a2 = vec![0.0; FILTERS2 * l2];
        for g in 0..FILTERS2 {
            let wrow = p.w2.row(g);
            let out = &mut a2[g * l2..(g + 1) * l2];
            out.fill(p.b2[g]);
            for f in 0..FILTERS1 {
                let src = &m1[f * p1..(f + 1) * p1];
                for k in 0..KERNEL {
                    let w = wrow[f * KERNEL + k];
                    for (pos, o) in out.iter_mut().enumerate() {
                        *o += w * src[pos + k];
                    }
                }
            }
        }
        let (m2, arg2) = relu_pool(&a2, FILTERS2, l2, p.pool, p2);

        let h = match mask {
            Some(m) => {
                if m.len() != m2.len() {
                    return Err(Error::Shape("dropout mask width mismatch".into()));
                }
                m2.iter().zip(m).map(|(a, b)| a * b).collect()
            }
            None => m2,
        };
        let mut logits = p.w3.matvec(&h);
        crate::linalg::add_into(&mut logits, &p.b3);
        Ok(CnnCache {
            x: x.to_vec(),
            a1,
            arg1,
            m1,
            a2,
            arg2,
            mask: mask.map(|m| m.to_vec()),
            h,
            logits,
            dims: (l1, p1, l2, p2),
        })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn backward(&self, p: &CnnParams, gl: &[f64]) -> (CnnParams, Vec<f64>) {
        let (l1, p1, l2, _) = self.dims;
        let mut g = p.zeros_like();
        g.w3.add_outer(1.0, gl, &self.h);
        g.b3.copy_from_slice(gl);
        let mut gm2 = p.w3.matvec_t(gl);
        if let Some(mask) = &self.mask {
            gm2.iter_mut().zip(mask).for_each(|(a, b)| *a *= b);
        }

        let mut ga2 = vec![0.0; FILTERS2 * l2];
        for (k, &src) in self.arg2.iter().enumerate() {
            if self.a2[src] > 0.0 {
                ga2[src] += gm2[k];
            }
        }
        let mut gm1 = vec![0.0; FILTERS1 * p1];
        for gch in 0..FILTERS2 {
            let gout = &ga2[gch * l2..(gch + 1) * l2];
            g.b2[gch] = gout.iter().sum();
            let wrow = p.w2.row(gch);
            let base = gch * FILTERS1 * KERNEL;
            for f in 0..FILTERS1 {
                let src = &self.m1[f * p1..(f + 1) * p1];
                for k in 0..KERNEL {
                    let mut acc = 0.0;
                    for (pos, go) in gout.iter().enumerate() {
                        acc += go * src[pos + k];
                    }
                    g.w2.as_mut_slice()[base + f * KERNEL + k] += acc;
                    let w = wrow[f * KERNEL + k];
                    let dst = &mut gm1[f * p1..(f + 1) * p1];
                    for (pos, go) in gout.iter().enumerate() {
                        dst[pos + k] += w * go;
                    }
                }
            }
        }

        let mut ga1 = vec![0.0; FILTERS1 * l1];
        for (k, &src) in self.arg1.iter().enumerate() {
            if self.a1[src] > 0.0 {
                ga1[src] += gm1[k];
            }
        }
        let mut gx = vec![0.0; self.x.len()];
        for f in 0..FILTERS1 {
            let gout = &ga1[f * l1..(f + 1) * l1];
            g.b1[f] = gout.iter().sum();
            for k in 0..KERNEL {
                let mut acc = 0.0;
                let w = p.w1.get(f, k);
                for (pos, go) in gout.iter().enumerate() {
                    acc += go * self.x[pos + k];
                    gx[pos + k] += w * go;
                }
                g.w1.set(f, k, g.w1.get(f, k) + acc);
            }
        }
        (g, gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::softmax;

    #[test]
    fn minimum_length_with_pool_two_is_ten() {
        assert_eq!(min_input_len(2), 10);
        assert_eq!(min_input_len(1), 5);
        assert!(CnnParams::zeros(9, 3, 2).is_err());
        assert!(CnnParams::zeros(10, 3, 2).is_ok());
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let p = CnnParams::zeros(12, 4, 2).unwrap();
        let c = CnnCache::forward(&p, &[0.3; 12], None).unwrap();
        for v in softmax(c.logits()) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    /// Direct evaluation of the layer definitions with plain nested loops.
    fn brute_force(p: &CnnParams, x: &[f64]) -> Vec<f64> {
        let pool = p.pool();
        let conv = |inp: &Vec<Vec<f64>>, w: &Matrix, b: &[f64]| -> Vec<Vec<f64>> {
            let len = inp[0].len() - 2;
            (0..w.rows())
                .map(|o| {
                    (0..len)
                        .map(|t| {
                            let mut s = b[o];
                            for (ci, ch) in inp.iter().enumerate() {
                                for k in 0..3 {
                                    s += w.get(o, ci * 3 + k) * ch[t + k];
                                }
                            }
                            s.max(0.0)
                        })
                        .collect()
                })
                .collect()
        };
        let pooled = |m: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            m.into_iter()
                .map(|ch| {
                    (0..ch.len() / pool)
                        .map(|q| {
                            ch[q * pool..(q + 1) * pool]
                                .iter()
                                .cloned()
                                .fold(f64::MIN, f64::max)
                        })
                        .collect()
                })
                .collect()
        };
        let h1 = pooled(conv(&vec![x.to_vec()], &p.w1, &p.b1));
        let h2 = pooled(conv(&h1, &p.w2, &p.b2));
        let flat: Vec<f64> = h2.concat();
        (0..p.n_classes())
            .map(|c| {
                p.b3[c]
                    + (0..flat.len())
                        .map(|j| p.w3.get(c, j) * flat[j])
                        .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn forward_matches_brute_force_convolution() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut p = CnnParams::init(13, 3, 2, &mut rng).unwrap();
        p.b1.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = 0.01 * i as f64 - 0.3);
        p.b2.iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = 0.1 - 0.002 * i as f64);
        let x: Vec<f64> = (0..13).map(|i| ((i * 7) % 5) as f64 * 0.4 - 0.8).collect();
        let fast = CnnCache::forward(&p, &x, None).unwrap();
        for (a, b) in fast.logits().iter().zip(brute_force(&p, &x)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
