//! Synthetic paired data with a coarse-to-fine class hierarchy.
//!
//! Classes are the leaves of a tree with `depth` levels. Level `ℓ` has
//! `m_ℓ = ⌈n^{ℓ/depth}⌉` nodes (computed exactly in integers) and class `k`
//! sits under node `⌊k·m_ℓ/n⌋`, so each level refines the previous one.
//!
//! The code view describes the upper levels `1..=⌈depth/2⌉` with one global
//! vector per node. The image view describes the lower levels
//! `⌊depth/2⌋+1..=depth`, but only through each node's position among its
//! siblings, with one vector per (level, position) shared across parents.
//! With `depth ≥ 2` neither view alone separates every class; together they
//! do. With `depth = 1` both views identify the class directly.
//!
//! A class's latent (dimension [`LATENT_DIM`]) is the sum of its level
//! vectors, level `ℓ` scaled by `0.7^{ℓ−1}`. Token `t` of a view is a fixed
//! random affine image of that latent plus isotropic Gaussian noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::records::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::rng::{stream, Stream};

pub const LATENT_DIM: usize = 8;
const LEVEL_DECAY: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_classes: usize,
    pub t_code: usize,
    pub t_img: usize,
    pub d_code: usize,
    pub d_img: usize,
    pub depth: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            self.n_samples,
            self.t_code,
            self.t_img,
            self.d_code,
            self.d_img,
            self.depth,
        ]
        .iter()
        .all(|&v| v > 0);
        if !positive || self.n_classes < 2 || !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "invalid synthetic config {self:?}"
            )));
        }
        if self.n_samples < self.n_classes {
            return Err(Error::InvalidInput(
                "need at least one sample per class".into(),
            ));
        }
        Ok(())
    }
}

/// Smallest `m` with `m^depth ≥ n^level`.
fn level_width(n: usize, level: usize, depth: usize) -> usize {
    let target = (n as u128).pow(level as u32);
    let mut m: u128 = 1;
    while m.pow(depth as u32) < target {
        m += 1;
    }
    m as usize
}

/// `node[ℓ−1][k]`: the level-`ℓ` ancestor of class `k`.
fn ancestry(n: usize, depth: usize) -> Vec<Vec<usize>> {
    (1..=depth)
        .map(|l| {
            let m = level_width(n, l, depth);
            (0..n).map(|k| k * m / n).collect()
        })
        .collect()
}

/// Position of each class's level-`ℓ` node among the children of its parent.
fn sibling_index(nodes: &[Vec<usize>], level: usize) -> Vec<usize> {
    let here = &nodes[level - 1];
    if level == 1 {
        return here.clone();
    }
    let parent = &nodes[level - 2];
    here.iter()
        .zip(parent)
        .map(|(&node, &par)| {
            let first = here
                .iter()
                .zip(parent)
                .filter(|(_, &p)| p == par)
                .map(|(&h, _)| h)
                .min()
                .expect("own parent present");
            node - first
        })
        .collect()
}

fn gaussian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

struct TokenMap {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl TokenMap {
    fn draw<R: Rng>(rng: &mut R, d: usize) -> Self {
        let s = 1.0 / (LATENT_DIM as f64).sqrt();
        TokenMap {
            a: (0..d).map(|_| gaussian(rng, LATENT_DIM, s)).collect(),
            b: gaussian(rng, d, 0.1),
        }
    }

    fn apply(&self, z: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, b)| b + crate::linalg::dot(row, z))
            .collect()
    }
}

/// Code and image records for every sample (code records first, both in id
/// order) plus the class names. Sample `i` has id `s{i:06}` and label
/// `i mod n_classes`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Vec<EmbeddingRecord>, Vec<String>)> {
    cfg.validate()?;
    let n = cfg.n_classes;
    let depth = cfg.depth;
    let mut rng = stream(cfg.seed, Stream::Synth);
    let nodes = ancestry(n, depth);
    let code_levels: Vec<usize> = (1..=depth.div_ceil(2)).collect();
    let img_levels: Vec<usize> = (depth / 2 + 1..=depth).collect();

    let mut code_latent = vec![vec![0.0; LATENT_DIM]; n];
    for &l in &code_levels {
        let scale = LEVEL_DECAY.powi(l as i32 - 1);
        let width = level_width(n, l, depth);
        let vecs: Vec<Vec<f64>> = (0..width)
            .map(|_| gaussian(&mut rng, LATENT_DIM, scale))
            .collect();
        for k in 0..n {
            crate::linalg::add_into(&mut code_latent[k], &vecs[nodes[l - 1][k]]);
        }
    }
    let mut img_latent = vec![vec![0.0; LATENT_DIM]; n];
    for &l in &img_levels {
        let scale = LEVEL_DECAY.powi(l as i32 - 1);
        let sib = sibling_index(&nodes, l);
        let width = sib.iter().max().expect("n ≥ 2") + 1;
        let vecs: Vec<Vec<f64>> = (0..width)
            .map(|_| gaussian(&mut rng, LATENT_DIM, scale))
            .collect();
        for k in 0..n {
            crate::linalg::add_into(&mut img_latent[k], &vecs[sib[k]]);
        }
    }
    let code_maps: Vec<TokenMap> = (0..cfg.t_code)
        .map(|_| TokenMap::draw(&mut rng, cfg.d_code))
        .collect();
    let img_maps: Vec<TokenMap> = (0..cfg.t_img)
        .map(|_| TokenMap::draw(&mut rng, cfg.d_img))
        .collect();

    let mut code_records = Vec::with_capacity(cfg.n_samples);
    let mut img_records = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let k = i % n;
        let id = format!("s{i:06}");
        let mut view = |maps: &[TokenMap], z: &[f64], d: usize| -> Vec<Vec<f32>> {
            maps.iter()
                .map(|m| {
                    let noise = gaussian(&mut rng, d, cfg.noise);
                    m.apply(z)
                        .iter()
                        .zip(noise)
                        .map(|(a, e)| (a + e) as f32)
                        .collect()
                })
                .collect()
        };
        let code = view(&code_maps, &code_latent[k], cfg.d_code);
        let img = view(&img_maps, &img_latent[k], cfg.d_img);
        code_records.push(EmbeddingRecord::new(
            id.clone(),
            k as u32,
            Modality::Code,
            code,
        )?);
        img_records.push(EmbeddingRecord::new(id, k as u32, Modality::Image, img)?);
    }
    code_records.extend(img_records);
    let names = (0..n).map(|k| format!("class{k}")).collect();
    Ok((code_records, names))
}
