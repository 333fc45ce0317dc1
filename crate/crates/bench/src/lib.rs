//! Deterministic inputs shared by the benchmarks.

use gocoma::{BallPoint, Curvature, EuclideanVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tokens(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn euclidean(rows: &[Vec<f64>]) -> Vec<EuclideanVector> {
    rows.iter()
        .map(|r| EuclideanVector::new(r.clone()).unwrap())
        .collect()
}

/// A point at `frac` of the ball radius in a random direction.
pub fn ball_point(rng: &mut ChaCha8Rng, d: usize, c: Curvature, frac: f64) -> BallPoint {
    let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let r = frac / c.value().sqrt();
    BallPoint::new(v.iter().map(|a| a / n * r).collect(), c).unwrap()
}
