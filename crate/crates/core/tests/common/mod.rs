#![allow(dead_code)]

use std::io::Write;

use gocoma::params::ParamSet;
use rand::Rng;

pub fn tokens<R: Rng>(rng: &mut R, t: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| (0..d).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

/// Uniform direction, radius a uniform fraction of `max_frac` of the ball
/// radius.
pub fn ball_coords<R: Rng>(rng: &mut R, d: usize, c: f64, max_frac: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            let r = rng.gen_range(0.0..max_frac) / c.sqrt();
            return v.iter().map(|a| a / n * r).collect();
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error between `grad` and central differences of `f`
/// at the listed flat parameter indices.
pub fn fd_worst<P: ParamSet>(
    p: &P,
    grad: &[f64],
    idx: &[usize],
    h: f64,
    f: impl Fn(&P) -> f64,
) -> (f64, usize) {
    let base = p.flatten();
    let mut q = p.clone();
    let mut worst = (0.0, 0);
    for &k in idx {
        let mut v = base.clone();
        v[k] = base[k] + h;
        q.assign_flat(&v);
        let lp = f(&q);
        v[k] = base[k] - h;
        q.assign_flat(&v);
        let lm = f(&q);
        let e = rel_err(grad[k], (lp - lm) / (2.0 * h));
        if e > worst.0 {
            worst = (e, k);
        }
    }
    worst
}

/// Every index of small parameter sets, an even spread of at most `cap`
/// indices otherwise.
pub fn spread(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        (0..cap).map(|i| i * n / cap).collect()
    }
}

/// Written to the process stderr directly so the line survives output
/// capture.
pub fn verdict(criterion: &str, ok: bool, detail: &str) {
    let line = format!(
        "ACCEPTANCE {} {criterion}: {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}
