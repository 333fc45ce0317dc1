//! GCSA parameter checkpoint.
//!
//! Layout: the 8 magic bytes `GCSA0001`, then little-endian `f64`s in the
//! order `W_Q, b_Q, W_K, b_K, W_V, b_V, λ, c, d_model, d_code, d_img`.
//! Matrices are row-major, biases are tangent vectors. The three trailing
//! dimensions let a reader size the matrices before decoding them.

use std::path::Path;

use super::{GcsaOptions, GcsaParams};
use crate::error::{Error, Result};
use crate::hyperbolic::Curvature;
use crate::linalg::Matrix;
use crate::params::ParamSet;

pub const GCSA_MAGIC: &[u8; 8] = b"GCSA0001";

pub fn encode(p: &GcsaParams) -> Result<Vec<u8>> {
    if p.code_values.is_some() {
        return Err(Error::InvalidInput(
            "checkpoint format has no slot for symmetric value maps".into(),
        ));
    }
    p.validate()?;
    let mut out = Vec::with_capacity(8 + 8 * (p.num_params() + 4));
    out.extend_from_slice(GCSA_MAGIC);
    let mut put = |xs: &[f64]| {
        for x in xs {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    put(p.w_q.as_slice());
    put(&p.b_q);
    put(p.w_k.as_slice());
    put(&p.b_k);
    put(p.w_v.as_slice());
    put(&p.b_v);
    put(&[
        p.lambda,
        p.curvature.value(),
        p.d_model() as f64,
        p.d_code() as f64,
        p.d_img() as f64,
    ]);
    Ok(out)
}

fn as_dim(v: f64, what: &str) -> Result<usize> {
    if v.fract() != 0.0 || !(1.0..=1e7).contains(&v) {
        return Err(Error::Format(format!("bad {what} {v} in checkpoint")));
    }
    Ok(v as usize)
}

pub fn decode(bytes: &[u8]) -> Result<GcsaParams> {
    if bytes.len() < 8 || &bytes[..8] != GCSA_MAGIC {
        return Err(Error::Format("missing GCSA0001 magic".into()));
    }
    let body = &bytes[8..];
    if !body.len().is_multiple_of(8) || body.len() < 40 {
        return Err(Error::Format("truncated GCSA checkpoint".into()));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let n = vals.len();
    let d_model = as_dim(vals[n - 3], "d_model")?;
    let d_code = as_dim(vals[n - 2], "d_code")?;
    let d_img = as_dim(vals[n - 1], "d_img")?;
    let expected = d_model * d_code + 2 * d_model * d_img + 3 * d_model + 5;
    if n != expected {
        return Err(Error::Format(format!(
            "checkpoint holds {n} values, shapes imply {expected}"
        )));
    }
    let mut at = 0;
    let mut take = |len: usize| {
        let s = vals[at..at + len].to_vec();
        at += len;
        s
    };
    let w_q = Matrix::from_vec(d_model, d_code, take(d_model * d_code))?;
    let b_q = take(d_model);
    let w_k = Matrix::from_vec(d_model, d_img, take(d_model * d_img))?;
    let b_k = take(d_model);
    let w_v = Matrix::from_vec(d_model, d_img, take(d_model * d_img))?;
    let b_v = take(d_model);
    let tail = take(2);
    let p = GcsaParams {
        w_q,
        b_q,
        w_k,
        b_k,
        w_v,
        b_v,
        code_values: None,
        lambda: tail[0],
        curvature: Curvature::new(tail[1])?,
        options: GcsaOptions::default(),
    };
    p.validate()?;
    Ok(p)
}

pub fn save(p: &GcsaParams, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &encode(p)?)
}

pub fn load(path: &Path) -> Result<GcsaParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
