//! Classifier head checkpoint.
//!
//! Layout: the 8 magic bytes `CLSF0001`, then little-endian `f64`s: a
//! four-value header `kind, input_len, n_classes, aux` (`kind` is 0 for the
//! CNN and 1 for the FCN; `aux` is the pool window or the hidden width),
//! followed by the parameter tensors in their `ParamSet` order.

use std::path::Path;

use super::{CnnParams, FcnParams, Head};
use crate::error::{Error, Result};
use crate::params::ParamSet;

pub const CLSF_MAGIC: &[u8; 8] = b"CLSF0001";

pub fn encode(head: &Head) -> Vec<u8> {
    let (kind, aux) = match head {
        Head::Cnn(p) => (0.0, p.pool() as f64),
        Head::Fcn(p) => (1.0, p.hidden() as f64),
    };
    let header = [kind, head.input_len() as f64, head.n_classes() as f64, aux];
    let mut out = Vec::with_capacity(8 + 8 * (4 + head.num_params()));
    out.extend_from_slice(CLSF_MAGIC);
    for v in header.iter().chain(head.flatten().iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v.fract() != 0.0 || !(0.0..=1e9).contains(&v) {
        return Err(Error::Format(format!("bad {what} {v} in checkpoint")));
    }
    Ok(v as usize)
}

pub fn decode(bytes: &[u8]) -> Result<Head> {
    if bytes.len() < 8 || &bytes[..8] != CLSF_MAGIC {
        return Err(Error::Format("missing CLSF0001 magic".into()));
    }
    let body = &bytes[8..];
    if !body.len().is_multiple_of(8) || body.len() < 32 {
        return Err(Error::Format("truncated classifier checkpoint".into()));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let input_len = as_count(vals[1], "input_len")?;
    let n_classes = as_count(vals[2], "n_classes")?;
    let aux = as_count(vals[3], "aux")?;
    let mut head = match vals[0] {
        0.0 => Head::Cnn(CnnParams::zeros(input_len, n_classes, aux)?),
        1.0 => Head::Fcn(FcnParams::zeros(input_len, aux, n_classes)?),
        k => return Err(Error::Format(format!("unknown head kind {k}"))),
    };
    let flat = &vals[4..];
    if flat.len() != head.num_params() {
        return Err(Error::Format(format!(
            "checkpoint holds {} parameters, header implies {}",
            flat.len(),
            head.num_params()
        )));
    }
    head.assign_flat(flat);
    Ok(head)
}

pub fn save(head: &Head, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &encode(head))
}

pub fn load(path: &Path) -> Result<Head> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
