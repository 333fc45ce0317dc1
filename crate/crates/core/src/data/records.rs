//! `EMBR0001` embedding record files.
//!
//! A file is the 8 magic bytes `EMBR0001` followed by zero or more records,
//! each laid out little-endian as
//!
//! ```text
//! u32 id_len | id (UTF-8) | u32 label | u8 modality (0 code, 1 image)
//! | u32 T | u32 d | T·d × f32 (token-major)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::Modality;

pub const EMBR_MAGIC: &[u8; 8] = b"EMBR0001";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub label: u32,
    pub modality: Modality,
    pub tokens: u32,
    pub dim: u32,
    pub data: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn new(id: String, label: u32, modality: Modality, tokens: Vec<Vec<f32>>) -> Result<Self> {
        let t = tokens.len();
        let d = tokens.first().map_or(0, |v| v.len());
        if tokens.iter().any(|v| v.len() != d) {
            return Err(Error::Validation(format!(
                "record {id}: ragged token dimensions"
            )));
        }
        let rec = EmbeddingRecord {
            id,
            label,
            modality,
            tokens: t as u32,
            dim: d as u32,
            data: tokens.concat(),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Validation("record with empty id".into()));
        }
        if self.tokens == 0 || self.dim == 0 {
            return Err(Error::Validation(format!(
                "record {}: T and d must be positive (T={}, d={})",
                self.id, self.tokens, self.dim
            )));
        }
        if self.data.len() != self.tokens as usize * self.dim as usize {
            return Err(Error::Validation(format!(
                "record {}: payload has {} values, T·d = {}",
                self.id,
                self.data.len(),
                self.tokens as usize * self.dim as usize
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "record {}: non-finite value",
                self.id
            )));
        }
        Ok(())
    }

    /// Tokens widened to `f64`.
    pub fn token_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks_exact(self.dim as usize)
            .map(|r| r.iter().map(|v| *v as f64).collect())
            .collect()
    }
}

pub fn encode_records(records: &[EmbeddingRecord]) -> Result<Vec<u8>> {
    let mut out = EMBR_MAGIC.to_vec();
    for r in records {
        r.validate()?;
        let id = r.id.as_bytes();
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&r.label.to_le_bytes());
        out.push(r.modality.tag());
        out.extend_from_slice(&r.tokens.to_le_bytes());
        out.extend_from_slice(&r.dim.to_le_bytes());
        for v in &r.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("record file truncated at byte {}", self.at)))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode_records(bytes: &[u8]) -> Result<Vec<EmbeddingRecord>> {
    if bytes.len() < 8 || &bytes[..8] != EMBR_MAGIC {
        return Err(Error::Format("missing EMBR0001 magic".into()));
    }
    let mut r = Reader { buf: bytes, at: 8 };
    let mut out = Vec::new();
    while r.at < bytes.len() {
        let id_len = r.u32()? as usize;
        let id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|_| Error::Format(format!("record id at byte {} is not UTF-8", r.at)))?
            .to_string();
        let label = r.u32()?;
        let tag = r.take(1)?[0];
        let modality = Modality::from_tag(tag)
            .ok_or_else(|| Error::Format(format!("record {id}: unknown modality tag {tag}")))?;
        let tokens = r.u32()?;
        let dim = r.u32()?;
        let n = (tokens as usize)
            .checked_mul(dim as usize)
            .ok_or_else(|| Error::Format(format!("record {id}: T·d overflows")))?;
        let payload = r.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::Format("payload size overflows".into()))?,
        )?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let rec = EmbeddingRecord {
            id,
            label,
            modality,
            tokens,
            dim,
            data,
        };
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(records: &[EmbeddingRecord], path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &encode_records(records)?)
}

pub fn read_records(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_records(&bytes)
}

/// Hand-written fixture line: `{"id", "label", "modality", "tokens": [[..]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    id: String,
    label: u32,
    modality: Modality,
    tokens: Vec<Vec<f32>>,
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<EmbeddingRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let j: JsonRecord = serde_json::from_str(l)
                .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
            EmbeddingRecord::new(j.id, j.label, j.modality, j.tokens)
        })
        .collect()
}

/// Reads an `EMBR0001` file, or JSON lines when the extension is `.jsonl`.
pub fn load_records(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        records_from_jsonl(&text)
    } else {
        read_records(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, m: Modality) -> EmbeddingRecord {
        EmbeddingRecord::new(id.into(), 3, m, vec![vec![1.0, -2.5], vec![0.25, 8.0]]).unwrap()
    }

    #[test]
    fn byte_layout_is_fixed() {
        let bytes = encode_records(&[rec("ab", Modality::Image)]).unwrap();
        let mut expect = b"EMBR0001".to_vec();
        expect.extend_from_slice(&[
            2, 0, 0, 0, b'a', b'b', 3, 0, 0, 0, 1, 2, 0, 0, 0, 2, 0, 0, 0,
        ]);
        for v in [1.0f32, -2.5, 0.25, 8.0] {
            expect.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expect);
        assert_eq!(
            decode_records(&bytes).unwrap(),
            vec![rec("ab", Modality::Image)]
        );
    }

    #[test]
    fn truncation_and_bad_magic_are_reported() {
        let bytes = encode_records(&[rec("x", Modality::Code)]).unwrap();
        assert!(decode_records(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_records(b"EMBR0002").is_err());
        assert_eq!(decode_records(b"EMBR0001").unwrap(), vec![]);
    }

    #[test]
    fn validation_errors() {
        assert!(EmbeddingRecord::new("a".into(), 0, Modality::Code, vec![]).is_err());
        assert!(EmbeddingRecord::new(
            "a".into(),
            0,
            Modality::Code,
            vec![vec![1.0], vec![1.0, 2.0]]
        )
        .is_err());
        assert!(EmbeddingRecord::new("a".into(), 0, Modality::Code, vec![vec![f32::NAN]]).is_err());
    }

    #[test]
    fn jsonl_import() {
        let text = r#"{"id":"s1","label":1,"modality":"code","tokens":[[0.5,1.0]]}

{"id":"s1","label":1,"modality":"image","tokens":[[2.0],[3.0]]}"#;
        let rs = records_from_jsonl(text).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[1].tokens, 2);
        assert_eq!(rs[1].token_rows(), vec![vec![2.0], vec![3.0]]);
        assert!(records_from_jsonl(r#"{"id":"s","label":0}"#).is_err());
    }
}
