//! Batch conversion and the JSON-lines image manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::compile::{compile_source, CompileOutcome, ToolchainConfig};
use super::image::{bytes_to_image, encode_png};
use super::normalize::normalize_fallback;
use super::{ArtifactOrigin, SourceLanguage};
use crate::error::{Error, Result};

/// One converted program. `byte_len` is the artifact length before padding;
/// `sha256` is the digest of the written PNG file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub source_path: String,
    pub image_path: String,
    pub origin: ArtifactOrigin,
    pub byte_len: usize,
    pub toolchain_record: String,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct ConvertOptions {
    pub language: SourceLanguage,
    pub fallback_only: bool,
    pub toolchain: ToolchainConfig,
}

impl ConvertOptions {
    pub fn new(language: SourceLanguage) -> Self {
        ConvertOptions {
            language,
            fallback_only: false,
            toolchain: ToolchainConfig::default(),
        }
    }
}

/// Converts one source file, writing `<out_dir>/<id>.png`.
pub fn convert_file(
    source: &Path,
    id: &str,
    out_dir: &Path,
    opts: &ConvertOptions,
) -> Result<ManifestEntry> {
    let artifact = if opts.fallback_only {
        let text = std::fs::read(source).map_err(|e| Error::io(source, e))?;
        normalize_fallback(&text, opts.language)?
    } else {
        match compile_source(source, opts.language, &opts.toolchain)? {
            CompileOutcome::Compiled(a) => a,
            CompileOutcome::Fallback { diagnostics } => {
                log::info!(
                    "{}: compilation failed, normalizing text ({})",
                    source.display(),
                    diagnostics.lines().next().unwrap_or("")
                );
                let text = std::fs::read(source).map_err(|e| Error::io(source, e))?;
                normalize_fallback(&text, opts.language)?
            }
        }
    };
    let img = bytes_to_image(&artifact)?;
    let png = encode_png(&img)?;
    let image_path = out_dir.join(format!("{id}.png"));
    crate::io::write_atomic(&image_path, &png)?;
    Ok(ManifestEntry {
        id: id.to_string(),
        source_path: source.to_string_lossy().into_owned(),
        image_path: image_path.to_string_lossy().into_owned(),
        origin: artifact.origin(),
        byte_len: artifact.bytes().len(),
        toolchain_record: artifact.toolchain_record().to_string(),
        sha256: hex::encode(Sha256::digest(&png)),
    })
}

/// Source files of the given language under `input` (or `input` itself),
/// paired with ids derived from their relative paths, sorted by id.
pub fn discover_sources(input: &Path, language: SourceLanguage) -> Result<Vec<(String, PathBuf)>> {
    if input.is_file() {
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "source".into());
        return Ok(vec![(stem, input.to_path_buf())]);
    }
    if !input.is_dir() {
        return Err(Error::InvalidInput(format!(
            "{} does not exist",
            input.display()
        )));
    }
    let exts = language.extensions();
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(input).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Environment(e.to_string()))?;
        let p = entry.path();
        let matches = entry.file_type().is_file()
            && p.extension()
                .map(|e| exts.contains(&e.to_string_lossy().to_ascii_lowercase().as_str()))
                .unwrap_or(false);
        if !matches {
            continue;
        }
        let rel = p.strip_prefix(input).expect("walkdir stays under its root");
        let id = rel
            .with_extension("")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("__");
        out.push((id, p.to_path_buf()));
    }
    out.sort();
    for w in out.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Validation(format!("duplicate source id {}", w[0].0)));
        }
    }
    Ok(out)
}

/// Converts every matching source under `input` using `jobs` worker threads.
/// Entries come back sorted by id regardless of scheduling.
pub fn convert_tree(
    input: &Path,
    out_dir: &Path,
    opts: &ConvertOptions,
    jobs: usize,
) -> Result<Vec<ManifestEntry>> {
    let sources = discover_sources(input, opts.language)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Environment(e.to_string()))?;
    let results: Vec<Result<ManifestEntry>> = pool.install(|| {
        sources
            .par_iter()
            .map(|(id, path)| convert_file(path, id, out_dir, opts))
            .collect()
    });
    results.into_iter().collect()
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let mut text = String::new();
    for e in entries {
        text.push_str(&serde_json::to_string(e)?);
        text.push('\n');
    }
    crate::io::write_atomic(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
