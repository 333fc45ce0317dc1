//! Compile-only drivers for C, C++, Java and Python.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use super::{ArtifactOrigin, BpeaArtifact, SourceLanguage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolchainConfig {
    /// Tried in order; the first one that runs is used.
    pub c_compilers: Vec<String>,
    pub cxx_compilers: Vec<String>,
    pub javac: String,
    pub python: String,
    /// Extra flags for C/C++ (none by default, so the toolchain's own
    /// optimization default applies).
    pub cc_flags: Vec<String>,
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        ToolchainConfig {
            c_compilers: vec!["gcc".into(), "clang".into()],
            cxx_compilers: vec!["g++".into(), "clang++".into()],
            javac: "javac".into(),
            python: "python3".into(),
            cc_flags: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompileOutcome {
    Compiled(BpeaArtifact),
    /// The compiler ran and rejected the program; callers normalize the
    /// source text instead.
    Fallback {
        diagnostics: String,
    },
}

/// First line of `<tool> --version` (javac prints to stderr), or `None` if
/// the tool cannot be started.
fn tool_version(tool: &str) -> Option<String> {
    let out = Command::new(tool).arg("--version").output().ok()?;
    let text = if out.stdout.is_empty() {
        out.stderr
    } else {
        out.stdout
    };
    let line = String::from_utf8_lossy(&text)
        .lines()
        .next()?
        .trim()
        .to_string();
    Some(if line.is_empty() {
        tool.to_string()
    } else {
        line
    })
}

fn first_available(candidates: &[String]) -> Result<(String, String)> {
    for c in candidates {
        if let Some(v) = tool_version(c) {
            return Ok((c.clone(), v));
        }
    }
    Err(Error::Environment(format!(
        "no compiler found among {candidates:?}"
    )))
}

fn read_output(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn run(cmd: &mut Command, tool: &str) -> Result<std::process::Output> {
    cmd.output()
        .map_err(|e| Error::Environment(format!("failed to run {tool}: {e}")))
}

pub fn compile_source(
    path: &Path,
    language: SourceLanguage,
    cfg: &ToolchainConfig,
) -> Result<CompileOutcome> {
    if !path.is_file() {
        return Err(Error::InvalidInput(format!(
            "source {} is not a readable file",
            path.display()
        )));
    }
    let work = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    match language {
        SourceLanguage::C | SourceLanguage::Cpp => {
            let candidates = if language == SourceLanguage::C {
                &cfg.c_compilers
            } else {
                &cfg.cxx_compilers
            };
            let (tool, version) = first_available(candidates)?;
            let obj = work.path().join("out.o");
            let out = run(
                Command::new(&tool)
                    .arg("-c")
                    .args(&cfg.cc_flags)
                    .arg(path)
                    .arg("-o")
                    .arg(&obj),
                &tool,
            )?;
            if !out.status.success() {
                return Ok(fallback(&out));
            }
            let mut flags = vec!["-c".to_string()];
            flags.extend(cfg.cc_flags.iter().cloned());
            finish(
                read_output(&obj)?,
                language,
                format!("{version}; flags: {}", flags.join(" ")),
            )
        }
        SourceLanguage::Java => {
            let version = tool_version(&cfg.javac)
                .ok_or_else(|| Error::Environment(format!("{} not found", cfg.javac)))?;
            let classes = work.path().join("classes");
            std::fs::create_dir_all(&classes).map_err(|e| Error::io(&classes, e))?;
            let out = run(
                Command::new(&cfg.javac).arg("-d").arg(&classes).arg(path),
                &cfg.javac,
            )?;
            if !out.status.success() {
                return Ok(fallback(&out));
            }
            let files = collect_files(&classes)?;
            let bytes = match files.as_slice() {
                [] => return Err(Error::EmptyArtifact("javac produced no class files".into())),
                [(_, single)] => read_output(single)?,
                _ => {
                    let entries = files
                        .iter()
                        .map(|(name, p)| Ok((name.clone(), read_output(p)?)))
                        .collect::<Result<Vec<_>>>()?;
                    deterministic_zip(&entries)?
                }
            };
            finish(bytes, language, format!("{version}; flags: -d"))
        }
        SourceLanguage::Python => {
            let version = tool_version(&cfg.python)
                .ok_or_else(|| Error::Environment(format!("{} not found", cfg.python)))?;
            let pyc = work.path().join("out.pyc");
            let script = "import py_compile, sys\n\
                py_compile.compile(sys.argv[1], cfile=sys.argv[2], doraise=True,\n\
                invalidation_mode=py_compile.PycInvalidationMode.UNCHECKED_HASH)\n";
            let out = run(
                Command::new(&cfg.python)
                    .arg("-c")
                    .arg(script)
                    .arg(path)
                    .arg(&pyc),
                &cfg.python,
            )?;
            if !out.status.success() {
                return Ok(fallback(&out));
            }
            finish(
                read_output(&pyc)?,
                language,
                format!("{version}; py_compile unchecked-hash"),
            )
        }
    }
}

fn fallback(out: &std::process::Output) -> CompileOutcome {
    CompileOutcome::Fallback {
        diagnostics: String::from_utf8_lossy(&out.stderr).trim().to_string(),
    }
}

fn finish(bytes: Vec<u8>, language: SourceLanguage, record: String) -> Result<CompileOutcome> {
    Ok(CompileOutcome::Compiled(BpeaArtifact::new(
        bytes,
        ArtifactOrigin::Compiled,
        language,
        record,
    )?))
}

/// Files under `root` as (`/`-separated relative name, path), sorted by name.
fn collect_files(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.map_err(|e| Error::Environment(e.to_string()))?;
        if entry.file_type().is_file() {
            let rel = entry
                .path()
                .strip_prefix(root)
                .expect("walkdir stays under its root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            out.push((rel, entry.path().to_path_buf()));
        }
    }
    out.sort();
    Ok(out)
}

/// Stored (uncompressed) zip with entries in lexicographic order, the DOS
/// epoch as every timestamp and fixed permissions.
pub fn deterministic_zip(entries: &[(String, Vec<u8>)]) -> Result<Vec<u8>> {
    use zip::write::SimpleFileOptions;

    let mut sorted: Vec<&(String, Vec<u8>)> = entries.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut writer = zip::ZipWriter::new(std::io::Cursor::new(Vec::new()));
    let opts = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Stored)
        .last_modified_time(zip::DateTime::default())
        .unix_permissions(0o644);
    for (name, data) in sorted {
        writer
            .start_file(name.as_str(), opts)
            .map_err(|e| Error::Format(format!("zip entry {name}: {e}")))?;
        writer
            .write_all(data)
            .map_err(|e| Error::Format(format!("zip entry {name}: {e}")))?;
    }
    let cursor = writer
        .finish()
        .map_err(|e| Error::Format(format!("zip finish: {e}")))?;
    Ok(cursor.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zip_is_order_independent_and_repeatable() {
        let a = vec![
            ("Main.class".to_string(), vec![0xca, 0xfe, 1]),
            ("Main$Inner.class".to_string(), vec![0xca, 0xfe, 2]),
        ];
        let mut b = a.clone();
        b.reverse();
        let za = deterministic_zip(&a).unwrap();
        assert_eq!(za, deterministic_zip(&b).unwrap());
        assert_eq!(&za[..4], b"PK\x03\x04");
        let mut archive = zip::ZipArchive::new(std::io::Cursor::new(za)).unwrap();
        assert_eq!(archive.by_index(0).unwrap().name(), "Main$Inner.class");
        assert_eq!(archive.by_index(1).unwrap().name(), "Main.class");
    }

    #[test]
    fn missing_compiler_is_an_environment_error() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("a.c");
        std::fs::write(&src, "int f(void){return 1;}\n").unwrap();
        let cfg = ToolchainConfig {
            c_compilers: vec!["definitely-not-a-compiler-xyz".into()],
            ..ToolchainConfig::default()
        };
        assert!(matches!(
            compile_source(&src, SourceLanguage::C, &cfg),
            Err(Error::Environment(_))
        ));
    }
}
