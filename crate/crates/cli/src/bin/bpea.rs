use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gocoma::bpea::{convert_tree, write_manifest, ConvertOptions, SourceLanguage};

/// Turns source programs into RGB images of their compiled artifacts.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a file or a directory tree of sources.
    Convert {
        #[arg(long)]
        lang: SourceLanguage,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Skip compilation and image the normalized source text.
        #[arg(long)]
        fallback_only: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().cmd {
        Cmd::Convert {
            lang,
            input,
            out,
            manifest,
            fallback_only,
            jobs,
        } => {
            let mut opts = ConvertOptions::new(lang);
            opts.fallback_only = fallback_only;
            let entries = convert_tree(&input, &out, &opts, jobs)
                .with_context(|| format!("converting {}", input.display()))?;
            write_manifest(&entries, &manifest)?;
            let fallback = entries
                .iter()
                .filter(|e| e.origin == gocoma::bpea::ArtifactOrigin::FallbackNormalized)
                .count();
            eprintln!(
                "converted {} file(s), {} via text fallback; manifest at {}",
                entries.len(),
                fallback,
                manifest.display()
            );
        }
    }
    Ok(())
}
