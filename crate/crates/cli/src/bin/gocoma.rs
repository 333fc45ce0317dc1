use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gocoma::classifier::HeadKind;
use gocoma::data::splits::official_from_mapping;
use gocoma::data::{
    ingest, load_records, make_splits, synth_generate, write_records, DatasetManifest, SplitMode,
    SplitSpec, SynthConfig,
};
use gocoma::experiment::{
    report, run_experiment, ExperimentConfig, ExperimentResult, Fusion, FusionMode,
};

/// Paired code/image embedding experiments.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic paired dataset with a class hierarchy.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        n_samples: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 8)]
        t_code: usize,
        #[arg(long, default_value_t = 8)]
        t_img: usize,
        #[arg(long, default_value_t = 16)]
        d_code: usize,
        #[arg(long, default_value_t = 16)]
        d_img: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0.7)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validate record files and write a dataset manifest.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        /// Text file with one class name per line, in label order.
        #[arg(long)]
        class_names: Option<PathBuf>,
        #[arg(required = true)]
        records: Vec<PathBuf>,
    },
    /// Assign samples to train/validation/test (or folds) in a manifest.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        mode: SplitMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// JSON object mapping every id to "train", "val" or "test"
        /// (official mode only).
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Train and test one fusion mode on every fold.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        fusion: FusionMode,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        head: Option<HeadKind>,
        /// Run only the first N folds.
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare result files in one table.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    gocoma::io::write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn synth(out: &Path, cfg: SynthConfig) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (records, names) = synth_generate(&cfg)?;
    write_records(&records, &out.join("records.embr"))?;
    let ds = ingest(records, Some(names))?;
    let manifest = DatasetManifest::describe(&ds, vec!["records.embr".into()]);
    manifest.save(&out.join("manifest.json"))?;
    write(
        &out.join("synth.json"),
        &serde_json::to_string_pretty(&cfg)?,
    )?;
    eprintln!(
        "{} samples, {} classes -> {}",
        ds.len(),
        ds.n_classes(),
        out.join("manifest.json").display()
    );
    Ok(())
}

fn ingest_cmd(manifest: &Path, class_names: Option<&Path>, records: &[PathBuf]) -> Result<()> {
    let names = match class_names {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect(),
            )
        }
        None => None,
    };
    let mut all = Vec::new();
    let mut paths = Vec::new();
    for p in records {
        all.extend(load_records(p).with_context(|| format!("reading {}", p.display()))?);
        let abs = std::fs::canonicalize(p).with_context(|| format!("resolving {}", p.display()))?;
        paths.push(abs.to_string_lossy().into_owned());
    }
    let ds = ingest(all, names)?;
    DatasetManifest::describe(&ds, paths).save(manifest)?;
    eprintln!(
        "{} paired samples, {} classes, d_code {}, d_img {}",
        ds.len(),
        ds.n_classes(),
        ds.d_code(),
        ds.d_img()
    );
    Ok(())
}

fn split(
    manifest_path: &Path,
    mode: SplitMode,
    seed: u64,
    folds: usize,
    mapping: Option<&Path>,
) -> Result<()> {
    let mut manifest = DatasetManifest::load(manifest_path)?;
    let ds = manifest.load_dataset(manifest_path)?;
    let splits = match (mode, mapping) {
        (SplitMode::Official, Some(p)) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let map: HashMap<String, String> = serde_json::from_str(&text)?;
            let ids: Vec<String> = ds.samples.iter().map(|s| s.id.clone()).collect();
            official_from_mapping(&ids, &map)?
        }
        (SplitMode::Official, None) => make_splits(&ds.labeled_ids(), &SplitSpec::official(seed))?,
        (SplitMode::Stratified5cv, None) => {
            let spec = SplitSpec {
                folds,
                ..SplitSpec::stratified(seed)
            };
            make_splits(&ds.labeled_ids(), &spec)?
        }
        (SplitMode::Stratified5cv, Some(_)) => {
            bail!("--mapping only applies to the official split")
        }
    };
    manifest.set_splits(&ds, splits)?;
    manifest.save(manifest_path)?;
    let s = manifest.splits.as_ref().expect("just set");
    eprintln!(
        "{} fold(s), {} training-portion ids, {} test ids",
        s.num_folds(),
        s.training_portion().len(),
        s.test().len()
    );
    Ok(())
}

fn train_cmd(
    manifest_path: &Path,
    fusion: FusionMode,
    config: Option<&Path>,
    head: Option<HeadKind>,
    folds: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => {
            ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    cfg.apply_seed_env()?;
    if head.is_some() {
        cfg.head = head;
    }
    if folds.is_some() {
        cfg.max_folds = folds;
    }
    let manifest = DatasetManifest::load(manifest_path)?;
    let ds = manifest.load_dataset(manifest_path)?;
    let (Some(splits), Some(prescale)) = (&manifest.splits, &manifest.prescale) else {
        bail!(
            "{} has no splits; run `gocoma split` first",
            manifest_path.display()
        );
    };
    let (result, model) = run_experiment(&ds, splits, prescale, fusion, &cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    result.save(&out.join("results.json"))?;
    write(&out.join("history.jsonl"), &result.history_jsonl()?)?;
    gocoma::classifier::checkpoint::save(&model.head, &out.join("head.clsf"))?;
    if let Fusion::Gcsa(p) = &model.fusion {
        if !p.options.symmetric_values {
            gocoma::gcsa::checkpoint::save(p, &out.join("gcsa.ckpt"))?;
        }
    }
    let s = &result.summary;
    println!(
        "{fusion}: accuracy {:.2} ± {:.2}, macro-F1 {:.2} ± {:.2} over {} fold(s)",
        s.test_accuracy.mean,
        s.test_accuracy.std,
        s.test_macro_f1.mean,
        s.test_macro_f1.std,
        s.test_accuracy.n
    );
    Ok(())
}

fn report_cmd(format: Format, out: Option<&Path>, paths: &[PathBuf]) -> Result<()> {
    let results = paths
        .iter()
        .map(|p| ExperimentResult::load(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let table = report(&results)?;
    let text = match format {
        Format::Text => table.to_text(),
        Format::Json => table.to_json()? + "\n",
    };
    match out {
        Some(p) => write(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Synth {
            out,
            n_samples,
            classes,
            t_code,
            t_img,
            d_code,
            d_img,
            depth,
            noise,
            seed,
        } => synth(
            &out,
            SynthConfig {
                n_samples,
                n_classes: classes,
                t_code,
                t_img,
                d_code,
                d_img,
                depth,
                noise,
                seed,
            },
        ),
        Cmd::Ingest {
            manifest,
            class_names,
            records,
        } => ingest_cmd(&manifest, class_names.as_deref(), &records),
        Cmd::Split {
            manifest,
            mode,
            seed,
            folds,
            mapping,
        } => split(&manifest, mode, seed, folds, mapping.as_deref()),
        Cmd::Train {
            manifest,
            fusion,
            config,
            head,
            folds,
            out,
        } => train_cmd(&manifest, fusion, config.as_deref(), head, folds, &out),
        Cmd::Report {
            format,
            out,
            results,
        } => report_cmd(format, out.as_deref(), &results),
    }
}
