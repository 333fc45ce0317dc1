//! Experiments: one fusion mode trained and tested on every fold of a split,
//! plus the cross-run comparison table.

mod model;
mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::train::{evaluate_model, history_jsonl};
use crate::classifier::{train, EpochRecord, HeadKind, MetricsReport, TrainConfig};
use crate::data::{Dataset, Prescale, Sample, SplitMode, Splits};
use crate::error::{Error, Result};
use crate::gcsa::GcsaOptions;
use crate::hyperbolic::Curvature;

pub use model::{Fusion, FusionMode, Model, ModelSpec};
pub use report::{report, Report, ReportRow};

/// Environment variable that overrides the training seed.
pub const SEED_ENV: &str = "GOCOMA_SEED";

fn default_d_model() -> usize {
    128
}

fn default_curvature() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_d_model")]
    pub d_model: usize,
    #[serde(default = "default_curvature")]
    pub curvature: f64,
    #[serde(default)]
    pub row_softmax: bool,
    #[serde(default)]
    pub symmetric_values: bool,
    /// Defaults to the fusion mode's usual head.
    #[serde(default)]
    pub head: Option<HeadKind>,
    /// FCN hidden width; defaults to `d_model`.
    #[serde(default)]
    pub hidden: Option<usize>,
    /// Run only the first `max_folds` folds.
    #[serde(default)]
    pub max_folds: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            d_model: default_d_model(),
            curvature: default_curvature(),
            row_softmax: false,
            symmetric_values: false,
            head: None,
            hidden: None,
            max_folds: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the seed with `GOCOMA_SEED` when that is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.train.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{SEED_ENV}={v:?} is not a u64")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        Curvature::new(self.curvature)?;
        if self.d_model == 0 || self.hidden == Some(0) || self.max_folds == Some(0) {
            return Err(Error::InvalidInput(
                "d_model, hidden and max_folds must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn spec(&self, mode: FusionMode, ds: &Dataset) -> Result<ModelSpec> {
        Ok(ModelSpec {
            mode,
            head: self.head.unwrap_or(mode.default_head()),
            d_code: ds.d_code(),
            d_img: ds.d_img(),
            d_model: self.d_model,
            hidden: self.hidden.unwrap_or(self.d_model),
            n_classes: ds.n_classes(),
            curvature: Curvature::new(self.curvature)?,
            gcsa: GcsaOptions {
                row_softmax: self.row_softmax,
                symmetric_values: self.symmetric_values,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_samples: usize,
    pub n_classes: usize,
    pub d_code: usize,
    pub d_img: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanStd {
                mean: 0.0,
                std: 0.0,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub history: Vec<EpochRecord>,
    pub train: MetricsReport,
    pub val: MetricsReport,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub test_accuracy: MeanStd,
    pub test_macro_f1: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: FusionMode,
    pub head: HeadKind,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub split_mode: SplitMode,
    pub prescale: Prescale,
    pub folds: Vec<FoldResult>,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        crate::io::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Training history of every fold as JSON lines with a `fold` field.
    pub fn history_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for f in &self.folds {
            for line in history_jsonl(&f.history)?.lines() {
                let mut v: serde_json::Value = serde_json::from_str(line)?;
                v["fold"] = f.fold.into();
                out.push_str(&serde_json::to_string(&v)?);
                out.push('\n');
            }
        }
        Ok(out)
    }
}

/// A trained fold: the model plus its evaluation.
pub struct TrainedFold {
    pub model: Model,
    pub result: FoldResult,
}

fn owned(ds: &Dataset, ids: &[String]) -> Result<(Vec<Sample>, Vec<usize>)> {
    let picked = ds.select(ids)?;
    let ys = picked.iter().map(|s| s.label).collect();
    Ok((picked.into_iter().cloned().collect(), ys))
}

/// Trains and evaluates one fold on an already pre-scaled dataset.
pub fn run_fold(
    ds: &Dataset,
    splits: &Splits,
    fold: usize,
    mode: FusionMode,
    cfg: &ExperimentConfig,
) -> Result<TrainedFold> {
    let spec = cfg.spec(mode, ds)?;
    let (train_ids, val_ids) = splits.fold(fold)?;
    let (tx, ty) = owned(ds, &train_ids)?;
    let (vx, vy) = owned(ds, &val_ids)?;
    let (sx, sy) = owned(ds, splits.test())?;
    let init = Model::init(&spec, cfg.train.seed)?;
    let out = train(init, &tx, &ty, &vx, &vy, &cfg.train)?;
    let result = FoldResult {
        fold,
        best_epoch: out.best_epoch,
        stopped_early: out.stopped_early,
        history: out.history,
        train: evaluate_model(&out.model, &tx, &ty)?,
        val: evaluate_model(&out.model, &vx, &vy)?,
        test: evaluate_model(&out.model, &sx, &sy)?,
    };
    log::info!(
        "{mode} fold {fold}: best epoch {}, test acc {:.2}, macro-F1 {:.2}",
        result.best_epoch,
        result.test.accuracy,
        result.test.macro_f1
    );
    Ok(TrainedFold {
        model: out.model,
        result,
    })
}

/// Pre-scales the raw dataset, then trains and tests every fold (or the
/// first `max_folds`). Returns the result and the model of the first fold.
pub fn run_experiment(
    raw: &Dataset,
    splits: &Splits,
    prescale: &Prescale,
    mode: FusionMode,
    cfg: &ExperimentConfig,
) -> Result<(ExperimentResult, Model)> {
    cfg.validate()?;
    splits.validate(raw)?;
    let ds = raw.prescaled(prescale);
    let spec = cfg.spec(mode, &ds)?;
    let n_folds = cfg
        .max_folds
        .map_or(splits.num_folds(), |m| m.min(splits.num_folds()));
    let mut folds = Vec::with_capacity(n_folds);
    let mut first = None;
    for k in 0..n_folds {
        let t = run_fold(&ds, splits, k, mode, cfg)?;
        first.get_or_insert(t.model);
        folds.push(t.result);
    }
    let acc: Vec<f64> = folds.iter().map(|f| f.test.accuracy).collect();
    let f1: Vec<f64> = folds.iter().map(|f| f.test.macro_f1).collect();
    let split_mode = match splits {
        Splits::Official { .. } => SplitMode::Official,
        Splits::Stratified5cv { .. } => SplitMode::Stratified5cv,
    };
    let result = ExperimentResult {
        method: mode,
        head: spec.head,
        config: *cfg,
        dataset: DatasetSummary {
            n_samples: raw.len(),
            n_classes: raw.n_classes(),
            d_code: raw.d_code(),
            d_img: raw.d_img(),
        },
        split_mode,
        prescale: *prescale,
        folds,
        summary: Summary {
            test_accuracy: MeanStd::of(&acc),
            test_macro_f1: MeanStd::of(&f1),
        },
    };
    Ok((result, first.expect("at least one fold")))
}
