//! Paired embedding datasets: record files, ingestion, splits, the input
//! pre-scale statistic and the synthetic hierarchy generator.

pub mod records;
pub mod splits;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modality::Modality;

pub use records::{load_records, read_records, write_records, EmbeddingRecord};
pub use splits::{make_splits, SplitMode, SplitSpec, Splits};
pub use synth::{synth_generate, SynthConfig};

/// One paired sample; tokens are rows of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub code: Vec<Vec<f64>>,
    pub img: Vec<Vec<f64>>,
}

/// Samples sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub samples: Vec<Sample>,
    d_code: usize,
    d_img: usize,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn d_code(&self) -> usize {
        self.d_code
    }

    pub fn d_img(&self) -> usize {
        self.d_img
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labeled_ids(&self) -> Vec<(String, usize)> {
        self.samples
            .iter()
            .map(|s| (s.id.clone(), s.label))
            .collect()
    }

    /// Samples with the given ids, in ascending id order.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&Sample>> {
        let wanted: BTreeSet<&str> = ids.iter().map(|s| s.as_str()).collect();
        let picked: Vec<&Sample> = self
            .samples
            .iter()
            .filter(|s| wanted.contains(s.id.as_str()))
            .collect();
        if picked.len() != wanted.len() {
            let have: BTreeSet<&str> = picked.iter().map(|s| s.id.as_str()).collect();
            let missing = wanted.difference(&have).next().expect("a missing id");
            return Err(Error::Validation(format!(
                "split references unknown id {missing}"
            )));
        }
        Ok(picked)
    }

    /// Every token divided by the modality's scale.
    pub fn prescaled(&self, p: &Prescale) -> Dataset {
        let div = |rows: &[Vec<f64>], s: f64| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| r.iter().map(|v| v / s).collect())
                .collect()
        };
        Dataset {
            class_names: self.class_names.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    id: s.id.clone(),
                    label: s.label,
                    code: div(&s.code, p.code),
                    img: div(&s.img, p.image),
                })
                .collect(),
            d_code: self.d_code,
            d_img: self.d_img,
        }
    }
}

/// Pairs code and image records by id. Records may arrive in any order and
/// from any number of files.
pub fn ingest(records: Vec<EmbeddingRecord>, class_names: Option<Vec<String>>) -> Result<Dataset> {
    let mut code: BTreeMap<String, EmbeddingRecord> = BTreeMap::new();
    let mut img: BTreeMap<String, EmbeddingRecord> = BTreeMap::new();
    for r in records {
        r.validate()?;
        let side = match r.modality {
            Modality::Code => &mut code,
            Modality::Image => &mut img,
        };
        if side.contains_key(&r.id) {
            return Err(Error::Validation(format!(
                "duplicate {} record for id {}",
                r.modality.as_str(),
                r.id
            )));
        }
        side.insert(r.id.clone(), r);
    }
    if let Some(id) = code.keys().find(|k| !img.contains_key(*k)) {
        return Err(Error::Validation(format!(
            "missing image record for id {id}"
        )));
    }
    if let Some(id) = img.keys().find(|k| !code.contains_key(*k)) {
        return Err(Error::Validation(format!(
            "missing code record for id {id}"
        )));
    }
    if code.is_empty() {
        return Err(Error::Validation("no records to ingest".into()));
    }
    let d_code = code.values().next().expect("nonempty").dim as usize;
    let d_img = img.values().next().expect("nonempty").dim as usize;
    let max_label = code.values().map(|r| r.label).max().expect("nonempty") as usize;
    let class_names = match class_names {
        Some(names) => {
            if names.len() <= max_label {
                return Err(Error::Validation(format!(
                    "label {max_label} has no class name ({} names given)",
                    names.len()
                )));
            }
            names
        }
        None => (0..=max_label).map(|k| format!("class{k}")).collect(),
    };
    let mut samples = Vec::with_capacity(code.len());
    for (id, c) in code {
        let i = &img[&id];
        if c.dim as usize != d_code {
            return Err(Error::Validation(format!(
                "code record {id} has dimension {}, expected {d_code}",
                c.dim
            )));
        }
        if i.dim as usize != d_img {
            return Err(Error::Validation(format!(
                "image record {id} has dimension {}, expected {d_img}",
                i.dim
            )));
        }
        if c.label != i.label {
            return Err(Error::Validation(format!(
                "id {id}: code label {} differs from image label {}",
                c.label, i.label
            )));
        }
        samples.push(Sample {
            id,
            label: c.label as usize,
            code: c.token_rows(),
            img: i.token_rows(),
        });
    }
    Ok(Dataset {
        class_names,
        samples,
        d_code,
        d_img,
    })
}

/// Per-modality input divisor: 1 + the largest token norm in the training
/// portion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prescale {
    pub code: f64,
    pub image: f64,
}

impl Prescale {
    pub fn identity() -> Self {
        Prescale {
            code: 1.0,
            image: 1.0,
        }
    }

    pub fn from_training(ds: &Dataset, train_ids: &[String]) -> Result<Self> {
        let max_norm = |rows: &[Vec<f64>]| {
            rows.iter()
                .map(|r| crate::linalg::norm(r))
                .fold(0.0, f64::max)
        };
        let picked = ds.select(train_ids)?;
        if picked.is_empty() {
            return Err(Error::InvalidInput("empty training portion".into()));
        }
        let code = picked.iter().map(|s| max_norm(&s.code)).fold(0.0, f64::max);
        let image = picked.iter().map(|s| max_norm(&s.img)).fold(0.0, f64::max);
        Ok(Prescale {
            code: 1.0 + code,
            image: 1.0 + image,
        })
    }
}

/// The JSON file tying record files, class names, the pre-scale statistic
/// and split assignments together. Relative record paths are resolved
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<String>,
    pub class_names: Vec<String>,
    pub n_samples: usize,
    pub d_code: usize,
    pub d_img: usize,
    #[serde(default)]
    pub prescale: Option<Prescale>,
    #[serde(default)]
    pub splits: Option<Splits>,
}

impl DatasetManifest {
    pub fn describe(ds: &Dataset, records: Vec<String>) -> Self {
        DatasetManifest {
            records,
            class_names: ds.class_names.clone(),
            n_samples: ds.len(),
            d_code: ds.d_code(),
            d_img: ds.d_img(),
            prescale: None,
            splits: None,
        }
    }

    /// Attaches splits and recomputes the pre-scale from their training
    /// portion.
    pub fn set_splits(&mut self, ds: &Dataset, splits: Splits) -> Result<()> {
        splits.validate(ds)?;
        self.prescale = Some(Prescale::from_training(ds, &splits.training_portion())?);
        self.splits = Some(splits);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        crate::io::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn record_paths(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        self.records
            .iter()
            .map(|r| {
                let p = PathBuf::from(r);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            })
            .collect()
    }

    /// Re-reads the records and checks they still match the manifest.
    pub fn load_dataset(&self, manifest_path: &Path) -> Result<Dataset> {
        let mut all = Vec::new();
        for p in self.record_paths(manifest_path) {
            all.extend(load_records(&p)?);
        }
        let ds = ingest(all, Some(self.class_names.clone()))?;
        if ds.len() != self.n_samples || ds.d_code() != self.d_code || ds.d_img() != self.d_img {
            return Err(Error::Validation(
                "record files no longer match the manifest".into(),
            ));
        }
        if let Some(s) = &self.splits {
            s.validate(&ds)?;
        }
        Ok(ds)
    }
}
