//! Train/validation/test assignments.
//!
//! Two modes exist. `official` is a fixed train/val/test partition, read
//! from an id→split mapping when one is supplied and otherwise drawn as a
//! stratified 80/10/10 split. `stratified5cv` holds out a stratified 20% test
//! set and deals the remaining 80% into `k` stratified folds.
//!
//! Within each class, ids are sorted and then shuffled by the split stream
//! of the seed; classes are visited in ascending label order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Official,
    Stratified5cv,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "official" => Ok(SplitMode::Official),
            "stratified5cv" => Ok(SplitMode::Stratified5cv),
            _ => Err(Error::InvalidInput(format!("unknown split mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
    pub folds: usize,
    pub test_fraction: f64,
    /// Official mode only.
    pub val_fraction: f64,
}

impl SplitSpec {
    pub fn official(seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::Official,
            seed,
            folds: 1,
            test_fraction: 0.1,
            val_fraction: 0.1,
        }
    }

    pub fn stratified(seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::Stratified5cv,
            seed,
            folds: 5,
            test_fraction: 0.2,
            val_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Splits {
    Official {
        train: Vec<String>,
        val: Vec<String>,
        test: Vec<String>,
    },
    Stratified5cv {
        test: Vec<String>,
        folds: Vec<Vec<String>>,
    },
}

impl Splits {
    /// Everything a model may be fitted or tuned on: official train, or the
    /// union of all folds.
    pub fn training_portion(&self) -> Vec<String> {
        let mut ids = match self {
            Splits::Official { train, .. } => train.clone(),
            Splits::Stratified5cv { folds, .. } => folds.concat(),
        };
        ids.sort();
        ids
    }

    pub fn test(&self) -> &[String] {
        match self {
            Splits::Official { test, .. } | Splits::Stratified5cv { test, .. } => test,
        }
    }

    pub fn num_folds(&self) -> usize {
        match self {
            Splits::Official { .. } => 1,
            Splits::Stratified5cv { folds, .. } => folds.len(),
        }
    }

    /// `(train, val)` ids for fold `k`; the official split has the single
    /// fold 0.
    pub fn fold(&self, k: usize) -> Result<(Vec<String>, Vec<String>)> {
        match self {
            Splits::Official { train, val, .. } if k == 0 => Ok((train.clone(), val.clone())),
            Splits::Stratified5cv { folds, .. } if k < folds.len() => {
                let mut train: Vec<String> = folds
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != k)
                    .flat_map(|(_, f)| f.iter().cloned())
                    .collect();
                train.sort();
                Ok((train, folds[k].clone()))
            }
            _ => Err(Error::InvalidInput(format!("fold {k} does not exist"))),
        }
    }

    fn parts(&self) -> Vec<&Vec<String>> {
        match self {
            Splits::Official { train, val, test } => vec![train, val, test],
            Splits::Stratified5cv { test, folds } => {
                std::iter::once(test).chain(folds.iter()).collect()
            }
        }
    }

    /// Parts are nonempty, pairwise disjoint and cover the dataset exactly.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let mut seen = BTreeSet::new();
        for part in self.parts() {
            if part.is_empty() {
                return Err(Error::Validation("a split part is empty".into()));
            }
            for id in part {
                if !seen.insert(id.as_str()) {
                    return Err(Error::Validation(format!(
                        "id {id} appears in two split parts"
                    )));
                }
            }
        }
        let all: BTreeSet<&str> = ds.samples.iter().map(|s| s.id.as_str()).collect();
        if seen != all {
            let extra = seen.difference(&all).next();
            let missing = all.difference(&seen).next();
            return Err(Error::Validation(format!(
                "splits do not partition the dataset (unknown: {extra:?}, unassigned: {missing:?})"
            )));
        }
        Ok(())
    }
}

fn by_class(items: &[(String, usize)]) -> BTreeMap<usize, Vec<String>> {
    let mut m: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (id, y) in items {
        m.entry(*y).or_default().push(id.clone());
    }
    for ids in m.values_mut() {
        ids.sort();
    }
    m
}

fn count(frac: f64, n: usize) -> usize {
    (frac * n as f64).round() as usize
}

pub fn make_splits(items: &[(String, usize)], spec: &SplitSpec) -> Result<Splits> {
    if items.is_empty() {
        return Err(Error::InvalidInput("no samples to split".into()));
    }
    let ok_fracs = (0.0..1.0).contains(&spec.test_fraction)
        && (0.0..1.0).contains(&spec.val_fraction)
        && spec.test_fraction + spec.val_fraction < 1.0;
    if !ok_fracs {
        return Err(Error::InvalidInput(format!(
            "bad split fractions in {spec:?}"
        )));
    }
    let mut rng = stream(spec.seed, Stream::Split);
    let classes = by_class(items);
    match spec.mode {
        SplitMode::Official => {
            let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
            for (y, mut ids) in classes {
                if ids.len() < 3 {
                    return Err(Error::InvalidInput(format!(
                        "class {y} has {} samples, needs at least 3 for train/val/test",
                        ids.len()
                    )));
                }
                ids.shuffle(&mut rng);
                let n_test = count(spec.test_fraction, ids.len()).max(1);
                let n_val = count(spec.val_fraction, ids.len()).max(1);
                test.extend(ids.drain(..n_test));
                val.extend(ids.drain(..n_val));
                train.extend(ids);
            }
            for v in [&mut train, &mut val, &mut test] {
                v.sort();
            }
            Ok(Splits::Official { train, val, test })
        }
        SplitMode::Stratified5cv => {
            let k = spec.folds;
            if k < 2 {
                return Err(Error::InvalidInput(
                    "cross-validation needs at least 2 folds".into(),
                ));
            }
            let mut test = Vec::new();
            let mut folds = vec![Vec::new(); k];
            let mut next = 0;
            for (y, mut ids) in classes {
                let n_test = count(spec.test_fraction, ids.len());
                if ids.len() < k || ids.len() - n_test < k {
                    return Err(Error::InvalidInput(format!(
                        "class {y} has {} samples, fewer than needed for {k} folds",
                        ids.len()
                    )));
                }
                ids.shuffle(&mut rng);
                test.extend(ids.drain(..n_test));
                for id in ids {
                    folds[next % k].push(id);
                    next += 1;
                }
            }
            test.sort();
            folds.iter_mut().for_each(|f| f.sort());
            Ok(Splits::Stratified5cv { test, folds })
        }
    }
}

/// Official split from an external `{id: "train"|"val"|"test"}` mapping.
pub fn official_from_mapping(ids: &[String], mapping: &HashMap<String, String>) -> Result<Splits> {
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for id in ids {
        let part = mapping
            .get(id)
            .ok_or_else(|| Error::Validation(format!("id {id} missing from split mapping")))?;
        match part.as_str() {
            "train" => train.push(id.clone()),
            "val" | "valid" | "validation" => val.push(id.clone()),
            "test" => test.push(id.clone()),
            other => {
                return Err(Error::Validation(format!(
                    "id {id}: unknown split name {other:?}"
                )))
            }
        }
    }
    if mapping.len() != ids.len() {
        return Err(Error::Validation(
            "split mapping names ids that are not in the dataset".into(),
        ));
    }
    for v in [&mut train, &mut val, &mut test] {
        v.sort();
    }
    Ok(Splits::Official { train, val, test })
}
