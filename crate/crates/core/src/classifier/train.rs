//! Mini-batch Adam training with early stopping on validation macro-F1.
//!
//! Random draws happen in a fixed order: one shuffle of the sample indices
//! per epoch from the shuffle stream, then one `u64` dropout seed per sample
//! in batch order from the dropout stream. Per-sample gradients may be
//! computed in parallel but are summed in batch order, so a run is bitwise
//! reproducible for a given seed no matter how many threads are used.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, dropout_mask, evaluate, softmax_cross_entropy, Head, MetricsReport};
use crate::error::{Error, Result};
use crate::params::{Adam, AdamConfig, ParamSet};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 25,
            learning_rate: adam.learning_rate,
            batch_size: 16,
            dropout: 0.2,
            patience: 5,
            seed: 0,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs >= 1
            && self.batch_size >= 1
            && self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.dropout)
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid training config {self:?}"
            )))
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_macro_f1: f64,
}

/// Something with trainable parameters that maps one input to class
/// probabilities.
pub trait Trainable: ParamSet + Send + Sync {
    type Input: Sync;

    fn n_classes(&self) -> usize;

    /// Cross-entropy loss on one sample and its gradient. Dropout masks are
    /// drawn from an RNG seeded with `dropout_seed`.
    fn loss_grad(
        &self,
        x: &Self::Input,
        label: usize,
        dropout: f64,
        dropout_seed: u64,
    ) -> Result<(f64, Self)>;

    /// Evaluation-mode class probabilities.
    fn predict_proba(&self, x: &Self::Input) -> Result<Vec<f64>>;
}

impl Trainable for Head {
    type Input = Vec<f64>;

    fn n_classes(&self) -> usize {
        Head::n_classes(self)
    }

    fn loss_grad(
        &self,
        x: &Vec<f64>,
        label: usize,
        dropout: f64,
        dropout_seed: u64,
    ) -> Result<(f64, Self)> {
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        let mask = dropout_mask(self.dropout_width(), dropout, &mut rng);
        let (logits, cache) = self.forward(x, Some(&mask))?;
        let (loss, gl) = softmax_cross_entropy(&logits, label)?;
        Ok((loss, self.backward(&cache, &gl).0))
    }

    fn predict_proba(&self, x: &Vec<f64>) -> Result<Vec<f64>> {
        Head::predict_proba(self, x)
    }
}

pub fn predict_labels<M: Trainable>(model: &M, inputs: &[M::Input]) -> Result<Vec<usize>> {
    inputs
        .par_iter()
        .map(|x| model.predict_proba(x).map(|p| argmax(&p)))
        .collect()
}

pub fn evaluate_model<M: Trainable>(
    model: &M,
    inputs: &[M::Input],
    labels: &[usize],
) -> Result<MetricsReport> {
    let pred = predict_labels(model, inputs)?;
    evaluate(&pred, labels, model.n_classes())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// Parameters from the epoch with the best validation macro-F1.
    pub model: M,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn check_split<I>(inputs: &[I], labels: &[usize], what: &str) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput(format!("{what} split is empty")));
    }
    if inputs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{what} split has {} inputs and {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    Ok(())
}

pub fn train<M: Trainable>(
    mut model: M,
    train_x: &[M::Input],
    train_y: &[usize],
    val_x: &[M::Input],
    val_y: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<M>> {
    cfg.validate()?;
    check_split(train_x, train_y, "training")?;
    check_split(val_x, val_y, "validation")?;
    let mut shuffle_rng = stream(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = stream(cfg.seed, Stream::Dropout);
    let mut opt = Adam::new(cfg.adam(), &model);
    let mut order: Vec<usize> = (0..train_x.len()).collect();

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, M)> = None;
    let mut wait = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| dropout_rng.gen()).collect();
            let results: Vec<Result<(f64, M)>> = batch
                .par_iter()
                .zip(seeds.par_iter())
                .map(|(&i, &s)| model.loss_grad(&train_x[i], train_y[i], cfg.dropout, s))
                .collect();
            let mut grad = model.zeros_like();
            for r in results {
                let (loss, g) = r?;
                if !loss.is_finite() {
                    return Err(Error::numerical(
                        "train",
                        format!("non-finite loss in epoch {epoch}"),
                    ));
                }
                loss_sum += loss;
                grad.accumulate(&g);
            }
            grad.scale(1.0 / batch.len() as f64);
            if !grad.is_finite() {
                return Err(Error::numerical(
                    "train",
                    format!("non-finite gradient in epoch {epoch}"),
                ));
            }
            opt.step(&mut model, &grad);
        }
        if !model.is_finite() {
            return Err(Error::numerical(
                "train",
                format!("parameters diverged in epoch {epoch}"),
            ));
        }
        let val = evaluate_model(&model, val_x, val_y)?;
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / train_x.len() as f64,
            val_acc: val.accuracy,
            val_macro_f1: val.macro_f1,
        };
        log::debug!("epoch {epoch}: {rec:?}");
        history.push(rec);

        let improved = best.as_ref().is_none_or(|(f1, _, _)| val.macro_f1 > *f1);
        if improved {
            best = Some((val.macro_f1, epoch, model.clone()));
            wait = 0;
        } else {
            wait += 1;
            if wait > cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch,
        stopped_early,
    })
}

/// History as JSON lines `{epoch, train_loss, val_acc, val_macro_f1}`.
pub fn history_jsonl(history: &[EpochRecord]) -> Result<String> {
    let mut out = String::new();
    for r in history {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::HeadKind;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = i % 3;
            let x: Vec<f64> = (0..6)
                .map(|k| if k == 2 * y { 2.0 } else { 0.0 } + rng.gen_range(-0.3..0.3))
                .collect();
            xs.push(x);
            ys.push(y);
        }
        (xs, ys)
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-2,
            epochs: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn fcn_learns_blobs_and_is_deterministic() {
        let (x, y) = blobs(90, 1);
        let (vx, vy) = blobs(30, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = Head::init(HeadKind::Fcn, 6, 3, 8, &mut rng).unwrap();
        let a = train(head.clone(), &x, &y, &vx, &vy, &cfg()).unwrap();
        let b = train(head, &x, &y, &vx, &vy, &cfg()).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        let m = evaluate_model(&a.model, &vx, &vy).unwrap();
        assert!(m.accuracy > 90.0, "{m:?}");
    }

    #[test]
    fn patience_zero_stops_after_first_non_improvement() {
        let (x, y) = blobs(30, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // zero weights: predictions never change, so epoch 2 cannot improve
        let head = Head::init(HeadKind::Fcn, 6, 3, 4, &mut rng).unwrap();
        let mut frozen = head.zeros_like();
        if let Head::Fcn(p) = &mut frozen {
            p.b2 = vec![1.0, 0.0, 0.0];
        }
        let c = TrainConfig {
            patience: 0,
            learning_rate: 1e-12,
            ..cfg()
        };
        let out = train(frozen, &x, &y, &x, &y, &c).unwrap();
        assert_eq!(out.history.len(), 2);
        assert!(out.stopped_early);
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = Head::init(HeadKind::Fcn, 2, 2, 2, &mut rng).unwrap();
        let x = vec![vec![0.0, 1.0]];
        assert!(train(head.clone(), &[], &[], &x, &[0], &cfg()).is_err());
        let bad = TrainConfig {
            dropout: 1.0,
            ..cfg()
        };
        assert!(train(head, &x, &[0], &x, &[0], &bad).is_err());
    }

    #[test]
    fn history_lines_parse_back() {
        let h = vec![EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            val_acc: 50.0,
            val_macro_f1: 33.3,
        }];
        let text = history_jsonl(&h).unwrap();
        let back: EpochRecord = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(back, h[0]);
    }
}
