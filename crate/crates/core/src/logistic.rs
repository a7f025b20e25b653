//! Binary logistic regression per goal, trained one-vs-rest.
//!
//! The objective for one goal is the example-weighted mean log-loss plus an L2
//! penalty on the weights (the bias is not penalized):
//!
//! ```text
//! J(w, b) = (1 / Σωᵢ) Σ ωᵢ [softplus(zᵢ) − yᵢ zᵢ] + (λ / 2) ‖w‖²,   zᵢ = w·xᵢ + b
//! ```
//!
//! Example weights balance the classes: positives get `n / (2 n₊)` and
//! negatives `n / (2 n₋)`. Training is plain SGD over a seeded shuffle with
//! step `lr / √epoch`; the L2 term is applied as an implicit (proximal) shrink
//! through a global scale factor, so sparse updates stay O(nnz) and very large
//! λ cannot overshoot.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::features::{featurize, FeatureVector, Vocabulary};
use crate::math::{sigmoid, softplus, sqrt};
use crate::sdg::SdgId;

/// Window used by the loss-curve smoothing guard.
pub const SMOOTHING_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub lr: f64,
    /// Upper bound on epochs.
    pub epochs: usize,
    pub seed: u64,
    pub patience: usize,
    pub threshold: f64,
    /// Share of the training rows held back for early stopping. Small sets
    /// (under 20 rows) validate on the training rows instead.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1e-4,
            lr: 0.1,
            epochs: 500,
            seed: 42,
            patience: 10,
            threshold: 0.5,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub max_epochs: usize,
    pub epochs_run: usize,
    /// Epoch whose parameters were kept (lowest validation loss).
    pub best_epoch: usize,
    pub lambda: f64,
    pub lr: f64,
    pub patience: usize,
    pub positives: usize,
    pub negatives: usize,
    pub positive_weight: f64,
    pub negative_weight: f64,
    pub best_validation_loss: f64,
    /// Training objective after each epoch up to `best_epoch`.
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    pub sdg: SdgId,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    pub training_meta: TrainingMeta,
}

impl OvrModel {
    pub fn margin(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn probability(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.margin(x))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("SDG {0} has no positive training examples")]
    NoPositives(SdgId),
    #[error("SDG {0} has no negative training examples")]
    NoNegatives(SdgId),
    #[error("training for SDG {sdg} diverged at epoch {epoch}")]
    Diverged { sdg: SdgId, epoch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
}

/// One example in a weighted batch.
#[derive(Debug, Clone, Copy)]
pub struct WeightedExample<'a> {
    pub x: &'a FeatureVector,
    pub y: bool,
    pub weight: f64,
}

/// Value of the regularized objective.
pub fn objective(weights: &[f64], bias: f64, batch: &[WeightedExample<'_>], lambda: f64) -> f64 {
    weighted_log_loss(weights, bias, batch) + 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Example-weighted mean log-loss without the penalty.
pub fn weighted_log_loss(weights: &[f64], bias: f64, batch: &[WeightedExample<'_>]) -> f64 {
    let total: f64 = batch.iter().map(|e| e.weight).sum();
    if total == 0.0 {
        return 0.0;
    }
    batch
        .iter()
        .map(|e| {
            let z = e.x.dot(weights) + bias;
            e.weight * (softplus(z) - if e.y { z } else { 0.0 })
        })
        .sum::<f64>()
        / total
}

/// Objective value with its analytic gradient `(∂J/∂w, ∂J/∂b)`.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    batch: &[WeightedExample<'_>],
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let total: f64 = batch.iter().map(|e| e.weight).sum();
    let mut grad: Vec<f64> = weights.iter().map(|w| lambda * w).collect();
    let mut grad_b = 0.0;
    if total > 0.0 {
        for e in batch {
            let z = e.x.dot(weights) + bias;
            let g = e.weight * (sigmoid(z) - if e.y { 1.0 } else { 0.0 }) / total;
            for (i, v) in e.x.iter() {
                grad[i] += g * v;
            }
            grad_b += g;
        }
    }
    (objective(weights, bias, batch, lambda), grad, grad_b)
}

/// True when the trailing mean over `window` epochs never increases.
pub fn smoothed_non_increasing(curve: &[f64], window: usize) -> bool {
    let smoothed: Vec<f64> = curve.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect();
    smoothed.windows(2).all(|p| p[1] <= p[0])
}

#[derive(Debug, Clone)]
struct Row {
    sdg: SdgId,
    positive_majority: bool,
    negative_majority: bool,
}

/// Featurized corpus shared by all sixteen one-vs-rest problems.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    features: Vec<FeatureVector>,
    rows: Vec<Row>,
    dim: usize,
}

impl TrainingSet {
    pub fn new(corpus: &Corpus, vocabulary: &Vocabulary) -> Self {
        TrainingSet {
            features: corpus.iter().map(|s| featurize(&s.text, vocabulary)).collect(),
            rows: corpus
                .iter()
                .map(|s| Row {
                    sdg: s.sdg,
                    positive_majority: s.has_positive_majority(),
                    negative_majority: s.has_negative_majority(),
                })
                .collect(),
            dim: vocabulary.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    /// Binary target of each row for `sdg`: positive when the row is labeled
    /// with `sdg` and accepted by majority; negative when it is labeled with
    /// another goal or rejected by majority; `None` for tied votes on `sdg`.
    pub fn labels_for(&self, sdg: SdgId) -> Vec<Option<bool>> {
        self.rows
            .iter()
            .map(|r| {
                if r.sdg != sdg || r.negative_majority {
                    Some(false)
                } else if r.positive_majority {
                    Some(true)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Trains the model for one goal.
    pub fn train(&self, sdg: SdgId, config: &TrainConfig) -> Result<OvrModel, TrainError> {
        validate_config(config)?;
        let labeled: Vec<(usize, bool)> = self
            .labels_for(sdg)
            .into_iter()
            .enumerate()
            .filter_map(|(i, y)| y.map(|y| (i, y)))
            .collect();
        let positives = labeled.iter().filter(|(_, y)| *y).count();
        let negatives = labeled.len() - positives;
        if positives == 0 {
            return Err(TrainError::NoPositives(sdg));
        }
        if negatives == 0 {
            return Err(TrainError::NoNegatives(sdg));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (u64::from(sdg.get()) << 56));
        let (fit_rows, val_rows) = holdout(&labeled, config.validation_fraction, &mut rng);
        let n = fit_rows.len() as f64;
        let n_pos = fit_rows.iter().filter(|(_, y)| *y).count() as f64;
        let positive_weight = n / (2.0 * n_pos);
        let negative_weight = n / (2.0 * (n - n_pos));
        let weigh = |rows: &[(usize, bool)]| -> Vec<WeightedExample<'_>> {
            rows.iter()
                .map(|&(i, y)| WeightedExample {
                    x: &self.features[i],
                    y,
                    weight: if y { positive_weight } else { negative_weight },
                })
                .collect()
        };
        let fit = weigh(&fit_rows);
        let val = weigh(&val_rows);

        // w = scale * v
        let mut v = vec![0.0; self.dim];
        let mut scale = 1.0f64;
        let mut bias = 0.0f64;
        let mut order: Vec<usize> = (0..fit.len()).collect();

        let mut curve: Vec<f64> = Vec::new();
        let mut best = (f64::INFINITY, 0usize, vec![0.0; self.dim], 0.0f64);
        let mut since_best = 0usize;
        let mut epochs_run = 0usize;

        for epoch in 1..=config.epochs {
            epochs_run = epoch;
            let eta = config.lr / sqrt(epoch as f64);
            let shrink = 1.0 / (1.0 + eta * config.lambda);
            order.shuffle(&mut rng);
            for &k in &order {
                let e = &fit[k];
                let z = scale * e.x.dot(&v) + bias;
                let g = e.weight * (sigmoid(z) - if e.y { 1.0 } else { 0.0 });
                let step = eta * g / scale;
                for (i, xv) in e.x.iter() {
                    v[i] -= step * xv;
                }
                bias -= eta * g;
                // proximal step for the L2 term
                scale *= shrink;
                if scale < 1e-9 {
                    for w in &mut v {
                        *w *= scale;
                    }
                    scale = 1.0;
                }
            }
            let w: Vec<f64> = v.iter().map(|x| x * scale).collect();
            let train_obj = objective(&w, bias, &fit, config.lambda);
            let val_loss = weighted_log_loss(&w, bias, &val);
            if !train_obj.is_finite() || !val_loss.is_finite() || !bias.is_finite() {
                return Err(TrainError::Diverged { sdg, epoch });
            }
            curve.push(train_obj);
            if val_loss < best.0 {
                best = (val_loss, epoch, w, bias);
                since_best = 0;
            } else {
                since_best += 1;
            }
            let rising = curve.len() > SMOOTHING_WINDOW
                && !smoothed_non_increasing(&curve[curve.len() - SMOOTHING_WINDOW - 1..], SMOOTHING_WINDOW);
            if since_best >= config.patience || rising {
                break;
            }
        }

        let (best_validation_loss, best_epoch, weights, bias) = best;
        curve.truncate(best_epoch);
        Ok(OvrModel {
            sdg,
            weights,
            bias,
            threshold: config.threshold,
            training_meta: TrainingMeta {
                seed: config.seed,
                max_epochs: config.epochs,
                epochs_run,
                best_epoch,
                lambda: config.lambda,
                lr: config.lr,
                patience: config.patience,
                positives,
                negatives,
                positive_weight,
                negative_weight,
                best_validation_loss,
                loss_curve: curve,
            },
        })
    }

    /// Trains all sixteen goals sequentially.
    pub fn train_all(&self, config: &TrainConfig) -> Result<BTreeMap<SdgId, OvrModel>, TrainError> {
        SdgId::trainable().map(|s| self.train(s, config).map(|m| (s, m))).collect()
    }
}

/// Featurizes `train` and fits the model for `sdg`.
pub fn train_ovr(train: &Corpus, sdg: SdgId, vocabulary: &Vocabulary, config: &TrainConfig) -> Result<OvrModel, TrainError> {
    TrainingSet::new(train, vocabulary).train(sdg, config)
}

fn validate_config(c: &TrainConfig) -> Result<(), TrainError> {
    if !(c.lambda >= 0.0 && c.lambda.is_finite()) {
        return Err(TrainError::InvalidConfig("lambda must be finite and non-negative"));
    }
    if !(c.lr > 0.0 && c.lr.is_finite()) {
        return Err(TrainError::InvalidConfig("learning rate must be positive"));
    }
    if c.epochs == 0 {
        return Err(TrainError::InvalidConfig("epochs must be at least 1"));
    }
    if !(c.threshold > 0.0 && c.threshold < 1.0) {
        return Err(TrainError::InvalidConfig("threshold must lie in (0, 1)"));
    }
    if !(0.0..1.0).contains(&c.validation_fraction) {
        return Err(TrainError::InvalidConfig("validation fraction must lie in [0, 1)"));
    }
    Ok(())
}

/// Splits labeled rows into (fit, validation), keeping both classes on both
/// sides. Falls back to validating on the fit rows when that is impossible.
type Labeled = Vec<(usize, bool)>;

fn holdout(labeled: &[(usize, bool)], fraction: f64, rng: &mut ChaCha8Rng) -> (Labeled, Labeled) {
    let mut fit = Vec::new();
    let mut val = Vec::new();
    if labeled.len() >= 20 && fraction > 0.0 {
        for class in [true, false] {
            let mut rows: Vec<(usize, bool)> = labeled.iter().copied().filter(|&(_, y)| y == class).collect();
            rows.shuffle(rng);
            let n_val = crate::math::round(rows.len() as f64 * fraction) as usize;
            if n_val == 0 || n_val >= rows.len() {
                return (labeled.to_vec(), labeled.to_vec());
            }
            val.extend_from_slice(&rows[..n_val]);
            fit.extend_from_slice(&rows[n_val..]);
        }
        fit.sort_unstable();
        val.sort_unstable();
        (fit, val)
    } else {
        (labeled.to_vec(), labeled.to_vec())
    }
}
