use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LearnError, LearnerKind, LearnerSpec, TrainedModel, Weighting};
use crate::eval::{f_beta_score, EvalConfig};
use crate::fingerprint::{filter_by_label, PairRecord};
use crate::par;
use crate::select::FeatureMask;

/// Sampling distribution of one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Domain {
    Uniform {
        low: f64,
        high: f64,
    },
    LogUniform {
        low: f64,
        high: f64,
    },
    /// Integers in `low..=high`.
    Int {
        low: i64,
        high: i64,
    },
    Choice {
        values: Vec<f64>,
    },
}

impl Domain {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Domain::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(*low..*high)
                }
            }
            Domain::LogUniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(low.ln()..high.ln()).exp()
                }
            }
            Domain::Int { low, high } => rng.random_range(*low..=*high) as f64,
            Domain::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }

    fn validate(&self, name: &str) -> Result<(), LearnError> {
        let ok = match self {
            Domain::Uniform { low, high } => low <= high && low.is_finite() && high.is_finite(),
            Domain::LogUniform { low, high } => *low > 0.0 && low <= high && high.is_finite(),
            Domain::Int { low, high } => low <= high,
            Domain::Choice { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(LearnError::InvalidHyperparameter(format!("empty or invalid range for {name}")))
        }
    }
}

/// Per-learner search ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperSpace {
    pub ridge_lambda: Domain,
    pub knn_k: Domain,
    pub knn_weighting: Vec<Weighting>,
    pub cart_max_depth: Domain,
    pub cart_min_samples_leaf: Domain,
    pub gbt_n_trees: Domain,
    pub gbt_learning_rate: Domain,
    pub gbt_max_depth: Domain,
    pub gbt_min_samples_leaf: Domain,
    pub n_draws: usize,
    pub seed: u64,
}

impl Default for HyperSpace {
    fn default() -> Self {
        HyperSpace {
            ridge_lambda: Domain::LogUniform { low: 1e-6, high: 1e3 },
            knn_k: Domain::Int { low: 1, high: 50 },
            knn_weighting: vec![Weighting::Uniform, Weighting::InverseDistance],
            cart_max_depth: Domain::Int { low: 2, high: 30 },
            cart_min_samples_leaf: Domain::Int { low: 1, high: 100 },
            gbt_n_trees: Domain::Int { low: 50, high: 500 },
            gbt_learning_rate: Domain::Uniform { low: 0.01, high: 0.3 },
            gbt_max_depth: Domain::Int { low: 2, high: 8 },
            gbt_min_samples_leaf: Domain::Int { low: 1, high: 20 },
            n_draws: 20,
            seed: 0,
        }
    }
}

impl HyperSpace {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.n_draws == 0 {
            return Err(LearnError::InvalidHyperparameter("n_draws must be >= 1".into()));
        }
        if self.knn_weighting.is_empty() {
            return Err(LearnError::InvalidHyperparameter("knn_weighting must list at least one scheme".into()));
        }
        for (d, name) in [
            (&self.ridge_lambda, "ridge_lambda"),
            (&self.knn_k, "knn_k"),
            (&self.cart_max_depth, "cart_max_depth"),
            (&self.cart_min_samples_leaf, "cart_min_samples_leaf"),
            (&self.gbt_n_trees, "gbt_n_trees"),
            (&self.gbt_learning_rate, "gbt_learning_rate"),
            (&self.gbt_max_depth, "gbt_max_depth"),
            (&self.gbt_min_samples_leaf, "gbt_min_samples_leaf"),
        ] {
            d.validate(name)?;
        }
        Ok(())
    }

    /// Draws one configuration; integer parameters are clamped to at least 1
    /// and KNN's `k` to at most `n_train`.
    pub fn sample<R: Rng>(&self, kind: LearnerKind, n_train: usize, rng: &mut R) -> LearnerSpec {
        let int = |d: &Domain, rng: &mut R| d.sample(rng).round().max(1.0) as usize;
        match kind {
            LearnerKind::Ols => LearnerSpec::Ols,
            LearnerKind::Ridge => LearnerSpec::Ridge { lambda: self.ridge_lambda.sample(rng).max(0.0) },
            LearnerKind::Knn => {
                let k = int(&self.knn_k, rng).min(n_train.max(1));
                let weighting = self.knn_weighting[rng.random_range(0..self.knn_weighting.len())];
                LearnerSpec::Knn { k, weighting }
            }
            LearnerKind::Cart => LearnerSpec::Cart {
                max_depth: Some(int(&self.cart_max_depth, rng)),
                min_samples_leaf: int(&self.cart_min_samples_leaf, rng),
            },
            LearnerKind::Gbt => LearnerSpec::Gbt {
                n_trees: int(&self.gbt_n_trees, rng),
                learning_rate: self.gbt_learning_rate.sample(rng).clamp(0.0, 1.0),
                max_depth: int(&self.gbt_max_depth, rng),
                min_samples_leaf: int(&self.gbt_min_samples_leaf, rng),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub spec: LearnerSpec,
    pub f_beta: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: TrainedModel,
    pub best_index: usize,
    pub trials: Vec<Trial>,
}

/// Fits one model per sampled configuration on `train`, scores F-beta on
/// `validation` and keeps the best; ties go to the earliest draw.
///
/// All configurations are drawn up front from one seeded stream, so the
/// result does not depend on how the fits are scheduled.
pub fn random_search(
    kind: LearnerKind,
    space: &HyperSpace,
    train: &[PairRecord],
    validation: &[PairRecord],
    mask: &FeatureMask,
    train_filter_m: Option<f64>,
    eval_cfg: &EvalConfig,
) -> Result<SearchOutcome, LearnError> {
    space.validate()?;
    if validation.is_empty() {
        return Err(LearnError::EmptyValidationSet);
    }
    let n_train = match train_filter_m {
        Some(m) => filter_by_label(train, m).len(),
        None => train.len(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
    let draws = if kind == LearnerKind::Ols { 1 } else { space.n_draws };
    let specs: Vec<LearnerSpec> = (0..draws).map(|_| space.sample(kind, n_train, &mut rng)).collect();
    let y_val: Vec<f64> = validation.iter().map(|p| p.label_m).collect();

    let fitted = par::map_slice(&specs, |spec| -> Result<(TrainedModel, f64), LearnError> {
        let model = TrainedModel::train(spec, train, mask, train_filter_m)?;
        let score = f_beta_score(&y_val, &model.predict_pairs(validation), eval_cfg).expect("validation is non-empty");
        Ok((model, score))
    });

    let mut trials = Vec::with_capacity(specs.len());
    let mut best: Option<(usize, TrainedModel, f64)> = None;
    for (i, result) in fitted.into_iter().enumerate() {
        let (model, score) = result?;
        trials.push(Trial { spec: model.spec.clone(), f_beta: score });
        if best.as_ref().is_none_or(|(_, _, s)| score > *s) {
            best = Some((i, model, score));
        }
    }
    let (best_index, best, _) = best.expect("at least one draw");
    Ok(SearchOutcome { best, best_index, trials })
}
