//! End-to-end experiment on an in-memory dataset: pairing, pool split,
//! label filtering, GA feature selection, random-search tuning and
//! validation scoring against a constant-mean baseline.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{f_beta_score, mae, EvalConfig};
use crate::fingerprint::{filter_by_label, generate_pairs, Fingerprint, PairRecord, PipelineConfig};
use crate::io::{split_pool, Split};
use crate::learners::{random_search, HyperSpace, LearnerKind, LearnerSpec, TrainedModel};
use crate::select::{ga_select, FeatureMask, GaConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: PipelineConfig,
    pub ga: GaConfig,
    pub search: HyperSpace,
    pub eval: EvalConfig,
    pub learner: LearnerKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pipeline: PipelineConfig::default(),
            ga: GaConfig::default(),
            search: HyperSpace::default(),
            eval: EvalConfig::default(),
            learner: LearnerKind::Gbt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub n_pairs: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub mask: FeatureMask,
    pub ga_fitness: f64,
    pub spec: LearnerSpec,
    pub validation_f_beta: f64,
    /// Validation pairs within the training label filter.
    pub n_restricted: usize,
    pub mae_model: f64,
    /// MAE of predicting the mean filtered training label everywhere.
    pub mae_baseline: f64,
}

impl ExperimentSummary {
    /// Relative MAE reduction over the baseline.
    pub fn improvement(&self) -> f64 {
        1.0 - self.mae_model / self.mae_baseline
    }
}

/// Train and validation pairs of a seeded pool split.
pub fn split_train_validation(pairs: &[PairRecord], cfg: &PipelineConfig) -> Result<(Vec<PairRecord>, Vec<PairRecord>)> {
    let assignment = split_pool(pairs, &cfg.split, cfg.seed)?;
    let take = |s| assignment.select(pairs, s).into_iter().cloned().collect::<Vec<_>>();
    Ok((take(Split::Train), take(Split::Validation)))
}

pub fn run_experiment(fingerprints: &[Fingerprint], cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.pipeline.validate()?;
    let pairs = generate_pairs(fingerprints, &cfg.pipeline);
    let (train, validation) = split_train_validation(&pairs, &cfg.pipeline)?;
    let filter = Some(cfg.pipeline.train_filter_m);

    let ga = ga_select(&train, &validation, &GaConfig { train_filter_m: filter, ..cfg.ga.clone() }, &cfg.eval)?;
    let search = random_search(cfg.learner, &cfg.search, &train, &validation, &ga.best_mask, filter, &cfg.eval)?;
    let model = search.best;

    let y_val: Vec<f64> = validation.iter().map(|p| p.label_m).collect();
    let validation_f_beta = f_beta_score(&y_val, &model.predict_pairs(&validation), &cfg.eval)?;

    let near = filter_by_label(&validation, cfg.pipeline.train_filter_m);
    let y_near: Vec<f64> = near.iter().map(|p| p.label_m).collect();
    let train_near = filter_by_label(&train, cfg.pipeline.train_filter_m);
    let mean = train_near.iter().map(|p| p.label_m).sum::<f64>() / train_near.len() as f64;
    let mae_model = mae(&y_near, &model.predict_pairs(&near))?;
    let mae_baseline = mae(&y_near, &vec![mean; y_near.len()])?;

    Ok(ExperimentSummary {
        n_pairs: pairs.len(),
        n_train: train.len(),
        n_validation: validation.len(),
        mask: ga.best_mask,
        ga_fitness: ga.best_fitness,
        spec: model.spec,
        validation_f_beta,
        n_restricted: near.len(),
        mae_model,
        mae_baseline,
    })
}

/// Validation F-beta of OLS on all features, trained with and without the
/// label filter: `(filtered, unfiltered)`.
pub fn threshold_effect(fingerprints: &[Fingerprint], cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    cfg.pipeline.validate()?;
    let pairs = generate_pairs(fingerprints, &cfg.pipeline);
    let (train, validation) = split_train_validation(&pairs, &cfg.pipeline)?;
    let y_val: Vec<f64> = validation.iter().map(|p| p.label_m).collect();
    let score = |filter: Option<f64>| -> Result<f64> {
        let model = TrainedModel::train(&LearnerSpec::Ols, &train, &FeatureMask::all(), filter)?;
        Ok(f_beta_score(&y_val, &model.predict_pairs(&validation), &cfg.eval)?)
    };
    Ok((score(Some(cfg.pipeline.train_filter_m))?, score(None)?))
}
