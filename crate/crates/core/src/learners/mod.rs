//! From-scratch regressors and random-search tuning.
//!
//! Linear and KNN learners standardise features with statistics taken from
//! the training rows only and store them in the fitted model. Tree learners
//! consume raw features.

mod gbt;
mod knn;
mod linear;
mod search;
mod tree;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::{filter_by_label, PairRecord, FEATURE_COUNT};
use crate::par;
use crate::select::FeatureMask;

pub use gbt::{fit_gbt, BoostedTrees};
pub use knn::{fit_knn, KnnModel, Weighting};
pub use linear::{fit_lasso, fit_ols, fit_ridge, lasso_alpha_max, LinearModel, Standardizer};
pub use search::{random_search, Domain, HyperSpace, SearchOutcome, Trial};
pub use tree::{fit_cart, Node, Tree, TreeBuilder, TreeParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("validation set is empty")]
    EmptyValidationSet,
    #[error("feature matrix has {rows} rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("feature mask selects no features")]
    EmptyMask,
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize) -> FeatureMatrix {
        assert_eq!(data.len(), n_rows * n_cols, "matrix data does not match its shape");
        FeatureMatrix { data, n_rows, n_cols }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> FeatureMatrix {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), n_cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        FeatureMatrix { data, n_rows: rows.len(), n_cols }
    }

    /// Feature columns selected by `mask`, in canonical order.
    pub fn from_pairs(pairs: &[PairRecord], mask: &FeatureMask) -> FeatureMatrix {
        let cols = mask.indices();
        let mut data = Vec::with_capacity(pairs.len() * cols.len());
        for p in pairs {
            data.extend(cols.iter().map(|&c| p.features[c]));
        }
        FeatureMatrix { data, n_rows: pairs.len(), n_cols: cols.len() }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    /// Copy keeping only the listed columns.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for r in self.rows() {
            data.extend(cols.iter().map(|&c| r[c]));
        }
        FeatureMatrix { data, n_rows: self.n_rows, n_cols: cols.len() }
    }
}

pub(crate) fn check_training(x: &FeatureMatrix, y: &[f64]) -> Result<(), LearnError> {
    if x.n_rows() != y.len() {
        return Err(LearnError::LabelMismatch { rows: x.n_rows(), labels: y.len() });
    }
    if y.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Ols,
    Ridge,
    Knn,
    Cart,
    Gbt,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [LearnerKind::Ols, LearnerKind::Ridge, LearnerKind::Knn, LearnerKind::Cart, LearnerKind::Gbt];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Ols => "ols",
            LearnerKind::Ridge => "ridge",
            LearnerKind::Knn => "knn",
            LearnerKind::Cart => "cart",
            LearnerKind::Gbt => "gbt",
        }
    }

    /// Hyperparameters used when a learner is trained without tuning.
    pub fn default_spec(self) -> LearnerSpec {
        match self {
            LearnerKind::Ols => LearnerSpec::Ols,
            LearnerKind::Ridge => LearnerSpec::Ridge { lambda: 1.0 },
            LearnerKind::Knn => LearnerSpec::Knn { k: 5, weighting: Weighting::Uniform },
            LearnerKind::Cart => LearnerSpec::Cart { max_depth: Some(10), min_samples_leaf: 5 },
            LearnerKind::Gbt => LearnerSpec::Gbt { n_trees: 200, learning_rate: 0.1, max_depth: 4, min_samples_leaf: 1 },
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown learner `{s}` (expected ols, ridge, knn, cart or gbt)"))
    }
}

/// A learner together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Ols,
    Ridge { lambda: f64 },
    Knn { k: usize, weighting: Weighting },
    Cart { max_depth: Option<usize>, min_samples_leaf: usize },
    Gbt { n_trees: usize, learning_rate: f64, max_depth: usize, min_samples_leaf: usize },
}

impl LearnerSpec {
    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerSpec::Ols => LearnerKind::Ols,
            LearnerSpec::Ridge { .. } => LearnerKind::Ridge,
            LearnerSpec::Knn { .. } => LearnerKind::Knn,
            LearnerSpec::Cart { .. } => LearnerKind::Cart,
            LearnerSpec::Gbt { .. } => LearnerKind::Gbt,
        }
    }

    pub fn fit(&self, x: &FeatureMatrix, y: &[f64]) -> Result<Regressor, LearnError> {
        Ok(match *self {
            LearnerSpec::Ols => Regressor::Linear(fit_ols(x, y)?),
            LearnerSpec::Ridge { lambda } => Regressor::Linear(fit_ridge(x, y, lambda)?),
            LearnerSpec::Knn { k, weighting } => Regressor::Knn(fit_knn(x, y, k, weighting)?),
            LearnerSpec::Cart { max_depth, min_samples_leaf } => {
                Regressor::Tree(fit_cart(x, y, TreeParams { max_depth, min_samples_leaf })?)
            }
            LearnerSpec::Gbt { n_trees, learning_rate, max_depth, min_samples_leaf } => {
                Regressor::Boosted(fit_gbt(x, y, n_trees, learning_rate, TreeParams { max_depth: Some(max_depth), min_samples_leaf })?)
            }
        })
    }
}

/// Fitted parameters of any learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Regressor {
    Linear(LinearModel),
    Knn(KnnModel),
    Tree(Tree),
    Boosted(BoostedTrees),
}

impl Regressor {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Regressor::Linear(m) => m.predict(row),
            Regressor::Knn(m) => m.predict(row),
            Regressor::Tree(m) => m.predict(row),
            Regressor::Boosted(m) => m.predict(row),
        }
    }

    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Vec<f64> {
        par::map_range(x.n_rows(), |i| self.predict(x.row(i)))
    }
}

/// A fitted learner plus everything needed to apply it to raw pair records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: LearnerSpec,
    pub mask: FeatureMask,
    /// Label threshold applied to the training pairs, if any.
    pub train_filter_m: Option<f64>,
    /// Datasets the training pairs came from.
    pub train_datasets: Vec<String>,
    pub n_train: usize,
    pub train_time_s: f64,
    pub regressor: Regressor,
}

impl TrainedModel {
    /// Filters `pairs` by `train_filter_m`, projects them onto `mask` and fits `spec`.
    pub fn train(
        spec: &LearnerSpec,
        pairs: &[PairRecord],
        mask: &FeatureMask,
        train_filter_m: Option<f64>,
    ) -> Result<TrainedModel, LearnError> {
        if mask.count() == 0 {
            return Err(LearnError::EmptyMask);
        }
        let filtered;
        let used = match train_filter_m {
            Some(m) => {
                filtered = filter_by_label(pairs, m);
                &filtered[..]
            }
            None => pairs,
        };
        let x = FeatureMatrix::from_pairs(used, mask);
        let y: Vec<f64> = used.iter().map(|p| p.label_m).collect();
        let start = Instant::now();
        let regressor = spec.fit(&x, &y)?;
        let train_time_s = start.elapsed().as_secs_f64();
        let mut train_datasets: Vec<String> = used.iter().map(|p| p.dataset_id.clone()).collect();
        train_datasets.sort();
        train_datasets.dedup();
        Ok(TrainedModel { spec: spec.clone(), mask: *mask, train_filter_m, train_datasets, n_train: used.len(), train_time_s, regressor })
    }

    /// Prediction for a full 14-feature row.
    pub fn predict_features(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        let row: Vec<f64> = self.mask.indices().into_iter().map(|i| features[i]).collect();
        self.regressor.predict(&row)
    }

    pub fn predict_pairs(&self, pairs: &[PairRecord]) -> Vec<f64> {
        self.regressor.predict_matrix(&FeatureMatrix::from_pairs(pairs, &self.mask))
    }
}
