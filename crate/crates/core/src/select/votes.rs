//! Four importance scorers, each voting a feature useful or not.
//!
//! Rows are put into a canonical order (by label, then features) before any
//! scorer runs, which makes the votes independent of the input row order.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::SelectError;
use crate::eval::{EvalConfig, EvalError};
use crate::fingerprint::{Feature, PairRecord, FEATURE_COUNT};
use crate::learners::{fit_cart, fit_lasso, fit_ols, lasso_alpha_max, FeatureMatrix, TreeParams};

/// Features kept by recursive elimination.
const RFE_KEEP: usize = FEATURE_COUNT / 2;
/// Lasso penalty as a fraction of the smallest all-zero penalty.
const LASSO_ALPHA_RATIO: f64 = 0.05;
const CHI2_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Voter {
    ChiSquare,
    TreeImportance,
    L1,
    Rfe,
}

impl Voter {
    pub const ALL: [Voter; 4] = [Voter::ChiSquare, Voter::TreeImportance, Voter::L1, Voter::Rfe];

    pub fn name(self) -> &'static str {
        match self {
            Voter::ChiSquare => "chi_square",
            Voter::TreeImportance => "tree_importance",
            Voter::L1 => "l1",
            Voter::Rfe => "rfe",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVotes {
    pub feature: Feature,
    /// One entry per [`Voter::ALL`].
    pub votes: [bool; 4],
    pub scores: [f64; 4],
}

impl FeatureVotes {
    pub fn total(&self) -> usize {
        self.votes.iter().filter(|v| **v).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteTable {
    pub rows: Vec<FeatureVotes>,
}

impl VoteTable {
    pub fn total(&self, f: Feature) -> usize {
        self.rows[f.index()].total()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["feature".to_string()];
        header.extend(Voter::ALL.iter().map(|v| v.name().to_string()));
        header.extend(Voter::ALL.iter().map(|v| format!("{}_score", v.name())));
        header.push("total".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.feature.name().to_string()];
            rec.extend(r.votes.iter().map(|v| u8::from(*v).to_string()));
            rec.extend(r.scores.iter().map(|s| s.to_string()));
            rec.push(r.total().to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Votes each of the 14 features useful or not with four scorers:
///
/// 1. chi-square of decile-binned feature vs proximity class (top half),
/// 2. CART squared-error importance on the distance label (top half),
/// 3. nonzero lasso coefficient on the standardised features,
/// 4. survival of recursive OLS elimination down to seven features.
///
/// A top-half vote also requires a strictly positive score, so a constant
/// column never gets one.
pub fn importance_votes(train: &[PairRecord], eval_cfg: &EvalConfig) -> Result<VoteTable, SelectError> {
    if train.is_empty() {
        return Err(SelectError::EmptyTrainingSet);
    }
    let positive = train.iter().filter(|p| p.label_m < eval_cfg.proximity_threshold_m).count();
    if positive == 0 || positive == train.len() {
        return Err(SelectError::DegenerateLabels);
    }

    let mut order: Vec<&PairRecord> = train.iter().collect();
    order.sort_by(|a, b| {
        a.label_m.total_cmp(&b.label_m).then_with(|| {
            a.features.iter().zip(&b.features).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
        })
    });
    let rows: Vec<[f64; FEATURE_COUNT]> = order.iter().map(|p| p.features).collect();
    let x = FeatureMatrix::from_rows(&rows);
    let y: Vec<f64> = order.iter().map(|p| p.label_m).collect();
    let class: Vec<bool> = y.iter().map(|&l| l < eval_cfg.proximity_threshold_m).collect();

    let chi: Vec<f64> = (0..FEATURE_COUNT).map(|j| chi_square(&x.column(j), &class)).collect();

    let leaf = (y.len() / 200).max(5);
    let tree = fit_cart(&x, &y, TreeParams { max_depth: Some(8), min_samples_leaf: leaf })?;
    let tree_imp = tree.feature_importances();

    let alpha = LASSO_ALPHA_RATIO * lasso_alpha_max(&x, &y);
    let lasso: Vec<f64> = fit_lasso(&x, &y, alpha)?.into_iter().map(f64::abs).collect();

    let (rfe_keep, rfe_score) = recursive_elimination(&x, &y)?;

    let chi_votes = top_half(&chi);
    let tree_votes = top_half(&tree_imp);
    let rows = Feature::ALL
        .iter()
        .map(|&f| {
            let j = f.index();
            FeatureVotes {
                feature: f,
                votes: [chi_votes[j], tree_votes[j], lasso[j] > 1e-9, rfe_keep[j]],
                scores: [chi[j], tree_imp[j], lasso[j], rfe_score[j]],
            }
        })
        .collect();
    Ok(VoteTable { rows })
}

/// Marks the `FEATURE_COUNT / 2` highest positive scores; equal scores rank
/// the lower feature index first.
fn top_half(scores: &[f64]) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out = vec![false; scores.len()];
    for &i in idx.iter().take(scores.len() / 2) {
        out[i] = scores[i] > 0.0;
    }
    out
}

/// Pearson chi-square statistic of the (decile bin x class) contingency table.
fn chi_square(values: &[f64], class: &[bool]) -> f64 {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..CHI2_BINS).map(|q| sorted[(q * n / CHI2_BINS).min(n - 1)]).collect();
    cuts.dedup();
    let mut table = vec![[0u64; 2]; cuts.len() + 1];
    for (&v, &c) in values.iter().zip(class) {
        let bin = cuts.iter().filter(|&&cut| v >= cut).count();
        table[bin][usize::from(c)] += 1;
    }
    let col_tot = [table.iter().map(|r| r[0]).sum::<u64>(), table.iter().map(|r| r[1]).sum::<u64>()];
    let mut stat = 0.0;
    for row in &table {
        let row_tot = (row[0] + row[1]) as f64;
        for c in 0..2 {
            let expected = row_tot * col_tot[c] as f64 / n as f64;
            if expected > 0.0 {
                let d = row[c] as f64 - expected;
                stat += d * d / expected;
            }
        }
    }
    stat
}

/// Repeatedly fits OLS and drops the feature with the smallest absolute
/// standardised weight (ties drop the higher index) until `RFE_KEEP` remain.
/// Returns survival flags and the round in which each feature was dropped
/// (survivors score `FEATURE_COUNT`).
fn recursive_elimination(x: &FeatureMatrix, y: &[f64]) -> Result<(Vec<bool>, Vec<f64>), SelectError> {
    let mut remaining: Vec<usize> = (0..FEATURE_COUNT).collect();
    let mut dropped_at = vec![FEATURE_COUNT as f64; FEATURE_COUNT];
    let mut round = 0;
    while remaining.len() > RFE_KEEP {
        let model = fit_ols(&x.select_columns(&remaining), y)?;
        let (pos, _) = model
            .weights
            .iter()
            .enumerate()
            .min_by(|(ia, a), (ib, b)| a.abs().total_cmp(&b.abs()).then(ib.cmp(ia)))
            .expect("at least one remaining feature");
        dropped_at[remaining[pos]] = round as f64;
        remaining.remove(pos);
        round += 1;
    }
    let mut keep = vec![false; FEATURE_COUNT];
    for i in remaining {
        keep[i] = true;
    }
    Ok((keep, dropped_at))
}
