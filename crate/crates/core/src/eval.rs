//! Regression error metrics, proximity classification at a distance
//! threshold, F-beta scoring and evaluation reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::PairRecord;
use crate::learners::TrainedModel;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {actual} actual values vs {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("invalid evaluation configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub beta: f64,
    pub proximity_threshold_m: f64,
    /// Also score the subset with `label_m <= restrict_to_max_label_m`.
    pub restrict_to_max_label_m: Option<f64>,
    pub repeats: usize,
    pub histogram_bin_m: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { beta: 0.05, proximity_threshold_m: 4.0, restrict_to_max_label_m: None, repeats: 10, histogram_bin_m: 1.0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) || !(self.proximity_threshold_m > 0.0) {
            return Err(EvalError::InvalidConfig("beta and proximity_threshold_m must be positive".into()));
        }
        if !(self.histogram_bin_m > 0.0) || self.restrict_to_max_label_m.is_some_and(|m| !(m > 0.0)) {
            return Err(EvalError::InvalidConfig("histogram_bin_m and restrict_to_max_label_m must be positive".into()));
        }
        Ok(())
    }
}

fn check(y: &[f64], y_hat: &[f64]) -> Result<(), EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::LengthMismatch { actual: y.len(), predicted: y_hat.len() });
    }
    if y.is_empty() {
        return Err(EvalError::EmptyEvalSet);
    }
    Ok(())
}

pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64, EvalError> {
    check(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, EvalError> {
    mse(y, y_hat).map(f64::sqrt)
}

pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64, EvalError> {
    check(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Confusion counts of the "closer than the threshold" classification.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let den = self.tp + self.fp;
        (den > 0).then(|| self.tp as f64 / den as f64)
    }

    /// `None` when there are no actual positives.
    pub fn recall(&self) -> Option<f64> {
        let den = self.tp + self.fn_;
        (den > 0).then(|| self.tp as f64 / den as f64)
    }
}

/// A value is positive iff it is strictly below `threshold_m`, on both the
/// actual and the predicted side.
pub fn classify_proximity(y: &[f64], y_hat: &[f64], threshold_m: f64) -> Result<Confusion, EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::LengthMismatch { actual: y.len(), predicted: y_hat.len() });
    }
    let mut c = Confusion::default();
    for (&a, &p) in y.iter().zip(y_hat) {
        match (a < threshold_m, p < threshold_m) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `(1 + b^2) P R / (b^2 P + R)`; 0 when both are 0.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

/// F-beta of a prediction vector; undefined precision or recall count as 0.
pub fn f_beta_score(y: &[f64], y_hat: &[f64], cfg: &EvalConfig) -> Result<f64, EvalError> {
    let c = classify_proximity(y, y_hat, cfg.proximity_threshold_m)?;
    Ok(f_beta(c.precision().unwrap_or(0.0), c.recall().unwrap_or(0.0), cfg.beta))
}

/// 2-D counts of (actual bin, predicted bin); bin `i` covers `[i*w, (i+1)*w)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Histogram {
    pub bin_width_m: f64,
    pub counts: BTreeMap<(i64, i64), u64>,
}

impl Histogram {
    pub fn build(y: &[f64], y_hat: &[f64], bin_width_m: f64) -> Histogram {
        let bin = |v: f64| (v / bin_width_m).floor() as i64;
        let mut counts = BTreeMap::new();
        for (&a, &p) in y.iter().zip(y_hat) {
            *counts.entry((bin(a), bin(p))).or_insert(0) += 1;
        }
        Histogram { bin_width_m, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["actual_bin_lo_m", "predicted_bin_lo_m", "bin_width_m", "count"])?;
        for (&(a, p), &n) in &self.counts {
            let lo = |b: i64| (b as f64 * self.bin_width_m).to_string();
            w.write_record([lo(a), lo(p), self.bin_width_m.to_string(), n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn export_histogram(hist: &Histogram, path: &Path) -> Result<(), EvalError> {
    hist.write_csv(std::fs::File::create(path)?)
}

/// All metrics for one prediction set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mse: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub f_beta_std: f64,
    /// Set when there were no predicted positives; `precision` is then 0.
    pub precision_undefined: bool,
    /// Set when there were no actual positives; `recall` is then 0.
    pub recall_undefined: bool,
    pub confusion: Confusion,
    pub histogram: Histogram,
}

impl MetricSet {
    pub fn compute(y: &[f64], y_hat: &[f64], cfg: &EvalConfig) -> Result<MetricSet, EvalError> {
        check(y, y_hat)?;
        let confusion = classify_proximity(y, y_hat, cfg.proximity_threshold_m)?;
        let precision = confusion.precision();
        let recall = confusion.recall();
        let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
        let mse = mse(y, y_hat)?;
        Ok(MetricSet {
            n: y.len(),
            mae: mae(y, y_hat)?,
            rmse: mse.sqrt(),
            mse,
            precision: p,
            recall: r,
            f_beta: f_beta(p, r, cfg.beta),
            f_beta_std: 0.0,
            precision_undefined: precision.is_none(),
            recall_undefined: recall.is_none(),
            confusion,
            histogram: Histogram::build(y, y_hat, cfg.histogram_bin_m),
        })
    }
}

/// Evaluation of one model on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub learner: String,
    pub full: MetricSet,
    pub restricted: Option<MetricSet>,
    pub restrict_m: Option<f64>,
    pub train_time_s: f64,
    /// Mean wall time of one prediction pass over the full set.
    pub test_time_s: f64,
}

/// Predicts `pairs` `cfg.repeats` times, then scores the full set and, when
/// configured, the label-restricted subset.
///
/// All learners are deterministic, so repeats only average the timing and
/// the reported F-beta deviation is that of identical runs (0).
pub fn evaluate(model: &TrainedModel, pairs: &[PairRecord], cfg: &EvalConfig, dataset: &str) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyEvalSet);
    }
    let y: Vec<f64> = pairs.iter().map(|p| p.label_m).collect();
    let repeats = cfg.repeats.max(1);
    let mut predictions = Vec::new();
    let mut elapsed = 0.0;
    let mut scores = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let y_hat = model.predict_pairs(pairs);
        elapsed += start.elapsed().as_secs_f64();
        scores.push(f_beta_score(&y, &y_hat, cfg)?);
        predictions = y_hat;
    }
    let mut full = MetricSet::compute(&y, &predictions, cfg)?;
    full.f_beta_std = std_dev(&scores);

    let restricted = match cfg.restrict_to_max_label_m {
        Some(max_m) => {
            let (ys, ps): (Vec<f64>, Vec<f64>) = y.iter().zip(&predictions).filter(|(a, _)| **a <= max_m).map(|(a, p)| (*a, *p)).unzip();
            if ys.is_empty() {
                return Err(EvalError::EmptyEvalSet);
            }
            Some(MetricSet::compute(&ys, &ps, cfg)?)
        }
        None => None,
    };
    Ok(EvalReport {
        dataset: dataset.to_string(),
        learner: model.spec.kind().name().to_string(),
        full,
        restricted,
        restrict_m: cfg.restrict_to_max_label_m,
        train_time_s: model.train_time_s,
        test_time_s: elapsed / repeats as f64,
    })
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// One line of a report CSV: the error and classification columns plus
/// train/test timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    #[serde(rename = "ML")]
    pub learner: String,
    /// `all`, or `le<m>` for the label-restricted subset.
    pub subset: String,
    pub n: usize,
    #[serde(rename = "MAE")]
    pub mae: f64,
    #[serde(rename = "RMSE")]
    pub rmse: f64,
    #[serde(rename = "MSE")]
    pub mse: f64,
    #[serde(rename = "Prec")]
    pub precision: f64,
    #[serde(rename = "Recall")]
    pub recall: f64,
    #[serde(rename = "F_beta")]
    pub f_beta: f64,
    #[serde(rename = "F_beta_std")]
    pub f_beta_std: f64,
    #[serde(rename = "Train-t")]
    pub train_time_s: f64,
    #[serde(rename = "Test-t")]
    pub test_time_s: f64,
    #[serde(rename = "TP")]
    pub tp: u64,
    #[serde(rename = "FP")]
    pub fp: u64,
    #[serde(rename = "FN")]
    pub fn_: u64,
    #[serde(rename = "TN")]
    pub tn: u64,
}

impl EvalReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        let row = |subset: String, m: &MetricSet| ReportRow {
            dataset: self.dataset.clone(),
            learner: self.learner.clone(),
            subset,
            n: m.n,
            mae: m.mae,
            rmse: m.rmse,
            mse: m.mse,
            precision: m.precision,
            recall: m.recall,
            f_beta: m.f_beta,
            f_beta_std: m.f_beta_std,
            train_time_s: self.train_time_s,
            test_time_s: self.test_time_s,
            tp: m.confusion.tp,
            fp: m.confusion.fp,
            fn_: m.confusion.fn_,
            tn: m.confusion.tn,
        };
        let mut rows = vec![row("all".into(), &self.full)];
        if let (Some(m), Some(max_m)) = (&self.restricted, self.restrict_m) {
            rows.push(row(format!("le{max_m}"), m));
        }
        rows
    }
}

pub fn write_report_rows(rows: &[ReportRow], path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_rows(path: &Path) -> Result<Vec<ReportRow>, EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn error_metrics() {
        let y = [1.0, 2.5, -3.0];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);

        assert_eq!(mse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355).abs() < 1e-4);
        assert_eq!(mae(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 3.5);

        assert_eq!(rmse(&[5.0], &[7.0]).unwrap(), 2.0);
        assert_eq!(mae(&[5.0], &[7.0]).unwrap(), 2.0);
        assert_eq!(mse(&[5.0], &[7.0]).unwrap(), 4.0);

        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(mae(&[], &[]), Err(EvalError::EmptyEvalSet)));
    }

    #[test]
    fn proximity_boundaries() {
        let c = |a: f64, p: f64| classify_proximity(&[a], &[p], 4.0).unwrap();
        assert_eq!(c(3.9, 3.9).tp, 1);
        assert_eq!(c(4.0, 3.0).fp, 1);
        assert_eq!(c(3.0, 10.0).fn_, 1);
        assert_eq!(c(4.0, 4.0).tn, 1);
    }

    #[test]
    fn f_beta_table_anchors() {
        assert!((f_beta(0.667, 0.160, 0.05) - 0.662).abs() <= 1e-3);
        assert!((f_beta(1.000, 0.002, 0.05) - 0.446).abs() <= 1e-3);
        assert_eq!(f_beta(0.0, 0.0, 0.05), 0.0);
        for p in [0.1, 0.5, 0.93] {
            for b in [0.05, 1.0, 3.0] {
                assert!((f_beta(p, p, b) - p).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn histogram_binning() {
        let h = Histogram::build(&[0.5, 1.2, 3.99], &[0.7, 2.0, -0.1], 1.0);
        let expected: BTreeMap<(i64, i64), u64> = [((0, 0), 1), ((1, 2), 1), ((3, -1), 1)].into_iter().collect();
        assert_eq!(h.counts, expected);

        let y = [0.5, 7.2, 12.0, 3.3];
        let perfect = Histogram::build(&y, &y, 1.0);
        assert!(perfect.counts.keys().all(|(a, p)| a == p));
        let constant = Histogram::build(&y, &[9.0; 4], 1.0);
        assert!(constant.counts.keys().all(|&(_, p)| p == 9));
        assert_eq!(constant.total(), 4);

        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "actual_bin_lo_m,predicted_bin_lo_m,bin_width_m,count");
        assert!(text.contains("3,-1,1,1"));
    }

    #[test]
    fn metric_set_flags_undefined() {
        let cfg = EvalConfig::default();
        let m = MetricSet::compute(&[1.0, 2.0], &[100.0, 100.0], &cfg).unwrap();
        assert!(m.precision_undefined);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f_beta, 0.0);
        assert_eq!(m.confusion.total(), 2);
    }

    proptest! {
        #[test]
        fn f_beta_monotone(p in 0.0f64..=1.0, r in 0.0f64..=1.0, dp in 0.0f64..0.5, dr in 0.0f64..0.5, beta in 0.01f64..3.0) {
            let base = f_beta(p, r, beta);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&base));
            prop_assert!(f_beta((p + dp).min(1.0), r, beta) >= base - 1e-12);
            prop_assert!(f_beta(p, (r + dr).min(1.0), beta) >= base - 1e-12);
        }

        #[test]
        fn rmse_squared_is_mse(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..200)) {
            let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = rmse(&y, &p).unwrap();
            let m = mse(&y, &p).unwrap();
            prop_assert!((r * r - m).abs() <= 1e-12 * m.max(f64::MIN_POSITIVE));
        }
    }
}
