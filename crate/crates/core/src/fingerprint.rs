//! Fingerprints, pair records and the rules that turn a list of scans into
//! labelled training pairs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::SplitFractions;
use crate::metrics::{self, MetricParams};
use crate::par;

/// Number of features extracted per pair.
pub const FEATURE_COUNT: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FingerprintError {
    #[error("fingerprint {id} has no readings left after clipping")]
    EmptyAfterClip { id: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// One WiFi scan taken at a known position.
///
/// Readings are keyed by MAC address; the `BTreeMap` keeps them in the
/// lexicographic order used when vectorising the intersection of two scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub id: String,
    pub dataset_id: String,
    pub x_m: f64,
    pub y_m: f64,
    pub floor: i32,
    pub readings: BTreeMap<String, f64>,
}

impl Fingerprint {
    pub fn macs(&self) -> impl Iterator<Item = &str> {
        self.readings.keys().map(String::as_str)
    }

    /// RSSI pairs for the MACs both scans observed, in lexicographic MAC order.
    pub fn intersect(&self, other: &Fingerprint) -> (Vec<f64>, Vec<f64>) {
        let mut u = Vec::new();
        let mut v = Vec::new();
        for (mac, &a) in &self.readings {
            if let Some(&b) = other.readings.get(mac) {
                u.push(a);
                v.push(b);
            }
        }
        (u, v)
    }

    pub fn shared_mac_count(&self, other: &Fingerprint) -> usize {
        let (small, large) = if self.readings.len() <= other.readings.len() { (self, other) } else { (other, self) };
        small.readings.keys().filter(|m| large.readings.contains_key(*m)).count()
    }
}

/// The fourteen pair features, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    BrayCurtis,
    Canberra,
    Chebyshev,
    Cityblock,
    Correlation,
    Cosine,
    Euclidean,
    Jaccard,
    JensenShannon,
    Minkowski,
    SqEuclidean,
    WMinkowski,
    IntersectCount,
    UnionCount,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::BrayCurtis,
        Feature::Canberra,
        Feature::Chebyshev,
        Feature::Cityblock,
        Feature::Correlation,
        Feature::Cosine,
        Feature::Euclidean,
        Feature::Jaccard,
        Feature::JensenShannon,
        Feature::Minkowski,
        Feature::SqEuclidean,
        Feature::WMinkowski,
        Feature::IntersectCount,
        Feature::UnionCount,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column name used in pair files and reports.
    pub fn name(self) -> &'static str {
        match self {
            Feature::BrayCurtis => "braycurtis",
            Feature::Canberra => "canberra",
            Feature::Chebyshev => "chebyshev",
            Feature::Cityblock => "cityblock",
            Feature::Correlation => "correlation",
            Feature::Cosine => "cosine",
            Feature::Euclidean => "euclidean",
            Feature::Jaccard => "jaccard",
            Feature::JensenShannon => "jensenshannon",
            Feature::Minkowski => "minkowski",
            Feature::SqEuclidean => "sqeuclidean",
            Feature::WMinkowski => "wminkowski",
            Feature::IntersectCount => "intersect_count",
            Feature::UnionCount => "union_count",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(name.trim()))
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An eligible fingerprint pair with its extracted features and spatial label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub dataset_id: String,
    pub fp_a_id: String,
    pub fp_b_id: String,
    pub features: [f64; FEATURE_COUNT],
    pub label_m: f64,
}

impl PairRecord {
    pub fn feature(&self, feature: Feature) -> f64 {
        self.features[feature.index()]
    }

    /// Stable identifier of the unordered pair.
    pub fn pair_id(&self) -> String {
        format!("{}/{}|{}", self.dataset_id, self.fp_a_id, self.fp_b_id)
    }
}

/// Settings shared by the feature-extraction stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub rssi_min_dbm: f64,
    pub rssi_max_dbm: f64,
    pub train_filter_m: f64,
    pub proximity_threshold_m: f64,
    pub same_floor_only: bool,
    pub metrics: MetricParams,
    pub split: SplitFractions,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rssi_min_dbm: -95.0,
            rssi_max_dbm: -20.0,
            train_filter_m: 25.0,
            proximity_threshold_m: 4.0,
            same_floor_only: true,
            metrics: MetricParams::default(),
            split: SplitFractions::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), FingerprintError> {
        let bad = |msg: &str| Err(FingerprintError::InvalidConfig(msg.to_string()));
        if !(self.rssi_min_dbm < self.rssi_max_dbm) {
            return bad("rssi_min_dbm must be below rssi_max_dbm");
        }
        if !(self.train_filter_m > 0.0) || !(self.proximity_threshold_m > 0.0) {
            return bad("distance thresholds must be positive");
        }
        self.metrics.validate().map_err(FingerprintError::InvalidConfig)?;
        self.split.validate().map_err(FingerprintError::InvalidConfig)?;
        Ok(())
    }
}

/// Drops every reading outside `[rssi_min_dbm, rssi_max_dbm]`.
///
/// Out-of-range readings are discarded, not saturated.
pub fn clip_fingerprint(fp: &Fingerprint, cfg: &PipelineConfig) -> Result<Fingerprint, FingerprintError> {
    let readings: BTreeMap<String, f64> =
        fp.readings.iter().filter(|(_, &r)| r >= cfg.rssi_min_dbm && r <= cfg.rssi_max_dbm).map(|(m, &r)| (m.clone(), r)).collect();
    if readings.is_empty() {
        return Err(FingerprintError::EmptyAfterClip { id: fp.id.clone() });
    }
    Ok(Fingerprint { readings, ..fp.clone() })
}

/// Same dataset, at least two shared MACs, and the same floor when
/// `same_floor_only` is set.
pub fn pair_eligible(a: &Fingerprint, b: &Fingerprint, cfg: &PipelineConfig) -> bool {
    a.dataset_id == b.dataset_id && (!cfg.same_floor_only || a.floor == b.floor) && a.shared_mac_count(b) >= 2
}

/// Planar Euclidean distance between the two scan positions, in meters.
pub fn label_distance(a: &Fingerprint, b: &Fingerprint) -> f64 {
    (a.x_m - b.x_m).hypot(a.y_m - b.y_m)
}

/// Builds one record per unordered eligible pair `(i, j)`, `i < j`.
///
/// Rows are partitioned by `i` across workers and concatenated in index
/// order, so the output order depends only on the input order.
pub fn generate_pairs(dataset: &[Fingerprint], cfg: &PipelineConfig) -> Vec<PairRecord> {
    par::flat_map_range(dataset.len(), |i| {
        let a = &dataset[i];
        dataset[i + 1..]
            .iter()
            .filter(|b| pair_eligible(a, b, cfg))
            .map(|b| PairRecord {
                dataset_id: a.dataset_id.clone(),
                fp_a_id: a.id.clone(),
                fp_b_id: b.id.clone(),
                features: metrics::extract_features(a, b, &cfg.metrics),
                label_m: label_distance(a, b),
            })
            .collect()
    })
}

/// Keeps pairs with `label_m <= max_m`, preserving order.
pub fn filter_by_label(pairs: &[PairRecord], max_m: f64) -> Vec<PairRecord> {
    pairs.iter().filter(|p| p.label_m <= max_m).cloned().collect()
}
