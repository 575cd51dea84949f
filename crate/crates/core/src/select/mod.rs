//! Feature subsets: the 14-bit mask type, importance voting and
//! genetic-algorithm wrapper selection.

mod ga;
mod votes;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::fingerprint::{Feature, PairRecord, FEATURE_COUNT};
use crate::learners::{FeatureMatrix, LearnError};

pub use ga::{ga_search, ga_select, GaConfig, GaOutcome, GenerationStats};
pub use votes::{importance_votes, FeatureVotes, VoteTable, Voter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("validation set is empty")]
    EmptyValidationSet,
    #[error("labels contain a single proximity class; voting needs both")]
    DegenerateLabels,
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Subset of the fourteen pair features, in canonical order.
///
/// Text form is a 14-character bit string, `1` meaning selected, with the
/// first character for `braycurtis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureMask([bool; FEATURE_COUNT]);

impl FeatureMask {
    pub const fn all() -> FeatureMask {
        FeatureMask([true; FEATURE_COUNT])
    }

    pub const fn none() -> FeatureMask {
        FeatureMask([false; FEATURE_COUNT])
    }

    pub fn from_bits(bits: [bool; FEATURE_COUNT]) -> FeatureMask {
        FeatureMask(bits)
    }

    pub fn from_features(features: &[Feature]) -> FeatureMask {
        let mut m = FeatureMask::none();
        for f in features {
            m.0[f.index()] = true;
        }
        m
    }

    pub fn bits(&self) -> [bool; FEATURE_COUNT] {
        self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.0[i] = on;
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.0[f.index()]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..FEATURE_COUNT).filter(|&i| self.0[i]).collect()
    }

    pub fn features(&self) -> Vec<Feature> {
        self.indices().into_iter().map(|i| Feature::ALL[i]).collect()
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Accepts a 14-character bit string, `all`, or a comma-separated list of
/// feature names.
impl FromStr for FeatureMask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(FeatureMask::all());
        }
        if s.len() == FEATURE_COUNT && s.chars().all(|c| c == '0' || c == '1') {
            let mut m = FeatureMask::none();
            for (i, c) in s.chars().enumerate() {
                m.0[i] = c == '1';
            }
            return Ok(m);
        }
        let features = s
            .split(',')
            .map(|name| Feature::from_name(name).ok_or_else(|| format!("unknown feature `{}` in mask", name.trim())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureMask::from_features(&features))
    }
}

impl Serialize for FeatureMask {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Feature columns selected by `mask` plus the untouched labels.
pub fn apply_mask(pairs: &[PairRecord], mask: &FeatureMask) -> Result<(FeatureMatrix, Vec<f64>), LearnError> {
    if mask.count() == 0 {
        return Err(LearnError::EmptyMask);
    }
    Ok((FeatureMatrix::from_pairs(pairs, mask), pairs.iter().map(|p| p.label_m).collect()))
}
