//! Supervised estimation of the spatial distance between pairs of WiFi RSSI
//! fingerprints.
//!
//! The crate covers the whole pipeline:
//!
//! - [`fingerprint`]: domain types, RSSI clipping, pair eligibility, labels,
//!   pair generation and label-threshold filtering.
//! - [`metrics`]: the twelve signal-distance features plus the two MAC-count
//!   features computed for each eligible pair.
//! - [`io`]: CSV ingestion, pool/isolated bookkeeping, splitting and
//!   persistence of pairs and models.
//! - [`learners`]: OLS, ridge, KNN, CART and gradient-boosted trees written
//!   from scratch, plus random-search tuning.
//! - [`select`]: feature-importance voting and genetic-algorithm selection.
//! - [`eval`]: regression metrics, thresholded proximity classification,
//!   F-beta scoring and histogram export.
//! - [`synth`]: a log-distance path-loss venue generator and planted-feature
//!   data for exercising every stage without external datasets.
//! - [`pipeline`]: glue used by the CLI and the acceptance suite.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.
//! Results are identical in both modes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod fingerprint;
pub mod io;
pub mod learners;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod select;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{EvalConfig, EvalReport};
pub use fingerprint::{Feature, Fingerprint, PairRecord, PipelineConfig, FEATURE_COUNT};
pub use learners::{LearnerKind, LearnerSpec, TrainedModel};
pub use select::FeatureMask;
