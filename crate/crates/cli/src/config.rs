use std::path::Path;

use fpdist::learners::HyperSpace;
use fpdist::select::GaConfig;
use fpdist::synth::VenueSpec;
use fpdist::{EvalConfig, PipelineConfig};
use serde::Deserialize;

use crate::CliError;

/// Everything a run can be configured with. Loaded from a TOML file with
/// unknown keys rejected; command-line flags are applied on top.
///
/// ```toml
/// seed = 7                      # sets pipeline, ga, search and venue seeds
///
/// [pipeline]                    # clipping, pairing, label filter, split
/// train_filter_m = 25.0
/// split = { train = 0.7, validation = 0.15, test = 0.15 }
///
/// [ga]                          # population_size, generations, ...
/// [search]                      # per-learner ranges, n_draws
/// [eval]                        # beta, proximity_threshold_m, ...
/// [venue]                       # synthetic venue for `synth`
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub pipeline: PipelineConfig,
    pub ga: GaConfig,
    pub search: HyperSpace,
    pub eval: EvalConfig,
    pub venue: VenueSpec,
}

/// Values given on the command line; each one overrides the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_m: Option<f64>,
    pub beta: Option<f64>,
    pub threshold_m: Option<f64>,
    pub restrict: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<RunConfig, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<RunConfig>(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {}", p.display(), one_line(&e.to_string()))))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = flags.seed.or(cfg.seed) {
            cfg.seed = Some(seed);
            cfg.pipeline.seed = seed;
            cfg.ga.seed = seed;
            cfg.search.seed = seed;
            cfg.venue.seed = seed;
        }
        if let Some(m) = flags.max_m {
            cfg.pipeline.train_filter_m = m;
        }
        if let Some(b) = flags.beta {
            cfg.eval.beta = b;
        }
        if let Some(t) = flags.threshold_m {
            cfg.eval.proximity_threshold_m = t;
            cfg.pipeline.proximity_threshold_m = t;
        }
        if flags.restrict.is_some() {
            cfg.eval.restrict_to_max_label_m = flags.restrict;
        }
        cfg.ga.train_filter_m = Some(cfg.pipeline.train_filter_m);

        cfg.pipeline.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.eval.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.ga.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.search.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
