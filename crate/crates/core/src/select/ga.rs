//! Genetic-algorithm wrapper selection over 14-bit feature masks.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureMask, SelectError};
use crate::eval::{f_beta_score, EvalConfig, EvalError};
use crate::fingerprint::{filter_by_label, PairRecord, FEATURE_COUNT};
use crate::learners::{fit_ols, FeatureMatrix};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    /// Number of evaluated populations, the random initial one included.
    pub generations: usize,
    pub tournament_size: usize,
    /// Probability of uniform crossover; otherwise the first parent is copied.
    pub crossover_rate: f64,
    /// Independent per-bit flip probability.
    pub mutation_rate: f64,
    pub elitism: usize,
    /// Label threshold applied to the training pairs before fitting.
    pub train_filter_m: Option<f64>,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 32,
            generations: 40,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: 1.0 / FEATURE_COUNT as f64,
            elitism: 2,
            train_filter_m: Some(25.0),
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), SelectError> {
        let bad = |m: &str| Err(SelectError::InvalidConfig(m.into()));
        if self.population_size < 2 {
            return bad("population_size must be >= 2");
        }
        if self.elitism >= self.population_size {
            return bad("elitism must be smaller than population_size");
        }
        if self.generations == 0 || self.tournament_size == 0 {
            return bad("generations and tournament_size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("crossover_rate and mutation_rate must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_so_far: f64,
    pub generation_best: f64,
    pub generation_mean: f64,
    pub best_mask: FeatureMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best_mask: FeatureMask,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    /// Distinct masks whose fitness was computed.
    pub evaluations: usize,
}

impl GaOutcome {
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.history {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn random_mask<R: Rng>(rng: &mut R) -> FeatureMask {
    let mut m = FeatureMask::none();
    for i in 0..FEATURE_COUNT {
        m.set(i, rng.random_bool(0.5));
    }
    repair(m, rng)
}

/// An empty mask gets one random bit.
fn repair<R: Rng>(mut m: FeatureMask, rng: &mut R) -> FeatureMask {
    if m.count() == 0 {
        m.set(rng.random_range(0..FEATURE_COUNT), true);
    }
    m
}

/// Runs the GA against an arbitrary fitness function (higher is better).
///
/// Selection, crossover and mutation draw from one seeded stream; fitness
/// evaluations within a generation run in parallel and are cached per mask,
/// so the outcome depends only on `cfg` and `fitness`.
pub fn ga_search<F>(cfg: &GaConfig, fitness: F) -> Result<GaOutcome, SelectError>
where
    F: Fn(&FeatureMask) -> f64 + Sync + Send,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cache: HashMap<FeatureMask, f64> = HashMap::new();
    let evaluate = |pop: &[FeatureMask], cache: &mut HashMap<FeatureMask, f64>| -> Vec<f64> {
        let mut fresh: Vec<FeatureMask> = pop.iter().filter(|m| !cache.contains_key(*m)).copied().collect();
        fresh.sort();
        fresh.dedup();
        let scores = par::map_slice(&fresh, |m| fitness(m));
        cache.extend(fresh.into_iter().zip(scores));
        pop.iter().map(|m| cache[m]).collect()
    };

    let mut pop: Vec<FeatureMask> = (0..cfg.population_size).map(|_| random_mask(&mut rng)).collect();
    let mut fit = evaluate(&pop, &mut cache);
    let mut best: Option<(FeatureMask, f64)> = None;
    let mut history = Vec::with_capacity(cfg.generations);

    for generation in 0..cfg.generations {
        if generation > 0 {
            let mut ranked: Vec<usize> = (0..pop.len()).collect();
            ranked.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]).then(a.cmp(&b)));
            let mut next: Vec<FeatureMask> = ranked.iter().take(cfg.elitism).map(|&i| pop[i]).collect();
            while next.len() < cfg.population_size {
                let a = tournament(&fit, cfg.tournament_size, &mut rng);
                let b = tournament(&fit, cfg.tournament_size, &mut rng);
                let mut child = pop[a];
                if rng.random_bool(cfg.crossover_rate) {
                    for i in 0..FEATURE_COUNT {
                        if rng.random_bool(0.5) {
                            child.set(i, pop[b].get(i));
                        }
                    }
                }
                for i in 0..FEATURE_COUNT {
                    if rng.random_bool(cfg.mutation_rate) {
                        child.set(i, !child.get(i));
                    }
                }
                next.push(repair(child, &mut rng));
            }
            pop = next;
            fit = evaluate(&pop, &mut cache);
        }

        let (gi, &gbest) = fit.iter().enumerate().fold((0, &f64::NEG_INFINITY), |acc, (i, f)| if *f > *acc.1 { (i, f) } else { acc });
        if best.is_none_or(|(_, b)| gbest > b) {
            best = Some((pop[gi], gbest));
        }
        let (best_mask, best_so_far) = best.expect("population is non-empty");
        history.push(GenerationStats {
            generation,
            best_so_far,
            generation_best: gbest,
            generation_mean: fit.iter().sum::<f64>() / fit.len() as f64,
            best_mask,
        });
    }

    let (best_mask, best_fitness) = best.expect("at least one generation");
    Ok(GaOutcome { best_mask, best_fitness, history, evaluations: cache.len() })
}

/// Index of the fittest of `size` uniformly drawn individuals; the first
/// drawn wins ties.
fn tournament<R: Rng>(fit: &[f64], size: usize, rng: &mut R) -> usize {
    let mut winner = rng.random_range(0..fit.len());
    for _ in 1..size {
        let c = rng.random_range(0..fit.len());
        if fit[c] > fit[winner] {
            winner = c;
        }
    }
    winner
}

/// GA feature selection with OLS as the wrapped learner: fitness is the
/// validation F-beta of OLS trained on the (label-filtered) training pairs.
pub fn ga_select(train: &[PairRecord], validation: &[PairRecord], cfg: &GaConfig, eval_cfg: &EvalConfig) -> Result<GaOutcome, SelectError> {
    let train = match cfg.train_filter_m {
        Some(m) => filter_by_label(train, m),
        None => train.to_vec(),
    };
    if train.is_empty() {
        return Err(SelectError::EmptyTrainingSet);
    }
    if validation.is_empty() {
        return Err(SelectError::EmptyValidationSet);
    }
    let y_train: Vec<f64> = train.iter().map(|p| p.label_m).collect();
    let y_val: Vec<f64> = validation.iter().map(|p| p.label_m).collect();
    ga_search(cfg, |mask| {
        let x = FeatureMatrix::from_pairs(&train, mask);
        let model = fit_ols(&x, &y_train).expect("training set checked non-empty");
        let pred = FeatureMatrix::from_pairs(validation, mask).rows().map(|r| model.predict(r)).collect::<Vec<_>>();
        f_beta_score(&y_val, &pred, eval_cfg).expect("validation set checked non-empty")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights_fitness(m: &FeatureMask) -> f64 {
        // separable: bits 0..7 help, the rest hurt
        (0..FEATURE_COUNT)
            .map(|i| {
                if m.get(i) {
                    if i < 7 {
                        1.0 + i as f64 * 0.1
                    } else {
                        -0.5
                    }
                } else {
                    0.0
                }
            })
            .sum()
    }

    #[test]
    fn history_is_monotone_and_reproducible() {
        let cfg = GaConfig { seed: 7, generations: 25, ..Default::default() };
        let a = ga_search(&cfg, weights_fitness).unwrap();
        let b = ga_search(&cfg, weights_fitness).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 25);
        for w in a.history.windows(2) {
            assert!(w[1].best_so_far >= w[0].best_so_far);
            assert!(w[1].generation_best >= w[0].generation_best);
        }
        assert_eq!(a.best_mask.to_string(), "11111110000000");
    }

    #[test]
    fn degenerate_ga_returns_better_initial_mask() {
        let cfg = GaConfig { population_size: 2, generations: 1, elitism: 1, seed: 3, ..Default::default() };
        let out = ga_search(&cfg, weights_fitness).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m0 = random_mask(&mut rng);
        let m1 = random_mask(&mut rng);
        let want = if weights_fitness(&m1) > weights_fitness(&m0) { m1 } else { m0 };
        assert_eq!(out.best_mask, want);
        assert_eq!(out.evaluations, if m0 == m1 { 1 } else { 2 });
    }

    #[test]
    fn masks_are_never_empty() {
        let cfg = GaConfig { mutation_rate: 1.0, crossover_rate: 0.0, generations: 5, seed: 1, ..Default::default() };
        let out = ga_search(&cfg, |m| -(m.count() as f64)).unwrap();
        assert!(out.best_mask.count() >= 1);
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig { population_size: 1, elitism: 0, ..Default::default() }.validate().is_err());
        assert!(GaConfig { population_size: 4, elitism: 4, ..Default::default() }.validate().is_err());
        assert!(GaConfig { mutation_rate: 1.5, ..Default::default() }.validate().is_err());
        assert!(GaConfig::default().validate().is_ok());
    }
}
