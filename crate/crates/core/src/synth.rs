//! Synthetic venues from a log-distance path-loss model, and planted-feature
//! pair sets for exercising feature selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::fingerprint::{Fingerprint, PairRecord, FEATURE_COUNT};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApLayout {
    /// Regular grid covering the venue, cell centres filled row by row.
    Grid,
    /// Uniformly random positions drawn from the venue seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VenueSpec {
    pub dataset_id: String,
    pub width_m: f64,
    pub height_m: f64,
    pub floor: i32,
    pub ap_count: usize,
    pub ap_layout: ApLayout,
    /// Received power at 1 m.
    pub tx_power_dbm: f64,
    pub path_loss_exponent: f64,
    /// Standard deviation of log-normal shadowing.
    pub shadowing_sigma_db: f64,
    /// Readings below this level are not heard.
    pub sensitivity_dbm: f64,
    /// Readings above this level saturate.
    pub max_rssi_dbm: f64,
    pub fingerprint_count: usize,
    pub seed: u64,
}

impl Default for VenueSpec {
    fn default() -> Self {
        VenueSpec {
            dataset_id: "synth".into(),
            width_m: 60.0,
            height_m: 40.0,
            floor: 0,
            ap_count: 10,
            ap_layout: ApLayout::Grid,
            tx_power_dbm: -30.0,
            path_loss_exponent: 3.0,
            shadowing_sigma_db: 4.0,
            sensitivity_dbm: -95.0,
            max_rssi_dbm: -20.0,
            fingerprint_count: 200,
            seed: 0,
        }
    }
}

impl VenueSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.width_m > 0.0 && self.height_m > 0.0) {
            return Err("venue dimensions must be positive".into());
        }
        if self.ap_count < 3 {
            return Err("ap_count must be >= 3".into());
        }
        if !(1.5..=6.0).contains(&self.path_loss_exponent) {
            return Err("path_loss_exponent must lie in [1.5, 6]".into());
        }
        if !(self.shadowing_sigma_db >= 0.0 && self.shadowing_sigma_db.is_finite()) {
            return Err("shadowing_sigma_db must be >= 0".into());
        }
        if self.sensitivity_dbm >= self.max_rssi_dbm {
            return Err("sensitivity_dbm must be below max_rssi_dbm".into());
        }
        if self.dataset_id.is_empty() {
            return Err("dataset_id must not be empty".into());
        }
        Ok(())
    }

    /// Mean received power at `distance_m`, distances under 1 m clamped to 1 m.
    pub fn mean_rssi(&self, distance_m: f64) -> f64 {
        self.tx_power_dbm - 10.0 * self.path_loss_exponent * distance_m.max(1.0).log10()
    }

    pub fn ap_positions(&self) -> Vec<(f64, f64)> {
        match self.ap_layout {
            ApLayout::Grid => {
                let cols = ((self.ap_count as f64 * self.width_m / self.height_m).sqrt().ceil() as usize).clamp(1, self.ap_count);
                let rows = self.ap_count.div_ceil(cols);
                (0..self.ap_count)
                    .map(|i| {
                        let (r, c) = (i / cols, i % cols);
                        ((c as f64 + 0.5) * self.width_m / cols as f64, (r as f64 + 0.5) * self.height_m / rows as f64)
                    })
                    .collect()
            }
            ApLayout::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(u64::MAX);
                (0..self.ap_count).map(|_| (rng.random_range(0.0..self.width_m), rng.random_range(0.0..self.height_m))).collect()
            }
        }
    }

    pub fn ap_mac(index: usize) -> String {
        format!("02:00:00:00:{:02x}:{:02x}", (index >> 8) & 0xff, index & 0xff)
    }

    /// Readings heard at `pos`; shadowing draws come from `rng`, one per AP.
    pub fn sample_readings<R: Rng>(&self, aps: &[(f64, f64)], pos: (f64, f64), rng: &mut R) -> Vec<(String, f64)> {
        let noise = Normal::new(0.0, self.shadowing_sigma_db).expect("sigma validated");
        aps.iter()
            .enumerate()
            .filter_map(|(i, &(ax, ay))| {
                let rssi = self.mean_rssi((pos.0 - ax).hypot(pos.1 - ay)) + noise.sample(rng);
                (rssi >= self.sensitivity_dbm).then(|| (VenueSpec::ap_mac(i), rssi.min(self.max_rssi_dbm)))
            })
            .collect()
    }
}

/// Fingerprints at uniform random positions.
///
/// Fingerprint `i` draws from its own ChaCha stream of the venue seed, so the
/// output is identical with or without parallelism. A position where no AP is
/// heard is redrawn.
pub fn generate_venue(spec: &VenueSpec) -> Result<Vec<Fingerprint>, String> {
    spec.validate()?;
    let aps = spec.ap_positions();
    Ok(par::map_range(spec.fingerprint_count, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        loop {
            let pos = (rng.random_range(0.0..spec.width_m), rng.random_range(0.0..spec.height_m));
            let readings = spec.sample_readings(&aps, pos, &mut rng);
            if !readings.is_empty() {
                return Fingerprint {
                    id: format!("{}-{i:05}", spec.dataset_id),
                    dataset_id: spec.dataset_id.clone(),
                    x_m: pos.0,
                    y_m: pos.1,
                    floor: spec.floor,
                    readings: readings.into_iter().collect(),
                };
            }
        }
    }))
}

/// Standard deviation of the noise added to the label in informative columns.
pub const PLANTED_SIGNAL_NOISE_M: f64 = 3.0;
/// Upper bound of the uniform label distribution.
pub const PLANTED_MAX_LABEL_M: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPairs {
    pub pairs: Vec<PairRecord>,
    /// The two label-informative columns, ascending.
    pub informative: [usize; 2],
}

/// Pairs whose label is uniform on `[0, 30)` m; two randomly chosen columns
/// hold `label + N(0, 3²)` and the other twelve hold independent `N(15, 9²)`
/// noise with the same marginal scale.
pub fn planted_feature_pairs(n: usize, seed: u64) -> PlantedPairs {
    assert!(n >= 100, "planted_feature_pairs needs n >= 100");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..FEATURE_COUNT);
    let mut second = rng.random_range(0..FEATURE_COUNT - 1);
    if second >= first {
        second += 1;
    }
    let informative = [first.min(second), first.max(second)];
    let signal = Normal::new(0.0, PLANTED_SIGNAL_NOISE_M).expect("positive sigma");
    let noise = Normal::new(PLANTED_MAX_LABEL_M / 2.0, PLANTED_MAX_LABEL_M / 12f64.sqrt()).expect("positive sigma");
    let pairs = (0..n)
        .map(|i| {
            let label = rng.random_range(0.0..PLANTED_MAX_LABEL_M);
            let mut features = [0.0; FEATURE_COUNT];
            for (j, f) in features.iter_mut().enumerate() {
                *f = if informative.contains(&j) { label + signal.sample(&mut rng) } else { noise.sample(&mut rng) };
            }
            PairRecord { dataset_id: "planted".into(), fp_a_id: format!("p{i}a"), fp_b_id: format!("p{i}b"), features, label_m: label }
        })
        .collect();
    PlantedPairs { pairs, informative }
}
