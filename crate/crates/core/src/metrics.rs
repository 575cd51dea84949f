//! Signal-distance features between two RSSI vectors.
//!
//! Every function takes two equal-length slices holding the readings of the
//! MACs both fingerprints observed, aligned by MAC. Mismatched lengths are a
//! caller bug and panic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fingerprint::{Fingerprint, FEATURE_COUNT};

/// Added to every RSSI before normalising into a probability vector for
/// Jensen-Shannon. After clipping at -95 dBm each entry is at least 1.
pub const JS_SHIFT_DB: f64 = 96.0;

/// Parameters of the Minkowski-family features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricParams {
    pub minkowski_p: f64,
    pub wminkowski_p: f64,
    /// Per-MAC weights for weighted Minkowski; MACs not listed weigh 1.0.
    pub wminkowski_weights: BTreeMap<String, f64>,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams { minkowski_p: 3.0, wminkowski_p: 3.0, wminkowski_weights: BTreeMap::new() }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.minkowski_p >= 1.0) || !(self.wminkowski_p >= 1.0) {
            return Err("minkowski orders must be >= 1".into());
        }
        if self.wminkowski_weights.values().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err("wminkowski weights must be positive and finite".into());
        }
        Ok(())
    }

    fn weight(&self, mac: &str) -> f64 {
        self.wminkowski_weights.get(mac).copied().unwrap_or(1.0)
    }
}

fn check_len(u: &[f64], v: &[f64]) {
    assert_eq!(u.len(), v.len(), "signal vectors must have equal length");
}

fn abs_diffs<'a>(u: &'a [f64], v: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    check_len(u, v);
    u.iter().zip(v).map(|(a, b)| (a - b).abs())
}

pub fn braycurtis(u: &[f64], v: &[f64]) -> f64 {
    let num: f64 = abs_diffs(u, v).sum();
    let den: f64 = u.iter().zip(v).map(|(a, b)| (a + b).abs()).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Terms with `|u_i| + |v_i| = 0` contribute nothing.
pub fn canberra(u: &[f64], v: &[f64]) -> f64 {
    check_len(u, v);
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let den = a.abs() + b.abs();
            if den == 0.0 {
                0.0
            } else {
                (a - b).abs() / den
            }
        })
        .sum()
}

pub fn chebyshev(u: &[f64], v: &[f64]) -> f64 {
    abs_diffs(u, v).fold(0.0, f64::max)
}

pub fn cityblock(u: &[f64], v: &[f64]) -> f64 {
    abs_diffs(u, v).sum()
}

pub fn sqeuclidean(u: &[f64], v: &[f64]) -> f64 {
    abs_diffs(u, v).map(|d| d * d).sum()
}

pub fn euclidean(u: &[f64], v: &[f64]) -> f64 {
    sqeuclidean(u, v).sqrt()
}

pub fn minkowski(u: &[f64], v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        return cityblock(u, v);
    }
    if p == 2.0 {
        return euclidean(u, v);
    }
    abs_diffs(u, v).map(|d| d.powf(p)).sum::<f64>().powf(p.recip())
}

/// `(sum |w_i (u_i - v_i)|^p)^(1/p)`.
pub fn wminkowski(u: &[f64], v: &[f64], p: f64, w: &[f64]) -> f64 {
    assert_eq!(w.len(), u.len(), "weight vector must match signal length");
    abs_diffs(u, v).zip(w).map(|(d, wi)| (wi * d).abs().powf(p)).sum::<f64>().powf(p.recip())
}

/// `1 - cos(angle)` between two vectors, with the degenerate-input rule:
/// exactly equal inputs give 0, otherwise a zero-norm input gives 1.
fn one_minus_cosine(u: &[f64], v: &[f64], equal_inputs: bool) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if equal_inputs {
        return 0.0;
    }
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (nu * nv)).clamp(0.0, 2.0)
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    check_len(u, v);
    one_minus_cosine(u, v, u == v)
}

pub fn correlation(u: &[f64], v: &[f64]) -> f64 {
    check_len(u, v);
    let center = |x: &[f64]| {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|a| a - mean).collect::<Vec<_>>()
    };
    one_minus_cosine(&center(u), &center(v), u == v)
}

/// Natural-log Kullback-Leibler divergence; `0 * ln(0 / q) = 0`.
fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(pi, _)| **pi > 0.0).map(|(pi, qi)| pi * (pi / qi).ln()).sum()
}

/// Jensen-Shannon distance between two probability vectors (natural log),
/// bounded by `sqrt(ln 2)`.
pub fn jensen_shannon_distributions(p: &[f64], q: &[f64]) -> f64 {
    check_len(p, q);
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let js = 0.5 * (kl_divergence(p, &m) + kl_divergence(q, &m));
    js.max(0.0).sqrt()
}

/// Jensen-Shannon distance of two RSSI vectors, each shifted by
/// [`JS_SHIFT_DB`] and normalised to sum 1.
pub fn jensen_shannon(u: &[f64], v: &[f64]) -> f64 {
    check_len(u, v);
    let normalise = |x: &[f64]| {
        let shifted: Vec<f64> = x.iter().map(|a| a + JS_SHIFT_DB).collect();
        let total: f64 = shifted.iter().sum();
        shifted.into_iter().map(|a| a / total).collect::<Vec<_>>()
    };
    jensen_shannon_distributions(&normalise(u), &normalise(v))
}

/// `(|A ∩ B|, |A ∪ B|)`.
pub fn count_features<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> (usize, usize) {
    let inter = a.intersection(b).count();
    (inter, a.len() + b.len() - inter)
}

/// Jaccard distance `1 - |A ∩ B| / |A ∪ B|`.
pub fn jaccard_mac<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let (inter, union) = count_features(a, b);
    jaccard_from_counts(inter, union)
}

fn jaccard_from_counts(inter: usize, union: usize) -> f64 {
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// All fourteen features of a pair in canonical order.
///
/// The twelve signal distances use only the readings of shared MACs;
/// Jaccard and the two counts use the full MAC sets.
pub fn extract_features(a: &Fingerprint, b: &Fingerprint, params: &MetricParams) -> [f64; FEATURE_COUNT] {
    let mut u = Vec::new();
    let mut v = Vec::new();
    let mut w = Vec::new();
    for (mac, &ra) in &a.readings {
        if let Some(&rb) = b.readings.get(mac) {
            u.push(ra);
            v.push(rb);
            w.push(params.weight(mac));
        }
    }
    let inter = u.len();
    let union = a.readings.len() + b.readings.len() - inter;
    [
        braycurtis(&u, &v),
        canberra(&u, &v),
        chebyshev(&u, &v),
        cityblock(&u, &v),
        correlation(&u, &v),
        cosine(&u, &v),
        euclidean(&u, &v),
        jaccard_from_counts(inter, union),
        jensen_shannon(&u, &v),
        minkowski(&u, &v, params.minkowski_p),
        sqeuclidean(&u, &v),
        wminkowski(&u, &v, params.wminkowski_p, &w),
        inter as f64,
        union as f64,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::tests::fp;
    use crate::fingerprint::Feature;
    use proptest::prelude::*;

    fn set(items: &[&'static str]) -> BTreeSet<&'static str> {
        items.iter().copied().collect()
    }

    #[test]
    fn hand_evaluated_examples() {
        assert_eq!(chebyshev(&[-50., -60.], &[-55., -58.]), 5.0);
        assert!((braycurtis(&[-40., -60.], &[-60., -40.]) - 0.2).abs() < 1e-15);
        let u = [-40.0, -71.5, -88.0];
        assert_eq!(euclidean(&u, &u), 0.0);
        assert_eq!(jensen_shannon(&u, &u), 0.0);
    }

    #[test]
    fn js_disjoint_support_hits_bound() {
        let d = jensen_shannon_distributions(&[1.0, 0.0], &[0.0, 1.0]);
        assert!((d - std::f64::consts::LN_2.sqrt()).abs() < 1e-12);
        assert!((d - 0.8326).abs() < 1e-4);
    }

    #[test]
    fn degenerate_cosine_and_correlation() {
        let flat = [-60.0, -60.0, -60.0];
        let other = [-50.0, -70.0, -60.0];
        assert_eq!(correlation(&flat, &flat), 0.0);
        assert_eq!(correlation(&flat, &other), 1.0);
        assert_eq!(correlation(&other, &flat), 1.0);
        assert_eq!(cosine(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 1.0);
    }

    #[test]
    fn set_features() {
        let a = set(&["a", "b", "c"]);
        let b = set(&["b", "c", "d"]);
        assert_eq!(jaccard_mac(&a, &b), 0.5);
        assert_eq!(jaccard_mac(&a, &a), 0.0);
        assert_eq!(jaccard_mac(&a, &set(&["x", "y"])), 1.0);
        assert_eq!(count_features(&a, &b), (2, 4));
        let five = set(&["1", "2", "3", "4", "5"]);
        assert_eq!(count_features(&five, &five), (5, 5));
    }

    #[test]
    fn extraction_on_identical_fingerprints() {
        let a = fp("a", "d", 0., 0., 0, &[("m1", -50.), ("m2", -61.), ("m3", -77.)]);
        let f = extract_features(&a, &a, &MetricParams::default());
        assert!(f[..12].iter().all(|&x| x == 0.0));
        assert_eq!(f[Feature::IntersectCount.index()], 3.0);
        assert_eq!(f[Feature::UnionCount.index()], 3.0);
    }

    #[test]
    fn extraction_matches_single_metrics() {
        // two shared MACs (m2, m3), one private MAC each
        let a = fp("a", "d", 0., 0., 0, &[("m1", -50.), ("m2", -61.), ("m3", -77.)]);
        let b = fp("b", "d", 0., 0., 0, &[("m2", -58.), ("m3", -80.), ("m4", -45.)]);
        let u = [-61.0, -77.0];
        let v = [-58.0, -80.0];
        let f = extract_features(&a, &b, &MetricParams::default());
        let expected = [
            braycurtis(&u, &v),
            canberra(&u, &v),
            3.0,
            6.0,
            correlation(&u, &v),
            cosine(&u, &v),
            18f64.sqrt(),
            0.5,
            jensen_shannon(&u, &v),
            54f64.cbrt(),
            18.0,
            54f64.cbrt(),
            2.0,
            4.0,
        ];
        for (i, (got, want)) in f.iter().zip(expected).enumerate() {
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "feature {i}: {got} vs {want}");
        }
        // both centred vectors point the same way
        assert!(f[Feature::Correlation.index()].abs() < 1e-12);
        assert_eq!(extract_features(&b, &a, &MetricParams::default()), f);
    }

    #[test]
    fn weights_follow_mac_keys() {
        let a = fp("a", "d", 0., 0., 0, &[("m1", -50.), ("m2", -60.)]);
        let b = fp("b", "d", 0., 0., 0, &[("m1", -52.), ("m2", -63.)]);
        let mut params = MetricParams::default();
        params.wminkowski_weights.insert("m2".into(), 2.0);
        let f = extract_features(&a, &b, &params);
        let want = (8.0f64 + 216.0).cbrt();
        assert!((f[Feature::WMinkowski.index()] - want).abs() < 1e-12);
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..30).prop_flat_map(|k| (prop::collection::vec(-95.0f64..=-20.0, k), prop::collection::vec(-95.0f64..=-20.0, k)))
    }

    proptest! {
        #[test]
        fn metrics_are_symmetric_and_bounded((u, v) in arb_pair()) {
            let w = vec![1.0; u.len()];
            type Metric = fn(&[f64], &[f64]) -> f64;
            let pairs: [(Metric, &str); 9] = [
                (braycurtis, "braycurtis"), (canberra, "canberra"), (chebyshev, "chebyshev"),
                (cityblock, "cityblock"), (correlation, "correlation"), (cosine, "cosine"),
                (euclidean, "euclidean"), (jensen_shannon, "js"), (sqeuclidean, "sqeuclidean"),
            ];
            for (f, name) in pairs {
                let d = f(&u, &v);
                prop_assert!(d.is_finite() && d >= 0.0, "{} = {}", name, d);
                prop_assert_eq!(d, f(&v, &u), "{} not symmetric", name);
                prop_assert_eq!(f(&u, &u), 0.0, "{} not zero on identical input", name);
            }
            prop_assert!(correlation(&u, &v) <= 2.0 && cosine(&u, &v) <= 2.0);
            prop_assert!(jensen_shannon(&u, &v) <= std::f64::consts::LN_2.sqrt());
            prop_assert_eq!(wminkowski(&u, &v, 3.0, &w), minkowski(&u, &v, 3.0));
        }

        #[test]
        fn triangle_inequality((u, v) in arb_pair(), seed in prop::collection::vec(-95.0f64..=-20.0, 30)) {
            let z = &seed[..u.len()];
            for (f, name) in [(euclidean as fn(&[f64], &[f64]) -> f64, "euclidean"), (cityblock, "cityblock"), (chebyshev, "chebyshev")] {
                prop_assert!(f(&u, &v) <= f(&u, z) + f(z, &v) + 1e-9, "{}", name);
            }
            prop_assert!(minkowski(&u, &v, 3.0) <= minkowski(&u, z, 3.0) + minkowski(z, &v, 3.0) + 1e-9);
        }
    }
}
