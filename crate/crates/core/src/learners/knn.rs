use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_training, FeatureMatrix, LearnError, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    /// Weights `1/d`; neighbours at distance zero take all the weight.
    InverseDistance,
}

/// Brute-force k-nearest-neighbours regressor over standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub standardizer: Standardizer,
    pub k: usize,
    pub weighting: Weighting,
    n_cols: usize,
    train: Vec<f64>,
    targets: Vec<f64>,
}

pub fn fit_knn(x: &FeatureMatrix, y: &[f64], k: usize, weighting: Weighting) -> Result<KnnModel, LearnError> {
    check_training(x, y)?;
    if k == 0 || k > y.len() {
        return Err(LearnError::InvalidHyperparameter(format!("knn k must be in 1..={}, got {k}", y.len())));
    }
    if x.n_cols() == 0 {
        return Err(LearnError::EmptyMask);
    }
    let standardizer = Standardizer::fit(x);
    let z = standardizer.transform_matrix(x);
    Ok(KnnModel { standardizer, k, weighting, n_cols: x.n_cols(), train: z.rows().flatten().copied().collect(), targets: y.to_vec() })
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

impl KnnModel {
    /// The `k` nearest training rows as `(squared distance, row index)`,
    /// nearest first; equidistant rows are ordered by index.
    pub fn neighbours(&self, row: &[f64]) -> Vec<(f64, usize)> {
        let q = self.standardizer.transform(row);
        let mut d: Vec<(f64, usize)> = self
            .train
            .chunks_exact(self.n_cols)
            .enumerate()
            .map(|(i, t)| (t.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, by_distance_then_index);
            d.truncate(self.k);
        }
        d.sort_by(by_distance_then_index);
        d
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let nn = self.neighbours(row);
        match self.weighting {
            Weighting::Uniform => nn.iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / nn.len() as f64,
            Weighting::InverseDistance => {
                let exact: Vec<f64> = nn.iter().filter(|(d, _)| *d == 0.0).map(|&(_, i)| self.targets[i]).collect();
                if !exact.is_empty() {
                    return exact.iter().sum::<f64>() / exact.len() as f64;
                }
                let (num, den) = nn.iter().fold((0.0, 0.0), |(num, den), &(d2, i)| {
                    let w = d2.sqrt().recip();
                    (num + w * self.targets[i], den + w)
                });
                num / den
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six() -> (FeatureMatrix, Vec<f64>) {
        let rows = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0], [5.0, 1.0], [2.0, 4.0]];
        (FeatureMatrix::from_rows(&rows), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    }

    #[test]
    fn k1_returns_training_target() {
        let (x, y) = six();
        let m = fit_knn(&x, &y, 1, Weighting::Uniform).unwrap();
        for (i, &target) in y.iter().enumerate() {
            assert_eq!(m.predict(x.row(i)), target);
        }
        let w = fit_knn(&x, &y, 3, Weighting::InverseDistance).unwrap();
        assert_eq!(w.predict(x.row(4)), 5.0);
    }

    #[test]
    fn k_equals_n_is_mean() {
        let (x, y) = six();
        let m = fit_knn(&x, &y, 6, Weighting::Uniform).unwrap();
        assert!((m.predict(&[10.0, -3.0]) - 3.5).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let x = FeatureMatrix::from_rows(&[[1.0], [-1.0], [1.0], [3.0]]);
        let m = fit_knn(&x, &[10.0, 20.0, 30.0, 40.0], 1, Weighting::Uniform).unwrap();
        // rows 0 and 2 coincide; row 0 wins
        assert_eq!(m.predict(&[1.0]), 10.0);
        let m2 = fit_knn(&x, &[10.0, 20.0, 30.0, 40.0], 2, Weighting::Uniform).unwrap();
        assert_eq!(m2.neighbours(&[1.0]).iter().map(|n| n.1).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(m2.predict(&[1.0]), 20.0);
    }

    #[test]
    fn invalid_k() {
        let (x, y) = six();
        assert!(fit_knn(&x, &y, 0, Weighting::Uniform).is_err());
        assert!(fit_knn(&x, &y, 7, Weighting::Uniform).is_err());
    }
}
