use serde::{Deserialize, Serialize};

use super::tree::validate;
use super::{check_training, FeatureMatrix, LearnError, Tree, TreeBuilder, TreeParams};

/// Squared-loss gradient boosting: `F_0 = mean(y)`, then each tree is fit to
/// the current residuals and added with step `learning_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Training MSE after 0, 1, .., n_trees trees.
    pub train_loss: Vec<f64>,
}

impl BoostedTrees {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut f = self.base;
        for t in &self.trees {
            f += self.learning_rate * t.predict(row);
        }
        f
    }
}

pub fn fit_gbt(x: &FeatureMatrix, y: &[f64], n_trees: usize, learning_rate: f64, params: TreeParams) -> Result<BoostedTrees, LearnError> {
    check_training(x, y)?;
    validate(&params)?;
    if n_trees == 0 {
        return Err(LearnError::InvalidHyperparameter("gbt needs at least one tree".into()));
    }
    if !(0.0..=1.0).contains(&learning_rate) {
        return Err(LearnError::InvalidHyperparameter(format!("gbt learning rate must be in [0, 1], got {learning_rate}")));
    }
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let loss = |fitted: &[f64]| fitted.iter().zip(y).map(|(f, t)| (t - f) * (t - f)).sum::<f64>() / n as f64;
    let mut train_loss = vec![loss(&fitted)];
    let builder = TreeBuilder::new(x);
    let mut trees = Vec::with_capacity(n_trees);
    let mut residual = vec![0.0; n];
    for _ in 0..n_trees {
        for i in 0..n {
            residual[i] = y[i] - fitted[i];
        }
        let tree = builder.fit(&residual, params);
        for (i, f) in fitted.iter_mut().enumerate() {
            *f += learning_rate * tree.predict(x.row(i));
        }
        train_loss.push(loss(&fitted));
        trees.push(tree);
    }
    Ok(BoostedTrees { base, learning_rate, trees, train_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::fit_cart;

    fn noisy() -> (FeatureMatrix, Vec<f64>) {
        let rows: Vec<[f64; 2]> = (0..200).map(|i| [(i % 20) as f64, ((i * 13) % 17) as f64]).collect();
        let y: Vec<f64> = rows.iter().enumerate().map(|(i, r)| r[0] * 0.7 - r[1] * 0.2 + ((i * 37) % 11) as f64 * 0.3).collect();
        (FeatureMatrix::from_rows(&rows), y)
    }

    #[test]
    fn zero_rate_predicts_mean() {
        let (x, y) = noisy();
        let m = fit_gbt(&x, &y, 5, 0.0, TreeParams { max_depth: Some(3), min_samples_leaf: 1 }).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert_eq!(m.predict(x.row(3)), mean);
    }

    #[test]
    fn one_full_step_matches_cart() {
        let (x, y) = noisy();
        let params = TreeParams { max_depth: Some(3), min_samples_leaf: 1 };
        let g = fit_gbt(&x, &y, 1, 1.0, params).unwrap();
        let c = fit_cart(&x, &y, params).unwrap();
        for i in 0..x.n_rows() {
            assert!((g.predict(x.row(i)) - c.predict(x.row(i))).abs() < 1e-9);
        }
        assert!(g.train_loss[1] <= g.train_loss[0]);
    }

    #[test]
    fn loss_decreases_with_more_trees() {
        let (x, y) = noisy();
        let params = TreeParams { max_depth: Some(2), min_samples_leaf: 1 };
        let m = fit_gbt(&x, &y, 100, 0.1, params).unwrap();
        assert!(m.train_loss[100] < m.train_loss[10]);
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let (x, y) = noisy();
        let p = TreeParams::default();
        assert!(fit_gbt(&x, &y, 0, 0.1, p).is_err());
        assert!(fit_gbt(&x, &y, 3, 1.5, p).is_err());
        assert!(fit_gbt(&x, &y, 3, -0.1, p).is_err());
    }
}
