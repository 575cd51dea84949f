use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_training, FeatureMatrix, LearnError};

/// Per-column centring and scaling fitted on training rows.
///
/// Constant columns get scale 1 and centre exactly on their value, so they
/// standardise to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Standardizer {
        let n = x.n_rows() as f64;
        let (mut mean, mut scale) = (Vec::new(), Vec::new());
        for j in 0..x.n_cols() {
            let col = x.column(j);
            let first = col.first().copied().unwrap_or(0.0);
            if col.iter().all(|&v| v == first) {
                mean.push(first);
                scale.push(1.0);
                continue;
            }
            let m = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            mean.push(m);
            scale.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    pub fn transform_into(&self, row: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (row[j] - self.mean[j]) / self.scale[j];
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mean.len()];
        self.transform_into(row, &mut out);
        out
    }

    pub fn transform_matrix(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let mut data = vec![0.0; x.n_rows() * x.n_cols()];
        for (i, chunk) in data.chunks_mut(x.n_cols().max(1)).enumerate().take(x.n_rows()) {
            self.transform_into(x.row(i), chunk);
        }
        FeatureMatrix::new(data, x.n_rows(), x.n_cols())
    }
}

/// Linear model in standardised feature space with an unpenalised intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// The standardised design was rank deficient; `weights` is the
    /// minimum-norm solution.
    pub rank_deficient: bool,
}

impl LinearModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let s = &self.standardizer;
        self.intercept + self.weights.iter().enumerate().map(|(j, w)| w * (row[j] - s.mean[j]) / s.scale[j]).sum::<f64>()
    }

    /// Weights and intercept expressed on the raw feature scale.
    pub fn coefficients(&self) -> (Vec<f64>, f64) {
        let s = &self.standardizer;
        let w: Vec<f64> = self.weights.iter().zip(&s.scale).map(|(w, sc)| w / sc).collect();
        let b = self.intercept - w.iter().zip(&s.mean).map(|(w, m)| w * m).sum::<f64>();
        (w, b)
    }
}

/// Ordinary least squares with intercept, solved by SVD of the standardised
/// design. Rank-deficient designs fall back to the minimum-norm solution and
/// set [`LinearModel::rank_deficient`].
pub fn fit_ols(x: &FeatureMatrix, y: &[f64]) -> Result<LinearModel, LearnError> {
    fit_penalised(x, y, 0.0)
}

/// Ridge regression minimising `|y - Zw - b|^2 + lambda |w|^2` over the
/// standardised design `Z`, solved as an augmented least-squares system.
pub fn fit_ridge(x: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<LinearModel, LearnError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(LearnError::InvalidHyperparameter(format!("ridge lambda must be finite and >= 0, got {lambda}")));
    }
    fit_penalised(x, y, lambda)
}

fn fit_penalised(x: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<LinearModel, LearnError> {
    check_training(x, y)?;
    let standardizer = Standardizer::fit(x);
    let z = standardizer.transform_matrix(x);
    let (n, d) = (z.n_rows(), z.n_cols());
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let extra = if lambda > 0.0 { d } else { 0 };
    let mut a = DMatrix::<f64>::zeros(n + extra, d);
    let mut b = DVector::<f64>::zeros(n + extra);
    for i in 0..n {
        for j in 0..d {
            a[(i, j)] = z.get(i, j);
        }
        b[i] = y[i] - y_mean;
    }
    let root = lambda.sqrt();
    for j in 0..extra {
        a[(n + j, j)] = root;
    }

    let (weights, rank_deficient) = if d == 0 {
        (Vec::new(), false)
    } else {
        let svd = a.svd(true, true);
        let max_sv = svd.singular_values.max();
        let tol = max_sv * (n + extra).max(d) as f64 * f64::EPSILON;
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if rank == 0 {
            (vec![0.0; d], true)
        } else {
            let w = svd.solve(&b, tol).expect("svd computed with both factors");
            (w.iter().copied().collect(), rank < d)
        }
    };
    Ok(LinearModel { standardizer, weights, intercept: y_mean, lambda, rank_deficient })
}

/// Largest useful L1 penalty: above it every lasso coefficient is zero.
pub fn lasso_alpha_max(x: &FeatureMatrix, y: &[f64]) -> f64 {
    let z = Standardizer::fit(x).transform_matrix(x);
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    (0..z.n_cols()).map(|j| (0..z.n_rows()).map(|i| z.get(i, j) * (y[i] - y_mean)).sum::<f64>().abs() / n).fold(0.0, f64::max)
}

/// Lasso coefficients on the standardised design, minimising
/// `(1/2n)|y - Zw - b|^2 + alpha |w|_1` by cyclic coordinate descent.
pub fn fit_lasso(x: &FeatureMatrix, y: &[f64], alpha: f64) -> Result<Vec<f64>, LearnError> {
    check_training(x, y)?;
    if !(alpha >= 0.0) {
        return Err(LearnError::InvalidHyperparameter(format!("lasso alpha must be >= 0, got {alpha}")));
    }
    let z = Standardizer::fit(x).transform_matrix(x);
    let (n, d) = (z.n_rows(), z.n_cols());
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| z.column(j)).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf).collect();
    let mut w = vec![0.0; d];

    for _ in 0..10_000 {
        let mut max_step = 0.0f64;
        for j in 0..d {
            if norms[j] == 0.0 {
                continue;
            }
            let col = &cols[j];
            let rho = col.iter().zip(&resid).map(|(c, r)| c * r).sum::<f64>() / nf + norms[j] * w[j];
            let new = soft_threshold(rho, alpha) / norms[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (r, c) in resid.iter_mut().zip(col) {
                    *r -= delta * c;
                }
                w[j] = new;
                max_step = max_step.max(delta.abs());
            }
        }
        if max_step < 1e-12 {
            break;
        }
    }
    Ok(w)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}
