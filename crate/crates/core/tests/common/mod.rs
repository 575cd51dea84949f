#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerical code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) || a == b
}

// ---------- metrics ----------

/// Relative tolerance 1e-9, with an absolute floor of a few ulps of 1.0 for
/// values that come out of `1 - cos` cancellation near zero.
pub fn metric_close(got: f64, want: f64) -> bool {
    (got - want).abs() <= 1e-9 * got.abs().max(want.abs()) + 1e-15
}

pub fn ref_braycurtis(u: &[f64], v: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..u.len() {
        num += (u[i] - v[i]).abs();
        den += (u[i] + v[i]).abs();
    }
    num / den
}

pub fn ref_canberra(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        let den = u[i].abs() + v[i].abs();
        if den != 0.0 {
            s += (u[i] - v[i]).abs() / den;
        }
    }
    s
}

pub fn ref_chebyshev(u: &[f64], v: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..u.len() {
        m = m.max((u[i] - v[i]).abs());
    }
    m
}

pub fn ref_minkowski(u: &[f64], v: &[f64], p: f64) -> f64 {
    ref_wminkowski(u, v, p, &vec![1.0; u.len()])
}

pub fn ref_wminkowski(u: &[f64], v: &[f64], p: f64, w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        s += (w[i] * (u[i] - v[i])).abs().powf(p);
    }
    s.powf(1.0 / p)
}

pub fn ref_sqeuclidean(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        s += (u[i] - v[i]) * (u[i] - v[i]);
    }
    s
}

pub fn ref_cosine(u: &[f64], v: &[f64]) -> f64 {
    let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for i in 0..u.len() {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    1.0 - uv / (uu.sqrt() * vv.sqrt())
}

pub fn ref_correlation(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() as f64;
    let mu: f64 = u.iter().sum::<f64>() / n;
    let mv: f64 = v.iter().sum::<f64>() / n;
    let cu: Vec<f64> = u.iter().map(|x| x - mu).collect();
    let cv: Vec<f64> = v.iter().map(|x| x - mv).collect();
    ref_cosine(&cu, &cv)
}

/// Jensen-Shannon distance after shifting by 96 dB and normalising,
/// written as `sqrt(H(m) - (H(p) + H(q)) / 2)` with natural logs.
pub fn ref_jensenshannon(u: &[f64], v: &[f64]) -> f64 {
    let norm = |x: &[f64]| {
        let s: f64 = x.iter().map(|a| a + 96.0).sum();
        x.iter().map(|a| (a + 96.0) / s).collect::<Vec<f64>>()
    };
    let entropy = |p: &[f64]| -> f64 { p.iter().filter(|x| **x > 0.0).map(|x| -x * x.ln()).sum() };
    let p = norm(u);
    let q = norm(v);
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a + b) / 2.0).collect();
    (entropy(&m) - 0.5 * (entropy(&p) + entropy(&q))).max(0.0).sqrt()
}

pub fn random_rssi_pair(rng: &mut ChaCha8Rng, k: usize) -> (Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = (0..k).map(|_| rng.random_range(-95.0..-20.0)).collect();
    let v: Vec<f64> = (0..k).map(|_| rng.random_range(-95.0..-20.0)).collect();
    (u, v)
}

// ---------- linear algebra ----------

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// OLS on raw features via the normal equations of the design `[1 | X]`.
/// Returns `(weights, intercept)`.
pub fn ols_normal_equations(rows: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let d = rows[0].len() + 1;
    let mut xtx = vec![vec![0.0; d]; d];
    let mut xty = vec![0.0; d];
    for (r, &t) in rows.iter().zip(y) {
        let mut z = vec![1.0];
        z.extend_from_slice(r);
        for i in 0..d {
            xty[i] += z[i] * t;
            for j in 0..d {
                xtx[i][j] += z[i] * z[j];
            }
        }
    }
    let beta = solve_dense(xtx, xty);
    (beta[1..].to_vec(), beta[0])
}

/// Mean and population standard deviation per column.
pub fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j] / n;
        }
    }
    let mut sd = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            sd[j] += (r[j] - mean[j]).powi(2) / n;
        }
    }
    (mean, sd.into_iter().map(f64::sqrt).collect())
}

/// Ridge on standardised features with an unpenalised intercept:
/// `w = (Z'Z + lambda I)^-1 Z'(y - mean(y))`. Returns a predictor.
pub fn ridge_closed_form(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> impl Fn(&[f64]) -> f64 {
    let (mean, sd) = column_stats(rows);
    let d = mean.len();
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let z = move |r: &[f64]| (0..d).map(|j| (r[j] - mean[j]) / sd[j]).collect::<Vec<f64>>();
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (r, &t) in rows.iter().zip(y) {
        let zr = z(r);
        for i in 0..d {
            b[i] += zr[i] * (t - ybar);
            for j in 0..d {
                a[i][j] += zr[i] * zr[j];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    let w = solve_dense(a, b);
    move |r: &[f64]| ybar + z(r).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
}

/// Uniform k-NN over standardised features by a full scan and full sort.
pub fn knn_brute(rows: &[Vec<f64>], y: &[f64], k: usize, q: &[f64]) -> (Vec<usize>, f64) {
    let (mean, sd) = column_stats(rows);
    let mut dist: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut s = 0.0;
            for j in 0..r.len() {
                let a = (r[j] - mean[j]) / sd[j];
                let b = (q[j] - mean[j]) / sd[j];
                s += (a - b) * (a - b);
            }
            (s, i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let idx: Vec<usize> = dist[..k].iter().map(|d| d.1).collect();
    let pred = idx.iter().map(|&i| y[i]).sum::<f64>() / k as f64;
    (idx, pred)
}

// ---------- trees ----------

fn sse(y: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Reference regression tree: at each node every feature and every midpoint
/// between consecutive distinct values is tried, scoring children by their
/// directly summed squared error.
pub enum RefTree {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<RefTree>, right: Box<RefTree> },
}

impl RefTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            RefTree::Leaf(v) => *v,
            RefTree::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

pub fn exhaustive_tree(rows: &[Vec<f64>], y: &[f64], depth: usize) -> RefTree {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if depth == 0 || y.len() < 2 {
        return RefTree::Leaf(mean);
    }
    let parent = sse(y);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..rows[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let l: Vec<f64> = rows.iter().zip(y).filter(|(r, _)| r[f] <= t).map(|(_, v)| *v).collect();
            let r: Vec<f64> = rows.iter().zip(y).filter(|(r, _)| r[f] > t).map(|(_, v)| *v).collect();
            let gain = parent - sse(&l) - sse(&r);
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g + 1e-9) {
                best = Some((gain, f, t));
            }
        }
    }
    match best {
        None => RefTree::Leaf(mean),
        Some((_, feature, threshold)) => {
            let (lr, ly): (Vec<Vec<f64>>, Vec<f64>) =
                rows.iter().cloned().zip(y.iter().copied()).filter(|(r, _)| r[feature] <= threshold).unzip();
            let (rr, ry): (Vec<Vec<f64>>, Vec<f64>) =
                rows.iter().cloned().zip(y.iter().copied()).filter(|(r, _)| r[feature] > threshold).unzip();
            RefTree::Split {
                feature,
                threshold,
                left: Box::new(exhaustive_tree(&lr, &ly, depth - 1)),
                right: Box::new(exhaustive_tree(&rr, &ry, depth - 1)),
            }
        }
    }
}

// ---------- classification ----------

/// `(tp, fp, fn, tn)` by looping over every (actual class, predicted class)
/// cell and every sample.
pub fn confusion_double_loop(y: &[f64], y_hat: &[f64], threshold: f64) -> (u64, u64, u64, u64) {
    let mut cells = [[0u64; 2]; 2];
    for (a_idx, actual_near) in [true, false].into_iter().enumerate() {
        for (p_idx, pred_near) in [true, false].into_iter().enumerate() {
            for i in 0..y.len() {
                let a = if actual_near { y[i] < threshold } else { !(y[i] < threshold) };
                let p = if pred_near { y_hat[i] < threshold } else { !(y_hat[i] < threshold) };
                if a && p {
                    cells[a_idx][p_idx] += 1;
                }
            }
        }
    }
    (cells[0][0], cells[1][0], cells[0][1], cells[1][1])
}
