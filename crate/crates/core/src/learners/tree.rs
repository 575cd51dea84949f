//! Greedy regression trees with the squared-error criterion.
//!
//! Rows are presorted once per feature (by value, then row index) and the
//! sorted lists are partitioned stably at each split, so a node's split
//! search is linear in its size. Among splits with equal gain the lowest
//! feature index wins, then the lowest threshold.

use serde::{Deserialize, Serialize};

use super::{check_training, FeatureMatrix, LearnError};
use crate::par;

/// Nodes at least this large search their features in parallel.
const PARALLEL_NODE_ROWS: usize = 4096;
/// Relative margin below which two split scores count as equal.
const TIE_EPS: f64 = 1e-12;

fn beats(new: f64, old: f64) -> bool {
    new - old > TIE_EPS * new.abs().max(old.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: None, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Decrease in summed squared error achieved by the split.
        gain: f64,
        samples: usize,
    },
}

/// A fitted tree; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Total squared-error decrease credited to each feature.
    pub fn feature_importances(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = *n {
                imp[feature] += gain;
            }
        }
        imp
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

pub fn fit_cart(x: &FeatureMatrix, y: &[f64], params: TreeParams) -> Result<Tree, LearnError> {
    check_training(x, y)?;
    validate(&params)?;
    Ok(TreeBuilder::new(x).fit(y, params))
}

pub(crate) fn validate(params: &TreeParams) -> Result<(), LearnError> {
    if params.min_samples_leaf == 0 {
        return Err(LearnError::InvalidHyperparameter("min_samples_leaf must be >= 1".into()));
    }
    Ok(())
}

/// Presorted view of a feature matrix, reusable across fits on different
/// targets (as in boosting).
pub struct TreeBuilder<'a> {
    x: &'a FeatureMatrix,
    sorted: Vec<Vec<u32>>,
}

struct Candidate {
    proxy: f64,
    threshold: f64,
}

struct Pending {
    node: usize,
    lists: Vec<Vec<u32>>,
    depth: usize,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(x: &'a FeatureMatrix) -> TreeBuilder<'a> {
        let sorted = par::map_range(x.n_cols(), |f| {
            let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
            idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)).then(a.cmp(&b)));
            idx
        });
        TreeBuilder { x, sorted }
    }

    pub fn fit(&self, y: &[f64], params: TreeParams) -> Tree {
        assert_eq!(y.len(), self.x.n_rows());
        let d = self.x.n_cols();
        let mut nodes = vec![Node::Leaf { value: 0.0, samples: 0 }];
        let mut goes_left = vec![false; y.len()];
        let root_lists = if d == 0 { vec![(0..y.len() as u32).collect()] } else { self.sorted.clone() };
        let mut stack = vec![Pending { node: 0, lists: root_lists, depth: 0 }];

        while let Some(Pending { node, lists, depth }) = stack.pop() {
            let rows = &lists[0];
            let n = rows.len();
            let sum: f64 = rows.iter().map(|&r| y[r as usize]).sum();
            let value = sum / n as f64;
            let leaf = Node::Leaf { value, samples: n };

            let first = y[rows[0] as usize];
            let constant = rows.iter().all(|&r| y[r as usize] == first);
            let depth_ok = params.max_depth.is_none_or(|m| depth < m);
            if d == 0 || constant || !depth_ok || n < 2 * params.min_samples_leaf {
                nodes[node] = leaf;
                continue;
            }

            let scan = |f: usize| self.best_split_on(&lists[f], f, y, sum, params.min_samples_leaf);
            let per_feature: Vec<Option<Candidate>> =
                if n >= PARALLEL_NODE_ROWS { par::map_range(d, scan) } else { (0..d).map(scan).collect() };
            let mut best: Option<(usize, Candidate)> = None;
            for (f, c) in per_feature.into_iter().enumerate() {
                if let Some(c) = c {
                    if best.as_ref().is_none_or(|(_, b)| beats(c.proxy, b.proxy)) {
                        best = Some((f, c));
                    }
                }
            }
            let Some((feature, cand)) = best else {
                nodes[node] = leaf;
                continue;
            };
            let gain = cand.proxy - sum * sum / n as f64;
            if !beats(cand.proxy, sum * sum / n as f64) {
                nodes[node] = leaf;
                continue;
            }

            for &r in rows {
                goes_left[r as usize] = self.x.get(r as usize, feature) <= cand.threshold;
            }
            let (mut left_lists, mut right_lists) = (Vec::with_capacity(d), Vec::with_capacity(d));
            for list in &lists {
                let (l, r): (Vec<u32>, Vec<u32>) = list.iter().partition(|&&r| goes_left[r as usize]);
                left_lists.push(l);
                right_lists.push(r);
            }
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf { value: 0.0, samples: 0 });
            nodes.push(Node::Leaf { value: 0.0, samples: 0 });
            nodes[node] = Node::Split { feature, threshold: cand.threshold, left, right, gain, samples: n };
            stack.push(Pending { node: right, lists: right_lists, depth: depth + 1 });
            stack.push(Pending { node: left, lists: left_lists, depth: depth + 1 });
        }
        Tree { n_features: d, nodes }
    }

    /// Best threshold on one feature, maximising `sL^2/nL + sR^2/nR`.
    fn best_split_on(&self, list: &[u32], f: usize, y: &[f64], total: f64, min_leaf: usize) -> Option<Candidate> {
        let n = list.len();
        let mut best: Option<Candidate> = None;
        let mut s_left = 0.0;
        for pos in 0..n - 1 {
            let r = list[pos] as usize;
            s_left += y[r];
            let n_left = pos + 1;
            if n_left < min_leaf {
                continue;
            }
            let n_right = n - n_left;
            if n_right < min_leaf {
                break;
            }
            let here = self.x.get(r, f);
            let next = self.x.get(list[pos + 1] as usize, f);
            if here == next {
                continue;
            }
            let s_right = total - s_left;
            let proxy = s_left * s_left / n_left as f64 + s_right * s_right / n_right as f64;
            if best.as_ref().is_none_or(|b| beats(proxy, b.proxy)) {
                let mid = here + (next - here) / 2.0;
                let threshold = if mid < next { mid } else { here };
                best = Some(Candidate { proxy, threshold });
            }
        }
        best
    }
}
