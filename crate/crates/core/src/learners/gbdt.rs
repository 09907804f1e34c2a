//! Logistic gradient boosting over depth-limited regression trees.
//!
//! Each round fits a tree to the residuals `y - σ(F)` by greedy variance
//! reduction, then replaces every leaf's mean with the Newton step
//! `Σg / Σσ(F)(1-σ(F))`, clipped to `[-4, 4]`. Split candidates are the
//! midpoints between consecutive distinct values of a feature; absent
//! sparse entries count as the value 0.

use serde::{Deserialize, Serialize};

use super::check_training_set;
use crate::error::Result;
use crate::sparse::SparseVec;
use crate::util::sigmoid;

const LEAF_CLIP: f64 = 4.0;
const MIN_GAIN: f64 = 1e-12;
const MIN_HESSIAN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 100,
            max_depth: 3,
            shrinkage: 0.1,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    /// Samples with `x[feature] < threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

impl TreeNode {
    pub fn samples(&self) -> usize {
        match self {
            TreeNode::Split { samples, .. } | TreeNode::Leaf { samples, .. } => *samples,
        }
    }
}

/// Node arena; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    /// Index of the leaf `x` falls into.
    pub fn leaf_index(&self, x: &SparseVec) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x.get(*feature) < *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &SparseVec) -> f64 {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub initial_score: f64,
    pub trees: Vec<RegressionTree>,
    pub shrinkage: f64,
    pub max_depth: usize,
}

impl GbdtModel {
    pub fn raw_score(&self, x: &SparseVec) -> f64 {
        self.initial_score + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &SparseVec) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

/// Column-major copy of the non-zero entries, each column sorted by value.
struct Columns {
    cols: Vec<Vec<(f64, u32)>>,
}

impl Columns {
    fn new(x: &[SparseVec]) -> Self {
        let dim = super::dimension(x);
        let mut cols: Vec<Vec<(f64, u32)>> = vec![Vec::new(); dim];
        for (i, xi) in x.iter().enumerate() {
            for (id, v) in xi.iter() {
                cols[id as usize].push((v, i as u32));
            }
        }
        for c in &mut cols {
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Columns { cols }
    }
}

struct Split {
    feature: u32,
    threshold: f64,
    gain: f64,
}

/// Best variance-reduction split of the samples whose `node_of` is `node`.
/// Ties keep the earlier (feature, threshold) pair.
fn best_split(
    columns: &Columns,
    node_of: &[u32],
    node: u32,
    grad: &[f64],
    count: usize,
    sum: f64,
    min_leaf: usize,
) -> Option<Split> {
    let parent = sum * sum / count as f64;
    let mut best: Option<Split> = None;
    // (value, count, gradient sum) per distinct value, zeros merged in.
    let mut groups: Vec<(f64, usize, f64)> = Vec::new();
    for (f, col) in columns.cols.iter().enumerate() {
        groups.clear();
        let (mut nz_count, mut nz_sum) = (0usize, 0.0);
        let mut zero_placed = false;
        for &(v, i) in col {
            if node_of[i as usize] != node {
                continue;
            }
            nz_count += 1;
            nz_sum += grad[i as usize];
            if !zero_placed && v > 0.0 {
                groups.push((0.0, 0, 0.0));
                zero_placed = true;
            }
            match groups.last_mut() {
                Some(g) if g.0 == v => {
                    g.1 += 1;
                    g.2 += grad[i as usize];
                }
                _ => groups.push((v, 1, grad[i as usize])),
            }
        }
        if nz_count == 0 {
            continue;
        }
        if !zero_placed {
            groups.push((0.0, 0, 0.0));
        }
        let zero_count = count - nz_count;
        let zero_sum = sum - nz_sum;
        for g in groups.iter_mut().filter(|g| g.0 == 0.0) {
            g.1 = zero_count;
            g.2 = zero_sum;
        }
        groups.retain(|g| g.1 > 0);

        let (mut left_n, mut left_s) = (0usize, 0.0);
        for w in groups.windows(2) {
            left_n += w[0].1;
            left_s += w[0].2;
            let right_n = count - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let threshold = 0.5 * (w[0].0 + w[1].0);
            if !(w[0].0 < threshold && threshold < w[1].0) {
                continue;
            }
            let right_s = sum - left_s;
            let gain =
                left_s * left_s / left_n as f64 + right_s * right_s / right_n as f64 - parent;
            if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    feature: f as u32,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Grows one tree; `node_of` maps each sample to its leaf on return.
fn grow_tree(
    columns: &Columns,
    x: &[SparseVec],
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
    node_of: &mut [u32],
) -> RegressionTree {
    node_of.iter_mut().for_each(|n| *n = 0);
    let mut nodes = vec![TreeNode::Leaf {
        value: 0.0,
        samples: x.len(),
    }];
    let mut frontier = vec![0u32];
    for depth in 0..=params.max_depth {
        let mut next = Vec::new();
        for &node in &frontier {
            let members: Vec<usize> = (0..x.len()).filter(|&i| node_of[i] == node).collect();
            let count = members.len();
            let sum: f64 = members.iter().map(|&i| grad[i]).sum();
            let split = if depth < params.max_depth && count >= 2 * params.min_leaf {
                best_split(columns, node_of, node, grad, count, sum, params.min_leaf)
            } else {
                None
            };
            match split {
                Some(s) => {
                    let (left, right) = (nodes.len(), nodes.len() + 1);
                    let mut left_n = 0;
                    for &i in &members {
                        if x[i].get(s.feature) < s.threshold {
                            node_of[i] = left as u32;
                            left_n += 1;
                        } else {
                            node_of[i] = right as u32;
                        }
                    }
                    nodes[node as usize] = TreeNode::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right,
                        samples: count,
                    };
                    nodes.push(TreeNode::Leaf {
                        value: 0.0,
                        samples: left_n,
                    });
                    nodes.push(TreeNode::Leaf {
                        value: 0.0,
                        samples: count - left_n,
                    });
                    next.push(left as u32);
                    next.push(right as u32);
                }
                None => {
                    let h: f64 = members.iter().map(|&i| hess[i]).sum();
                    let value = (sum / h.max(MIN_HESSIAN)).clamp(-LEAF_CLIP, LEAF_CLIP);
                    nodes[node as usize] = TreeNode::Leaf {
                        value,
                        samples: count,
                    };
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    RegressionTree { nodes }
}

/// Trains a boosted ensemble; stops early once the root admits no split.
pub fn train_gbdt(x: &[SparseVec], y: &[bool], params: &GbdtParams) -> Result<GbdtModel> {
    check_training_set(x, y)?;
    let n = x.len();
    let base = y.iter().filter(|v| **v).count() as f64 / n as f64;
    let initial_score = (base / (1.0 - base)).ln();
    let columns = Columns::new(x);
    let target: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();

    let mut f = vec![initial_score; n];
    let mut node_of = vec![0u32; n];
    let mut trees = Vec::new();
    for _ in 0..params.rounds {
        let p: Vec<f64> = f.iter().map(|&z| sigmoid(z)).collect();
        let grad: Vec<f64> = target.iter().zip(&p).map(|(t, p)| t - p).collect();
        let hess: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let tree = grow_tree(&columns, x, &grad, &hess, params, &mut node_of);
        if matches!(tree.nodes[0], TreeNode::Leaf { .. }) {
            break;
        }
        for (fi, &leaf) in f.iter_mut().zip(&node_of) {
            if let TreeNode::Leaf { value, .. } = tree.nodes[leaf as usize] {
                *fi += params.shrinkage * value;
            }
        }
        trees.push(tree);
    }
    Ok(GbdtModel {
        initial_score,
        trees,
        shrinkage: params.shrinkage,
        max_depth: params.max_depth,
    })
}
