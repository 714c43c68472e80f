//! CART regression trees with exact greedy split finding.
//!
//! Trees are grown level by level: every feature column is presorted once and
//! each level makes a single ordered pass per feature, accumulating left-side
//! statistics per active node. This keeps split finding exact (every midpoint
//! between consecutive distinct values is considered) without re-sorting at
//! every node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Stopping rules for tree growth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeGrowthParams {
    /// Maximum root-to-leaf path length in edges.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Minimum reduction in sum of squared errors for a split to be kept.
    pub min_gain: f64,
}

impl Default for TreeGrowthParams {
    fn default() -> Self {
        TreeGrowthParams {
            max_depth: 5,
            min_samples_leaf: 1,
            min_gain: 1e-12,
        }
    }
}

impl TreeGrowthParams {
    pub fn with_depth(max_depth: usize) -> Self {
        TreeGrowthParams {
            max_depth,
            ..Default::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter(
                "min_samples_leaf must be >= 1".into(),
            ));
        }
        if !(self.min_gain >= 0.0) {
            return Err(Error::InvalidParameter("min_gain must be >= 0".into()));
        }
        Ok(())
    }
}

/// A tree node. Children are indices into the owning tree's node list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree with axis-aligned threshold splits and scalar
/// leaf values. Rows with `value <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "NodeRepr", from = "NodeRepr")]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Fit a tree to `residuals` by greedy SSE minimization.
    pub fn fit(features: &Matrix, residuals: &[f64], params: &TreeGrowthParams) -> Result<Self> {
        params.validate()?;
        if features.rows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        if features.rows() != residuals.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} residuals",
                features.rows(),
                residuals.len()
            )));
        }
        if !features.is_finite() || !residuals.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let sorted = SortedFeatures::build(features);
        Ok(Self::fit_presorted(features, &sorted, residuals, params))
    }

    /// Growth loop over pre-validated, pre-sorted inputs.
    pub(crate) fn fit_presorted(
        features: &Matrix,
        sorted: &SortedFeatures,
        residuals: &[f64],
        params: &TreeGrowthParams,
    ) -> Self {
        const SETTLED: u32 = u32::MAX;
        let n = features.rows();
        let d = features.cols();
        let msl = params.min_samples_leaf;

        let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
        // Per-row id of the active node the row currently sits in.
        let mut node_of_row: Vec<u32> = vec![0; n];
        // Active ids are dense per level; slot maps them to `nodes` indices.
        let mut slot_of_active: Vec<u32> = vec![0];
        let mut depth = 0usize;

        while !slot_of_active.is_empty() {
            let active = slot_of_active.len();

            // Residual statistics per active node, summed in row order so
            // leaf means do not depend on how the tree was reached.
            let mut count = vec![0usize; active];
            let mut sum = vec![0.0f64; active];
            let mut lo = vec![f64::INFINITY; active];
            let mut hi = vec![f64::NEG_INFINITY; active];
            for (r, &a) in node_of_row.iter().enumerate() {
                if a == SETTLED {
                    continue;
                }
                let a = a as usize;
                let v = residuals[r];
                count[a] += 1;
                sum[a] += v;
                lo[a] = lo[a].min(v);
                hi[a] = hi[a].max(v);
            }

            let mut best_gain = vec![f64::NEG_INFINITY; active];
            let mut best_feature = vec![0u32; active];
            let mut best_threshold = vec![0.0f64; active];

            if depth < params.max_depth {
                let mut left_count = vec![0usize; active];
                let mut left_sum = vec![0.0f64; active];
                let mut last_value = vec![0.0f64; active];
                for f in 0..d {
                    left_count.iter_mut().for_each(|c| *c = 0);
                    left_sum.iter_mut().for_each(|s| *s = 0.0);
                    for &r in &sorted.order[f] {
                        let a = node_of_row[r as usize];
                        if a == SETTLED {
                            continue;
                        }
                        let a = a as usize;
                        // Constant residuals can never produce real gain.
                        if lo[a] == hi[a] {
                            continue;
                        }
                        let v = features.get(r as usize, f);
                        let lc = left_count[a];
                        if lc > 0 && v > last_value[a] {
                            let rc = count[a] - lc;
                            if lc >= msl && rc >= msl {
                                let ls = left_sum[a];
                                let rs = sum[a] - ls;
                                let total = sum[a];
                                let gain = ls * ls / lc as f64 + rs * rs / rc as f64
                                    - total * total / count[a] as f64;
                                // Strict comparison keeps the lowest feature
                                // index and smallest threshold on ties.
                                if gain > best_gain[a] {
                                    best_gain[a] = gain;
                                    best_feature[a] = f as u32;
                                    best_threshold[a] = split_threshold(last_value[a], v);
                                }
                            }
                        }
                        left_count[a] = lc + 1;
                        left_sum[a] += residuals[r as usize];
                        last_value[a] = v;
                    }
                }
            }

            // Materialize decisions: split into next level's actives or seal
            // a leaf holding the mean residual.
            let mut next_slots: Vec<u32> = Vec::new();
            // children[a] = (left active id, right active id) for split nodes.
            let mut children: Vec<Option<(u32, u32)>> = vec![None; active];
            for a in 0..active {
                let slot = slot_of_active[a] as usize;
                if best_gain[a] > params.min_gain {
                    let left = nodes.len() as u32;
                    let right = left + 1;
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[slot] = Node::Split {
                        feature: best_feature[a],
                        threshold: best_threshold[a],
                        left,
                        right,
                    };
                    let left_id = next_slots.len() as u32;
                    next_slots.push(left);
                    next_slots.push(right);
                    children[a] = Some((left_id, left_id + 1));
                } else {
                    nodes[slot] = Node::Leaf {
                        value: sum[a] / count[a] as f64,
                    };
                }
            }

            for r in 0..n {
                let a = node_of_row[r];
                if a == SETTLED {
                    continue;
                }
                node_of_row[r] = match children[a as usize] {
                    None => SETTLED,
                    Some((left_id, right_id)) => {
                        let (feature, threshold) = match nodes[slot_of_active[a as usize] as usize]
                        {
                            Node::Split {
                                feature, threshold, ..
                            } => (feature, threshold),
                            Node::Leaf { .. } => unreachable!(),
                        };
                        if features.get(r, feature as usize) <= threshold {
                            left_id
                        } else {
                            right_id
                        }
                    }
                };
            }

            slot_of_active = next_slots;
            depth += 1;
        }

        RegressionTree { nodes }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }
}

/// Midpoint between consecutive distinct values, nudged down to `a` if
/// rounding would send it to `b` (which must route right).
fn split_threshold(a: f64, b: f64) -> f64 {
    let mid = a + 0.5 * (b - a);
    if mid >= b {
        a
    } else {
        mid
    }
}

/// Row indices of a feature matrix, sorted per feature by (value, row).
/// Built once per training table and shared by every tree grown on it.
pub(crate) struct SortedFeatures {
    order: Vec<Vec<u32>>,
}

impl SortedFeatures {
    pub(crate) fn build(features: &Matrix) -> Self {
        let n = features.rows();
        let order = (0..features.cols())
            .map(|f| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_unstable_by(|&a, &b| {
                    features
                        .get(a as usize, f)
                        .total_cmp(&features.get(b as usize, f))
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        SortedFeatures { order }
    }
}

/// Serialized form: nested node records, `{"value": v}` for leaves.
#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeRepr {
    Split {
        feature_index: u32,
        threshold: f64,
        left: Box<NodeRepr>,
        right: Box<NodeRepr>,
    },
    Leaf {
        value: f64,
    },
}

impl From<RegressionTree> for NodeRepr {
    fn from(tree: RegressionTree) -> Self {
        fn convert(nodes: &[Node], i: usize) -> NodeRepr {
            match nodes[i] {
                Node::Leaf { value } => NodeRepr::Leaf { value },
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => NodeRepr::Split {
                    feature_index: feature,
                    threshold,
                    left: Box::new(convert(nodes, left as usize)),
                    right: Box::new(convert(nodes, right as usize)),
                },
            }
        }
        convert(&tree.nodes, 0)
    }
}

impl From<NodeRepr> for RegressionTree {
    fn from(root: NodeRepr) -> Self {
        // Level-order flatten, matching the order the growth loop emits, so a
        // serialize/deserialize round trip reproduces the node list exactly.
        // In level order the children of the k-th split are the next two
        // unassigned slots.
        let mut nodes: Vec<Node> = Vec::new();
        let mut queue: std::collections::VecDeque<&NodeRepr> = std::collections::VecDeque::new();
        queue.push_back(&root);
        let mut next_slot = 1u32;
        while let Some(repr) = queue.pop_front() {
            match repr {
                NodeRepr::Leaf { value } => nodes.push(Node::Leaf { value: *value }),
                NodeRepr::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    nodes.push(Node::Split {
                        feature: *feature_index,
                        threshold: *threshold,
                        left: next_slot,
                        right: next_slot + 1,
                    });
                    next_slot += 2;
                    queue.push_back(left);
                    queue.push_back(right);
                }
            }
        }
        RegressionTree { nodes }
    }
}
