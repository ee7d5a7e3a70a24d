//! CART classification trees with Gini impurity.

use serde::{Deserialize, Serialize};

use crate::dataset::Samples;
use crate::error::{Error, Result};
use crate::label::Class;

/// Gains closer than this are treated as ties.
pub const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class: Class,
        /// Fraction of the node's (weighted) samples in the majority class.
        purity: f64,
    },
}

impl TreeNode {
    /// Walks to the leaf for `row`; `x <= threshold` goes left.
    pub fn leaf(&self, row: &[f64]) -> (Class, f64) {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class, purity } => return (*class, *purity),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_splits(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.n_splits() + right.n_splits(),
        }
    }

    /// `(feature, threshold)` of every split in pre-order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        fn walk(n: &TreeNode, out: &mut Vec<(usize, f64)>) {
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = n
            {
                out.push((*feature, *threshold));
                walk(left, out);
                walk(right, out);
            }
        }
        walk(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub n_features: usize,
    /// Normalized Gini decrease per feature; all zero when the tree is a single leaf.
    pub importances: Vec<f64>,
    pub params: TreeParams,
}

impl DecisionTree {
    /// Signed leaf purity: `+purity` for a `Higher` leaf, `-purity` otherwise.
    pub fn decision_value(&self, row: &[f64]) -> f64 {
        let (class, purity) = self.root.leaf(row);
        class.sign() * purity
    }
}

pub(crate) fn gini(pos: f64, neg: f64) -> f64 {
    let n = pos + neg;
    if n == 0.0 {
        return 0.0;
    }
    let (p, q) = (pos / n, neg / n);
    1.0 - p * p - q * q
}

/// Best split found for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Threshold halfway between two adjacent distinct values, kept strictly below `hi`.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Scans candidate features in ascending order and thresholds in ascending
/// order; a candidate replaces the incumbent only if it improves the gain by
/// more than [`GAIN_TOLERANCE`].
pub(crate) fn best_split(
    samples: &Samples,
    members: &[(usize, f64)],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let (pos, neg) = class_weights(samples, members);
    let total = pos + neg;
    let parent = gini(pos, neg);
    let min_leaf = min_leaf as f64;
    let mut best: Option<SplitChoice> = None;
    let mut sorted: Vec<(f64, f64, bool)> = Vec::with_capacity(members.len());

    for &f in features {
        sorted.clear();
        sorted.extend(
            members
                .iter()
                .map(|&(i, w)| (samples.rows[i][f], w, samples.labels[i] == Class::Higher)),
        );
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut lp, mut ln) = (0.0, 0.0);
        for k in 0..sorted.len() - 1 {
            let (v, w, is_pos) = sorted[k];
            if is_pos {
                lp += w;
            } else {
                ln += w;
            }
            let next = sorted[k + 1].0;
            if next == v {
                continue;
            }
            let (rp, rn) = (pos - lp, neg - ln);
            let (nl, nr) = (lp + ln, rp + rn);
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let gain = parent - (nl * gini(lp, ln) + nr * gini(rp, rn)) / total;
            let incumbent = best.map_or(0.0, |b| b.gain);
            if gain > incumbent + GAIN_TOLERANCE {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(v, next),
                    gain,
                });
            }
        }
    }
    best
}

fn class_weights(samples: &Samples, members: &[(usize, f64)]) -> (f64, f64) {
    members.iter().fold((0.0, 0.0), |(p, n), &(i, w)| {
        if samples.labels[i] == Class::Higher {
            (p + w, n)
        } else {
            (p, n + w)
        }
    })
}

fn make_leaf(samples: &Samples, members: &[(usize, f64)]) -> TreeNode {
    let (pos, neg) = class_weights(samples, members);
    let total = pos + neg;
    if pos >= neg {
        TreeNode::Leaf {
            class: Class::Higher,
            purity: if total > 0.0 { pos / total } else { 1.0 },
        }
    } else {
        TreeNode::Leaf {
            class: Class::Lower,
            purity: neg / total,
        }
    }
}

/// Recursive grower shared by single trees and forests.
///
/// `members` pairs a sample index with its weight (bootstrap multiplicity).
/// `candidates` yields the sorted feature subset to consider at each node.
pub(crate) struct Grower<'s, 'a, F> {
    pub samples: &'s Samples<'a>,
    pub params: TreeParams,
    pub candidates: F,
    pub raw_importance: Vec<f64>,
    pub root_weight: f64,
}

impl<F: FnMut() -> Vec<usize>> Grower<'_, '_, F> {
    pub fn grow(&mut self, members: &[(usize, f64)], depth: usize) -> TreeNode {
        let (pos, neg) = class_weights(self.samples, members);
        let total = pos + neg;
        let pure = pos == 0.0 || neg == 0.0;
        if pure || depth >= self.params.max_depth || total < 2.0 * self.params.min_leaf as f64 {
            return make_leaf(self.samples, members);
        }
        let features = (self.candidates)();
        let Some(choice) = best_split(self.samples, members, &features, self.params.min_leaf) else {
            return make_leaf(self.samples, members);
        };
        self.raw_importance[choice.feature] += total / self.root_weight * choice.gain;
        let (left, right): (Vec<_>, Vec<_>) = members
            .iter()
            .partition(|&&(i, _)| self.samples.rows[i][choice.feature] <= choice.threshold);
        let left = self.grow(&left, depth + 1);
        let right = self.grow(&right, depth + 1);
        TreeNode::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

pub(crate) fn normalized(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    if s > 0.0 {
        raw.iter().map(|v| v / s).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

pub fn train_tree(samples: &Samples, params: &TreeParams) -> Result<DecisionTree> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("a tree needs at least two rows".into()));
    }
    if params.min_leaf == 0 {
        return Err(Error::InvalidParameter("min_leaf must be at least 1".into()));
    }
    let d = samples.n_features;
    let all: Vec<usize> = (0..d).collect();
    let members: Vec<(usize, f64)> = (0..samples.len()).map(|i| (i, 1.0)).collect();
    let mut grower = Grower {
        samples,
        params: *params,
        candidates: || all.clone(),
        raw_importance: vec![0.0; d],
        root_weight: samples.len() as f64,
    };
    let root = grower.grow(&members, 0);
    Ok(DecisionTree {
        root,
        n_features: d,
        importances: normalized(&grower.raw_importance),
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Class::{Higher as H, Lower as L};

    fn samples_from<'a>(rows: &'a [Vec<f64>], labels: &[Class]) -> Samples<'a> {
        Samples::new(rows.iter().map(Vec::as_slice).collect(), labels.to_vec(), rows[0].len()).unwrap()
    }

    #[test]
    fn pure_labels_give_single_leaf() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let t = train_tree(&samples_from(&rows, &[L, L, L]), &TreeParams::default()).unwrap();
        assert_eq!(t.root, TreeNode::Leaf { class: L, purity: 1.0 });
        assert!(t.importances.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn alternating_labels_pick_first_best_split() {
        // gains: t=1.5 -> 1/6, t=2.5 -> 0, t=3.5 -> 1/6; first wins the tie
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let s = samples_from(&rows, &[H, L, H, L]);
        let t = train_tree(
            &s,
            &TreeParams {
                max_depth: 1,
                min_leaf: 1,
            },
        )
        .unwrap();
        assert_eq!(t.root.splits(), vec![(0, 1.5)]);
    }

    #[test]
    fn depth_cap_and_min_leaf() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let labels = [H, L, H, L, H, L, H, L];
        let s = samples_from(&rows, &labels);
        let t = train_tree(
            &s,
            &TreeParams {
                max_depth: 2,
                min_leaf: 1,
            },
        )
        .unwrap();
        assert!(t.root.depth() <= 2);
        let t = train_tree(
            &s,
            &TreeParams {
                max_depth: 10,
                min_leaf: 3,
            },
        )
        .unwrap();
        // every leaf must hold at least three samples
        fn leaf_sizes(n: &TreeNode, rows: &[Vec<f64>], idx: Vec<usize>, out: &mut Vec<usize>) {
            match n {
                TreeNode::Leaf { .. } => out.push(idx.len()),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let (l, r): (Vec<_>, Vec<_>) = idx.into_iter().partition(|&i| rows[i][*feature] <= *threshold);
                    leaf_sizes(left, rows, l, out);
                    leaf_sizes(right, rows, r, out);
                }
            }
        }
        let mut sizes = Vec::new();
        leaf_sizes(&t.root, &rows, (0..8).collect(), &mut sizes);
        assert!(sizes.iter().all(|&n| n >= 3), "{sizes:?}");
    }

    #[test]
    fn importances_normalized_and_prediction_piecewise_constant() {
        let rows = vec![vec![0.0, 5.0], vec![1.0, 4.0], vec![2.0, 1.0], vec![3.0, 0.0]];
        let s = samples_from(&rows, &[H, H, L, L]);
        let t = train_tree(&s, &TreeParams::default()).unwrap();
        assert!((t.importances.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(t.root.splits(), vec![(0, 1.5)]);
        assert_eq!(t.decision_value(&[1.4, 100.0]), 1.0);
        assert_eq!(t.decision_value(&[1.6, 100.0]), -1.0);
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(m >= a && m < b);
    }
}
