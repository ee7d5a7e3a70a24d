//! Random forest of CART trees with bootstrap rows and per-split feature subsets.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{normalized, Grower, TreeNode, TreeParams};
use crate::dataset::Samples;
use crate::error::{Error, Result};
use crate::label::Class;
use crate::rng::{derive_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `0` means `ceil(sqrt(n_features))`.
    pub feature_subsample: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 6,
            min_leaf: 1,
            feature_subsample: 0,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn resolved_subsample(&self, n_features: usize) -> usize {
        let m = if self.feature_subsample == 0 {
            (n_features as f64).sqrt().ceil() as usize
        } else {
            self.feature_subsample
        };
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub per_tree_seed: Vec<u64>,
    pub feature_subsample: usize,
    pub n_features: usize,
    /// Normalized total Gini decrease per feature across all trees.
    pub importances: Vec<f64>,
    pub params: ForestParams,
}

impl Forest {
    /// `(votes for Higher − votes for Lower) / n_trees`, in `[-1, 1]`.
    pub fn decision_value(&self, row: &[f64]) -> f64 {
        let score: f64 = self.trees.iter().map(|t| t.leaf(row).0.sign()).sum();
        score / self.trees.len() as f64
    }
}

fn grow_one(samples: &Samples, params: &ForestParams, mtry: usize, seed: u64) -> (TreeNode, Vec<f64>) {
    let n = samples.len();
    let d = samples.n_features;
    let mut rng = seeded_rng(seed);
    let mut weights = vec![0.0; n];
    if params.bootstrap {
        for _ in 0..n {
            weights[rng.gen_range(0..n)] += 1.0;
        }
    } else {
        weights.iter_mut().for_each(|w| *w = 1.0);
    }
    let members: Vec<(usize, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, w)| (i, *w))
        .collect();
    let all: Vec<usize> = (0..d).collect();
    let candidates = move || {
        if mtry >= d {
            all.clone()
        } else {
            let mut f = index::sample(&mut rng, d, mtry).into_vec();
            f.sort_unstable();
            f
        }
    };
    let mut grower = Grower {
        samples,
        params: TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
        },
        candidates,
        raw_importance: vec![0.0; d],
        root_weight: n as f64,
    };
    let root = grower.grow(&members, 0);
    (root, grower.raw_importance)
}

/// Trees are grown in parallel; each tree's randomness comes only from its
/// derived seed, so the forest is identical for any thread count.
pub fn train_forest(samples: &Samples, params: &ForestParams, seed: u64) -> Result<Forest> {
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    if params.min_leaf == 0 {
        return Err(Error::InvalidParameter("min_leaf must be at least 1".into()));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("a forest needs at least two rows".into()));
    }
    let d = samples.n_features;
    let mtry = params.resolved_subsample(d);
    let per_tree_seed: Vec<u64> = (0..params.n_trees as u64).map(|t| derive_seed(seed, t)).collect();
    let grown: Vec<(TreeNode, Vec<f64>)> = per_tree_seed
        .par_iter()
        .map(|&s| grow_one(samples, params, mtry, s))
        .collect();
    let mut raw = vec![0.0; d];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, imp) in grown {
        for (r, v) in raw.iter_mut().zip(&imp) {
            *r += v;
        }
        trees.push(tree);
    }
    Ok(Forest {
        trees,
        per_tree_seed,
        feature_subsample: mtry,
        n_features: d,
        importances: normalized(&raw),
        params: *params,
    })
}

/// Majority vote with ties going to `Higher`.
pub fn vote(forest: &Forest, row: &[f64]) -> Class {
    Class::from_decision(forest.decision_value(row))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Class::{Higher as H, Lower as L};
    use crate::models::tree::train_tree;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn samples_from<'a>(rows: &'a [Vec<f64>], labels: &[Class]) -> Samples<'a> {
        Samples::new(rows.iter().map(Vec::as_slice).collect(), labels.to_vec(), rows[0].len()).unwrap()
    }

    fn noisy(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Class>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<Class> = (0..n).map(|i| if i % 2 == 0 { H } else { L }).collect();
        let rows = labels
            .iter()
            .map(|l| {
                let mut r: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
                r[d / 2] = l.sign() * 2.0 + rng.gen_range(-0.5..0.5);
                r
            })
            .collect();
        (rows, labels)
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let (rows, labels) = noisy(16, 6, 1);
        let s = samples_from(&rows, &labels);
        let fp = ForestParams {
            n_trees: 1,
            max_depth: 4,
            min_leaf: 1,
            feature_subsample: 6,
            bootstrap: false,
        };
        let f = train_forest(&s, &fp, 99).unwrap();
        let t = train_tree(
            &s,
            &TreeParams {
                max_depth: 4,
                min_leaf: 1,
            },
        )
        .unwrap();
        assert_eq!(f.trees[0], t.root);
        assert_eq!(f.importances, t.importances);
    }

    #[test]
    fn importances_sum_to_one_and_vote_in_range() {
        let (rows, labels) = noisy(20, 12, 2);
        let s = samples_from(&rows, &labels);
        let f = train_forest(
            &s,
            &ForestParams {
                n_trees: 25,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        assert!((f.importances.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(f.importances.iter().all(|&v| v >= 0.0));
        for r in &rows {
            let v = f.decision_value(r);
            assert!((-1.0..=1.0).contains(&v));
        }
        assert_eq!(f.feature_subsample, 4);
    }

    #[test]
    fn independent_of_thread_count() {
        let (rows, labels) = noisy(20, 30, 4);
        let s = samples_from(&rows, &labels);
        let params = ForestParams {
            n_trees: 40,
            ..Default::default()
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| train_forest(&s, &params, 8).unwrap());
        let b = four.install(|| train_forest(&s, &params, 8).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn tie_vote_goes_to_higher() {
        let f = Forest {
            trees: vec![
                TreeNode::Leaf { class: H, purity: 1.0 },
                TreeNode::Leaf { class: L, purity: 1.0 },
            ],
            per_tree_seed: vec![0, 1],
            feature_subsample: 1,
            n_features: 1,
            importances: vec![0.0],
            params: ForestParams::default(),
        };
        assert_eq!(f.decision_value(&[0.0]), 0.0);
        assert_eq!(vote(&f, &[0.0]), H);
    }
}
