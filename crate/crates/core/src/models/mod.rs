//! The four classifiers behind a common train / predict / attribution surface.

pub mod forest;
pub mod linear;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Samples, Vocabulary};
use crate::error::{Error, Result};
use crate::label::Class;

pub use forest::{train_forest, Forest, ForestParams};
pub use linear::{
    logistic_gradient, logistic_objective, svm_objective, train_logistic, train_svm_linear, train_svm_linear_traced,
    LinearKind, LinearModel, LogisticParams, SvmParams, SvmTrace,
};
pub use tree::{train_tree, DecisionTree, TreeNode, TreeParams};

/// Hyperparameters by name. Integer and boolean settings are stored as reals.
pub type Hyperparams = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logistic,
    SvmLinear,
    DecisionTree,
    RandomForest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Logistic,
        ModelKind::SvmLinear,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "Logistic Regression",
            ModelKind::SvmLinear => "SVM",
            ModelKind::DecisionTree => "Decision Tree",
            ModelKind::RandomForest => "Random Forest",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::SvmLinear => "svm-linear",
            ModelKind::DecisionTree => "decision-tree",
            ModelKind::RandomForest => "random-forest",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "logistic" | "lr" => Ok(ModelKind::Logistic),
            "svm-linear" | "svm" => Ok(ModelKind::SvmLinear),
            "decision-tree" | "tree" | "dt" => Ok(ModelKind::DecisionTree),
            "random-forest" | "forest" | "rf" => Ok(ModelKind::RandomForest),
            other => Err(Error::InvalidParameter(format!("unknown model kind `{other}`"))),
        }
    }

    /// Names accepted in a [`Hyperparams`] map for this kind.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Logistic => &["lambda", "lr", "steps"],
            ModelKind::SvmLinear => &["c", "epochs"],
            ModelKind::DecisionTree => &["max_depth", "min_leaf"],
            ModelKind::RandomForest => &["bootstrap", "feature_subsample", "max_depth", "min_leaf", "n_trees"],
        }
    }

    pub fn default_params(self) -> Hyperparams {
        ModelConfig::from_params(self, &Hyperparams::new())
            .expect("defaults are valid")
            .to_params()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// Typed hyperparameters for one model kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelConfig {
    Logistic(LogisticParams),
    Svm(SvmParams),
    Tree(TreeParams),
    Forest(ForestParams),
}

fn count(map: &Hyperparams, key: &str, default: usize) -> Result<usize> {
    match map.get(key) {
        None => Ok(default),
        Some(&v) if v >= 0.0 && v.fract() == 0.0 && v.is_finite() => Ok(v as usize),
        Some(v) => Err(Error::InvalidParameter(format!(
            "`{key}` must be a non-negative integer, got {v}"
        ))),
    }
}

fn real(map: &Hyperparams, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(&v) if v.is_finite() => Ok(v),
        Some(v) => Err(Error::InvalidParameter(format!("`{key}` must be finite, got {v}"))),
    }
}

impl ModelConfig {
    /// Fills unspecified names with defaults; unknown names are rejected.
    pub fn from_params(kind: ModelKind, map: &Hyperparams) -> Result<ModelConfig> {
        if let Some(k) = map.keys().find(|k| !kind.param_names().contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!("`{k}` is not a {kind} hyperparameter")));
        }
        Ok(match kind {
            ModelKind::Logistic => {
                let d = LogisticParams::default();
                ModelConfig::Logistic(LogisticParams {
                    lambda: real(map, "lambda", d.lambda)?,
                    steps: count(map, "steps", d.steps)?,
                    lr: real(map, "lr", d.lr)?,
                })
            }
            ModelKind::SvmLinear => {
                let d = SvmParams::default();
                ModelConfig::Svm(SvmParams {
                    c: real(map, "c", d.c)?,
                    epochs: count(map, "epochs", d.epochs)?,
                })
            }
            ModelKind::DecisionTree => {
                let d = TreeParams::default();
                ModelConfig::Tree(TreeParams {
                    max_depth: count(map, "max_depth", d.max_depth)?,
                    min_leaf: count(map, "min_leaf", d.min_leaf)?,
                })
            }
            ModelKind::RandomForest => {
                let d = ForestParams::default();
                ModelConfig::Forest(ForestParams {
                    n_trees: count(map, "n_trees", d.n_trees)?,
                    max_depth: count(map, "max_depth", d.max_depth)?,
                    min_leaf: count(map, "min_leaf", d.min_leaf)?,
                    feature_subsample: count(map, "feature_subsample", d.feature_subsample)?,
                    bootstrap: real(map, "bootstrap", if d.bootstrap { 1.0 } else { 0.0 })? != 0.0,
                })
            }
        })
    }

    pub fn to_params(&self) -> Hyperparams {
        let pairs: Vec<(&str, f64)> = match self {
            ModelConfig::Logistic(p) => vec![("lambda", p.lambda), ("lr", p.lr), ("steps", p.steps as f64)],
            ModelConfig::Svm(p) => vec![("c", p.c), ("epochs", p.epochs as f64)],
            ModelConfig::Tree(p) => vec![("max_depth", p.max_depth as f64), ("min_leaf", p.min_leaf as f64)],
            ModelConfig::Forest(p) => vec![
                ("bootstrap", if p.bootstrap { 1.0 } else { 0.0 }),
                ("feature_subsample", p.feature_subsample as f64),
                ("max_depth", p.max_depth as f64),
                ("min_leaf", p.min_leaf as f64),
                ("n_trees", p.n_trees as f64),
            ],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum TrainedModel {
    Linear(LinearModel),
    Tree(DecisionTree),
    Forest(Forest),
}

/// Trains one model. `seed` drives SVM shuffling and forest sampling and is
/// ignored by the deterministic trainers.
pub fn fit(kind: ModelKind, samples: &Samples, params: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    Ok(match ModelConfig::from_params(kind, params)? {
        ModelConfig::Logistic(p) => TrainedModel::Linear(train_logistic(samples, &p)?),
        ModelConfig::Svm(p) => TrainedModel::Linear(train_svm_linear(samples, &p, seed)?),
        ModelConfig::Tree(p) => TrainedModel::Tree(train_tree(samples, &p)?),
        ModelConfig::Forest(p) => TrainedModel::Forest(train_forest(samples, &p, seed)?),
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Linear(m) => match m.kind {
                LinearKind::Logistic => ModelKind::Logistic,
                LinearKind::SvmLinear => ModelKind::SvmLinear,
            },
            TrainedModel::Tree(_) => ModelKind::DecisionTree,
            TrainedModel::Forest(_) => ModelKind::RandomForest,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Linear(m) => m.weights.len(),
            TrainedModel::Tree(t) => t.n_features,
            TrainedModel::Forest(f) => f.n_features,
        }
    }

    fn check(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        Ok(())
    }

    /// Linear: `w·x + b`. Tree: signed leaf purity. Forest: vote share in `[-1, 1]`.
    pub fn decision_value(&self, row: &[f64]) -> Result<f64> {
        self.check(row)?;
        Ok(match self {
            TrainedModel::Linear(m) => m.decision_value(row),
            TrainedModel::Tree(t) => t.decision_value(row),
            TrainedModel::Forest(f) => f.decision_value(row),
        })
    }

    /// Zero decision values map to `Higher`.
    pub fn predict(&self, row: &[f64]) -> Result<Class> {
        self.decision_value(row).map(Class::from_decision)
    }

    /// Signed coefficients for linear models, unsigned importances for trees and forests.
    pub fn attribution(&self) -> &[f64] {
        match self {
            TrainedModel::Linear(m) => &m.weights,
            TrainedModel::Tree(t) => &t.importances,
            TrainedModel::Forest(f) => &f.importances,
        }
    }

    pub fn is_signed(&self) -> bool {
        matches!(self, TrainedModel::Linear(_))
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned, self-describing model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub vocabulary_hash: String,
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub model: TrainedModel,
}

impl ModelArtifact {
    pub fn new(model: TrainedModel, vocab: &Vocabulary, hyperparams: Hyperparams, seed: u64) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            vocabulary_hash: vocab.hash(),
            kind: model.kind(),
            hyperparams,
            seed,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model artifact serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let a: ModelArtifact = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if a.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format version {}",
                a.format_version
            )));
        }
        Ok(a)
    }

    /// SHA-256 of the JSON encoding.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<()> {
        if self.vocabulary_hash != vocab.hash() {
            return Err(Error::InvalidParameter(
                "model was trained on a different vocabulary".into(),
            ));
        }
        Ok(())
    }
}
