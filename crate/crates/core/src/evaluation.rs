//! Leave-one-out validation, metric aggregation and seeded random search.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{assemble, build_vocabulary, vectorize, FeatureMatrix};
use crate::error::{Error, Result};
use crate::label::Class;
use crate::models::{fit, Hyperparams, ModelConfig, ModelKind, TrainedModel};
use crate::preprocess::{build_groups, CountryProfile, TopKScope};
use crate::rng::{derive_seed, seeded_rng};

/// One held-out country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub holdout_country: String,
    pub true_label: Class,
    pub predicted: Class,
    pub decision_value: f64,
}

/// Counts with `Higher` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Class, predicted: Class) {
        match (truth, predicted) {
            (Class::Higher, Class::Higher) => self.tp += 1,
            (Class::Lower, Class::Lower) => self.tn += 1,
            (Class::Lower, Class::Higher) => self.fp += 1,
            (Class::Higher, Class::Lower) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    }

    /// `1.0` when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fp)
    }

    /// `1.0` when there are no positives.
    pub fn recall(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        Self::ratio(self.tp + self.tn, self.total())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

pub fn aggregate(folds: &[FoldResult]) -> Result<Summary> {
    if folds.is_empty() {
        return Err(Error::InvalidParameter("cannot aggregate zero folds".into()));
    }
    let mut confusion = Confusion::default();
    for f in folds {
        confusion.record(f.true_label, f.predicted);
    }
    Ok(Summary {
        confusion,
        precision: confusion.precision(),
        recall: confusion.recall(),
        accuracy: confusion.accuracy(),
    })
}

/// Where the vocabulary of a fold comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// One vocabulary built from every country, held-out ones included.
    Shared,
    /// Group averages, top-K selection and vocabulary rebuilt from the
    /// training countries of each fold.
    #[default]
    PerFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_kind: ModelKind,
    pub protocol: Protocol,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    /// Ordered by country id.
    pub folds: Vec<FoldResult>,
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fold `holdout`'s model: trained on every other row with a seed derived from
/// the fold index.
pub fn train_fold(
    x: &FeatureMatrix,
    holdout: usize,
    kind: ModelKind,
    params: &Hyperparams,
    seed: u64,
) -> Result<TrainedModel> {
    let train = x.samples_excluding(holdout);
    debug_assert_eq!(train.len(), x.n_rows() - 1);
    if !train.has_both_classes() {
        return Err(Error::SingleClassData);
    }
    fit(kind, &train, params, derive_seed(seed, holdout as u64))
}

/// Leave-one-out over every row. Folds run in parallel; results are collected
/// in row order, which is country-id order.
pub fn loo_evaluate(x: &FeatureMatrix, kind: ModelKind, params: &Hyperparams, seed: u64) -> Result<EvalReport> {
    if x.n_rows() < 2 {
        return Err(Error::InvalidParameter("leave-one-out needs at least two rows".into()));
    }
    if !x.samples().has_both_classes() {
        return Err(Error::SingleClassData);
    }
    let folds: Vec<FoldResult> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let model = train_fold(x, i, kind, params, seed)?;
            let decision_value = model.decision_value(x.row(i))?;
            Ok(FoldResult {
                holdout_country: x.countries()[i].clone(),
                true_label: x.labels()[i],
                predicted: Class::from_decision(decision_value),
                decision_value,
            })
        })
        .collect::<Result<_>>()?;
    let s = aggregate(&folds)?;
    Ok(EvalReport {
        model_kind: kind,
        protocol: Protocol::Shared,
        hyperparams: params.clone(),
        seed,
        folds,
        confusion: s.confusion,
        precision: s.precision,
        recall: s.recall,
        accuracy: s.accuracy,
    })
}

/// Labeled country profiles plus what is needed to rebuild a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    /// Sorted by country id; intermediate countries are dropped.
    pub profiles: Vec<CountryProfile>,
    pub top_k: usize,
    pub scope: TopKScope,
    pub epsilon: f64,
}

impl ProfileSet {
    pub fn new(profiles: &[CountryProfile], top_k: usize, scope: TopKScope, epsilon: f64) -> Self {
        let mut profiles: Vec<CountryProfile> =
            profiles.iter().filter(|p| p.label.class().is_some()).cloned().collect();
        profiles.sort_by(|a, b| a.country_id.cmp(&b.country_id));
        Self {
            profiles,
            top_k,
            scope,
            epsilon,
        }
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Training matrix without `holdout`, and the holdout vectorized over the
    /// training vocabulary.
    pub fn fold(&self, holdout: usize) -> Result<(FeatureMatrix, Vec<f64>)> {
        let train: Vec<CountryProfile> = self
            .profiles
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != holdout)
            .map(|(_, p)| p.clone())
            .collect();
        let groups = build_groups(&train, self.top_k, self.scope).map_err(|e| match e {
            Error::EmptyGroup => Error::SingleClassData,
            e => e,
        })?;
        let vocab = build_vocabulary(&groups.higher_top, &groups.lower_top);
        let x = assemble(&train, &vocab, self.epsilon)?;
        let row = vectorize(&self.profiles[holdout], &vocab, self.epsilon);
        Ok((x, row))
    }
}

/// Leave-one-out where every fold rebuilds its vocabulary from its own
/// training countries, so the held-out country cannot influence which words
/// become features.
pub fn loo_evaluate_per_fold(set: &ProfileSet, kind: ModelKind, params: &Hyperparams, seed: u64) -> Result<EvalReport> {
    if set.len() < 2 {
        return Err(Error::InvalidParameter("leave-one-out needs at least two rows".into()));
    }
    let folds: Vec<FoldResult> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let (x, row) = set.fold(i)?;
            let train = x.samples();
            if !train.has_both_classes() {
                return Err(Error::SingleClassData);
            }
            let model = fit(kind, &train, params, derive_seed(seed, i as u64))?;
            let decision_value = model.decision_value(&row)?;
            let p = &set.profiles[i];
            Ok(FoldResult {
                holdout_country: p.country_id.clone(),
                true_label: p.label.class().expect("labeled"),
                predicted: Class::from_decision(decision_value),
                decision_value,
            })
        })
        .collect::<Result<_>>()?;
    let s = aggregate(&folds)?;
    Ok(EvalReport {
        model_kind: kind,
        protocol: Protocol::PerFold,
        hyperparams: params.clone(),
        seed,
        folds,
        confusion: s.confusion,
        precision: s.precision,
        recall: s.recall,
        accuracy: s.accuracy,
    })
}

/// Precision, recall and accuracy as percentages, one row per model.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:>9} {:>7} {:>8}",
        "Model", "Precision", "Recall", "Accuracy"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<20} {:>9.1} {:>7.1} {:>8.1}",
            r.model_kind.display_name(),
            100.0 * r.precision,
            100.0 * r.recall,
            100.0 * r.accuracy
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamRange {
    Uniform([f64; 2]),
    /// For positive scale parameters.
    LogUniform([f64; 2]),
    /// Inclusive integer range.
    IntUniform([i64; 2]),
    Categorical(Vec<f64>),
}

impl ParamRange {
    fn validate(&self, name: &str) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidParameter(format!("range for `{name}`: {why}")));
        match self {
            ParamRange::Uniform([lo, hi]) if !(lo.is_finite() && hi.is_finite()) => bad("bounds must be finite"),
            ParamRange::Uniform([lo, hi]) if lo > hi => bad("lo > hi"),
            ParamRange::LogUniform([lo, hi]) if !(*lo > 0.0 && hi.is_finite()) => {
                bad("log-uniform bounds must be positive")
            }
            ParamRange::LogUniform([lo, hi]) if lo > hi => bad("lo > hi"),
            ParamRange::IntUniform([lo, hi]) if lo > hi => bad("lo > hi"),
            ParamRange::Categorical(v) if v.is_empty() => bad("no choices"),
            _ => Ok(()),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ParamRange::Uniform([lo, hi]) => {
                if lo == hi {
                    *lo
                } else {
                    rng.gen_range(*lo..=*hi)
                }
            }
            ParamRange::LogUniform([lo, hi]) => {
                if lo == hi {
                    *lo
                } else {
                    rng.gen_range(lo.ln()..=hi.ln()).exp().clamp(*lo, *hi)
                }
            }
            ParamRange::IntUniform([lo, hi]) => rng.gen_range(*lo..=*hi) as f64,
            ParamRange::Categorical(v) => v[rng.gen_range(0..v.len())],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub model_kind: ModelKind,
    /// Parameters not listed keep their defaults.
    #[serde(default)]
    pub params: BTreeMap<String, ParamRange>,
    /// Fixed values applied to every trial before sampling.
    #[serde(default)]
    pub base: Hyperparams,
    pub trials: usize,
    pub seed: u64,
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("search needs at least one trial".into()));
        }
        for (name, range) in &self.params {
            if !self.model_kind.param_names().contains(&name.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "`{name}` is not a {} hyperparameter",
                    self.model_kind
                )));
            }
            range.validate(name)?;
        }
        ModelConfig::from_params(self.model_kind, &self.base)?;
        Ok(())
    }

    /// Built-in search ranges.
    pub fn default_for(kind: ModelKind, trials: usize, seed: u64) -> Self {
        let params: Vec<(&str, ParamRange)> = match kind {
            ModelKind::Logistic => vec![
                ("lambda", ParamRange::LogUniform([1e-5, 1.0])),
                ("steps", ParamRange::IntUniform([200, 1000])),
            ],
            ModelKind::SvmLinear => vec![
                ("c", ParamRange::LogUniform([1e-3, 1e2])),
                ("epochs", ParamRange::Categorical(vec![200.0, 300.0, 500.0])),
            ],
            ModelKind::DecisionTree => vec![
                ("max_depth", ParamRange::IntUniform([1, 8])),
                ("min_leaf", ParamRange::IntUniform([1, 3])),
            ],
            ModelKind::RandomForest => vec![
                ("n_trees", ParamRange::Categorical(vec![50.0, 100.0, 200.0])),
                ("max_depth", ParamRange::IntUniform([2, 8])),
                ("min_leaf", ParamRange::IntUniform([1, 2])),
            ],
        };
        Self {
            model_kind: kind,
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            base: Hyperparams::new(),
            trials,
            seed,
        }
    }

    /// Every trial's hyperparameters, drawn up front from one seeded stream.
    pub fn draw(&self) -> Vec<Hyperparams> {
        let mut rng = seeded_rng(self.seed);
        (0..self.trials)
            .map(|_| {
                let mut p = self.model_kind.default_params();
                p.extend(self.base.iter().map(|(k, v)| (k.clone(), *v)));
                for (name, range) in &self.params {
                    p.insert(name.clone(), range.sample(&mut rng));
                }
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: Hyperparams,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best_trial: usize,
    pub best_params: Hyperparams,
    pub best_report: EvalReport,
    pub trials: Vec<Trial>,
}

/// Best LOO accuracy wins; ties go to the earlier trial. Every trial trains
/// with `spec.seed`, so trials differ only in their hyperparameters.
pub fn random_search(x: &FeatureMatrix, spec: &SearchSpec) -> Result<SearchOutcome> {
    random_search_with(spec, |p| loo_evaluate(x, spec.model_kind, p, spec.seed))
}

/// [`random_search`] with the rebuilt-vocabulary protocol.
pub fn random_search_per_fold(set: &ProfileSet, spec: &SearchSpec) -> Result<SearchOutcome> {
    random_search_with(spec, |p| loo_evaluate_per_fold(set, spec.model_kind, p, spec.seed))
}

pub fn random_search_with<F>(spec: &SearchSpec, evaluate: F) -> Result<SearchOutcome>
where
    F: Fn(&Hyperparams) -> Result<EvalReport> + Sync,
{
    spec.validate()?;
    let points = spec.draw();
    let reports: Vec<EvalReport> = points.par_iter().map(&evaluate).collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.accuracy > reports[best].accuracy {
            best = i;
        }
    }
    let trials = points
        .iter()
        .zip(&reports)
        .map(|(p, r)| Trial {
            params: p.clone(),
            accuracy: r.accuracy,
        })
        .collect();
    let best_report = reports.into_iter().nth(best).expect("at least one trial");
    Ok(SearchOutcome {
        best_trial: best,
        best_params: best_report.hyperparams.clone(),
        best_report,
        trials,
    })
}
