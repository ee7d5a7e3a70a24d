//! TOML pipeline configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use peacelex::dataset::DEFAULT_LOG_EPSILON;
use peacelex::evaluation::{ParamRange, Protocol, SearchSpec};
use peacelex::features::{CloudOptions, Selection};
use peacelex::models::{Hyperparams, ModelConfig, ModelKind};
use peacelex::pipeline::LabelFile;
use peacelex::preprocess::{FilterConfig, FilterPolicy};
use peacelex::semantic::Provenance;
use peacelex::synth::SyntheticSpec;
use peacelex::PeaceLabel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_root: PathBuf,
    /// Label file. When absent, `<corpus_root>/labels.toml` if it exists,
    /// otherwise the shipped 10 + 10 country list.
    pub labels_file: Option<PathBuf>,
    /// Inline labels, applied over the file.
    pub labels: BTreeMap<String, PeaceLabel>,
    pub output_dir: PathBuf,
    pub log_epsilon: f64,
    pub seed: u64,
    pub filter: FilterConfig,
    pub evaluation: EvaluationConfig,
    /// Per-model sections keyed by model slug.
    pub models: BTreeMap<String, ModelSection>,
    pub features: FeaturesConfig,
    pub cloud: CloudOptions,
    pub semantic: SemanticConfig,
    pub compare: CompareConfig,
    pub synth: SyntheticSpec,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus_root: "corpus".into(),
            labels_file: None,
            labels: BTreeMap::new(),
            output_dir: "out".into(),
            log_epsilon: DEFAULT_LOG_EPSILON,
            seed: 42,
            filter: FilterConfig::default(),
            evaluation: EvaluationConfig::default(),
            models: BTreeMap::new(),
            features: FeaturesConfig::default(),
            cloud: CloudOptions::default(),
            semantic: SemanticConfig::default(),
            compare: CompareConfig::default(),
            synth: SyntheticSpec::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub protocol: Protocol,
    pub models: Vec<ModelKind>,
    /// Random-search trials per model; 0 trains with fixed parameters.
    pub trials: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::PerFold,
            models: ModelKind::ALL.to_vec(),
            trials: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub trials: Option<usize>,
    /// Fixed values. Used as-is without search, and on top of the defaults.
    pub params: Hyperparams,
    /// Replaces the default range of each listed parameter.
    pub search: BTreeMap<String, ParamRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// Words per model, keyed by slug.
    pub top_n: BTreeMap<String, usize>,
    pub selection: Selection,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        let top_n = [
            (ModelKind::Logistic, 75),
            (ModelKind::SvmLinear, 75),
            (ModelKind::DecisionTree, 50),
            (ModelKind::RandomForest, 50),
        ]
        .into_iter()
        .map(|(k, n)| (k.slug().to_string(), n))
        .collect();
        Self {
            top_n,
            selection: Selection::PerClass,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterScope {
    /// All ranked words of a model in one map.
    #[default]
    PerModel,
    /// One map per model and group.
    PerGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticConfig {
    pub models: Vec<ModelKind>,
    /// JSONL embedding file. Defaults to `<corpus_root>/embeddings.jsonl`.
    pub embeddings: Option<PathBuf>,
    /// Embedding service, used when no file is given.
    pub endpoint: Option<String>,
    pub k: usize,
    pub scope: ClusterScope,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        Self {
            models: vec![ModelKind::SvmLinear, ModelKind::RandomForest],
            embeddings: None,
            endpoint: None,
            k: 3,
            scope: ClusterScope::PerModel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Theme files keyed by map name (`svm-linear`, or `svm-linear-higher` per group).
    pub themes: BTreeMap<String, PathBuf>,
    pub provenance: Provenance,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            themes: BTreeMap::new(),
            provenance: Provenance::ExternalLlm,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::ConfigInvalid(msg.into())
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut c: PipelineConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_root(&self) -> PathBuf {
        self.resolve(&self.corpus_root)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.log_epsilon > 0.0 && self.log_epsilon.is_finite()) {
            return Err(invalid("log_epsilon must be positive"));
        }
        if self.filter.top_k == 0 {
            return Err(invalid("filter.top_k must be at least 1"));
        }
        let mut seen = BTreeSet::new();
        for k in &self.evaluation.models {
            if !seen.insert(*k) {
                return Err(invalid(format!("model `{k}` listed twice in evaluation.models")));
            }
        }
        if self.evaluation.models.is_empty() {
            return Err(invalid("evaluation.models is empty"));
        }
        for (slug, section) in &self.models {
            let kind = ModelKind::parse(slug).map_err(|e| invalid(e.to_string()))?;
            if slug != kind.slug() {
                return Err(invalid(format!(
                    "use the model name `{}` instead of `{slug}`",
                    kind.slug()
                )));
            }
            ModelConfig::from_params(kind, &self.fixed_params(kind))
                .map_err(|e| invalid(format!("models.{slug}: {e}")))?;
            if !section.search.is_empty() {
                self.search_spec(kind, 1)
                    .validate()
                    .map_err(|e| invalid(format!("models.{slug}.search: {e}")))?;
            }
        }
        for (slug, &n) in &self.features.top_n {
            ModelKind::parse(slug).map_err(|e| invalid(e.to_string()))?;
            if n == 0 {
                return Err(invalid(format!("features.top_n.{slug} must be positive")));
            }
        }
        if self.semantic.k == 0 {
            return Err(invalid("semantic.k must be positive"));
        }
        self.synth.validate().map_err(|e| invalid(format!("synth: {e}")))?;
        let c = &self.cloud;
        if !(c.width > 0.0 && c.height > 0.0 && c.min_font > 0.0 && c.max_font >= c.min_font) {
            return Err(invalid("cloud needs positive canvas and 0 < min_font <= max_font"));
        }
        Ok(())
    }

    fn section(&self, kind: ModelKind) -> Option<&ModelSection> {
        self.models.get(kind.slug())
    }

    /// Defaults with the section's fixed values applied.
    pub fn fixed_params(&self, kind: ModelKind) -> Hyperparams {
        let mut p = kind.default_params();
        if let Some(s) = self.section(kind) {
            p.extend(s.params.iter().map(|(k, v)| (k.clone(), *v)));
        }
        p
    }

    pub fn trials(&self, kind: ModelKind) -> usize {
        self.section(kind)
            .and_then(|s| s.trials)
            .unwrap_or(self.evaluation.trials)
    }

    /// Default ranges, replaced per parameter by the section's ranges. Fixed
    /// parameters are not searched.
    pub fn search_spec(&self, kind: ModelKind, trials: usize) -> SearchSpec {
        let mut spec = SearchSpec::default_for(kind, trials, self.seed);
        if let Some(s) = self.section(kind) {
            for k in s.params.keys() {
                spec.params.remove(k);
            }
            spec.base = s.params.clone();
            spec.params.extend(s.search.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        spec
    }

    pub fn top_n(&self, kind: ModelKind) -> usize {
        self.features
            .top_n
            .iter()
            .find(|(slug, _)| ModelKind::parse(slug).ok() == Some(kind))
            .map(|(_, &n)| n)
            .unwrap_or(50)
    }

    pub fn label_map(&self) -> CliResult<BTreeMap<String, PeaceLabel>> {
        let beside = self.corpus_root().join("labels.toml");
        let mut labels = match &self.labels_file {
            Some(p) => LabelFile::load(&self.resolve(p))?.labels,
            None if beside.is_file() => LabelFile::load(&beside)?.labels,
            None => LabelFile::default_labels().labels,
        };
        labels.extend(self.labels.iter().map(|(k, v)| (k.clone(), *v)));
        Ok(labels)
    }

    /// Configured file, else `<corpus_root>/embeddings.jsonl` when present
    /// and no endpoint is set.
    pub fn embeddings_file(&self) -> Option<PathBuf> {
        match (&self.semantic.embeddings, &self.semantic.endpoint) {
            (Some(p), _) => Some(self.resolve(p)),
            (None, None) => Some(self.corpus_root().join("embeddings.jsonl")).filter(|p| p.is_file()),
            (None, Some(_)) => None,
        }
    }

    pub fn filter_policy(&self) -> CliResult<FilterPolicy> {
        self.filter.clone().into_policy(&self.base_dir).map_err(|e| match e {
            peacelex::Error::Io { .. } => CliError::Core(e),
            e => invalid(format!("filter: {e}")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = PipelineConfig::parse("", Path::new("/x")).unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.evaluation.models.len(), 4);
        assert_eq!(c.top_n(ModelKind::SvmLinear), 75);
        assert_eq!(c.top_n(ModelKind::RandomForest), 50);
        assert_eq!(c.output_dir(), PathBuf::from("/x/out"));
        assert_eq!(c.label_map().unwrap().len(), 20);
    }

    #[test]
    fn sections_parse() {
        let text = r#"
            seed = 7
            corpus_root = "/data/corpus"
            [labels]
            brazil = "intermediate"
            [evaluation]
            models = ["svm-linear", "random-forest"]
            protocol = "shared"
            [models.svm-linear]
            params = { epochs = 100 }
            [models.svm-linear.search]
            c = { log-uniform = [0.1, 10.0] }
            [cloud]
            width = 400.0
            [synth]
            marker_boost = 1.0
        "#;
        let c = PipelineConfig::parse(text, Path::new("/cfg")).unwrap();
        assert_eq!(c.corpus_root(), PathBuf::from("/data/corpus"));
        assert_eq!(c.evaluation.protocol, Protocol::Shared);
        assert_eq!(c.fixed_params(ModelKind::SvmLinear)["epochs"], 100.0);
        let spec = c.search_spec(ModelKind::SvmLinear, 5);
        assert_eq!(spec.params.len(), 1);
        assert_eq!(spec.params["c"], ParamRange::LogUniform([0.1, 10.0]));
        assert_eq!(spec.seed, 7);
        assert_eq!(c.cloud.width, 400.0);
        assert_eq!(c.cloud.height, 600.0);
        assert_eq!(c.label_map().unwrap()["brazil"], PeaceLabel::Intermediate);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "log_epsilon = 0.0",
            "unknown_key = 1",
            "[evaluation]\nmodels = []",
            "[evaluation]\nmodels = [\"logistic\", \"logistic\"]",
            "[models.perceptron]\ntrials = 1",
            "[models.svm]\ntrials = 1",
            "[models.logistic]\nparams = { alpha = 1.0 }",
            "[models.logistic.search]\nlambda = { log-uniform = [-1.0, 1.0] }",
            "[features.top_n]\nlogistic = 0",
            "[semantic]\nk = 0",
            "[synth]\nmarker_boost = 0.5",
            "[cloud]\nmin_font = 30.0\nmax_font = 10.0",
        ] {
            let e = PipelineConfig::parse(text, Path::new(".")).unwrap_err();
            assert_eq!(e.exit_code(), crate::error::EXIT_CONFIG, "{text}");
        }
    }
}
