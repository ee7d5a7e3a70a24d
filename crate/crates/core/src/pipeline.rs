//! Corpus directory to feature matrix in one call, plus label files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{discover, ingest_country_with_case, ArticleSource};
use crate::dataset::{assemble, build_vocabulary, FeatureMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::label::PeaceLabel;
use crate::preprocess::{preprocess, CountryInput, CountryProfile, FilterPolicy, Preprocessed};

pub const DEFAULT_LABELS: &str = include_str!("../data/default_labels.toml");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelFile {
    pub labels: BTreeMap<String, PeaceLabel>,
}

impl LabelFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn default_labels() -> Self {
        Self::parse(DEFAULT_LABELS).expect("shipped label file parses")
    }
}

/// Reads every labeled country under `root`. Directories without a label are
/// returned by name and otherwise ignored.
pub fn ingest_corpus(root: &Path, labels: &BTreeMap<String, PeaceLabel>) -> Result<(Vec<CountryInput>, Vec<String>)> {
    let sources = discover(root)?;
    let (known, unknown): (Vec<ArticleSource>, Vec<ArticleSource>) =
        sources.into_iter().partition(|s| labels.contains_key(&s.country_id));
    let inputs = known
        .par_iter()
        .map(|s| {
            let (counts, case) = ingest_country_with_case(s)?;
            Ok(CountryInput {
                counts,
                label: labels[&s.country_id],
                case: Some(case),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((inputs, unknown.into_iter().map(|s| s.country_id).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub preprocessed: Preprocessed,
    pub vocabulary: Vocabulary,
    /// Higher and lower countries only.
    pub matrix: FeatureMatrix,
}

impl Dataset {
    pub fn intermediates(&self) -> impl Iterator<Item = &CountryProfile> {
        self.preprocessed
            .profiles
            .iter()
            .filter(|p| p.label == PeaceLabel::Intermediate)
    }
}

pub fn build_dataset(inputs: &[CountryInput], policy: &FilterPolicy, epsilon: f64) -> Result<Dataset> {
    let preprocessed = preprocess(inputs, policy)?;
    let vocabulary = build_vocabulary(&preprocessed.groups.higher_top, &preprocessed.groups.lower_top);
    let labeled: Vec<CountryProfile> = preprocessed
        .profiles
        .iter()
        .filter(|p| p.label.class().is_some())
        .cloned()
        .collect();
    let matrix = assemble(&labeled, &vocabulary, epsilon)?;
    Ok(Dataset {
        preprocessed,
        vocabulary,
        matrix,
    })
}
