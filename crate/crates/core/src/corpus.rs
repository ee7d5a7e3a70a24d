//! Article ingestion: tokenization and raw word-occurrence counting.
//!
//! A corpus is laid out as `<root>/<country_id>/*.txt`, one UTF-8 article per
//! file. Counting is additive, so per-country results merge associatively and
//! never depend on file enumeration order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single token together with the casing evidence used by proper-noun removal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub word: String,
    /// First character was uppercase in the source text.
    pub capitalized: bool,
    /// Token opens the article or follows `.`, `!` or `?`.
    pub sentence_initial: bool,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Iterator over the tokens of a text.
///
/// A token starts at an alphabetic character and extends over alphabetic
/// characters, apostrophes that follow a letter, and hyphens that are followed
/// by a letter. Everything else (digits included) separates tokens.
pub struct Tokens<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    at_sentence_start: bool,
}

impl<'a> Tokens<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            at_sentence_start: true,
        }
    }
}

impl Iterator for Tokens<'_> {
    type Item = Token;

    fn next(&mut self) -> Option<Token> {
        let first = loop {
            let c = self.chars.next()?;
            if c.is_alphabetic() {
                break c;
            }
            if matches!(c, '.' | '!' | '?') {
                self.at_sentence_start = true;
            }
        };

        let mut word = String::new();
        word.extend(first.to_lowercase());
        let mut prev_letter = true;
        while let Some(&c) = self.chars.peek() {
            if c.is_alphabetic() {
                word.extend(c.to_lowercase());
                prev_letter = true;
            } else if is_apostrophe(c) && prev_letter {
                word.push('\'');
                prev_letter = false;
            } else if c == '-' {
                let mut ahead = self.chars.clone();
                ahead.next();
                match ahead.peek() {
                    Some(n) if n.is_alphabetic() => {
                        word.push('-');
                        prev_letter = false;
                    }
                    _ => break,
                }
            } else {
                break;
            }
            self.chars.next();
        }

        let token = Token {
            word,
            capitalized: first.is_uppercase(),
            sentence_initial: self.at_sentence_start,
        };
        self.at_sentence_start = false;
        Some(token)
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    Tokens::new(text).map(|t| t.word).collect()
}

/// Per-country word occurrence counts.
///
/// Serializes as `{"country":…,"total_tokens":N,"counts":{…}}` with words in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCounts {
    pub country: String,
    pub total_tokens: u64,
    pub counts: BTreeMap<String, u64>,
}

impl RawCounts {
    pub fn empty(country: impl Into<String>) -> Self {
        Self {
            country: country.into(),
            total_tokens: 0,
            counts: BTreeMap::new(),
        }
    }

    /// Builds counts from a map, dropping zero entries and recomputing the total.
    pub fn from_counts(country: impl Into<String>, counts: BTreeMap<String, u64>) -> Self {
        let counts: BTreeMap<_, _> = counts.into_iter().filter(|(_, n)| *n > 0).collect();
        let total_tokens = counts.values().sum();
        Self {
            country: country.into(),
            total_tokens,
            counts,
        }
    }

    pub fn add_text(&mut self, text: &str) {
        for word in Tokens::new(text).map(|t| t.word) {
            *self.counts.entry(word).or_insert(0) += 1;
            self.total_tokens += 1;
        }
    }

    pub fn merge(&mut self, other: &RawCounts) {
        for (w, n) in &other.counts {
            *self.counts.entry(w.clone()).or_insert(0) += n;
        }
        self.total_tokens += other.total_tokens;
    }

    /// Keeps only words satisfying `keep`, recomputing the total.
    pub fn retain(&self, mut keep: impl FnMut(&str) -> bool) -> RawCounts {
        let counts = self
            .counts
            .iter()
            .filter(|(w, _)| keep(w))
            .map(|(w, n)| (w.clone(), *n))
            .collect();
        RawCounts::from_counts(self.country.clone(), counts)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("RawCounts serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Counts tokens across `articles`.
pub fn count_words<'a>(country: &str, articles: impl IntoIterator<Item = &'a str>) -> Result<RawCounts> {
    let mut counts = RawCounts::empty(country);
    for article in articles {
        counts.add_text(article);
    }
    if counts.total_tokens == 0 {
        return Err(Error::EmptyCorpus(country.to_string()));
    }
    Ok(counts)
}

/// Casing statistics for one word.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCase {
    pub occurrences: u64,
    pub non_initial: u64,
    pub capitalized_non_initial: u64,
}

/// Casing evidence accumulated from raw text, consumed by the capitalization
/// heuristic in proper-noun removal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseEvidence {
    pub words: BTreeMap<String, WordCase>,
}

impl CaseEvidence {
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut ev = CaseEvidence::default();
        for t in texts {
            ev.add_text(t);
        }
        ev
    }

    pub fn add_text(&mut self, text: &str) {
        for tok in Tokens::new(text) {
            self.add_token(&tok);
        }
    }

    fn add_token(&mut self, tok: &Token) {
        let entry = self.words.entry(tok.word.clone()).or_default();
        entry.occurrences += 1;
        if !tok.sentence_initial {
            entry.non_initial += 1;
            if tok.capitalized {
                entry.capitalized_non_initial += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &CaseEvidence) {
        for (w, c) in &other.words {
            let e = self.words.entry(w.clone()).or_default();
            e.occurrences += c.occurrences;
            e.non_initial += c.non_initial;
            e.capitalized_non_initial += c.capitalized_non_initial;
        }
    }
}

/// One country's article directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleSource {
    pub country_id: String,
    pub dir: PathBuf,
    pub article_count: usize,
}

impl ArticleSource {
    pub fn from_dir(country_id: impl Into<String>, dir: impl Into<PathBuf>) -> Result<Self> {
        let country_id = country_id.into();
        if country_id.is_empty() {
            return Err(Error::InvalidParameter("empty country id".into()));
        }
        let dir = dir.into();
        let article_count = article_paths(&dir)?.len();
        Ok(Self {
            country_id,
            dir,
            article_count,
        })
    }

    pub fn articles(&self) -> Result<Vec<PathBuf>> {
        article_paths(&self.dir)
    }
}

/// Sorted `*.txt` paths directly under `dir`.
pub fn article_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "txt") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Lists one source per subdirectory of `root`, sorted by country id.
pub fn discover(root: &Path) -> Result<Vec<ArticleSource>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut sources = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if !path.is_dir() {
            continue;
        }
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        sources.push(ArticleSource::from_dir(name, &path)?);
    }
    sources.sort_by(|a, b| a.country_id.cmp(&b.country_id));
    Ok(sources)
}

pub fn ingest_country(source: &ArticleSource) -> Result<RawCounts> {
    ingest_country_with_case(source).map(|(c, _)| c)
}

/// Reads every article under the source one file at a time, producing counts
/// and casing evidence in a single pass.
pub fn ingest_country_with_case(source: &ArticleSource) -> Result<(RawCounts, CaseEvidence)> {
    let mut counts = RawCounts::empty(&source.country_id);
    let mut case = CaseEvidence::default();
    for path in source.articles()? {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        for tok in Tokens::new(&text) {
            case.add_token(&tok);
            *counts.counts.entry(tok.word).or_insert(0) += 1;
            counts.total_tokens += 1;
        }
    }
    if counts.total_tokens == 0 {
        return Err(Error::EmptyCorpus(source.country_id.clone()));
    }
    Ok((counts, case))
}
