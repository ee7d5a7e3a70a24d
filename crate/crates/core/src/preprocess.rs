//! Filtering chain and frequency normalization.
//!
//! Order: proper-noun removal, stop-word filter, per-country normalization,
//! group averaging, then top-K selection (per group by default).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CaseEvidence, RawCounts};
use crate::error::{Error, Result};
use crate::label::{Class, PeaceLabel};

/// Shipped removal list.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Default keep list: personal pronouns.
pub const DEFAULT_KEEP: &[&str] = &["i", "me", "we", "us", "you", "he", "him", "she", "her", "they", "them"];

/// Fraction of capitalized non-sentence-initial occurrences above which a
/// word is treated as a proper noun.
pub const PROPER_NOUN_THRESHOLD: f64 = 0.8;

pub const DEFAULT_TOP_K: usize = 1000;

/// Parses a newline-delimited word list. Blank lines and `#` comments are skipped.
pub fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn read_word_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_word_list(&text))
}

pub fn default_stopwords() -> BTreeSet<String> {
    parse_word_list(DEFAULT_STOPWORDS)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProperNounMode {
    CapitalizationHeuristic,
    Lexicon(BTreeSet<String>),
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopKScope {
    #[default]
    Group,
    Country,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    stopwords_remove: BTreeSet<String>,
    stopwords_keep: BTreeSet<String>,
    pub proper_noun_mode: ProperNounMode,
    top_k: usize,
    pub top_k_scope: TopKScope,
}

impl FilterPolicy {
    pub fn new(
        stopwords_remove: BTreeSet<String>,
        stopwords_keep: BTreeSet<String>,
        proper_noun_mode: ProperNounMode,
        top_k: usize,
        top_k_scope: TopKScope,
    ) -> Result<Self> {
        let overlap: Vec<String> = stopwords_remove.intersection(&stopwords_keep).cloned().collect();
        if !overlap.is_empty() {
            return Err(Error::PolicyConflict(overlap));
        }
        if top_k == 0 {
            return Err(Error::InvalidParameter("top_k must be at least 1".into()));
        }
        Ok(Self {
            stopwords_remove,
            stopwords_keep,
            proper_noun_mode,
            top_k,
            top_k_scope,
        })
    }

    pub fn stopwords_remove(&self) -> &BTreeSet<String> {
        &self.stopwords_remove
    }

    pub fn stopwords_keep(&self) -> &BTreeSet<String> {
        &self.stopwords_keep
    }

    pub fn top_k(&self) -> usize {
        self.top_k
    }
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterConfig::default()
            .into_policy(Path::new("."))
            .expect("default filter config is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProperNounSetting {
    #[default]
    Capitalization,
    Lexicon,
    Off,
}

/// Serialized form of [`FilterPolicy`], as it appears in TOML or JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Start from the shipped stop-word list.
    pub default_stopwords: bool,
    /// Additional newline-delimited removal list.
    pub stopwords_file: Option<PathBuf>,
    pub extra_remove: Vec<String>,
    /// Words never removed. Defaults to personal pronouns.
    pub keep: Vec<String>,
    pub proper_nouns: ProperNounSetting,
    pub proper_noun_lexicon: Option<PathBuf>,
    pub top_k: usize,
    pub top_k_scope: TopKScope,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            default_stopwords: true,
            stopwords_file: None,
            extra_remove: Vec::new(),
            keep: DEFAULT_KEEP.iter().map(|s| s.to_string()).collect(),
            proper_nouns: ProperNounSetting::default(),
            proper_noun_lexicon: None,
            top_k: DEFAULT_TOP_K,
            top_k_scope: TopKScope::default(),
        }
    }
}

impl FilterConfig {
    /// Loads a config file; `.json` is parsed as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
        }
    }

    /// Resolves word lists (relative paths against `base_dir`) into a policy.
    ///
    /// Keep-list words are subtracted from the shipped and file-based lists;
    /// an explicit `extra_remove` entry that is also kept is a conflict.
    pub fn into_policy(self, base_dir: &Path) -> Result<FilterPolicy> {
        let keep: BTreeSet<String> = self.keep.iter().map(|w| w.trim().to_lowercase()).collect();
        let mut inherited = BTreeSet::new();
        if self.default_stopwords {
            inherited.extend(default_stopwords());
        }
        if let Some(p) = &self.stopwords_file {
            inherited.extend(read_word_list(&base_dir.join(p))?);
        }
        let explicit: BTreeSet<String> = self.extra_remove.iter().map(|w| w.trim().to_lowercase()).collect();
        let mut remove: BTreeSet<String> = inherited.difference(&keep).cloned().collect();
        remove.extend(explicit);

        let mode = match self.proper_nouns {
            ProperNounSetting::Capitalization => ProperNounMode::CapitalizationHeuristic,
            ProperNounSetting::Off => ProperNounMode::Off,
            ProperNounSetting::Lexicon => {
                let p = self.proper_noun_lexicon.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("proper_nouns = lexicon requires proper_noun_lexicon".into())
                })?;
                ProperNounMode::Lexicon(read_word_list(&base_dir.join(p))?)
            }
        };
        FilterPolicy::new(remove, keep, mode, self.top_k, self.top_k_scope)
    }
}

pub fn remove_proper_nouns(
    counts: &RawCounts,
    mode: &ProperNounMode,
    evidence: Option<&CaseEvidence>,
) -> Result<RawCounts> {
    match mode {
        ProperNounMode::Off => Ok(counts.clone()),
        ProperNounMode::Lexicon(lexicon) => Ok(counts.retain(|w| !lexicon.contains(w))),
        ProperNounMode::CapitalizationHeuristic => {
            let evidence = evidence.ok_or(Error::MissingRawText)?;
            Ok(counts.retain(|w| !is_proper_noun(evidence, w)))
        }
    }
}

/// A word with no non-initial occurrences carries no evidence and is kept.
fn is_proper_noun(evidence: &CaseEvidence, word: &str) -> bool {
    match evidence.words.get(word) {
        Some(c) if c.non_initial > 0 => {
            (c.capitalized_non_initial as f64 / c.non_initial as f64) > PROPER_NOUN_THRESHOLD
        }
        _ => false,
    }
}

pub fn filter_stopwords(counts: &RawCounts, policy: &FilterPolicy) -> RawCounts {
    counts.retain(|w| policy.stopwords_keep.contains(w) || !policy.stopwords_remove.contains(w))
}

/// Keeps the `k` highest-valued entries, ties broken by ascending word.
pub fn top_k_words(map: &BTreeMap<String, f64>, k: usize) -> BTreeMap<String, f64> {
    let mut entries: Vec<(&String, f64)> = map.iter().map(|(w, v)| (w, *v)).collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries.into_iter().take(k).map(|(w, v)| (w.clone(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryProfile {
    pub country_id: String,
    pub label: PeaceLabel,
    pub norm_freq: BTreeMap<String, f64>,
}

/// Divides each count by the total over the (filtered) vocabulary.
pub fn normalize(counts: &RawCounts, label: PeaceLabel) -> Result<CountryProfile> {
    let total: u64 = counts.counts.values().sum();
    if total == 0 {
        return Err(Error::EmptyCorpus(counts.country.clone()));
    }
    let total = total as f64;
    let norm_freq = counts
        .counts
        .iter()
        .map(|(w, n)| (w.clone(), *n as f64 / total))
        .collect();
    Ok(CountryProfile {
        country_id: counts.country.clone(),
        label,
        norm_freq,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    pub label: Class,
    pub avg_freq: BTreeMap<String, f64>,
    pub member_count: usize,
}

impl GroupProfile {
    pub fn truncated(&self, k: usize) -> GroupProfile {
        GroupProfile {
            label: self.label,
            avg_freq: top_k_words(&self.avg_freq, k),
            member_count: self.member_count,
        }
    }

    pub fn freq(&self, word: &str) -> f64 {
        self.avg_freq.get(word).copied().unwrap_or(0.0)
    }
}

/// Mean normalized frequency per word; a member lacking the word contributes 0.
pub fn group_average<'a>(profiles: impl IntoIterator<Item = &'a CountryProfile>, label: Class) -> Result<GroupProfile> {
    let mut sums: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut members: Vec<&CountryProfile> = Vec::new();
    for p in profiles {
        if p.label != label.label() {
            return Err(Error::LabelMismatch {
                country: p.country_id.clone(),
                expected: label.to_string(),
                found: p.label.to_string(),
            });
        }
        members.push(p);
    }
    if members.is_empty() {
        return Err(Error::EmptyGroup);
    }
    // Sum in country-id order so the result does not depend on input order.
    members.sort_by(|a, b| a.country_id.cmp(&b.country_id));
    for p in &members {
        for (w, f) in &p.norm_freq {
            sums.entry(w.clone()).or_default().push(*f);
        }
    }
    let n = members.len() as f64;
    let avg_freq = sums
        .into_iter()
        .map(|(w, vals)| (w, vals.iter().sum::<f64>() / n))
        .collect();
    Ok(GroupProfile {
        label,
        avg_freq,
        member_count: members.len(),
    })
}

/// Full and top-K group aggregates for the two training classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Groups {
    pub higher: GroupProfile,
    pub lower: GroupProfile,
    pub higher_top: GroupProfile,
    pub lower_top: GroupProfile,
}

impl Groups {
    pub fn full(&self, class: Class) -> &GroupProfile {
        match class {
            Class::Higher => &self.higher,
            Class::Lower => &self.lower,
        }
    }

    pub fn top(&self, class: Class) -> &GroupProfile {
        match class {
            Class::Higher => &self.higher_top,
            Class::Lower => &self.lower_top,
        }
    }

    /// Word is in both groups' top-K selections.
    pub fn is_shared(&self, word: &str) -> bool {
        self.higher_top.avg_freq.contains_key(word) && self.lower_top.avg_freq.contains_key(word)
    }
}

/// One country's input to the preprocessing chain.
#[derive(Debug, Clone)]
pub struct CountryInput {
    pub counts: RawCounts,
    pub label: PeaceLabel,
    pub case: Option<CaseEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessed {
    /// Every country, sorted by id. Truncated to top-K only in per-country scope.
    pub profiles: Vec<CountryProfile>,
    pub groups: Groups,
}

/// Filters and normalizes one country.
pub fn profile_country(input: &CountryInput, policy: &FilterPolicy) -> Result<CountryProfile> {
    let counts = remove_proper_nouns(&input.counts, &policy.proper_noun_mode, input.case.as_ref())?;
    let counts = filter_stopwords(&counts, policy);
    let mut profile = normalize(&counts, input.label)?;
    if policy.top_k_scope == TopKScope::Country {
        profile.norm_freq = top_k_words(&profile.norm_freq, policy.top_k);
    }
    Ok(profile)
}

pub fn preprocess(inputs: &[CountryInput], policy: &FilterPolicy) -> Result<Preprocessed> {
    let mut profiles = inputs
        .par_iter()
        .map(|i| profile_country(i, policy))
        .collect::<Result<Vec<_>>>()?;
    profiles.sort_by(|a, b| a.country_id.cmp(&b.country_id));

    let groups = build_groups(&profiles, policy.top_k, policy.top_k_scope)?;
    Ok(Preprocessed { profiles, groups })
}

/// Group averages over the labeled profiles; intermediate countries are skipped.
pub fn build_groups(profiles: &[CountryProfile], top_k: usize, scope: TopKScope) -> Result<Groups> {
    let group = |class: Class| -> Result<(GroupProfile, GroupProfile)> {
        let full = group_average(profiles.iter().filter(|p| p.label == class.label()), class)?;
        let top = match scope {
            TopKScope::Group => full.truncated(top_k),
            TopKScope::Country => full.clone(),
        };
        Ok((full, top))
    };
    let (higher, higher_top) = group(Class::Higher)?;
    let (lower, lower_top) = group(Class::Lower)?;
    Ok(Groups {
        higher,
        higher_top,
        lower,
        lower_top,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::count_words;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn raw(pairs: &[(&str, u64)]) -> RawCounts {
        RawCounts::from_counts("c", pairs.iter().map(|(w, n)| (w.to_string(), *n)).collect())
    }

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn capitalized_mid_sentence_word_is_removed() {
        let texts = [
            "Troops left Afghanistan today.",
            "Aid to Afghanistan rose.",
            "The talks in Afghanistan stalled.",
            "Many fled Afghanistan last year.",
            "Trade with Afghanistan grew slowly.",
        ];
        let ev = CaseEvidence::from_texts(texts);
        let counts = count_words("c", texts).unwrap();
        let out = remove_proper_nouns(&counts, &ProperNounMode::CapitalizationHeuristic, Some(&ev)).unwrap();
        assert!(!out.counts.contains_key("afghanistan"));
        assert!(out.counts.contains_key("troops"));
        assert_eq!(out.total_tokens, out.counts.values().sum::<u64>());
    }

    #[test]
    fn sentence_initial_capitals_do_not_count() {
        let texts = ["May brings rain. May ends soon.", "It may rain.", "May is warm."];
        let ev = CaseEvidence::from_texts(texts);
        let counts = count_words("c", texts).unwrap();
        let out = remove_proper_nouns(&counts, &ProperNounMode::CapitalizationHeuristic, Some(&ev)).unwrap();
        assert!(out.counts.contains_key("may"));
    }

    #[test]
    fn threshold_is_strict() {
        // 4 of 5 non-initial occurrences capitalized: exactly 0.8, not above it.
        let ev = CaseEvidence::from_texts(["a Nile b Nile c Nile d Nile e nile"]);
        let counts = count_words("c", ["a Nile"]).unwrap();
        let out = remove_proper_nouns(&counts, &ProperNounMode::CapitalizationHeuristic, Some(&ev)).unwrap();
        assert!(out.counts.contains_key("nile"));
    }

    #[test]
    fn heuristic_requires_evidence() {
        let c = raw(&[("x", 1)]);
        assert!(matches!(
            remove_proper_nouns(&c, &ProperNounMode::CapitalizationHeuristic, None),
            Err(Error::MissingRawText)
        ));
    }

    #[test]
    fn off_and_lexicon_modes() {
        let c = raw(&[("kabul", 3), ("road", 2)]);
        assert_eq!(remove_proper_nouns(&c, &ProperNounMode::Off, None).unwrap(), c);
        let out = remove_proper_nouns(&c, &ProperNounMode::Lexicon(set(&["kabul"])), None).unwrap();
        assert_eq!(out, raw(&[("road", 2)]));
    }

    #[test]
    fn stopword_removal() {
        let policy = FilterPolicy::new(
            set(&["the"]),
            BTreeSet::new(),
            ProperNounMode::Off,
            10,
            TopKScope::Group,
        )
        .unwrap();
        let out = filter_stopwords(&raw(&[("the", 5), ("kill", 2)]), &policy);
        assert_eq!(out, raw(&[("kill", 2)]));
    }

    #[test]
    fn keep_overrides_default_list_and_conflicts_are_rejected() {
        let cfg = FilterConfig {
            keep: vec!["we".into()],
            ..FilterConfig::default()
        };
        assert!(default_stopwords().contains("we"));
        let policy = cfg.into_policy(Path::new(".")).unwrap();
        assert!(!policy.stopwords_remove().contains("we"));
        assert!(policy.stopwords_remove().contains("the"));
        let out = filter_stopwords(&raw(&[("we", 4), ("the", 1)]), &policy);
        assert_eq!(out, raw(&[("we", 4)]));

        let cfg = FilterConfig {
            keep: vec!["we".into()],
            extra_remove: vec!["we".into()],
            ..FilterConfig::default()
        };
        assert!(matches!(cfg.into_policy(Path::new(".")), Err(Error::PolicyConflict(_))));
        assert!(matches!(
            FilterPolicy::new(set(&["a"]), set(&["a"]), ProperNounMode::Off, 1, TopKScope::Group),
            Err(Error::PolicyConflict(_))
        ));
    }

    #[test]
    fn filter_config_parses_toml_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("f.toml");
        fs::write(
            &t,
            "top_k = 5\nproper_nouns = \"off\"\nkeep = []\nextra_remove = [\"news\"]\n",
        )
        .unwrap();
        let cfg = FilterConfig::load(&t).unwrap();
        assert_eq!(cfg.top_k, 5);
        let p = cfg.into_policy(dir.path()).unwrap();
        assert_eq!(p.proper_noun_mode, ProperNounMode::Off);
        assert!(p.stopwords_remove().contains("news"));
        assert!(p.stopwords_remove().contains("we"));

        let j = dir.path().join("f.json");
        fs::write(&j, r#"{"top_k_scope": "country", "default_stopwords": false}"#).unwrap();
        let p = FilterConfig::load(&j).unwrap().into_policy(dir.path()).unwrap();
        assert_eq!(p.top_k_scope, TopKScope::Country);
        assert!(p.stopwords_remove().is_empty());
    }

    #[test]
    fn topk_basic_and_ties() {
        let m = |pairs: &[(&str, f64)]| -> BTreeMap<String, f64> {
            pairs.iter().map(|(w, v)| (w.to_string(), *v)).collect()
        };
        assert_eq!(
            top_k_words(&m(&[("a", 3.0), ("b", 2.0), ("c", 1.0)]), 2),
            m(&[("a", 3.0), ("b", 2.0)])
        );
        assert_eq!(top_k_words(&m(&[("b", 1.0), ("a", 1.0)]), 1), m(&[("a", 1.0)]));
        assert_eq!(top_k_words(&m(&[("a", 1.0)]), 10).len(), 1);
    }

    #[test]
    fn topk_matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let map: BTreeMap<String, f64> = (0..5000)
            .map(|i| (format!("w{i:05}"), f64::from(rng.gen_range(0..400u32))))
            .collect();
        let got = top_k_words(&map, 1000);
        let mut all: Vec<_> = map.iter().collect();
        // descending value, then ascending word
        all.sort_by(|a, b| {
            if a.1 != b.1 {
                b.1.partial_cmp(a.1).unwrap()
            } else {
                a.0.cmp(b.0)
            }
        });
        let expected: BTreeMap<String, f64> = all[..1000].iter().map(|(w, v)| ((*w).clone(), **v)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn normalize_examples() {
        let p = normalize(&raw(&[("x", 1)]), PeaceLabel::HigherPeace).unwrap();
        assert_eq!(p.norm_freq["x"], 1.0);
        let p = normalize(&raw(&[("a", 1), ("b", 3)]), PeaceLabel::HigherPeace).unwrap();
        assert_eq!(p.norm_freq["a"], 0.25);
        assert_eq!(p.norm_freq["b"], 0.75);
        assert!(matches!(
            normalize(&raw(&[]), PeaceLabel::LowerPeace),
            Err(Error::EmptyCorpus(_))
        ));
    }

    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn normalize_matches_exact_fractions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let counts: BTreeMap<String, u64> = (0..300)
            .map(|i| (format!("w{i}"), rng.gen_range(1..100_000u64)))
            .collect();
        let c = RawCounts::from_counts("c", counts.clone());
        let p = normalize(&c, PeaceLabel::HigherPeace).unwrap();
        let total: u128 = counts.values().map(|&n| u128::from(n)).sum();
        for (w, n) in &counts {
            let g = gcd(u128::from(*n), total);
            let (num, den) = (u128::from(*n) / g, total / g);
            // both fit in f64 exactly, so one correctly rounded division is the oracle
            assert!(num < (1 << 53) && den < (1 << 53));
            let exact = num as f64 / den as f64;
            let got = p.norm_freq[w];
            assert!(((got - exact) / exact).abs() <= 1e-15, "{w}: {got} vs {exact}");
        }
    }

    fn profile(id: &str, label: PeaceLabel, pairs: &[(&str, f64)]) -> CountryProfile {
        CountryProfile {
            country_id: id.into(),
            label,
            norm_freq: pairs.iter().map(|(w, v)| (w.to_string(), *v)).collect(),
        }
    }

    #[test]
    fn group_average_examples() {
        let a = profile("a", PeaceLabel::HigherPeace, &[("x", 0.5), ("y", 0.5)]);
        let g = group_average([&a], Class::Higher).unwrap();
        assert_eq!(g.avg_freq, a.norm_freq);
        assert_eq!(g.member_count, 1);

        let b = profile("b", PeaceLabel::HigherPeace, &[("x", 0.1)]);
        let g = group_average([&a, &b], Class::Higher).unwrap();
        assert!((g.avg_freq["x"] - 0.3).abs() < 1e-15);
        assert!((g.avg_freq["y"] - 0.25).abs() < 1e-15);

        let c = profile("c", PeaceLabel::LowerPeace, &[("x", 1.0)]);
        assert!(matches!(
            group_average([&a, &c], Class::Higher),
            Err(Error::LabelMismatch { .. })
        ));
        assert!(matches!(group_average([], Class::Higher), Err(Error::EmptyGroup)));
    }

    #[test]
    fn group_average_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let profiles: Vec<CountryProfile> = (0..10)
            .map(|i| {
                let mut counts = BTreeMap::new();
                for j in 0..200 {
                    if rng.gen_bool(0.7) {
                        counts.insert(format!("w{j}"), rng.gen_range(1..1000u64));
                    }
                }
                let mut p =
                    normalize(&RawCounts::from_counts(format!("c{i}"), counts), PeaceLabel::LowerPeace).unwrap();
                p.country_id = format!("c{i}");
                p
            })
            .collect();
        let g = group_average(&profiles, Class::Lower).unwrap();
        for j in 0..200 {
            let w = format!("w{j}");
            let mut s = 0.0;
            for p in &profiles {
                s += p.norm_freq.get(&w).copied().unwrap_or(0.0);
            }
            let expected = s / 10.0;
            match g.avg_freq.get(&w) {
                Some(v) => assert!(((v - expected) / expected).abs() <= 1e-15),
                None => assert_eq!(expected, 0.0),
            }
        }
    }

    #[test]
    fn preprocess_orders_stages_and_selects_per_group() {
        let inputs = vec![
            CountryInput {
                counts: count_words("hp", ["stock stock market the year"]).unwrap(),
                label: PeaceLabel::HigherPeace,
                case: None,
            },
            CountryInput {
                counts: count_words("lp", ["kill kill corruption the year"]).unwrap(),
                label: PeaceLabel::LowerPeace,
                case: None,
            },
        ];
        let policy =
            FilterPolicy::new(set(&["the"]), BTreeSet::new(), ProperNounMode::Off, 2, TopKScope::Group).unwrap();
        let out = preprocess(&inputs, &policy).unwrap();
        assert_eq!(out.groups.higher.avg_freq.len(), 3);
        assert_eq!(
            out.groups.higher_top.avg_freq.keys().collect::<Vec<_>>(),
            vec!["market", "stock"]
        );
        assert_eq!(
            out.groups.lower_top.avg_freq.keys().collect::<Vec<_>>(),
            vec!["corruption", "kill"]
        );
        assert!((out.profiles[0].norm_freq["stock"] - 0.5).abs() < 1e-15);
        assert!(!out.groups.is_shared("year"));
    }

    proptest! {
        #[test]
        fn normalization_conserves_mass(counts in prop::collection::btree_map("[a-z]{1,6}", 1u64..1_000_000, 1..400)) {
            let p = normalize(&RawCounts::from_counts("c", counts), PeaceLabel::HigherPeace).unwrap();
            let s: f64 = p.norm_freq.values().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(p.norm_freq.values().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn stages_are_monotone(counts in prop::collection::btree_map("[a-e]{1,3}", 1u64..50, 1..60),
                               remove in prop::collection::btree_set("[a-e]{1,3}", 0..10)) {
            let c = RawCounts::from_counts("c", counts);
            let policy = FilterPolicy::new(remove.clone(), BTreeSet::new(), ProperNounMode::Off, 5, TopKScope::Group).unwrap();
            let f = filter_stopwords(&c, &policy);
            // set-difference oracle
            let expected: BTreeSet<&String> = c.counts.keys().filter(|w| !remove.contains(*w)).collect();
            prop_assert_eq!(f.counts.keys().collect::<BTreeSet<_>>(), expected);
            if !f.is_empty() {
                let p = normalize(&f, PeaceLabel::HigherPeace).unwrap();
                prop_assert_eq!(p.norm_freq.keys().collect::<Vec<_>>(), f.counts.keys().collect::<Vec<_>>());
                let t = top_k_words(&p.norm_freq, 5);
                prop_assert!(t.keys().all(|w| p.norm_freq.contains_key(w)));
            }
        }

        #[test]
        fn group_average_bounds_and_permutation(vals in prop::collection::vec(0.0f64..1.0, 1..12)) {
            let profiles: Vec<CountryProfile> = vals.iter().enumerate()
                .map(|(i, v)| profile(&format!("c{i:02}"), PeaceLabel::HigherPeace, &[("w", *v)]))
                .collect();
            let g = group_average(&profiles, Class::Higher).unwrap();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(g.avg_freq["w"] >= lo - 1e-15 && g.avg_freq["w"] <= hi + 1e-15);
            let rev: Vec<&CountryProfile> = profiles.iter().rev().collect();
            prop_assert_eq!(group_average(rev, Class::Higher).unwrap(), g);
        }
    }
}
