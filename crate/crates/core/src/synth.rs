//! Labeled synthetic corpora with planted marker words.
//!
//! Every country samples tokens from one Zipf base distribution over a
//! pseudo-word vocabulary; a country's own group markers have their weight
//! multiplied by `marker_boost`. Output follows the corpus layout that
//! [`crate::corpus::discover`] reads, plus `manifest.json`, `labels.toml` and
//! `embeddings.jsonl`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::PeaceLabel;
use crate::preprocess::{default_stopwords, DEFAULT_KEEP};
use crate::rng::{derive_seed, seeded_rng};

pub const ZIPF_EXPONENT: f64 = 1.1;
pub const EMBEDDING_DIM: usize = 16;
pub const THEMES_PER_GROUP: usize = 3;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_countries_per_group: usize,
    /// Countries drawing from both groups' markers at `sqrt(marker_boost)`.
    pub n_intermediate: usize,
    pub vocab_size: usize,
    pub n_marker_words_per_group: usize,
    pub marker_boost: f64,
    pub articles_per_country: usize,
    pub tokens_per_article: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_countries_per_group: 10,
            n_intermediate: 0,
            vocab_size: 5000,
            n_marker_words_per_group: 10,
            marker_boost: 50.0,
            articles_per_country: 100,
            tokens_per_article: 1000,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n_countries_per_group == 0
            || self.vocab_size == 0
            || self.n_marker_words_per_group == 0
            || self.articles_per_country == 0
            || self.tokens_per_article == 0
        {
            return bad("synthetic counts must all be at least 1");
        }
        if 2 * self.n_marker_words_per_group > self.vocab_size {
            return bad("two groups of markers do not fit in the vocabulary");
        }
        if !(self.marker_boost >= 1.0 && self.marker_boost.is_finite()) {
            return bad("marker_boost must be a finite number >= 1");
        }
        Ok(())
    }

    pub fn country_ids(&self) -> Vec<(String, PeaceLabel)> {
        let mut out = Vec::new();
        for i in 1..=self.n_countries_per_group {
            out.push((format!("higher-{i:02}"), PeaceLabel::HigherPeace));
        }
        for i in 1..=self.n_countries_per_group {
            out.push((format!("lower-{i:02}"), PeaceLabel::LowerPeace));
        }
        for i in 1..=self.n_intermediate {
            out.push((format!("middle-{i:02}"), PeaceLabel::Intermediate));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Markers {
    pub higher: Vec<String>,
    pub lower: Vec<String>,
}

impl Markers {
    pub fn all(&self) -> BTreeSet<String> {
        self.higher.iter().chain(&self.lower).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryEntry {
    pub id: String,
    pub label: PeaceLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub spec: SyntheticSpec,
    pub zipf_exponent: f64,
    pub countries: Vec<CountryEntry>,
    pub markers: Markers,
    /// Marker words grouped by the embedding theme they were planted around.
    pub marker_themes: BTreeMap<String, Vec<String>>,
    /// Vocabulary in Zipf rank order.
    pub vocabulary: Vec<String>,
}

impl SyntheticManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Distinct pronounceable words of two to four consonant-vowel syllables,
/// avoiding the default stop-word and keep lists.
pub fn pseudo_words(n: usize, seed: u64) -> Vec<String> {
    let mut reserved = default_stopwords();
    reserved.extend(DEFAULT_KEEP.iter().map(|w| w.to_string()));
    let mut rng = seeded_rng(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.gen_range(2..=4);
        let mut w = String::with_capacity(2 * syllables);
        for _ in 0..syllables {
            w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
            w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        }
        if !reserved.contains(&w) && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn zipf_weights(n: usize) -> Vec<f64> {
    (1..=n).map(|r| (r as f64).powf(-ZIPF_EXPONENT)).collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

/// One article of exactly `n` tokens in sentences of 6 to 14 words.
fn article<R: Rng>(rng: &mut R, dist: &WeightedIndex<f64>, vocab: &[String], n: usize) -> String {
    let mut text = String::new();
    let mut left = n;
    while left > 0 {
        let len = rng.gen_range(6..=14).min(left);
        for i in 0..len {
            let w = &vocab[dist.sample(rng)];
            if i == 0 {
                text.push_str(&capitalize(w));
            } else {
                text.push(' ');
                text.push_str(w);
            }
        }
        text.push_str(". ");
        left -= len;
    }
    text.pop();
    text.push('\n');
    text
}

/// Writes the corpus under `root` and returns its manifest. Same spec, same bytes.
pub fn generate(spec: &SyntheticSpec, root: &Path) -> Result<SyntheticManifest> {
    spec.validate()?;
    let vocab = pseudo_words(spec.vocab_size, derive_seed(spec.seed, 0));

    // Markers come from the middle of the rank range so that neither the
    // boosted nor the unboosted frequency is extreme.
    let mut rng = seeded_rng(derive_seed(spec.seed, 1));
    let m = spec.n_marker_words_per_group;
    let lo = (spec.vocab_size / 20).min(spec.vocab_size - 2 * m);
    let hi = (spec.vocab_size / 2).max(lo + 2 * m).min(spec.vocab_size);
    let band: Vec<usize> = (lo..hi).collect();
    let picked: Vec<usize> = band.choose_multiple(&mut rng, 2 * m).copied().collect();
    let (h_idx, l_idx) = picked.split_at(m);
    let sorted = |idx: &[usize]| {
        let mut v: Vec<usize> = idx.to_vec();
        v.sort_unstable();
        v
    };
    let (h_idx, l_idx) = (sorted(h_idx), sorted(l_idx));
    let markers = Markers {
        higher: h_idx.iter().map(|&i| vocab[i].clone()).collect(),
        lower: l_idx.iter().map(|&i| vocab[i].clone()).collect(),
    };

    let base = zipf_weights(spec.vocab_size);
    let weights_for = |label: PeaceLabel| -> Vec<f64> {
        let mut w = base.clone();
        let (groups, boost): (Vec<&[usize]>, f64) = match label {
            PeaceLabel::HigherPeace => (vec![&h_idx], spec.marker_boost),
            PeaceLabel::LowerPeace => (vec![&l_idx], spec.marker_boost),
            PeaceLabel::Intermediate => (vec![&h_idx, &l_idx], spec.marker_boost.sqrt()),
        };
        for g in groups {
            for &i in g {
                w[i] *= boost;
            }
        }
        w
    };

    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let countries = spec.country_ids();
    countries
        .par_iter()
        .enumerate()
        .map(|(ci, (id, label))| {
            let dist = WeightedIndex::new(weights_for(*label)).expect("positive weights");
            let mut rng = seeded_rng(derive_seed(spec.seed, 1000 + ci as u64));
            let dir = root.join(id);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for a in 1..=spec.articles_per_country {
                let path = dir.join(format!("article_{a:04}.txt"));
                let text = article(&mut rng, &dist, &vocab, spec.tokens_per_article);
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;

    let marker_themes = write_embeddings(spec, &vocab, &markers, root)?;

    let mut labels = String::from("[labels]\n");
    for (id, label) in &countries {
        let _ = writeln!(labels, "{id} = \"{label}\"");
    }
    let path = root.join("labels.toml");
    fs::write(&path, labels).map_err(|e| Error::io(&path, e))?;

    let manifest = SyntheticManifest {
        spec: spec.clone(),
        zipf_exponent: ZIPF_EXPONENT,
        countries: countries
            .iter()
            .map(|(id, label)| CountryEntry {
                id: id.clone(),
                label: *label,
            })
            .collect(),
        markers,
        marker_themes,
        vocabulary: vocab,
    };
    let path = root.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Noise vectors for ordinary words; each group's markers sit around one of
/// a few theme centers.
fn write_embeddings(
    spec: &SyntheticSpec,
    vocab: &[String],
    markers: &Markers,
    root: &Path,
) -> Result<BTreeMap<String, Vec<String>>> {
    let mut rng = seeded_rng(derive_seed(spec.seed, 2));
    let normal = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..EMBEDDING_DIM)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let mut themes: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut centers = BTreeMap::new();
    for (group, words) in [("higher", &markers.higher), ("lower", &markers.lower)] {
        for (i, w) in words.iter().enumerate() {
            let name = format!("{group}-theme-{}", i % THEMES_PER_GROUP);
            themes.entry(name.clone()).or_default().push(w.clone());
            centers
                .entry(name)
                .or_insert_with(|| normal(&mut rng).iter().map(|x| 6.0 * x).collect::<Vec<_>>());
        }
    }
    let theme_of: BTreeMap<&str, &str> = themes
        .iter()
        .flat_map(|(t, ws)| ws.iter().map(move |w| (w.as_str(), t.as_str())))
        .collect();
    let mut out = String::new();
    let mut sorted: Vec<&String> = vocab.iter().collect();
    sorted.sort();
    for w in sorted {
        let noise = normal(&mut rng);
        let vector: Vec<f64> = match theme_of.get(w.as_str()) {
            Some(t) => centers[*t].iter().zip(&noise).map(|(c, n)| c + 0.5 * n).collect(),
            None => noise,
        };
        out.push_str(&serde_json::json!({"word": w, "vector": vector}).to_string());
        out.push('\n');
    }
    let path = root.join("embeddings.jsonl");
    fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(themes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{discover, ingest_country, tokenize};

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            n_countries_per_group: 3,
            n_intermediate: 1,
            vocab_size: 400,
            n_marker_words_per_group: 5,
            marker_boost: 50.0,
            articles_per_country: 3,
            tokens_per_article: 137,
            seed: 7,
        }
    }

    fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                    out.insert(rel, fs::read(&p).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn exact_token_budget_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate(&small(), dir.path()).unwrap();
        assert_eq!(m.countries.len(), 7);
        let sources = discover(dir.path()).unwrap();
        assert_eq!(sources.len(), 7);
        for s in &sources {
            assert_eq!(s.article_count, 3);
            for a in s.articles().unwrap() {
                assert_eq!(tokenize(&fs::read_to_string(a).unwrap()).len(), 137);
            }
            assert_eq!(ingest_country(s).unwrap().total_tokens, 3 * 137);
        }
        assert!(dir.path().join("labels.toml").exists());
        assert_eq!(SyntheticManifest::load(&dir.path().join("manifest.json")).unwrap(), m);
    }

    #[test]
    fn deterministic_tree() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(&small(), a.path()).unwrap();
        generate(&small(), b.path()).unwrap();
        assert_eq!(tree_bytes(a.path()), tree_bytes(b.path()));
        let c = tempfile::tempdir().unwrap();
        generate(&SyntheticSpec { seed: 8, ..small() }, c.path()).unwrap();
        assert_ne!(tree_bytes(a.path()), tree_bytes(c.path()));
    }

    #[test]
    fn markers_are_boosted_in_their_group() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec {
            articles_per_country: 10,
            tokens_per_article: 400,
            ..small()
        };
        let m = generate(&spec, dir.path()).unwrap();
        let counts: BTreeMap<String, _> = discover(dir.path())
            .unwrap()
            .iter()
            .map(|s| (s.country_id.clone(), ingest_country(s).unwrap()))
            .collect();
        let total = |prefix: &str, words: &[String]| -> u64 {
            counts
                .iter()
                .filter(|(id, _)| id.starts_with(prefix))
                .map(|(_, c)| words.iter().map(|w| c.counts.get(w).copied().unwrap_or(0)).sum::<u64>())
                .sum()
        };
        assert!(total("higher", &m.markers.higher) > 5 * total("lower", &m.markers.higher));
        assert!(total("lower", &m.markers.lower) > 5 * total("higher", &m.markers.lower));
        assert!(m.markers.all().len() == 10);
    }

    #[test]
    fn pseudo_words_avoid_stopwords() {
        let words = pseudo_words(3000, 1);
        let stop = default_stopwords();
        assert_eq!(words.iter().collect::<BTreeSet<_>>().len(), 3000);
        assert!(words.iter().all(|w| !stop.contains(w) && w.len() >= 4));
    }

    #[test]
    fn invalid_specs() {
        assert!(SyntheticSpec {
            marker_boost: 0.5,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SyntheticSpec {
            n_marker_words_per_group: 201,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SyntheticSpec {
            tokens_per_article: 0,
            ..small()
        }
        .validate()
        .is_err());
        SyntheticSpec {
            marker_boost: 1.0,
            ..small()
        }
        .validate()
        .unwrap();
    }

    #[test]
    fn embeddings_cover_vocabulary() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate(&small(), dir.path()).unwrap();
        let e = crate::semantic::EmbeddingSet::load(&dir.path().join("embeddings.jsonl")).unwrap();
        assert_eq!(e.dim, EMBEDDING_DIM);
        assert_eq!(e.len(), m.vocabulary.len());
        assert_eq!(m.marker_themes.values().map(Vec::len).sum::<usize>(), 10);
    }
}
