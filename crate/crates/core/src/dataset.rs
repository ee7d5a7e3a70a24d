//! Learning matrix: union vocabulary, log10-transformed frequency rows and labels.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::label::Class;
use crate::preprocess::{CountryProfile, GroupProfile};

pub const DEFAULT_LOG_EPSILON: f64 = 1e-9;

/// Lexicographically sorted, duplicate-free word list with a column index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut words: Vec<String> = words.into_iter().collect();
        words.sort();
        words.dedup();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, index }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// SHA-256 over the newline-joined words, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.words.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Vec::<String>::deserialize(d).map(Vocabulary::from_words)
    }
}

pub fn build_vocabulary(a: &GroupProfile, b: &GroupProfile) -> Vocabulary {
    Vocabulary::from_words(a.avg_freq.keys().chain(b.avg_freq.keys()).cloned())
}

pub fn log_feature(freq: f64, epsilon: f64) -> f64 {
    (freq + epsilon).log10()
}

pub fn vectorize(profile: &CountryProfile, vocab: &Vocabulary, epsilon: f64) -> Vec<f64> {
    vocab
        .words()
        .iter()
        .map(|w| log_feature(profile.norm_freq.get(w).copied().unwrap_or(0.0), epsilon))
        .collect()
}

/// Countries × vocabulary matrix in row-major order with aligned labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<String>,
    vocab: Vocabulary,
    values: Vec<f64>,
    labels: Vec<Class>,
    epsilon: f64,
}

impl FeatureMatrix {
    pub fn new(
        rows: Vec<String>,
        vocab: Vocabulary,
        values: Vec<f64>,
        labels: Vec<Class>,
        epsilon: f64,
    ) -> Result<Self> {
        if values.len() != rows.len() * vocab.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len() * vocab.len(),
                found: values.len(),
            });
        }
        if labels.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "feature matrix contains non-finite values".into(),
            ));
        }
        Ok(Self {
            rows,
            vocab,
            values,
            labels,
            epsilon,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.vocab.len()
    }

    pub fn countries(&self) -> &[String] {
        &self.rows
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.n_features();
        &mut self.values[i * d..(i + 1) * d]
    }

    pub fn samples(&self) -> Samples<'_> {
        self.samples_where(|_| true)
    }

    /// Every row except `holdout`.
    pub fn samples_excluding(&self, holdout: usize) -> Samples<'_> {
        self.samples_where(|i| i != holdout)
    }

    fn samples_where(&self, keep: impl Fn(usize) -> bool) -> Samples<'_> {
        let (rows, labels) = (0..self.n_rows())
            .filter(|&i| keep(i))
            .map(|i| (self.row(i), self.labels[i]))
            .unzip();
        Samples {
            rows,
            labels,
            n_features: self.n_features(),
        }
    }

    /// CSV with header `country_id,label,<words…>`; labels written as `1` / `-1`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Parse(e.to_string());
        let mut header = vec!["country_id".to_string(), "label".to_string()];
        header.extend(self.vocab.words().iter().cloned());
        wr.write_record(&header).map_err(csv_err)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.rows[i].clone(), format!("{}", self.labels[i].sign() as i8)];
            rec.extend(self.row(i).iter().map(|v| format!("{v:?}")));
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, epsilon: f64) -> Result<Self> {
        let csv_err = |e: csv::Error| Error::Parse(e.to_string());
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.len() < 2 || &header[0] != "country_id" || &header[1] != "label" {
            return Err(Error::Parse("CSV header must start with country_id,label".into()));
        }
        let words: Vec<String> = header.iter().skip(2).map(String::from).collect();
        let vocab = Vocabulary::from_words(words.clone());
        if vocab.words() != words.as_slice() {
            return Err(Error::Parse("CSV vocabulary columns must be sorted and unique".into()));
        }
        let (mut rows, mut labels, mut values) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            rows.push(rec[0].to_string());
            labels.push(match &rec[1] {
                "1" => Class::Higher,
                "-1" => Class::Lower,
                other => return Err(Error::Parse(format!("bad label `{other}`"))),
            });
            for f in rec.iter().skip(2) {
                values.push(f.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
            }
        }
        FeatureMatrix::new(rows, vocab, values, labels, epsilon)
    }

    /// Binary cache: magic `PLXM`, version, epsilon, dimensions,
    /// length-prefixed strings, then little-endian values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<binary>", e);
        w.write_all(b"PLXM").map_err(io)?;
        w.write_all(&1u32.to_le_bytes()).map_err(io)?;
        w.write_all(&self.epsilon.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.n_rows() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.n_features() as u64).to_le_bytes()).map_err(io)?;
        for s in self.rows.iter().chain(self.vocab.words()) {
            w.write_all(&(s.len() as u64).to_le_bytes()).map_err(io)?;
            w.write_all(s.as_bytes()).map_err(io)?;
        }
        for l in &self.labels {
            w.write_all(&[(l.sign() as i8) as u8]).map_err(io)?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b).map_err(|e| Error::io("<binary>", e))?;
            Ok(b)
        }
        fn string(r: &mut impl Read) -> Result<String> {
            let len = u64::from_le_bytes(take::<8>(r)?) as usize;
            let mut b = vec![0u8; len];
            r.read_exact(&mut b).map_err(|e| Error::io("<binary>", e))?;
            String::from_utf8(b).map_err(|e| Error::Parse(e.to_string()))
        }
        if &take::<4>(&mut r)? != b"PLXM" {
            return Err(Error::Parse("not a feature matrix cache".into()));
        }
        let version = u32::from_le_bytes(take::<4>(&mut r)?);
        if version != 1 {
            return Err(Error::Parse(format!("unsupported cache version {version}")));
        }
        let epsilon = f64::from_le_bytes(take::<8>(&mut r)?);
        let n = u64::from_le_bytes(take::<8>(&mut r)?) as usize;
        let d = u64::from_le_bytes(take::<8>(&mut r)?) as usize;
        let rows = (0..n).map(|_| string(&mut r)).collect::<Result<Vec<_>>>()?;
        let words = (0..d).map(|_| string(&mut r)).collect::<Result<Vec<_>>>()?;
        let labels = (0..n)
            .map(|_| match take::<1>(&mut r)?[0] as i8 {
                1 => Ok(Class::Higher),
                -1 => Ok(Class::Lower),
                other => Err(Error::Parse(format!("bad label byte {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let values = (0..n * d)
            .map(|_| take::<8>(&mut r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(rows, Vocabulary::from_words(words), values, labels, epsilon)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: &Path, epsilon: f64) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f), epsilon)
    }
}

/// Borrowed training rows with ±1 labels.
#[derive(Debug, Clone)]
pub struct Samples<'a> {
    pub rows: Vec<&'a [f64]>,
    pub labels: Vec<Class>,
    pub n_features: usize,
}

impl<'a> Samples<'a> {
    pub fn new(rows: Vec<&'a [f64]>, labels: Vec<Class>, n_features: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                found: r.len(),
            });
        }
        Ok(Self {
            rows,
            labels,
            n_features,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn y(&self, i: usize) -> f64 {
        self.labels[i].sign()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&Class::Higher) && self.labels.contains(&Class::Lower)
    }
}

/// One row per labeled country, sorted by country id.
pub fn assemble(profiles: &[CountryProfile], vocab: &Vocabulary, epsilon: f64) -> Result<FeatureMatrix> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "log epsilon must be positive, got {epsilon}"
        )));
    }
    let mut sorted: Vec<&CountryProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.country_id.cmp(&b.country_id));
    let mut rows = Vec::with_capacity(sorted.len());
    let mut labels = Vec::with_capacity(sorted.len());
    let mut values = Vec::with_capacity(sorted.len() * vocab.len());
    for p in sorted {
        let class = p
            .label
            .class()
            .ok_or_else(|| Error::UnlabeledCountry(p.country_id.clone()))?;
        rows.push(p.country_id.clone());
        labels.push(class);
        values.extend(vectorize(p, vocab, epsilon));
    }
    FeatureMatrix::new(rows, vocab.clone(), values, labels, epsilon)
}
