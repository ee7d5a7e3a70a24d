//! Word embeddings: loading and fetching, 2-D PCA, k-means, and agreement
//! between theme assignments.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
    pub source_tag: String,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingLine {
    word: String,
    vector: Vec<f64>,
}

/// Requested words that had no vector.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingWords {
    pub words: Vec<String>,
}

impl EmbeddingSet {
    pub fn new(vectors: BTreeMap<String, Vec<f64>>, source_tag: impl Into<String>) -> Result<Self> {
        let dim = vectors.values().next().map_or(0, Vec::len);
        for (w, v) in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionInconsistent {
                    word: w.clone(),
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse(format!("vector for `{w}` has non-finite components")));
            }
        }
        Ok(Self {
            dim,
            vectors,
            source_tag: source_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// JSON lines `{"word": …, "vector": […]}`; the source tag is the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = BTreeMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingLine =
                serde_json::from_str(&line).map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), n + 1)))?;
            vectors.insert(rec.word, rec.vector);
        }
        let tag = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(vectors, tag)
    }

    /// Inverse of [`EmbeddingSet::load`], words in sorted order.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for (word, vector) in &self.vectors {
            let line = EmbeddingLine {
                word: word.clone(),
                vector: vector.clone(),
            };
            s.push_str(&serde_json::to_string(&line).expect("embedding serializes"));
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// The requested words that have vectors, plus the ones that do not.
    pub fn select<S: AsRef<str>>(&self, words: &[S]) -> (EmbeddingSet, MissingWords) {
        let mut vectors = BTreeMap::new();
        let mut missing = Vec::new();
        for w in words {
            match self.vectors.get(w.as_ref()) {
                Some(v) => {
                    vectors.insert(w.as_ref().to_string(), v.clone());
                }
                None => missing.push(w.as_ref().to_string()),
            }
        }
        missing.sort();
        missing.dedup();
        let set = EmbeddingSet {
            dim: self.dim,
            vectors,
            source_tag: self.source_tag.clone(),
        };
        (set, MissingWords { words: missing })
    }
}

pub fn load_embeddings<S: AsRef<str>>(path: &Path, words: &[S]) -> Result<(EmbeddingSet, MissingWords)> {
    Ok(EmbeddingSet::load(path)?.select(words))
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub batch_size: usize,
    pub max_in_flight: usize,
    pub attempts: u32,
    pub backoff: Duration,
    pub timeout: Duration,
    /// Vectors already here are not requested again; the merged set is written back.
    pub cache: Option<PathBuf>,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            max_in_flight: 4,
            attempts: 3,
            backoff: Duration::from_millis(250),
            timeout: Duration::from_secs(30),
            cache: None,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    words: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

enum Failure {
    Retry(String),
    Fatal(Error),
}

fn post_batch(agent: &ureq::Agent, endpoint: &str, words: &[String]) -> std::result::Result<EmbedResponse, Failure> {
    let resp = match agent.post(endpoint).send_json(EmbedRequest { words }) {
        Ok(r) => r,
        Err(ureq::Error::Status(code, _)) if code >= 500 || code == 429 => {
            return Err(Failure::Retry(format!("HTTP {code}")))
        }
        Err(ureq::Error::Status(code, _)) => {
            return Err(Failure::Fatal(Error::MalformedResponse(format!("HTTP {code}"))))
        }
        Err(ureq::Error::Transport(t)) => return Err(Failure::Retry(t.to_string())),
    };
    let body = resp.into_string().map_err(|e| Failure::Retry(e.to_string()))?;
    let parsed: EmbedResponse =
        serde_json::from_str(&body).map_err(|e| Failure::Fatal(Error::MalformedResponse(e.to_string())))?;
    for w in words {
        match parsed.vectors.get(w) {
            None => return Err(Failure::Fatal(Error::MalformedResponse(format!("no vector for `{w}`")))),
            Some(v) if v.len() != parsed.dim => {
                return Err(Failure::Fatal(Error::DimensionInconsistent {
                    word: w.clone(),
                    expected: parsed.dim,
                    found: v.len(),
                }))
            }
            Some(_) => {}
        }
    }
    Ok(parsed)
}

fn fetch_batch(agent: &ureq::Agent, endpoint: &str, words: &[String], opts: &FetchOptions) -> Result<EmbedResponse> {
    let attempts = opts.attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(opts.backoff * 2u32.pow(attempt - 1));
        }
        match post_batch(agent, endpoint, words) {
            Ok(r) => return Ok(r),
            Err(Failure::Fatal(e)) => return Err(e),
            Err(Failure::Retry(m)) => last = m,
        }
    }
    Err(Error::EndpointUnreachable {
        attempts,
        message: last,
    })
}

/// POSTs `{"words": [...]}` batches and expects `{"dim": D, "vectors": {word: [...]}}`.
/// At most `max_in_flight` batches are outstanding; the merged result does not
/// depend on completion order.
pub fn fetch_embeddings<S: AsRef<str>>(endpoint: &str, words: &[S], opts: &FetchOptions) -> Result<EmbeddingSet> {
    let mut have: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    if let Some(cache) = &opts.cache {
        if cache.exists() {
            have = EmbeddingSet::load(cache)?.vectors;
        }
    }
    let wanted: BTreeSet<String> = words.iter().map(|w| w.as_ref().to_string()).collect();
    let todo: Vec<String> = wanted.iter().filter(|w| !have.contains_key(*w)).cloned().collect();

    if !todo.is_empty() {
        let agent = ureq::AgentBuilder::new().timeout(opts.timeout).build();
        let batches: Vec<&[String]> = todo.chunks(opts.batch_size.max(1)).collect();
        for wave in batches.chunks(opts.max_in_flight.max(1)) {
            let results: Vec<Result<EmbedResponse>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|b| {
                        let agent = &agent;
                        s.spawn(move || fetch_batch(agent, endpoint, b, opts))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("fetch worker panicked"))
                    .collect()
            });
            for (batch, r) in wave.iter().zip(results) {
                let mut r = r?;
                for w in batch.iter() {
                    let v = r.vectors.remove(w).expect("checked in post_batch");
                    have.insert(w.clone(), v);
                }
            }
        }
    }

    let all = EmbeddingSet::new(have, endpoint)?;
    if let Some(cache) = &opts.cache {
        all.save(cache)?;
    }
    let (mut set, missing) = all.select(&wanted.into_iter().collect::<Vec<_>>());
    debug_assert!(missing.words.is_empty());
    set.source_tag = endpoint.to_string();
    Ok(set)
}

/// Residual tolerance for power iteration, relative to the total variance.
pub const PCA_TOLERANCE: f64 = 1e-10;
const PCA_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub words: Vec<String>,
    pub mean: Vec<f64>,
    pub axes: [Vec<f64>; 2],
    pub coords: Vec<[f64; 2]>,
    /// Top two eigenvalues of the sample covariance, descending.
    pub explained_variance: [f64; 2],
    pub total_variance: f64,
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dotp(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Largest-magnitude component made positive; the lowest index wins ties.
fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `Cv` with `C = XᵀX / (n−1)` and previously found components deflated.
fn cov_apply(x: &[Vec<f64>], v: &[f64], found: &[(f64, Vec<f64>)]) -> Vec<f64> {
    let d = v.len();
    let mut out = vec![0.0; d];
    for row in x {
        let s = dotp(row, v);
        for (o, r) in out.iter_mut().zip(row) {
            *o += s * r;
        }
    }
    let scale = 1.0 / (x.len() - 1) as f64;
    out.iter_mut().for_each(|o| *o *= scale);
    for (lambda, u) in found {
        let s = lambda * dotp(u, v);
        for (o, ui) in out.iter_mut().zip(u) {
            *o -= s * ui;
        }
    }
    out
}

fn power_iteration(x: &[Vec<f64>], found: &[(f64, Vec<f64>)], total: f64, seed: u64) -> (f64, Vec<f64>) {
    let d = x[0].len();
    let mut rng = seeded_rng(seed);
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for (_, u) in found {
        let s = dotp(u, &v);
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= s * b);
    }
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..PCA_MAX_ITER {
        let mut w = cov_apply(x, &v, found);
        lambda = dotp(&v, &w);
        let residual: f64 = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= PCA_TOLERANCE * total {
            break;
        }
        if normalize(&mut w) == 0.0 {
            break;
        }
        v = w;
    }
    (lambda.max(0.0), v)
}

/// Top two principal axes of the rows of `E`, by power iteration with deflation.
pub fn pca_2d(e: &EmbeddingSet) -> Result<Projection> {
    if e.len() < 3 || e.dim < 2 {
        return Err(Error::DegenerateData(format!(
            "PCA needs at least 3 words and 2 dimensions, got {} and {}",
            e.len(),
            e.dim
        )));
    }
    let words: Vec<String> = e.vectors.keys().cloned().collect();
    let n = words.len() as f64;
    let mut mean = vec![0.0; e.dim];
    for v in e.vectors.values() {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let x: Vec<Vec<f64>> = e
        .vectors
        .values()
        .map(|v| v.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let total: f64 = x.iter().map(|r| dotp(r, r)).sum::<f64>() / (n - 1.0);
    if total <= 0.0 {
        return Err(Error::DegenerateData("all vectors are identical".into()));
    }

    let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
    for k in 0..2 {
        let (lambda, mut v) = power_iteration(&x, &found, total, k);
        if lambda <= 1e-12 * total {
            return Err(Error::DegenerateData("centered data has rank below 2".into()));
        }
        // Re-orthogonalize against the first axis before fixing the sign.
        for (_, u) in &found {
            let s = dotp(u, &v);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= s * b);
        }
        normalize(&mut v);
        orient(&mut v);
        found.push((lambda, v));
    }
    let coords = x.iter().map(|r| [dotp(r, &found[0].1), dotp(r, &found[1].1)]).collect();
    let (l2, a2) = found.pop().unwrap();
    let (l1, a1) = found.pop().unwrap();
    Ok(Projection {
        words,
        mean,
        axes: [a1, a2],
        coords,
        explained_variance: [l1, l2],
        total_variance: total,
    })
}

pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans<const D: usize> {
    pub assignments: Vec<usize>,
    #[serde(with = "centroid_list")]
    pub centroids: Vec<[f64; D]>,
    /// Objective after each centroid update.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

mod centroid_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(c: &[[f64; D]], s: S) -> Result<S::Ok, S::Error> {
        c.iter().map(|p| p.to_vec()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(d: De) -> Result<Vec<[f64; D]>, De::Error> {
        let v: Vec<Vec<f64>> = Vec::deserialize(d)?;
        v.into_iter()
            .map(|p| {
                p.try_into()
                    .map_err(|_| serde::de::Error::custom("centroid has the wrong dimension"))
            })
            .collect()
    }
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Closest centroid. Ties keep `current` when it is among them, otherwise the
/// lowest index wins.
fn nearest<const D: usize>(p: &[f64; D], centroids: &[[f64; D]], current: Option<usize>) -> usize {
    let mut best = current.unwrap_or(0);
    let mut bd = current.map_or(f64::INFINITY, |c| dist2(p, &centroids[c]));
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < bd {
            bd = d;
            best = j;
        }
    }
    best
}

fn kmeanspp<const D: usize, R: Rng>(points: &[[f64; D]], k: usize, rng: &mut R) -> Vec<[f64; D]> {
    let mut centers = vec![points[rng.gen_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut t = rng.gen_range(0.0..total);
            let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap();
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && t < d {
                    pick = i;
                    break;
                }
                t -= d;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[idx]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[idx]));
        }
    }
    centers
}

fn objective<const D: usize>(points: &[[f64; D]], assign: &[usize], centroids: &[[f64; D]]) -> f64 {
    points.iter().zip(assign).map(|(p, &a)| dist2(p, &centroids[a])).sum()
}

/// Means of each cluster. An empty cluster takes the point farthest from its
/// own centroid, which moves into it.
fn update<const D: usize>(points: &[[f64; D]], assign: &mut [usize], centroids: &mut [[f64; D]]) {
    let k = centroids.len();
    let recompute = |assign: &[usize], centroids: &mut [[f64; D]]| {
        let mut sums = vec![[0.0; D]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(assign.iter()) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for j in 0..k {
            if counts[j] > 0 {
                let mut c = sums[j];
                c.iter_mut().for_each(|x| *x /= counts[j] as f64);
                centroids[j] = c;
            }
        }
        counts
    };
    let mut counts = recompute(assign, centroids);
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let far = (0..points.len()).filter(|&i| counts[assign[i]] > 1).max_by(|&a, &b| {
            dist2(&points[a], &centroids[assign[a]])
                .total_cmp(&dist2(&points[b], &centroids[assign[b]]))
                .then(b.cmp(&a))
        });
        let Some(far) = far else { break };
        assign[far] = empty;
        centroids[empty] = points[far];
        counts = recompute(assign, centroids);
    }
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or [`KMEANS_MAX_ITER`] is reached.
pub fn kmeans<const D: usize>(points: &[[f64; D]], k: usize, seed: u64) -> Result<KMeans<D>> {
    if k == 0 || points.len() < k {
        return Err(Error::InvalidParameter(format!(
            "k-means needs 1 <= k <= #points, got k={k} with {} points",
            points.len()
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut centroids = kmeanspp(points, k, &mut rng);
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centroids, None)).collect();
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        update(points, &mut assign, &mut centroids);
        trace.push(objective(points, &assign, &centroids));
        let next: Vec<usize> = points
            .iter()
            .zip(&assign)
            .map(|(p, &a)| nearest(p, &centroids, Some(a)))
            .collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok(KMeans {
        assignments: assign,
        centroids,
        objective: trace,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticMap {
    pub words: Vec<String>,
    pub coords2d: Vec<[f64; 2]>,
    pub cluster: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    pub explained_variance: [f64; 2],
    pub total_variance: f64,
    pub k: usize,
    pub seed: u64,
}

pub fn semantic_map(e: &EmbeddingSet, k: usize, seed: u64) -> Result<SemanticMap> {
    let p = pca_2d(e)?;
    let km = kmeans(&p.coords, k, seed)?;
    Ok(SemanticMap {
        words: p.words,
        coords2d: p.coords,
        cluster: km.assignments,
        centroids: km.centroids,
        explained_variance: p.explained_variance,
        total_variance: p.total_variance,
        k,
        seed,
    })
}

impl SemanticMap {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes")
    }

    pub fn themes(&self) -> ThemeAssignment {
        let mut themes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (w, c) in self.words.iter().zip(&self.cluster) {
            themes.entry(format!("cluster-{c}")).or_default().insert(w.clone());
        }
        ThemeAssignment {
            themes,
            provenance: Provenance::KMeans,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    HumanManual,
    ExternalLlm,
    KMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeAssignment {
    pub themes: BTreeMap<String, BTreeSet<String>>,
    pub provenance: Provenance,
}

impl ThemeAssignment {
    /// Rejects a word listed under two themes, and words outside `known` when given.
    pub fn new(
        themes: BTreeMap<String, BTreeSet<String>>,
        provenance: Provenance,
        known: Option<&BTreeSet<String>>,
    ) -> Result<Self> {
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for (name, words) in &themes {
            for w in words {
                if let Some(first) = owner.insert(w, name) {
                    return Err(Error::OverlappingThemes {
                        word: w.clone(),
                        first: first.to_string(),
                        second: name.clone(),
                    });
                }
                if let Some(k) = known {
                    if !k.contains(w) {
                        return Err(Error::UnknownWord(w.clone()));
                    }
                }
            }
        }
        Ok(Self { themes, provenance })
    }

    pub fn theme_of(&self) -> BTreeMap<&str, &str> {
        self.themes
            .iter()
            .flat_map(|(t, ws)| ws.iter().map(move |w| (w.as_str(), t.as_str())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeMatch {
    pub theme_a: String,
    pub theme_b: Option<String>,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub common_words: usize,
    /// Fraction of word pairs both assignments group together or both separate.
    pub pairwise_agreement: f64,
    pub matches: Vec<ThemeMatch>,
    pub mean_jaccard: f64,
}

fn pairs(n: usize) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Agreement over the words both assignments cover. Themes are paired greedily
/// by highest Jaccard index, ties by theme names.
pub fn compare_assignments(a: &ThemeAssignment, b: &ThemeAssignment) -> Result<AgreementReport> {
    let ta = a.theme_of();
    let tb = b.theme_of();
    let common: Vec<(&str, &str, &str)> = ta.iter().filter_map(|(w, x)| tb.get(w).map(|y| (*w, *x, *y))).collect();
    if common.is_empty() {
        return Err(Error::NoOverlap);
    }
    let n = common.len();
    let mut na: BTreeMap<&str, usize> = BTreeMap::new();
    let mut nb: BTreeMap<&str, usize> = BTreeMap::new();
    let mut nab: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for &(_, x, y) in &common {
        *na.entry(x).or_default() += 1;
        *nb.entry(y).or_default() += 1;
        *nab.entry((x, y)).or_default() += 1;
    }
    let same_a: f64 = na.values().map(|&c| pairs(c)).sum();
    let same_b: f64 = nb.values().map(|&c| pairs(c)).sum();
    let same_both: f64 = nab.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    let pairwise_agreement = if total == 0.0 {
        1.0
    } else {
        (total - same_a - same_b + 2.0 * same_both) / total
    };

    let mut cands: Vec<(f64, &str, &str)> = Vec::new();
    for (&x, &ca) in &na {
        for (&y, &cb) in &nb {
            let inter = nab.get(&(x, y)).copied().unwrap_or(0);
            if inter > 0 {
                cands.push((inter as f64 / (ca + cb - inter) as f64, x, y));
            }
        }
    }
    cands.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(q.1)).then(p.2.cmp(q.2)));
    let mut used_a = BTreeSet::new();
    let mut used_b = BTreeSet::new();
    let mut matches = Vec::new();
    for (j, x, y) in cands {
        if used_a.contains(x) || used_b.contains(y) {
            continue;
        }
        used_a.insert(x);
        used_b.insert(y);
        matches.push(ThemeMatch {
            theme_a: x.to_string(),
            theme_b: Some(y.to_string()),
            jaccard: j,
        });
    }
    for &x in na.keys() {
        if !used_a.contains(x) {
            matches.push(ThemeMatch {
                theme_a: x.to_string(),
                theme_b: None,
                jaccard: 0.0,
            });
        }
    }
    matches.sort_by(|p, q| p.theme_a.cmp(&q.theme_a));
    let mean_jaccard = matches.iter().map(|m| m.jaccard).sum::<f64>() / matches.len() as f64;
    Ok(AgreementReport {
        common_words: n,
        pairwise_agreement,
        matches,
        mean_jaccard,
    })
}

#[derive(Serialize)]
struct LlmExport<'a> {
    instructions: String,
    n_themes: usize,
    words: &'a [String],
}

#[derive(Deserialize)]
struct LlmThemes {
    themes: BTreeMap<String, Vec<String>>,
}

/// Sorted, de-duplicated word list with a short instruction for the model.
pub fn export_for_llm<S: AsRef<str>>(words: &[S], n_themes: usize) -> String {
    let mut list: Vec<String> = words.iter().map(|w| w.as_ref().to_string()).collect();
    list.sort();
    list.dedup();
    let e = LlmExport {
        instructions: format!(
            "Group the words into {n_themes} themes by meaning. Answer with JSON of the form \
             {{\"themes\": {{\"<theme name>\": [\"word\", ...]}}}}, using each word at most once."
        ),
        n_themes,
        words: &list,
    };
    serde_json::to_string_pretty(&e).expect("export serializes") + "\n"
}

pub fn parse_llm_themes(text: &str, known: &BTreeSet<String>) -> Result<ThemeAssignment> {
    let raw: LlmThemes = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut themes = BTreeMap::new();
    for (name, words) in raw.themes {
        themes.insert(name, words.iter().map(|w| w.trim().to_lowercase()).collect());
    }
    ThemeAssignment::new(themes, Provenance::ExternalLlm, Some(known))
}

pub fn import_llm_themes(path: &Path, known: &BTreeSet<String>) -> Result<ThemeAssignment> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_llm_themes(&text, known)
}
