//! One function per pipeline stage. Each reads its upstream artifacts through
//! the manifest, skips work when its output is current, and returns a short
//! human-readable summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use peacelex::corpus::{discover, CaseEvidence, RawCounts};
use peacelex::dataset::{assemble, build_vocabulary, vectorize, FeatureMatrix, Vocabulary};
use peacelex::evaluation::{
    loo_evaluate, loo_evaluate_per_fold, random_search_with, render_table, EvalReport, ProfileSet, Protocol,
    SearchOutcome,
};
use peacelex::features::{emit_svg, layout_cloud, of_group, rank_features, CloudSpec, RankedWord};
use peacelex::models::{fit, Hyperparams, ModelArtifact, ModelKind};
use peacelex::pipeline::ingest_corpus;
use peacelex::preprocess::{preprocess, CountryInput, FilterConfig, Preprocessed};
use peacelex::rng::derive_seed;
use peacelex::semantic::{
    compare_assignments, export_for_llm, fetch_embeddings, parse_llm_themes, semantic_map, AgreementReport,
    EmbeddingSet, FetchOptions, MissingWords, SemanticMap,
};
use peacelex::synth::generate;
use peacelex::{Class, PeaceLabel};
use serde::{Deserialize, Serialize};

use crate::artifacts::{sha256_hex, Entry, InputHash, Store};
use crate::config::{ClusterScope, PipelineConfig};
use crate::error::{CliError, CliResult};

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

fn model_key(kind: ModelKind) -> String {
    format!("model:{}", kind.slug())
}

fn group_slug(c: Class) -> &'static str {
    match c {
        Class::Higher => "higher",
        Class::Lower => "lower",
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestedCountry {
    pub label: PeaceLabel,
    pub counts: RawCounts,
    pub case: CaseEvidence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestArtifact {
    pub countries: Vec<IngestedCountry>,
    /// Corpus directories without a label.
    pub unlabeled: Vec<String>,
}

pub fn cmd_ingest(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    let root = cfg.corpus_root();
    let labels = cfg.label_map()?;
    let mut h = InputHash::new("ingest");
    h.add_json(&labels);
    for src in discover(&root)? {
        if !labels.contains_key(&src.country_id) {
            continue;
        }
        h.add(src.country_id.as_bytes());
        for p in src.articles()? {
            let bytes = fs::read(&p).map_err(|e| CliError::io(&p, e))?;
            h.add(p.file_name().map(|n| n.as_encoded_bytes()).unwrap_or_default());
            h.add(&bytes);
        }
    }
    let hash = h.finish();
    if store.is_fresh("ingest", &hash) {
        return Ok("ingest: up to date\n".into());
    }
    let (inputs, unlabeled) = ingest_corpus(&root, &labels)?;
    let missing: Vec<&String> = labels
        .keys()
        .filter(|id| !inputs.iter().any(|i| &i.counts.country == *id))
        .collect();
    let artifact = IngestArtifact {
        countries: inputs
            .into_iter()
            .map(|i| IngestedCountry {
                label: i.label,
                counts: i.counts,
                case: i.case.unwrap_or_default(),
            })
            .collect(),
        unlabeled,
    };
    let e = store.write("ingest", "ingest", "json", &hash, &pretty(&artifact))?;
    let mut out = format!("ingest: {} countries -> {}\n", artifact.countries.len(), e.file);
    if !missing.is_empty() {
        let _ = writeln!(
            out,
            "  labeled but absent from corpus: {}",
            join(missing.iter().map(|s| s.as_str()))
        );
    }
    if !artifact.unlabeled.is_empty() {
        let _ = writeln!(
            out,
            "  ignored unlabeled directories: {}",
            join(artifact.unlabeled.iter().map(String::as_str))
        );
    }
    Ok(out)
}

fn join<'a>(items: impl Iterator<Item = &'a str>) -> String {
    items.collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessArtifact {
    pub filter: FilterConfig,
    pub log_epsilon: f64,
    pub vocabulary_hash: String,
    pub vocabulary: Vocabulary,
    pub preprocessed: Preprocessed,
}

/// Preprocessing output plus the labeled feature matrix built from it.
pub struct LoadedDataset {
    pub entry: Entry,
    pub artifact: PreprocessArtifact,
    pub matrix: FeatureMatrix,
}

impl LoadedDataset {
    pub fn profile_set(&self) -> ProfileSet {
        let f = &self.artifact.filter;
        ProfileSet::new(
            &self.artifact.preprocessed.profiles,
            f.top_k,
            f.top_k_scope,
            self.artifact.log_epsilon,
        )
    }
}

pub fn load_dataset(store: &Store) -> CliResult<LoadedDataset> {
    let (entry, artifact): (Entry, PreprocessArtifact) = store.read_json("preprocess")?;
    let labeled: Vec<_> = artifact
        .preprocessed
        .profiles
        .iter()
        .filter(|p| p.label.class().is_some())
        .cloned()
        .collect();
    let matrix = assemble(&labeled, &artifact.vocabulary, artifact.log_epsilon)?;
    Ok(LoadedDataset {
        entry,
        artifact,
        matrix,
    })
}

pub fn cmd_preprocess(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    let policy = cfg.filter_policy()?;
    let (ingest_entry, ingest): (Entry, IngestArtifact) = store.read_json("ingest")?;
    let mut h = InputHash::new("preprocess");
    h.add(ingest_entry.content_hash.as_bytes())
        .add_json(&policy)
        .add_json(&cfg.log_epsilon);
    let hash = h.finish();
    if store.is_fresh("preprocess", &hash) && store.is_fresh("dataset", &hash) {
        return Ok("preprocess: up to date\n".into());
    }
    let inputs: Vec<CountryInput> = ingest
        .countries
        .into_iter()
        .map(|c| CountryInput {
            counts: c.counts,
            label: c.label,
            case: Some(c.case),
        })
        .collect();
    for class in [Class::Higher, Class::Lower] {
        if !inputs.iter().any(|i| i.label.class() == Some(class)) {
            return Err(CliError::ConfigInvalid(format!(
                "no ingested country is labeled {}",
                class.label()
            )));
        }
    }
    let preprocessed = preprocess(&inputs, &policy)?;
    let vocabulary = build_vocabulary(&preprocessed.groups.higher_top, &preprocessed.groups.lower_top);
    let labeled: Vec<_> = preprocessed
        .profiles
        .iter()
        .filter(|p| p.label.class().is_some())
        .cloned()
        .collect();
    let matrix = assemble(&labeled, &vocabulary, cfg.log_epsilon)?;
    let artifact = PreprocessArtifact {
        filter: cfg.filter.clone(),
        log_epsilon: cfg.log_epsilon,
        vocabulary_hash: vocabulary.hash(),
        vocabulary,
        preprocessed,
    };
    let mut csv = Vec::new();
    matrix.write_csv(&mut csv)?;
    let p = store.write("preprocess", "preprocess", "json", &hash, &pretty(&artifact))?;
    let d = store.write("dataset", "dataset", "csv", &hash, &csv)?;
    Ok(format!(
        "preprocess: {} rows x {} words -> {}, {}\n",
        matrix.n_rows(),
        matrix.n_features(),
        p.file,
        d.file
    ))
}

fn evaluate_with(
    ds: &LoadedDataset,
    set: &ProfileSet,
    protocol: Protocol,
    kind: ModelKind,
    params: &Hyperparams,
    seed: u64,
) -> peacelex::Result<EvalReport> {
    match protocol {
        Protocol::Shared => loo_evaluate(&ds.matrix, kind, params, seed),
        Protocol::PerFold => loo_evaluate_per_fold(set, kind, params, seed),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchArtifact {
    pub model_kind: ModelKind,
    pub protocol: Protocol,
    /// Absent when the model was trained with fixed parameters.
    pub outcome: Option<SearchOutcome>,
    pub chosen: Hyperparams,
}

pub fn cmd_train(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    let ds = load_dataset(store)?;
    let set = ds.profile_set();
    let protocol = cfg.evaluation.protocol;
    let mut out = String::new();
    for &kind in &cfg.evaluation.models {
        let trials = cfg.trials(kind);
        let spec = cfg.search_spec(kind, trials.max(1));
        let fixed = cfg.fixed_params(kind);
        let mut h = InputHash::new("train");
        h.add(ds.entry.content_hash.as_bytes())
            .add_json(&kind)
            .add_json(&protocol)
            .add_json(&cfg.seed)
            .add_json(&fixed)
            .add_json(&trials);
        if trials > 0 {
            h.add_json(&spec);
        }
        let hash = h.finish();
        let key = model_key(kind);
        let search_key = format!("search:{}", kind.slug());
        if store.is_fresh(&key, &hash) && store.is_fresh(&search_key, &hash) {
            let _ = writeln!(out, "train {kind}: up to date");
            continue;
        }
        let (outcome, chosen) = if trials > 0 {
            let o = random_search_with(&spec, |p| evaluate_with(&ds, &set, protocol, kind, p, cfg.seed))?;
            let chosen = o.best_report.hyperparams.clone();
            (Some(o), chosen)
        } else {
            (None, fixed)
        };
        let model = fit(kind, &ds.matrix.samples(), &chosen, cfg.seed)?;
        let artifact = ModelArtifact::new(model, &ds.artifact.vocabulary, chosen.clone(), cfg.seed);
        let best = outcome.as_ref().map(|o| o.best_report.accuracy);
        let search = SearchArtifact {
            model_kind: kind,
            protocol,
            outcome,
            chosen,
        };
        let slug = kind.slug();
        let m = store.write(
            &key,
            &format!("model-{slug}"),
            "json",
            &hash,
            artifact.to_json().as_bytes(),
        )?;
        store.write(&search_key, &format!("search-{slug}"), "json", &hash, &pretty(&search))?;
        match best {
            Some(acc) => {
                let _ = writeln!(
                    out,
                    "train {kind}: {trials} trials, best LOO accuracy {acc:.2} -> {}",
                    m.file
                );
            }
            None => {
                let _ = writeln!(out, "train {kind}: fixed parameters -> {}", m.file);
            }
        }
    }
    Ok(out)
}

pub fn load_model(store: &Store, kind: ModelKind) -> CliResult<(Entry, ModelArtifact)> {
    let (e, bytes) = store.read(&model_key(kind))?;
    let text = String::from_utf8_lossy(&bytes);
    Ok((e, ModelArtifact::from_json(&text)?))
}

pub fn cmd_evaluate(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    let ds = load_dataset(store)?;
    let set = ds.profile_set();
    let protocol = cfg.evaluation.protocol;
    let mut reports = Vec::new();
    let mut table_hash = InputHash::new("table");
    for &kind in &cfg.evaluation.models {
        let (me, model) = load_model(store, kind)?;
        model.check_vocabulary(&ds.artifact.vocabulary)?;
        let mut h = InputHash::new("evaluate");
        h.add(ds.entry.content_hash.as_bytes())
            .add(me.content_hash.as_bytes())
            .add_json(&protocol);
        let hash = h.finish();
        let key = format!("eval:{}", kind.slug());
        let report: EvalReport = if store.is_fresh(&key, &hash) {
            store.read_json(&key)?.1
        } else {
            let r = evaluate_with(&ds, &set, protocol, kind, &model.hyperparams, model.seed)?;
            store.write(&key, &format!("eval-{}", kind.slug()), "json", &hash, &pretty(&r))?;
            r
        };
        table_hash.add(hash.as_bytes());
        reports.push(report);
    }
    let table = render_table(&reports);
    store.write("table", "table", "txt", &table_hash.finish(), table.as_bytes())?;
    Ok(table)
}

fn ranked_words(
    cfg: &PipelineConfig,
    store: &mut Store,
    ds: &LoadedDataset,
    kind: ModelKind,
) -> CliResult<(Entry, Vec<RankedWord>)> {
    let (me, model) = load_model(store, kind)?;
    model.check_vocabulary(&ds.artifact.vocabulary)?;
    let n = cfg.top_n(kind).min(ds.artifact.vocabulary.len());
    let mut h = InputHash::new("features");
    h.add(ds.entry.content_hash.as_bytes())
        .add(me.content_hash.as_bytes())
        .add_json(&n)
        .add_json(&cfg.features.selection);
    let hash = h.finish();
    let key = format!("features:{}", kind.slug());
    if store.is_fresh(&key, &hash) {
        let (e, words) = store.read_json(&key)?;
        return Ok((e, words));
    }
    let words = rank_features(
        &model.model,
        &ds.artifact.vocabulary,
        &ds.artifact.preprocessed.groups,
        n,
        cfg.features.selection,
    )?;
    let e = store.write(
        &key,
        &format!("features-{}", kind.slug()),
        "json",
        &hash,
        &pretty(&words),
    )?;
    Ok((e, words))
}

pub fn cmd_features(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    let ds = load_dataset(store)?;
    let mut out = String::new();
    for &kind in &cfg.evaluation.models {
        let (e, words) = ranked_words(cfg, store, &ds, kind)?;
        let top: Vec<&str> = words.iter().take(5).map(|w| w.word.as_str()).collect();
        let _ = writeln!(
            out,
            "features {kind}: {} words ({} ...) -> {}",
            words.len(),
            top.join(", "),
            e.file
        );
    }
    Ok(out)
}

pub fn cmd_cloud(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    let ds = load_dataset(store)?;
    let mut out = String::new();
    for (mi, &kind) in cfg.evaluation.models.iter().enumerate() {
        let (fe, words) = ranked_words(cfg, store, &ds, kind)?;
        for (gi, group) in [Class::Higher, Class::Lower].into_iter().enumerate() {
            let entries = of_group(&words, group);
            if entries.is_empty() {
                continue;
            }
            let seed = derive_seed(cfg.seed, (mi * 2 + gi) as u64);
            let mut h = InputHash::new("cloud");
            h.add(fe.content_hash.as_bytes())
                .add_json(&group)
                .add_json(&cfg.cloud)
                .add_json(&seed);
            let hash = h.finish();
            let stem = format!("cloud-{}-{}", kind.slug(), group_slug(group));
            let key = format!("cloud:{}:{}", kind.slug(), group_slug(group));
            let svg_key = format!("svg:{}:{}", kind.slug(), group_slug(group));
            if store.is_fresh(&key, &hash) && store.is_fresh(&svg_key, &hash) {
                let _ = writeln!(out, "cloud {kind} {}: up to date", group_slug(group));
                continue;
            }
            let spec: CloudSpec = layout_cloud(&entries, group, &cfg.cloud, seed)?;
            store.write(&key, &stem, "json", &hash, (spec.to_json() + "\n").as_bytes())?;
            let e = store.write(&svg_key, &stem, "svg", &hash, emit_svg(&spec).as_bytes())?;
            let _ = writeln!(
                out,
                "cloud {kind} {}: {} words -> {}",
                group_slug(group),
                spec.placements.len(),
                e.file
            );
        }
    }
    Ok(out)
}

/// Embeddings with the hash of their serialized form.
fn embeddings(cfg: &PipelineConfig, store: &Store, words: &[String]) -> CliResult<(EmbeddingSet, String)> {
    if let Some(path) = cfg.embeddings_file() {
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let set = EmbeddingSet::load(&path)?;
        return Ok((set, sha256_hex(text.as_bytes())));
    }
    let Some(endpoint) = &cfg.semantic.endpoint else {
        return Err(CliError::ConfigInvalid(
            "clustering needs semantic.embeddings or semantic.endpoint".into(),
        ));
    };
    let opts = FetchOptions {
        cache: Some(store.dir().join("embedding-cache.jsonl")),
        ..FetchOptions::default()
    };
    let set = fetch_embeddings(endpoint, words, &opts)?;
    let hash = sha256_hex(set.to_jsonl().as_bytes());
    Ok((set, hash))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterArtifact {
    pub name: String,
    pub model_kind: ModelKind,
    pub group: Option<Class>,
    pub source_tag: String,
    /// Ranked words with no embedding; left out of the map.
    pub missing: Vec<String>,
    pub map: SemanticMap,
}

/// Map name, model, group (for per-group maps), features entry and words.
type ClusterSet = (String, ModelKind, Option<Class>, Entry, Vec<String>);

fn cluster_sets(cfg: &PipelineConfig, store: &mut Store, ds: &LoadedDataset) -> CliResult<Vec<ClusterSet>> {
    let mut sets = Vec::new();
    for &kind in &cfg.semantic.models {
        let (fe, words) = ranked_words(cfg, store, ds, kind)?;
        match cfg.semantic.scope {
            ClusterScope::PerModel => {
                let w = words.iter().map(|r| r.word.clone()).collect();
                sets.push((kind.slug().to_string(), kind, None, fe, w));
            }
            ClusterScope::PerGroup => {
                for group in [Class::Higher, Class::Lower] {
                    let w = of_group(&words, group).into_iter().map(|r| r.word).collect();
                    sets.push((
                        format!("{}-{}", kind.slug(), group_slug(group)),
                        kind,
                        Some(group),
                        fe.clone(),
                        w,
                    ));
                }
            }
        }
    }
    Ok(sets)
}

pub fn cmd_cluster(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    let ds = load_dataset(store)?;
    let sets = cluster_sets(cfg, store, &ds)?;
    let all: Vec<String> = sets
        .iter()
        .flat_map(|s| s.4.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let (emb, emb_hash) = embeddings(cfg, store, &all)?;
    let mut out = String::new();
    for (name, kind, group, fe, words) in sets {
        let mut h = InputHash::new("cluster");
        h.add(fe.content_hash.as_bytes())
            .add(emb_hash.as_bytes())
            .add_json(&group)
            .add_json(&cfg.semantic.k)
            .add_json(&cfg.seed);
        let hash = h.finish();
        let key = format!("cluster:{name}");
        let export_key = format!("llm-export:{name}");
        if store.is_fresh(&key, &hash) && store.is_fresh(&export_key, &hash) {
            let _ = writeln!(out, "cluster {name}: up to date");
            continue;
        }
        let (subset, MissingWords { words: missing }) = emb.select(&words);
        let map = semantic_map(&subset, cfg.semantic.k, cfg.seed)?;
        let artifact = ClusterArtifact {
            name: name.clone(),
            model_kind: kind,
            group,
            source_tag: subset.source_tag.clone(),
            missing,
            map,
        };
        let e = store.write(&key, &format!("cluster-{name}"), "json", &hash, &pretty(&artifact))?;
        let export = export_for_llm(&artifact.map.words, cfg.semantic.k);
        store.write(
            &export_key,
            &format!("llm-export-{name}"),
            "json",
            &hash,
            export.as_bytes(),
        )?;
        let _ = writeln!(
            out,
            "cluster {name}: {} words in {} clusters{} -> {}",
            artifact.map.words.len(),
            cfg.semantic.k,
            if artifact.missing.is_empty() {
                String::new()
            } else {
                format!(", {} without embedding", artifact.missing.len())
            },
            e.file
        );
    }
    Ok(out)
}

pub fn cmd_compare(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    if cfg.compare.themes.is_empty() {
        return Ok("compare: no theme files configured\n".into());
    }
    let mut out = String::new();
    for (name, path) in &cfg.compare.themes {
        let (ce, cluster): (Entry, ClusterArtifact) = store.read_json(&format!("cluster:{name}"))?;
        let path = cfg.resolve(path);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let mut h = InputHash::new("compare");
        h.add(ce.content_hash.as_bytes())
            .add(text.as_bytes())
            .add_json(&cfg.compare.provenance);
        let hash = h.finish();
        let key = format!("compare:{name}");
        let report: AgreementReport = if store.is_fresh(&key, &hash) {
            store.read_json(&key)?.1
        } else {
            let known: BTreeSet<String> = cluster.map.words.iter().cloned().collect();
            let mut theirs = parse_llm_themes(&text, &known)?;
            theirs.provenance = cfg.compare.provenance;
            let r = compare_assignments(&cluster.map.themes(), &theirs)?;
            store.write(&key, &format!("compare-{name}"), "json", &hash, &pretty(&r))?;
            r
        };
        let _ = writeln!(
            out,
            "compare {name}: pairwise agreement {:.3}, mean Jaccard {:.3} over {} words",
            report.pairwise_agreement, report.mean_jaccard, report.common_words
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryScore {
    pub country_id: String,
    pub decision_value: f64,
    /// Min-max position against the training countries' decision values,
    /// clamped to [0, 1]; 1 is the most HigherPeace-like.
    pub score: f64,
    pub predicted: Class,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreArtifact {
    pub model_kind: ModelKind,
    pub training_min: f64,
    pub training_max: f64,
    pub countries: Vec<CountryScore>,
}

pub fn min_max_score(value: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// Extension: places intermediate countries on the axis a model learned
/// between the two training groups.
pub fn cmd_score(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    let ds = load_dataset(store)?;
    let mut out = String::new();
    for &kind in &cfg.evaluation.models {
        let (me, model) = load_model(store, kind)?;
        model.check_vocabulary(&ds.artifact.vocabulary)?;
        let mut h = InputHash::new("score");
        h.add(ds.entry.content_hash.as_bytes()).add(me.content_hash.as_bytes());
        let hash = h.finish();
        let key = format!("score:{}", kind.slug());
        let artifact: ScoreArtifact = if store.is_fresh(&key, &hash) {
            store.read_json(&key)?.1
        } else {
            let train: Vec<f64> = (0..ds.matrix.n_rows())
                .map(|i| model.model.decision_value(ds.matrix.row(i)))
                .collect::<peacelex::Result<_>>()?;
            let lo = train.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = train.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let countries = ds
                .artifact
                .preprocessed
                .profiles
                .iter()
                .filter(|p| p.label == PeaceLabel::Intermediate)
                .map(|p| {
                    let row = vectorize(p, &ds.artifact.vocabulary, ds.artifact.log_epsilon);
                    let v = model.model.decision_value(&row)?;
                    Ok(CountryScore {
                        country_id: p.country_id.clone(),
                        decision_value: v,
                        score: min_max_score(v, lo, hi),
                        predicted: Class::from_decision(v),
                    })
                })
                .collect::<peacelex::Result<_>>()?;
            let a = ScoreArtifact {
                model_kind: kind,
                training_min: lo,
                training_max: hi,
                countries,
            };
            store.write(&key, &format!("score-{}", kind.slug()), "json", &hash, &pretty(&a))?;
            a
        };
        let _ = writeln!(out, "score {kind}: {} intermediate countries", artifact.countries.len());
        for c in &artifact.countries {
            let _ = writeln!(out, "  {:<24} {:.3}", c.country_id, c.score);
        }
    }
    Ok(out)
}

pub fn cmd_synth(cfg: &PipelineConfig, root: &Path) -> CliResult<String> {
    let m = generate(&cfg.synth, root)?;
    Ok(format!(
        "synth: {} countries, {} planted markers per group -> {}\n",
        m.countries.len(),
        m.markers.higher.len(),
        root.display()
    ))
}

/// Every stage from ingest to score. Clustering and comparison are skipped
/// when no embedding source or theme file is configured.
pub fn cmd_run(cfg: &PipelineConfig, store: &mut Store) -> CliResult<String> {
    let mut out = String::new();
    out += &cmd_ingest(cfg, store)?;
    out += &cmd_preprocess(cfg, store)?;
    out += &cmd_train(cfg, store)?;
    out += &cmd_evaluate(cfg, store)?;
    out += &cmd_features(cfg, store)?;
    out += &cmd_cloud(cfg, store)?;
    if cfg.embeddings_file().is_some() || cfg.semantic.endpoint.is_some() {
        out += &cmd_cluster(cfg, store)?;
        out += &cmd_compare(cfg, store)?;
    } else {
        out += "cluster: skipped, no embedding source\n";
    }
    out += &cmd_score(cfg, store)?;
    Ok(out)
}

/// Artifact names by manifest key, for inspection.
pub fn listing(store: &Store) -> BTreeMap<String, String> {
    store
        .manifest()
        .artifacts
        .iter()
        .map(|(k, e)| (k.clone(), e.file.clone()))
        .collect()
}
