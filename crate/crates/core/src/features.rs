//! Ranked words from model attributions, and word-cloud layout and SVG output.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Vocabulary;
use crate::error::{Error, Result};
use crate::label::Class;
use crate::models::TrainedModel;
use crate::preprocess::Groups;
use crate::rng::seeded_rng;

/// Smallest display weight, for words a group never used.
pub const DISPLAY_FLOOR: f64 = 1e-12;

pub const SHARED_COLOR: &str = "#1f77b4";
pub const DEFAULT_COLOR: &str = "#333333";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedWord {
    pub word: String,
    /// Attribution magnitude.
    pub score: f64,
    pub group: Class,
    /// In both groups' top-K selections.
    pub shared: bool,
    /// The group's average frequency for this word; sizes the cloud.
    pub display_weight: f64,
}

/// How `n` is applied to signed attributions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// `n` words for each sign.
    #[default]
    PerClass,
    /// `n` words overall, split by sign afterwards.
    Total,
}

fn by_score_desc(a: &RankedWord, b: &RankedWord) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.word.cmp(&b.word))
}

/// Words ordered by attribution magnitude, ties by word.
///
/// Linear models: a non-negative coefficient assigns the word to `Higher`.
/// Trees and forests: the group with the larger average frequency, ties to
/// `Higher`. `selection` only matters for linear models.
pub fn rank_features(
    model: &TrainedModel,
    vocab: &Vocabulary,
    groups: &Groups,
    n: usize,
    selection: Selection,
) -> Result<Vec<RankedWord>> {
    let attr = model.attribution();
    if attr.len() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            found: attr.len(),
        });
    }
    if n == 0 || n > vocab.len() {
        return Err(Error::InvalidParameter(format!(
            "n must be in 1..={}, got {n}",
            vocab.len()
        )));
    }
    let signed = model.is_signed();
    let mut all: Vec<RankedWord> = vocab
        .words()
        .iter()
        .zip(attr)
        .map(|(w, &a)| {
            let group = if signed {
                Class::from_decision(a)
            } else if groups.higher.freq(w) >= groups.lower.freq(w) {
                Class::Higher
            } else {
                Class::Lower
            };
            RankedWord {
                word: w.clone(),
                score: a.abs(),
                group,
                shared: groups.is_shared(w),
                display_weight: groups.full(group).freq(w).max(DISPLAY_FLOOR),
            }
        })
        .collect();
    all.sort_by(by_score_desc);

    if signed && selection == Selection::PerClass {
        let mut out: Vec<RankedWord> = Vec::new();
        for class in [Class::Higher, Class::Lower] {
            out.extend(all.iter().filter(|r| r.group == class).take(n).cloned());
        }
        out.sort_by(by_score_desc);
        Ok(out)
    } else {
        all.truncate(n);
        Ok(all)
    }
}

/// Entries of one group, order preserved.
pub fn of_group(words: &[RankedWord], group: Class) -> Vec<RankedWord> {
    words.iter().filter(|w| w.group == group).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudOptions {
    pub width: f64,
    pub height: f64,
    pub min_font: f64,
    pub max_font: f64,
    /// Return unplaced words in `overflow` instead of failing.
    pub allow_overflow: bool,
}

impl Default for CloudOptions {
    fn default() -> Self {
        Self {
            width: 800.0,
            height: 600.0,
            min_font: 10.0,
            max_font: 56.0,
            allow_overflow: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub word: String,
    pub score: f64,
    pub shared: bool,
    /// Top-left corner of the glyph box.
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    pub font_size: f64,
    pub color: String,
}

impl Placement {
    fn overlaps(&self, o: &Placement) -> bool {
        self.x < o.x + o.width && o.x < self.x + self.width && self.y < o.y + o.height && o.y < self.y + self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudSpec {
    pub group: Class,
    pub entries: Vec<RankedWord>,
    pub options: CloudOptions,
    pub seed: u64,
    pub placements: Vec<Placement>,
    pub overflow: Vec<String>,
}

impl CloudSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cloud serializes")
    }
}

/// Approximate glyph box for a sans-serif word.
fn glyph_box(word: &str, font: f64) -> (f64, f64) {
    (0.6 * font * word.chars().count() as f64, font)
}

fn font_size(weight: f64, lo: f64, hi: f64, opts: &CloudOptions) -> f64 {
    if hi <= lo {
        return opts.max_font;
    }
    opts.min_font + (opts.max_font - opts.min_font) * (weight - lo) / (hi - lo)
}

/// Greedy spiral placement, heaviest word first. The seed picks the spiral's
/// starting angle.
pub fn layout_cloud(entries: &[RankedWord], group: Class, opts: &CloudOptions, seed: u64) -> Result<CloudSpec> {
    if entries.is_empty() {
        return Err(Error::InvalidParameter("a cloud needs at least one word".into()));
    }
    if !(opts.width > 0.0 && opts.height > 0.0 && opts.min_font > 0.0 && opts.min_font <= opts.max_font) {
        return Err(Error::InvalidParameter(
            "cloud canvas and font range must be positive".into(),
        ));
    }
    let mut order: Vec<&RankedWord> = entries.iter().collect();
    order.sort_by(|a, b| {
        b.display_weight
            .total_cmp(&a.display_weight)
            .then_with(|| a.word.cmp(&b.word))
    });
    let lo = order.iter().map(|e| e.display_weight).fold(f64::INFINITY, f64::min);
    let hi = order.iter().map(|e| e.display_weight).fold(f64::NEG_INFINITY, f64::max);

    let mut rng = seeded_rng(seed);
    let start: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (cx, cy) = (opts.width / 2.0, opts.height / 2.0);
    let max_r = (cx * cx + cy * cy).sqrt();
    let step = 0.05;
    let spacing = 1.5;

    let mut placed: Vec<Placement> = Vec::new();
    let mut overflow = Vec::new();
    for e in order {
        let font = font_size(e.display_weight, lo, hi, opts);
        let (w, h) = glyph_box(&e.word, font);
        let mut theta = 0.0f64;
        let mut spot = None;
        loop {
            let r = spacing * theta;
            if r > max_r {
                break;
            }
            let a = start + theta;
            let x = cx + r * a.cos() - w / 2.0;
            let y = cy + r * a.sin() - h / 2.0;
            theta += step;
            if x < 0.0 || y < 0.0 || x + w > opts.width || y + h > opts.height {
                continue;
            }
            let cand = Placement {
                word: e.word.clone(),
                score: e.score,
                shared: e.shared,
                x,
                y,
                width: w,
                height: h,
                font_size: font,
                color: if e.shared { SHARED_COLOR } else { DEFAULT_COLOR }.to_string(),
            };
            if placed.iter().all(|p| !p.overlaps(&cand)) {
                spot = Some(cand);
                break;
            }
        }
        match spot {
            Some(p) => placed.push(p),
            None => overflow.push(e.word.clone()),
        }
    }
    if !overflow.is_empty() && !opts.allow_overflow {
        return Err(Error::CanvasTooSmall { overflow });
    }
    Ok(CloudSpec {
        group,
        entries: entries.to_vec(),
        options: *opts,
        seed,
        placements: placed,
        overflow,
    })
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// SVG 1.1 document. Each text element carries its word, score and shared flag
/// as data attributes.
pub fn emit_svg(spec: &CloudSpec) -> String {
    let o = &spec.options;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        o.width, o.height, o.width, o.height
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, spec.group);
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    for p in &spec.placements {
        let word = escape(&p.word);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="{:.2}" fill="{}" data-word="{}" data-score="{:e}" data-shared="{}">{}</text>"#,
            p.x,
            p.y + 0.8 * p.height,
            p.font_size,
            p.color,
            word,
            p.score,
            p.shared,
            word
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Samples;
    use crate::models::{train_logistic, train_svm_linear, LinearKind, LinearModel, LogisticParams, SvmParams};
    use crate::preprocess::GroupProfile;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn groups(higher: &[(&str, f64)], lower: &[(&str, f64)]) -> Groups {
        let g = |label, words: &[(&str, f64)]| GroupProfile {
            label,
            avg_freq: words.iter().map(|(w, f)| (w.to_string(), *f)).collect(),
            member_count: 10,
        };
        Groups {
            higher: g(Class::Higher, higher),
            lower: g(Class::Lower, lower),
            higher_top: g(Class::Higher, higher),
            lower_top: g(Class::Lower, lower),
        }
    }

    fn linear(weights: Vec<f64>) -> TrainedModel {
        TrainedModel::Linear(LinearModel {
            kind: LinearKind::SvmLinear,
            weights,
            bias: 0.0,
            hyperparams: BTreeMap::new(),
        })
    }

    fn entry(word: &str, weight: f64, shared: bool) -> RankedWord {
        RankedWord {
            word: word.into(),
            score: weight,
            group: Class::Higher,
            shared,
            display_weight: weight,
        }
    }

    #[test]
    fn signed_coefficients_choose_group() {
        let vocab = Vocabulary::from_words(["corruption", "transaction"].map(String::from));
        let g = groups(&[("transaction", 0.01), ("corruption", 0.001)], &[("corruption", 0.02)]);
        let r = rank_features(&linear(vec![-3.0, 2.0]), &vocab, &g, 2, Selection::Total).unwrap();
        assert_eq!(r[0].word, "corruption");
        assert_eq!(r[0].group, Class::Lower);
        assert_eq!(r[0].display_weight, 0.02);
        assert!(r[0].shared);
        assert_eq!(r[1].word, "transaction");
        assert_eq!(r[1].group, Class::Higher);
        assert!(!r[1].shared);
    }

    #[test]
    fn importances_use_group_frequency() {
        let vocab = Vocabulary::from_words(["a", "b", "c"].map(String::from));
        let g = groups(&[("a", 0.3), ("b", 0.1)], &[("b", 0.2), ("c", 0.1)]);
        let forest = crate::models::Forest {
            trees: vec![],
            per_tree_seed: vec![],
            feature_subsample: 1,
            n_features: 3,
            importances: vec![0.5, 0.3, 0.2],
            params: Default::default(),
        };
        let r = rank_features(&TrainedModel::Forest(forest), &vocab, &g, 3, Selection::PerClass).unwrap();
        let got: Vec<(&str, Class)> = r.iter().map(|w| (w.word.as_str(), w.group)).collect();
        assert_eq!(
            got,
            vec![("a", Class::Higher), ("b", Class::Lower), ("c", Class::Lower)]
        );
        assert_eq!(r[0].display_weight, 0.3);
    }

    #[test]
    fn full_n_returns_every_word_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let words: Vec<String> = (0..200).map(|i| format!("w{i:03}")).collect();
        let vocab = Vocabulary::from_words(words.clone());
        let g = groups(&[], &[]);
        let weights: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for sel in [Selection::PerClass, Selection::Total] {
            let r = rank_features(&linear(weights.clone()), &vocab, &g, 200, sel).unwrap();
            let mut got: Vec<&str> = r.iter().map(|w| w.word.as_str()).collect();
            got.sort_unstable();
            assert_eq!(got, words.iter().map(String::as_str).collect::<Vec<_>>());
        }
        assert!(rank_features(&linear(weights), &vocab, &g, 201, Selection::Total).is_err());
    }

    proptest! {
        #[test]
        fn ordering_matches_sort_oracle(weights in prop::collection::vec(-5.0f64..5.0, 5..80), n in 1usize..80) {
            let d = weights.len();
            let n = n.min(d);
            let vocab = Vocabulary::from_words((0..d).map(|i| format!("w{i:03}")));
            let g = groups(&[], &[]);
            let r = rank_features(&linear(weights.clone()), &vocab, &g, n, Selection::Total).unwrap();
            let mut oracle: Vec<(f64, String)> = weights.iter().enumerate().map(|(i, w)| (w.abs(), format!("w{i:03}"))).collect();
            oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let expect: Vec<String> = oracle.into_iter().take(n).map(|(_, w)| w).collect();
            let got: Vec<String> = r.into_iter().map(|w| w.word).collect();
            prop_assert_eq!(got, expect);

            // Per class: the n largest of each sign.
            let r = rank_features(&linear(weights.clone()), &vocab, &g, n, Selection::PerClass).unwrap();
            let pos = weights.iter().filter(|w| **w >= 0.0).count().min(n);
            let neg = weights.iter().filter(|w| **w < 0.0).count().min(n);
            prop_assert_eq!(r.iter().filter(|w| w.group == Class::Higher).count(), pos);
            prop_assert_eq!(r.iter().filter(|w| w.group == Class::Lower).count(), neg);
        }
    }

    #[test]
    fn flipping_labels_flips_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 15;
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<Class> = (0..20)
            .map(|i| if i % 3 == 0 { Class::Higher } else { Class::Lower })
            .collect();
        let flipped: Vec<Class> = labels.iter().map(|c| c.flipped()).collect();
        let s = Samples::new(rows.iter().map(Vec::as_slice).collect(), labels, d).unwrap();
        let sf = Samples::new(rows.iter().map(Vec::as_slice).collect(), flipped, d).unwrap();
        let vocab = Vocabulary::from_words((0..d).map(|i| format!("w{i:02}")));
        let g = groups(&[], &[]);
        let pairs = [
            (
                TrainedModel::Linear(train_logistic(&s, &LogisticParams::default()).unwrap()),
                TrainedModel::Linear(train_logistic(&sf, &LogisticParams::default()).unwrap()),
            ),
            (
                TrainedModel::Linear(train_svm_linear(&s, &SvmParams::default(), 3).unwrap()),
                TrainedModel::Linear(train_svm_linear(&sf, &SvmParams::default(), 3).unwrap()),
            ),
        ];
        for (a, b) in pairs {
            for (x, y) in a.attribution().iter().zip(b.attribution()) {
                assert!((x + y).abs() <= 1e-12 * (1.0 + x.abs()), "{x} vs {y}");
            }
            let ra = rank_features(&a, &vocab, &g, d, Selection::Total).unwrap();
            let rb = rank_features(&b, &vocab, &g, d, Selection::Total).unwrap();
            for (p, q) in ra.iter().zip(&rb) {
                assert_eq!(p.word, q.word);
                assert_eq!(p.group, q.group.flipped());
            }
        }
    }

    #[test]
    fn svg_marks_shared_words() {
        let entries = vec![entry("peace", 0.5, true), entry("market", 0.2, false)];
        let spec = layout_cloud(&entries, Class::Higher, &CloudOptions::default(), 3).unwrap();
        assert!(spec.overflow.is_empty());
        let svg = emit_svg(&spec);
        assert!(svg.contains(r#"version="1.1""#));
        let peace = svg.lines().find(|l| l.contains(r#"data-word="peace""#)).unwrap();
        assert!(peace.contains(r##"fill="#1f77b4""##));
        let market = svg.lines().find(|l| l.contains(r#"data-word="market""#)).unwrap();
        assert!(!market.contains("#1f77b4"));
        assert_eq!(
            svg,
            emit_svg(&layout_cloud(&entries, Class::Higher, &CloudOptions::default(), 3).unwrap())
        );
    }

    #[test]
    fn tiny_canvas_overflows() {
        let entries: Vec<_> = (0..30)
            .map(|i| entry(&format!("word{i}"), 1.0 + i as f64, false))
            .collect();
        let opts = CloudOptions {
            width: 120.0,
            height: 60.0,
            ..Default::default()
        };
        match layout_cloud(&entries, Class::Lower, &opts, 1) {
            Err(Error::CanvasTooSmall { overflow }) => assert!(!overflow.is_empty()),
            other => panic!("expected CanvasTooSmall, got {other:?}"),
        }
        let lenient = CloudOptions {
            allow_overflow: true,
            ..opts
        };
        let spec = layout_cloud(&entries, Class::Lower, &lenient, 1).unwrap();
        assert_eq!(spec.placements.len() + spec.overflow.len(), 30);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn layout_invariants(weights in prop::collection::vec(1e-6f64..1.0, 1..60), seed in any::<u64>()) {
            let entries: Vec<_> = weights.iter().enumerate().map(|(i, w)| entry(&format!("w{}", "x".repeat(i % 7) + &i.to_string()), *w, i % 4 == 0)).collect();
            let opts = CloudOptions { allow_overflow: true, ..Default::default() };
            let spec = layout_cloud(&entries, Class::Higher, &opts, seed).unwrap();
            prop_assert_eq!(spec.placements.len() + spec.overflow.len(), entries.len());
            for (i, a) in spec.placements.iter().enumerate() {
                prop_assert!(a.x >= 0.0 && a.y >= 0.0 && a.x + a.width <= opts.width && a.y + a.height <= opts.height);
                for b in &spec.placements[i + 1..] {
                    prop_assert!(!a.overlaps(b), "{} overlaps {}", a.word, b.word);
                }
            }
            let size: BTreeMap<&str, f64> = spec.placements.iter().map(|p| (p.word.as_str(), p.font_size)).collect();
            for a in &entries {
                for b in &entries {
                    if let (Some(fa), Some(fb)) = (size.get(a.word.as_str()), size.get(b.word.as_str())) {
                        if a.display_weight > b.display_weight {
                            prop_assert!(fa >= fb);
                        }
                    }
                }
            }
        }
    }
}
