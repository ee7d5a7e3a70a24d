//! Logistic regression and linear SVM.
//!
//! Both trainers work on column-centered copies of the training rows and fold
//! the centering back into the bias, which leaves the objective unchanged
//! because the bias is not regularized. Rows are visited in a canonical order
//! so the result does not depend on the order rows were supplied in.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Samples;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearKind {
    Logistic,
    SvmLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyperparams: BTreeMap<String, f64>,
}

impl LinearModel {
    pub fn decision_value(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln(1 + e^{-m})` without overflow.
fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// `1 / (1 + e^{m})`.
fn sigmoid_neg(m: f64) -> f64 {
    if m > 0.0 {
        let e = (-m).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + m.exp())
    }
}

/// Rows sorted lexicographically by value. Labels take no part, so flipping
/// every label leaves the visiting order unchanged.
fn canonical_order(samples: &Samples) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.sort_by(|&a, &b| {
        samples.rows[a]
            .iter()
            .zip(samples.rows[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

struct Centered {
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
    mean: Vec<f64>,
}

fn center(samples: &Samples) -> Centered {
    let order = canonical_order(samples);
    let d = samples.n_features;
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in &order {
        for (m, v) in mean.iter_mut().zip(samples.rows[i]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let rows = order
        .iter()
        .map(|&i| samples.rows[i].iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let y = order.iter().map(|&i| samples.y(i)).collect();
    Centered { rows, y, mean }
}

fn require_both_classes(samples: &Samples) -> Result<()> {
    if samples.has_both_classes() {
        Ok(())
    } else {
        Err(Error::SingleClassData)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// L2 penalty on the weights.
    pub lambda: f64,
    pub steps: usize,
    /// Step size as a fraction of `1/L`, where `L` bounds the gradient's
    /// Lipschitz constant on the training data.
    pub lr: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            steps: 500,
            lr: 1.0,
        }
    }
}

/// Mean log-loss plus `(lambda/2)·‖w‖²`.
pub fn logistic_objective(samples: &Samples, w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = samples.len() as f64;
    let loss: f64 = (0..samples.len())
        .map(|i| softplus_neg(samples.y(i) * (dot(w, samples.rows[i]) + b)))
        .sum();
    loss / n + 0.5 * lambda * dot(w, w)
}

/// Analytic gradient of [`logistic_objective`] with respect to `(w, b)`.
pub fn logistic_gradient(samples: &Samples, w: &[f64], b: f64, lambda: f64) -> (Vec<f64>, f64) {
    let rows: Vec<&[f64]> = samples.rows.clone();
    let y: Vec<f64> = (0..samples.len()).map(|i| samples.y(i)).collect();
    gradient_on(&rows, &y, w, b, lambda)
}

fn gradient_on(rows: &[&[f64]], y: &[f64], w: &[f64], b: f64, lambda: f64) -> (Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut gw: Vec<f64> = w.iter().map(|wi| lambda * wi).collect();
    let mut gb = 0.0;
    for (row, &yi) in rows.iter().zip(y) {
        let coef = -yi * sigmoid_neg(yi * (dot(w, row) + b)) / n;
        for (g, x) in gw.iter_mut().zip(row.iter()) {
            *g += coef * x;
        }
        gb += coef;
    }
    (gw, gb)
}

/// Full-batch gradient descent from `w = 0, b = 0` with a fixed step.
pub fn train_logistic(samples: &Samples, params: &LogisticParams) -> Result<LinearModel> {
    require_both_classes(samples)?;
    if params.lambda < 0.0 || params.lr <= 0.0 {
        return Err(Error::InvalidParameter("logistic needs lambda >= 0 and lr > 0".into()));
    }
    let c = center(samples);
    let d = samples.n_features;
    let rows: Vec<&[f64]> = c.rows.iter().map(Vec::as_slice).collect();
    let mean_sq = rows.iter().map(|r| dot(r, r) + 1.0).sum::<f64>() / rows.len() as f64;
    let step = params.lr / (0.25 * mean_sq + params.lambda);

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..params.steps {
        let (gw, gb) = gradient_on(&rows, &c.y, &w, b, params.lambda);
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= step * g;
        }
        b -= step * gb;
    }
    let bias = b - dot(&w, &c.mean);
    Ok(LinearModel {
        kind: LinearKind::Logistic,
        weights: w,
        bias,
        hyperparams: BTreeMap::from([
            ("lambda".into(), params.lambda),
            ("lr".into(), params.lr),
            ("steps".into(), params.steps as f64),
        ]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, epochs: 300 }
    }
}

/// `(1/2)‖w‖² + C·Σ max(0, 1 − y(w·x + b))`.
pub fn svm_objective(samples: &Samples, w: &[f64], b: f64, c: f64) -> f64 {
    let hinge: f64 = (0..samples.len())
        .map(|i| (1.0 - samples.y(i) * (dot(w, samples.rows[i]) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

fn svm_objective_on(rows: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, c: f64) -> f64 {
    let hinge: f64 = rows
        .iter()
        .zip(y)
        .map(|(r, yi)| (1.0 - yi * (dot(w, r) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge
}

/// Exact minimizer over `b` of `Σ max(0, 1 − y_i(s_i + b))` for fixed scores `s`.
///
/// The objective is convex piecewise linear with breakpoints at `y_i − s_i`;
/// its minimum is attained at one of them.
fn best_bias(scores: &[f64], y: &[f64]) -> f64 {
    let mut candidates: Vec<f64> = scores.iter().zip(y).map(|(s, yi)| yi - s).collect();
    candidates.sort_by(f64::total_cmp);
    let cost = |b: f64| -> f64 { scores.iter().zip(y).map(|(s, yi)| (1.0 - yi * (s + b)).max(0.0)).sum() };
    let costs: Vec<f64> = candidates.iter().map(|&b| cost(b)).collect();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + min.abs());
    // The minimizers form an interval; take its midpoint.
    let lo = costs.iter().position(|&v| v <= min + tol).unwrap();
    let hi = costs.iter().rposition(|&v| v <= min + tol).unwrap();
    0.5 * (candidates[lo] + candidates[hi])
}

/// Training trace: best objective seen after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmTrace {
    pub checkpoints: Vec<f64>,
}

pub fn train_svm_linear(samples: &Samples, params: &SvmParams, seed: u64) -> Result<LinearModel> {
    train_svm_linear_traced(samples, params, seed).map(|(m, _)| m)
}

/// Seeded stochastic descent on the hinge objective.
///
/// Each epoch visits rows in a freshly seeded shuffle. A visited row is paired
/// with the partner that most violates optimality against it, and both take a
/// hinge subgradient step on `w` with the exact line-search length (the
/// pairwise dual coordinate step, which keeps the bias unregularized). At every
/// epoch end the bias is re-solved exactly and the best iterate seen so far is
/// kept, so checkpoints are non-increasing.
pub fn train_svm_linear_traced(samples: &Samples, params: &SvmParams, seed: u64) -> Result<(LinearModel, SvmTrace)> {
    require_both_classes(samples)?;
    if params.c <= 0.0 || !params.c.is_finite() {
        return Err(Error::InvalidParameter("svm C must be positive".into()));
    }
    let cap = params.c;
    let c = center(samples);
    let n = c.rows.len();
    let d = samples.n_features;
    let gram: Vec<Vec<f64>> = c
        .rows
        .iter()
        .map(|a| c.rows.iter().map(|r| dot(a, r)).collect())
        .collect();

    let mut alpha = vec![0.0; n];
    // s[m] = w·x_m for the current multipliers
    let mut s = vec![0.0; n];
    let up = |i: usize, a: &[f64]| if c.y[i] > 0.0 { a[i] < cap } else { a[i] > 0.0 };
    let low = |i: usize, a: &[f64]| if c.y[i] > 0.0 { a[i] > 0.0 } else { a[i] < cap };
    let room = |a: f64, dir: f64| if dir > 0.0 { cap - a } else { a };

    let mut best_w = vec![0.0; d];
    let mut best_b = best_bias(&vec![0.0; n], &c.y);
    let mut best_obj = svm_objective_on(&c.rows, &c.y, &best_w, best_b, cap);
    let mut checkpoints = Vec::with_capacity(params.epochs);

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..params.epochs {
        let mut rng = seeded_rng(derive_seed(seed, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        for &i in &order {
            let v = |m: usize, s: &[f64]| c.y[m] - s[m];
            let mut pick: Option<(usize, usize, f64)> = None;
            for j in (0..n).filter(|&j| j != i) {
                let cand = if up(i, &alpha) && low(j, &alpha) && v(i, &s) > v(j, &s) {
                    Some((i, j, v(i, &s) - v(j, &s)))
                } else if up(j, &alpha) && low(i, &alpha) && v(j, &s) > v(i, &s) {
                    Some((j, i, v(j, &s) - v(i, &s)))
                } else {
                    None
                };
                if let Some(x) = cand {
                    if pick.is_none_or(|p| x.2 > p.2) {
                        pick = Some(x);
                    }
                }
            }
            let Some((u, l, gap)) = pick else { continue };
            if gap < 1e-12 {
                continue;
            }
            let curv = (gram[u][u] + gram[l][l] - 2.0 * gram[u][l]).max(1e-12);
            let t = (gap / curv).min(room(alpha[u], c.y[u])).min(room(alpha[l], -c.y[l]));
            alpha[u] += c.y[u] * t;
            alpha[l] -= c.y[l] * t;
            for (m, sm) in s.iter_mut().enumerate() {
                *sm += t * (gram[u][m] - gram[l][m]);
            }
        }

        let mut w = vec![0.0; d];
        for (r, (a, yi)) in c.rows.iter().zip(alpha.iter().zip(&c.y)) {
            if *a != 0.0 {
                for (wj, x) in w.iter_mut().zip(r) {
                    *wj += a * yi * x;
                }
            }
        }
        let scores: Vec<f64> = c.rows.iter().map(|r| dot(&w, r)).collect();
        // resync against drift in the running scores
        s.clone_from(&scores);
        let b = best_bias(&scores, &c.y);
        let obj = svm_objective_on(&c.rows, &c.y, &w, b, cap);
        if obj < best_obj {
            best_obj = obj;
            best_w = w;
            best_b = b;
        }
        checkpoints.push(best_obj);
    }

    let bias = best_b - dot(&best_w, &c.mean);
    let model = LinearModel {
        kind: LinearKind::SvmLinear,
        weights: best_w,
        bias,
        hyperparams: BTreeMap::from([("c".into(), params.c), ("epochs".into(), params.epochs as f64)]),
    };
    Ok((model, SvmTrace { checkpoints }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Class;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples_from<'a>(rows: &'a [Vec<f64>], labels: &[Class]) -> Samples<'a> {
        Samples::new(rows.iter().map(Vec::as_slice).collect(), labels.to_vec(), rows[0].len()).unwrap()
    }

    #[test]
    fn logistic_symmetric_pair() {
        let rows = vec![vec![-1.0], vec![1.0]];
        let s = samples_from(&rows, &[Class::Lower, Class::Higher]);
        let m = train_logistic(
            &s,
            &LogisticParams {
                lambda: 0.0,
                steps: 200,
                lr: 1.0,
            },
        )
        .unwrap();
        assert!(m.weights[0] > 0.0);
        assert!(m.bias.abs() < 1e-12);
        assert!(m.decision_value(&[-1.0]) < 0.0 && m.decision_value(&[1.0]) > 0.0);
    }

    #[test]
    fn logistic_zero_steps_is_origin() {
        let rows = vec![vec![3.0, 1.0], vec![1.0, 2.0], vec![0.0, 0.0]];
        let s = samples_from(&rows, &[Class::Lower, Class::Higher, Class::Lower]);
        let m = train_logistic(
            &s,
            &LogisticParams {
                steps: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.weights, vec![0.0, 0.0]);
        assert_eq!(m.bias, 0.0);
        assert_eq!(Class::from_decision(m.decision_value(&[5.0, 5.0])), Class::Higher);
    }

    #[test]
    fn single_class_rejected() {
        let rows = vec![vec![1.0], vec![2.0]];
        let s = samples_from(&rows, &[Class::Higher, Class::Higher]);
        assert!(matches!(
            train_logistic(&s, &LogisticParams::default()),
            Err(Error::SingleClassData)
        ));
        assert!(matches!(
            train_svm_linear(&s, &SvmParams::default(), 0),
            Err(Error::SingleClassData)
        ));
    }

    fn random_separable(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Class>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = if i % 2 == 0 { Class::Higher } else { Class::Lower };
            let row: Vec<f64> = dir
                .iter()
                .map(|v| rng.gen_range(-1.0..1.0) + 0.8 * class.sign() * v)
                .collect();
            rows.push(row);
            labels.push(class);
        }
        (rows, labels)
    }

    #[test]
    fn logistic_converges_on_separable_data() {
        let (rows, labels) = random_separable(20, 50, 1);
        let s = samples_from(&rows, &labels);
        let params = LogisticParams {
            lambda: 0.1,
            steps: 20_000,
            lr: 1.0,
        };
        let m = train_logistic(&s, &params).unwrap();
        for (r, l) in rows.iter().zip(&labels) {
            assert_eq!(Class::from_decision(m.decision_value(r)), *l);
        }
        let (gw, gb) = logistic_gradient(&s, &m.weights, m.bias, params.lambda);
        let inf = gw.iter().fold(gb.abs(), |a, g| a.max(g.abs()));
        assert!(inf < 1e-4, "gradient inf-norm {inf}");
    }

    #[test]
    fn svm_symmetric_pair() {
        let rows = vec![vec![-1.0], vec![1.0]];
        let s = samples_from(&rows, &[Class::Lower, Class::Higher]);
        let m = train_svm_linear(&s, &SvmParams { c: 100.0, epochs: 2000 }, 7).unwrap();
        assert!(m.bias.abs() < 0.05, "bias {}", m.bias);
        assert!((m.decision_value(&[1.0]) - 1.0).abs() < 0.05);
        assert!((m.decision_value(&[-1.0]) + 1.0).abs() < 0.05);
    }

    #[test]
    fn svm_small_c_shrinks_weights() {
        let (rows, labels) = random_separable(20, 10, 2);
        let s = samples_from(&rows, &labels);
        let norm = |c: f64| {
            let m = train_svm_linear(&s, &SvmParams { c, epochs: 200 }, 1).unwrap();
            dot(&m.weights, &m.weights).sqrt()
        };
        let tiny = norm(1e-6);
        assert!(tiny < 1e-4, "{tiny}");
        assert!(norm(1e-3) < norm(1.0));
    }

    #[test]
    fn svm_checkpoints_non_increasing() {
        let (rows, labels) = random_separable(20, 30, 3);
        let s = samples_from(&rows, &labels);
        let (_, trace) = train_svm_linear_traced(&s, &SvmParams { c: 1.0, epochs: 100 }, 9).unwrap();
        for pair in trace.checkpoints.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-6);
        }
    }

    #[test]
    fn linear_training_ignores_row_order() {
        let (rows, labels) = random_separable(12, 8, 4);
        let mut perm: Vec<usize> = (0..rows.len()).collect();
        perm.reverse();
        perm.swap(0, 5);
        let rows2: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let labels2: Vec<Class> = perm.iter().map(|&i| labels[i]).collect();
        let (a, b) = (samples_from(&rows, &labels), samples_from(&rows2, &labels2));
        assert_eq!(
            train_logistic(&a, &LogisticParams::default()).unwrap(),
            train_logistic(&b, &LogisticParams::default()).unwrap()
        );
        assert_eq!(
            train_svm_linear(&a, &SvmParams::default(), 5).unwrap(),
            train_svm_linear(&b, &SvmParams::default(), 5).unwrap()
        );
    }

    /// Dual SMO with maximal-violating-pair selection, run to a tight KKT gap.
    fn smo_oracle(rows: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
        let n = rows.len();
        let k: Vec<Vec<f64>> = rows.iter().map(|a| rows.iter().map(|b| dot(a, b)).collect()).collect();
        let mut alpha = vec![0.0; n];
        let mut g = vec![-1.0; n];
        for _ in 0..1_000_000 {
            let up = |i: usize, a: &[f64]| (y[i] > 0.0 && a[i] < c) || (y[i] < 0.0 && a[i] > 0.0);
            let low = |i: usize, a: &[f64]| (y[i] > 0.0 && a[i] > 0.0) || (y[i] < 0.0 && a[i] < c);
            let i = (0..n)
                .filter(|&i| up(i, &alpha))
                .max_by(|&a, &b| (-y[a] * g[a]).total_cmp(&(-y[b] * g[b])));
            let j = (0..n)
                .filter(|&j| low(j, &alpha))
                .min_by(|&a, &b| (-y[a] * g[a]).total_cmp(&(-y[b] * g[b])));
            let (Some(i), Some(j)) = (i, j) else { break };
            let gap = -y[i] * g[i] + y[j] * g[j];
            if gap < 1e-10 {
                break;
            }
            let curv = (k[i][i] + k[j][j] - 2.0 * k[i][j]).max(1e-12);
            let mut t = gap / curv;
            // keep both multipliers inside the box
            let bound = |a: f64, dir: f64| if dir > 0.0 { c - a } else { a };
            t = t.min(bound(alpha[i], y[i])).min(bound(alpha[j], -y[j]));
            alpha[i] += y[i] * t;
            alpha[j] -= y[j] * t;
            for m in 0..n {
                g[m] += y[m] * t * (k[m][i] - k[m][j]);
            }
        }
        let d = rows[0].len();
        let mut w = vec![0.0; d];
        for (r, (a, yi)) in rows.iter().zip(alpha.iter().zip(y)) {
            for (wj, x) in w.iter_mut().zip(r) {
                *wj += a * yi * x;
            }
        }
        let scores: Vec<f64> = rows.iter().map(|r| dot(&w, r)).collect();
        let b = best_bias(&scores, y);
        svm_objective_on(rows, y, &w, b, c)
    }

    #[test]
    fn svm_objective_near_dual_oracle() {
        // 20 x 1270 log-frequency rows: mostly noise, a few informative columns.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let labels: Vec<Class> = (0..20)
            .map(|i| if i < 10 { Class::Higher } else { Class::Lower })
            .collect();
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|l| {
                (0..1270)
                    .map(|j| {
                        let base: f64 = if rng.gen_bool(0.2) {
                            -9.0
                        } else {
                            rng.gen_range(-5.0..-2.0)
                        };
                        if j < 20 && (j < 10) == (*l == Class::Higher) {
                            base.max(-5.0) + 1.5
                        } else {
                            base
                        }
                    })
                    .collect()
            })
            .collect();
        let s = samples_from(&rows, &labels);
        let y: Vec<f64> = (0..20).map(|i| s.y(i)).collect();
        for c in [0.001, 0.01, 1.0] {
            let oracle = smo_oracle(&rows, &y, c);
            let m = train_svm_linear(&s, &SvmParams { c, epochs: 300 }, 3).unwrap();
            let ours = svm_objective(&s, &m.weights, m.bias, c);
            assert!(ours <= oracle * 1.01 + 1e-9, "C={c}: ours {ours}, oracle {oracle}");
            assert!(
                ours >= oracle * (1.0 - 1e-6) - 1e-9,
                "C={c}: oracle not optimal ({oracle} > {ours})"
            );
        }
    }

    #[test]
    fn best_bias_is_exact() {
        let scores = [0.3, -0.2, 1.4, -2.0, 0.1];
        let y = [1.0, -1.0, 1.0, -1.0, -1.0];
        let b = best_bias(&scores, &y);
        let cost = |b: f64| -> f64 { scores.iter().zip(&y).map(|(s, yi)| (1.0 - yi * (s + b)).max(0.0)).sum() };
        for k in -400..=400 {
            assert!(cost(b) <= cost(k as f64 / 100.0) + 1e-12);
        }
    }
}
