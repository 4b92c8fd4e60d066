//! Utility evaluation: a small multinomial logistic classifier, ROC AUC and
//! the train-on-synthetic / test-on-real comparison.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Ridge penalty on non-bias weights.
    pub l2: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 2.0,
            l2: 1e-4,
        }
    }
}

/// Softmax regression. `weights` is row-major, one row of `n_features + 1`
/// (bias last) per trained class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub weights: Vec<f64>,
    pub n_features: usize,
    pub class_count: usize,
    /// Global class index of each weight row.
    pub classes: Vec<usize>,
    pub loss_trace: Vec<f64>,
}

impl ClassifierModel {
    fn logits(&self, x: &[f64], out: &mut [f64]) {
        let stride = self.n_features + 1;
        for (k, o) in out.iter_mut().enumerate() {
            let w = &self.weights[k * stride..(k + 1) * stride];
            *o = w[self.n_features] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Class probabilities over all `class_count` classes; classes the model
    /// never saw get 0.
    pub fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.classes.len()];
        self.logits(x, &mut z);
        softmax(&mut z);
        let mut p = vec![0.0; self.class_count];
        for (&c, v) in self.classes.iter().zip(z) {
            p[c] = v;
        }
        p
    }

    pub fn predict_proba(&self, d: &Dataset) -> Vec<Vec<f64>> {
        d.rows().map(|r| self.predict_proba_row(r)).collect()
    }

    /// Argmax class; ties go to the smaller index.
    pub fn predict(&self, d: &Dataset) -> Vec<usize> {
        self.predict_proba(d).iter().map(|p| argmax(p)).collect()
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn softmax(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

struct Problem<'a> {
    x: Vec<&'a [f64]>,
    y: Vec<usize>,
    k: usize,
    dim: usize,
    l2: f64,
}

impl Problem<'_> {
    fn loss(&self, w: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let stride = self.dim + 1;
        let n = self.x.len() as f64;
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut z = vec![0.0; self.k];
        let mut total = 0.0;
        for (x, &y) in self.x.iter().zip(&self.y) {
            for (c, zc) in z.iter_mut().enumerate() {
                let row = &w[c * stride..(c + 1) * stride];
                *zc = row[self.dim] + row.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>();
            }
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            total += lse - z[y];
            if let Some(g) = g.as_deref_mut() {
                for c in 0..self.k {
                    let r = (z[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
                    let gr = &mut g[c * stride..(c + 1) * stride];
                    for (gv, xv) in gr.iter_mut().zip(x.iter()) {
                        *gv += r * xv / n;
                    }
                    gr[self.dim] += r / n;
                }
            }
        }
        let mut reg = 0.0;
        for c in 0..self.k {
            for j in 0..self.dim {
                let v = w[c * stride + j];
                reg += v * v;
                if let Some(g) = g.as_deref_mut() {
                    g[c * stride + j] += self.l2 * v;
                }
            }
        }
        total / n + 0.5 * self.l2 * reg
    }
}

fn fit(d: &Dataset, classes: Vec<usize>, opts: &TrainOptions, seed: u64) -> Result<ClassifierModel> {
    if opts.learning_rate <= 0.0 || !opts.learning_rate.is_finite() || opts.l2 < 0.0 {
        return Err(Error::InvalidArgument(
            "learning rate must be positive and l2 non-negative".into(),
        ));
    }
    let mut local = vec![usize::MAX; d.class_count()];
    for (i, &c) in classes.iter().enumerate() {
        local[c] = i;
    }
    let problem = Problem {
        x: d.rows().collect(),
        y: d.labels().iter().map(|&c| local[c]).collect(),
        k: classes.len(),
        dim: d.n_features(),
        l2: opts.l2,
    };
    let size = problem.k * (problem.dim + 1);
    let init = Normal::new(0.0, 1e-3).expect("valid normal");
    let mut rng = rng::seeded(seed);
    let mut w: Vec<f64> = (0..size).map(|_| init.sample(&mut rng)).collect();
    let mut grad = vec![0.0; size];
    let mut loss = problem.loss(&w, Some(&mut grad));
    let mut trace = vec![loss];
    let mut lr = opts.learning_rate;
    let mut trial = vec![0.0; size];
    for _ in 0..opts.epochs {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 < 1e-20 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            for ((t, wv), gv) in trial.iter_mut().zip(&w).zip(&grad) {
                *t = wv - lr * gv;
            }
            let l = problem.loss(&trial, None);
            if l.is_finite() && l <= loss - 1e-4 * lr * gnorm2 {
                std::mem::swap(&mut w, &mut trial);
                loss = problem.loss(&w, Some(&mut grad));
                accepted = true;
                lr *= 1.25;
                break;
            }
            lr *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(loss);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("classifier weights diverged".into()));
    }
    Ok(ClassifierModel {
        weights: w,
        n_features: d.n_features(),
        class_count: d.class_count(),
        classes,
        loss_trace: trace,
    })
}

/// Full-batch gradient descent on softmax cross-entropy with backtracking.
/// Every class must be present.
pub fn train_classifier(d: &Dataset, epochs: usize, learning_rate: f64, seed: u64) -> Result<ClassifierModel> {
    train_classifier_with(
        d,
        &TrainOptions {
            epochs,
            learning_rate,
            ..TrainOptions::default()
        },
        seed,
    )
}

pub fn train_classifier_with(d: &Dataset, opts: &TrainOptions, seed: u64) -> Result<ClassifierModel> {
    if let Some(c) = d.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::MissingClass(c));
    }
    fit(d, (0..d.class_count()).collect(), opts, seed)
}

/// Like [`train_classifier_with`] but trains on whichever classes are
/// present; absent classes are always predicted with probability 0.
pub fn train_on_present_classes(d: &Dataset, opts: &TrainOptions, seed: u64) -> Result<ClassifierModel> {
    let classes: Vec<usize> = d
        .class_counts()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(c, _)| c)
        .collect();
    fit(d, classes, opts, seed)
}

/// Mann-Whitney AUC; tied scores get half credit.
pub fn auc_binary(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: positive.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("AUC scores contain NaN".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of 1-based ranks of positives, tied blocks get the block average.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        let pos_in_block = order[i..j].iter().filter(|&&k| positive[k]).count();
        rank_sum += avg * pos_in_block as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// One-vs-one AUC averaged over class pairs, weighted by pair row count.
/// Pairs with an absent class are skipped.
pub fn auc_ovo_micro(probs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            found: labels.len(),
        });
    }
    let c = probs.first().map_or(0, Vec::len);
    if c < 2 {
        return Err(Error::InvalidArgument("one-vs-one AUC needs at least 2 classes".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for {c} classes")));
    }
    let mut pairs: Vec<(f64, usize)> = Vec::new();
    for i in 0..c {
        for j in i + 1..c {
            let rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == i || labels[r] == j).collect();
            let pos: Vec<bool> = rows.iter().map(|&r| labels[r] == j).collect();
            if pos.iter().all(|&p| p) || !pos.iter().any(|&p| p) {
                continue;
            }
            let scores: Vec<f64> = rows
                .iter()
                .map(|&r| {
                    let (pi, pj) = (probs[r][i], probs[r][j]);
                    if c == 2 {
                        // rows already sum to one
                        pj
                    } else if pi + pj > 0.0 {
                        pj / (pi + pj)
                    } else {
                        0.5
                    }
                })
                .collect();
            pairs.push((auc_binary(&scores, &pos)?, rows.len()));
        }
    }
    match pairs.as_slice() {
        [] => Err(Error::InvalidArgument("no class pair has both classes present".into())),
        [(auc, _)] => Ok(*auc),
        _ => {
            let weight: usize = pairs.iter().map(|p| p.1).sum();
            Ok(pairs.iter().map(|(a, n)| a * *n as f64).sum::<f64>() / weight as f64)
        }
    }
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() || labels.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: predicted.len(),
        });
    }
    let hits = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Binary AUC on the class-1 probability; two classes only.
    Auc,
    OvoAuc,
    Accuracy,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::OvoAuc => "ovo-auc",
            Metric::Accuracy => "accuracy",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auc" => Ok(Metric::Auc),
            "ovo-auc" => Ok(Metric::OvoAuc),
            "accuracy" => Ok(Metric::Accuracy),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric {other:?} (expected auc, ovo-auc or accuracy)"
            ))),
        }
    }
}

/// Scores `model` on `d`.
pub fn score(model: &ClassifierModel, d: &Dataset, metric: Metric) -> Result<f64> {
    match metric {
        Metric::Accuracy => accuracy(&model.predict(d), d.labels()),
        Metric::OvoAuc => auc_ovo_micro(&model.predict_proba(d), d.labels()),
        Metric::Auc => {
            if d.class_count() != 2 {
                return Err(Error::InvalidArgument(format!(
                    "binary AUC needs 2 classes, data has {}; use ovo-auc",
                    d.class_count()
                )));
            }
            let scores: Vec<f64> = model.predict_proba(d).iter().map(|p| p[1]).collect();
            let pos: Vec<bool> = d.labels().iter().map(|&y| y == 1).collect();
            auc_binary(&scores, &pos)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub metric: Metric,
    pub real_score: f64,
    pub synthetic_score: f64,
    /// `real_score - synthetic_score`.
    pub gap: f64,
    /// Classes with no synthetic record; never predicted by the synthetic model.
    pub missing_synthetic_classes: Vec<usize>,
    pub diagnostics: Vec<String>,
}

/// Trains the same classifier on `real_train` and on `synth_train` and
/// scores both on `real_test`.
pub fn evaluate_utility(
    real_train: &Dataset,
    synth_train: &Dataset,
    real_test: &Dataset,
    metric: Metric,
    opts: &TrainOptions,
    seed: u64,
) -> Result<UtilityReport> {
    for other in [synth_train, real_test] {
        if other.n_features() != real_train.n_features() {
            return Err(Error::DimensionMismatch {
                expected: real_train.n_features(),
                found: other.n_features(),
            });
        }
        if other.class_count() != real_train.class_count() {
            return Err(Error::Schema(format!(
                "class count mismatch: {} vs {}",
                real_train.class_count(),
                other.class_count()
            )));
        }
    }
    if synth_train.is_empty() {
        return Err(Error::InvalidArgument("synthetic training set is empty".into()));
    }
    let real_model = train_on_present_classes(real_train, opts, seed)?;
    let synth_model = train_on_present_classes(synth_train, opts, seed)?;
    let missing: Vec<usize> = synth_train
        .class_counts()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0)
        .map(|(c, _)| c)
        .collect();
    let mut diagnostics = Vec::new();
    if !missing.is_empty() {
        diagnostics.push(format!(
            "synthetic data has no records of class(es) {missing:?}; they are never predicted"
        ));
    }
    let real_score = score(&real_model, real_test, metric)?;
    let synthetic_score = score(&synth_model, real_test, metric)?;
    Ok(UtilityReport {
        metric,
        real_score,
        synthetic_score,
        gap: real_score - synthetic_score,
        missing_synthetic_classes: missing,
        diagnostics,
    })
}
