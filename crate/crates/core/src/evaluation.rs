//! Downstream evaluation of embeddings: 1NN classification over repeated
//! random splits, and distance-ranked retrieval scored by precision, recall,
//! average precision and F1.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub n_repeats: usize,
    pub seed: u64,
    /// Split each class separately instead of the pooled samples.
    #[serde(default)]
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            n_repeats: 20,
            seed: 0,
            stratified: false,
        }
    }
}

/// Mean, max and the five boxplot quantiles of a list of rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        assert!(!values.is_empty(), "summary of nothing");
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // linear interpolation between order statistics
        let q = |p: f64| {
            let h = p * (sorted.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        };
        Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: sorted[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracies: Vec<f64>,
    pub summary: Summary,
    pub n_train: usize,
    pub n_test: usize,
    pub split: SplitSpec,
}

fn class_members(labels: &[i64]) -> BTreeMap<i64, Vec<usize>> {
    let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    classes
}

fn split_once(labels: &[i64], spec: &SplitSpec, repeat: usize) -> (Vec<usize>, Vec<usize>) {
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, repeat as u64));
    let mut test = Vec::new();
    let mut train = Vec::new();
    if spec.stratified {
        for (_, mut members) in class_members(labels) {
            members.shuffle(&mut rng);
            let take = ((members.len() as f64 * spec.test_fraction).round() as usize)
                .clamp(1, members.len() - 1);
            test.extend_from_slice(&members[..take]);
            train.extend_from_slice(&members[take..]);
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let take = ((n as f64 * spec.test_fraction).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&order[..take]);
        train.extend_from_slice(&order[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn sq_euclidean(y: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    y.column(a)
        .iter()
        .zip(y.column(b).iter())
        .map(|(u, v)| (u - v) * (u - v))
        .sum()
}

/// Test-fold accuracy of a Euclidean 1NN classifier; ties go to the training
/// sample with the lower index.
pub fn one_nn_accuracy(
    embedding: &DMatrix<f64>,
    labels: &[i64],
    train: &[usize],
    test: &[usize],
) -> f64 {
    let correct = test
        .iter()
        .filter(|&&t| {
            let mut best = (f64::INFINITY, usize::MAX);
            for &s in train {
                let d = sq_euclidean(embedding, t, s);
                if d < best.0 || (d == best.0 && s < best.1) {
                    best = (d, s);
                }
            }
            labels[best.1] == labels[t]
        })
        .count();
    correct as f64 / test.len() as f64
}

/// 1NN accuracy in the embedding (`d x n`) over `spec.n_repeats` random
/// train/test splits.
pub fn knn_classify_eval(
    embedding: &DMatrix<f64>,
    labels: &[i64],
    spec: &SplitSpec,
) -> Result<ClassificationReport> {
    let n = embedding.ncols();
    if labels.len() != n {
        return Err(Error::MismatchedSampleCount {
            view: "labels".into(),
            expected: n,
            found: labels.len(),
        });
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) || spec.n_repeats == 0 {
        return Err(Error::InvalidConfig(format!(
            "need 0 < test_fraction < 1 and n_repeats >= 1, got {} and {}",
            spec.test_fraction, spec.n_repeats
        )));
    }
    if n < 2 {
        return Err(Error::TooFewSamples(format!("{n} samples")));
    }
    if let Some((class, members)) = class_members(labels).into_iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::TooFewSamples(format!(
            "class {class} has {} sample(s), need at least 2",
            members.len()
        )));
    }

    let runs: Vec<(f64, usize, usize)> = (0..spec.n_repeats)
        .into_par_iter()
        .map(|rep| {
            let (train, test) = split_once(labels, spec, rep);
            (
                one_nn_accuracy(embedding, labels, &train, &test),
                train.len(),
                test.len(),
            )
        })
        .collect();
    let accuracies: Vec<f64> = runs.iter().map(|r| r.0).collect();
    Ok(ClassificationReport {
        summary: Summary::of(&accuracies),
        n_train: runs[0].1,
        n_test: runs[0].2,
        accuracies,
        split: spec.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalQuery {
    pub query: usize,
    pub relevant: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSpec {
    pub queries: Vec<RetrievalQuery>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_top_k() -> usize {
    2
}

impl RetrievalSpec {
    fn validate(&self, n: usize) -> Result<()> {
        if self.queries.is_empty() {
            return Err(Error::InvalidConfig("no retrieval queries".into()));
        }
        if self.top_k == 0 || self.top_k >= n {
            return Err(Error::InvalidConfig(format!(
                "top_k must be in [1, {}], got {}",
                n - 1,
                self.top_k
            )));
        }
        for q in &self.queries {
            if q.query >= n {
                return Err(Error::InvalidConfig(format!(
                    "query id {} out of range (n = {n})",
                    q.query
                )));
            }
            if q.relevant.is_empty() {
                return Err(Error::EmptyRelevantSet { query: q.query });
            }
            if let Some(&bad) = q.relevant.iter().find(|&&r| r >= n || r == q.query) {
                return Err(Error::InvalidConfig(format!(
                    "query {}: relevant id {bad} is out of range or the query itself",
                    q.query
                )));
            }
        }
        Ok(())
    }
}

/// Picks `per_class` random queries from every class; each query's relevant
/// set is the rest of its class.
pub fn queries_from_labels(
    labels: &[i64],
    per_class: usize,
    top_k: usize,
    seed: u64,
) -> Result<RetrievalSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::new();
    for (class, mut members) in class_members(labels) {
        if members.len() < 2 {
            return Err(Error::TooFewSamples(format!(
                "class {class} cannot provide a relevant set"
            )));
        }
        members.shuffle(&mut rng);
        for &q in members.iter().take(per_class) {
            let mut relevant: Vec<usize> = members.iter().copied().filter(|&m| m != q).collect();
            relevant.sort_unstable();
            queries.push(RetrievalQuery { query: q, relevant });
        }
    }
    queries.sort_by_key(|q| q.query);
    Ok(RetrievalSpec { queries, top_k })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub query: usize,
    pub precision: f64,
    pub recall: f64,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub top_k: usize,
    pub per_query: Vec<QueryScore>,
    pub precision: f64,
    pub recall: f64,
    pub map: f64,
    pub f1: f64,
    pub precision_summary: Summary,
    pub recall_summary: Summary,
    pub ap_summary: Summary,
}

/// Harmonic mean, defined as 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// All samples except `query`, by ascending L1 distance then index.
pub fn rank_by_l1(embedding: &DMatrix<f64>, query: usize) -> Vec<usize> {
    let q = embedding.column(query);
    let mut scored: Vec<(f64, usize)> = (0..embedding.ncols())
        .filter(|&j| j != query)
        .map(|j| {
            let d: f64 = q
                .iter()
                .zip(embedding.column(j).iter())
                .map(|(a, b)| (a - b).abs())
                .sum();
            (d, j)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, j)| j).collect()
}

/// Scores one ranking. AP is taken over the full ranking; precision and
/// recall over its first `top_k` entries.
pub fn score_ranking(ranking: &[usize], relevant: &[usize], top_k: usize) -> (f64, f64, f64) {
    let mut is_relevant = vec![false; ranking.iter().copied().max().map_or(0, |m| m + 1)];
    let mut n_relevant = 0;
    for &r in relevant {
        if r < is_relevant.len() && !is_relevant[r] {
            is_relevant[r] = true;
            n_relevant += 1;
        }
    }
    let hits = ranking
        .iter()
        .take(top_k)
        .filter(|&&j| is_relevant[j])
        .count();
    let mut found = 0;
    let mut ap = 0.0;
    for (pos, &j) in ranking.iter().enumerate() {
        if is_relevant[j] {
            found += 1;
            ap += found as f64 / (pos + 1) as f64;
        }
    }
    let total = n_relevant.max(1) as f64;
    (hits as f64 / top_k as f64, hits as f64 / total, ap / total)
}

fn rankings(embedding: &DMatrix<f64>, spec: &RetrievalSpec) -> Vec<Vec<usize>> {
    spec.queries
        .par_iter()
        .map(|q| rank_by_l1(embedding, q.query))
        .collect()
}

fn report_at(spec: &RetrievalSpec, ranks: &[Vec<usize>], top_k: usize) -> RetrievalReport {
    let per_query: Vec<QueryScore> = spec
        .queries
        .iter()
        .zip(ranks)
        .map(|(q, ranking)| {
            let (precision, recall, average_precision) = score_ranking(ranking, &q.relevant, top_k);
            QueryScore {
                query: q.query,
                precision,
                recall,
                average_precision,
            }
        })
        .collect();
    let ps: Vec<f64> = per_query.iter().map(|s| s.precision).collect();
    let rs: Vec<f64> = per_query.iter().map(|s| s.recall).collect();
    let aps: Vec<f64> = per_query.iter().map(|s| s.average_precision).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (precision, recall) = (mean(&ps), mean(&rs));
    RetrievalReport {
        top_k,
        precision,
        recall,
        map: mean(&aps),
        f1: f1_score(precision, recall),
        precision_summary: Summary::of(&ps),
        recall_summary: Summary::of(&rs),
        ap_summary: Summary::of(&aps),
        per_query,
    }
}

/// Retrieval quality of the embedding (`d x n`) under L1 distance.
pub fn retrieval_eval(embedding: &DMatrix<f64>, spec: &RetrievalSpec) -> Result<RetrievalReport> {
    spec.validate(embedding.ncols())?;
    let ranks = rankings(embedding, spec);
    Ok(report_at(spec, &ranks, spec.top_k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Mean precision, recall and F1 at every cutoff in `k_values`.
pub fn curves(
    embedding: &DMatrix<f64>,
    spec: &RetrievalSpec,
    k_values: &[usize],
) -> Result<Vec<CurvePoint>> {
    spec.validate(embedding.ncols())?;
    let n = embedding.ncols();
    if let Some(&bad) = k_values.iter().find(|&&k| k == 0 || k >= n) {
        return Err(Error::InvalidConfig(format!(
            "cutoff {bad} outside [1, {}]",
            n - 1
        )));
    }
    let ranks = rankings(embedding, spec);
    Ok(k_values
        .iter()
        .map(|&k| {
            let r = report_at(spec, &ranks, k);
            CurvePoint {
                k,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
            }
        })
        .collect())
}

pub fn curves_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("k,precision,recall,f1\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.k, p.precision, p.recall, p.f1);
    }
    out
}
