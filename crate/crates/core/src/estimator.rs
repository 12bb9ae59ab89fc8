//! Outcome estimators producing the per-prefix probability of an undesired
//! outcome, and the score-file interchange format.
//!
//! The built-in learner is gradient boosting of shallow regression trees
//! under logistic loss. Splits are searched exactly over midpoints between
//! consecutive observed feature values, scored by the second-order gain
//! `G_l^2/H_l + G_r^2/H_r - G^2/H`; ties go to the lowest feature index and
//! then the lowest threshold. Leaves hold the damped Newton step
//! `learning_rate * sum(y - p) / sum(p (1 - p))`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{EncoderState, FeatureVector};
use crate::eventlog::{prefixes, EventLog};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("features and labels differ in length ({features} vs {labels})")]
    Shape { features: usize, labels: usize },
    #[error("case `{case_id}`: {message}")]
    Case { case_id: String, message: String },
    #[error("score file row {line}: {message}")]
    Format { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Estimated undesired-outcome probabilities of one case, one per prefix:
/// `probs[k - 1]` belongs to the prefix of length `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySeries {
    pub case_id: String,
    pub probs: Vec<f64>,
    pub outcome: bool,
    pub trace_len: usize,
}

impl ProbabilitySeries {
    pub fn new(case_id: impl Into<String>, probs: Vec<f64>, outcome: bool, trace_len: usize) -> Self {
        ProbabilitySeries { case_id: case_id.into(), probs, outcome, trace_len }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams { n_rounds: 100, max_depth: 3, learning_rate: 0.1, min_leaf: 20, seed: 0 }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.n_rounds < 1 {
            return Err(EstimatorError::InvalidParams("n_rounds must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(EstimatorError::InvalidParams("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(EstimatorError::InvalidParams("learning_rate must be in (0, 1]".into()));
        }
        if self.min_leaf < 1 {
            return Err(EstimatorError::InvalidParams("min_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Fitted boosted-tree model; the raw score is `prior + sum(tree outputs)`,
/// leaf values already scaled by the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub n_features: usize,
    pub prior_log_odds: f64,
    pub trees: Vec<Tree>,
    pub params: EstimatorParams,
    /// Mean training log-loss after the prior and after every round.
    pub train_loss: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_loss(raw: &[f64], y: &[f64]) -> f64 {
    // log(1 + exp(-s z)) with s = +-1, computed stably
    let total: f64 = raw
        .iter()
        .zip(y)
        .map(|(&z, &t)| {
            let m = if t > 0.5 { -z } else { z };
            if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            }
        })
        .sum();
    total / raw.len() as f64
}

const MIN_HESSIAN: f64 = 1e-12;
const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    n: usize,
}

impl Stats {
    fn score(&self) -> f64 {
        self.g * self.g / self.h.max(MIN_HESSIAN)
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Columns {
    values: Vec<Vec<f64>>,
    /// Per feature, sample indices sorted by value (stable).
    order: Vec<Vec<usize>>,
}

impl Columns {
    fn new(features: &[FeatureVector], dim: usize) -> Self {
        let values: Vec<Vec<f64>> = (0..dim).map(|f| features.iter().map(|v| v.0[f]).collect()).collect();
        let order = values
            .iter()
            .map(|col| {
                let mut idx: Vec<usize> = (0..col.len()).collect();
                idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
                idx
            })
            .collect();
        Columns { values, order }
    }
}

/// Grows one tree level by level. `grad` holds `y - p`, `hess` `p (1 - p)`.
fn grow_tree(cols: &Columns, grad: &[f64], hess: &[f64], params: &EstimatorParams) -> (Tree, Vec<usize>) {
    const DONE: usize = usize::MAX;
    let n = grad.len();
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let mut node_of = vec![0usize; n];
    let mut totals: Vec<Stats> = vec![Stats::default()];
    for i in 0..n {
        totals[0].g += grad[i];
        totals[0].h += hess[i];
        totals[0].n += 1;
    }
    let mut frontier: Vec<usize> = vec![0];

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        // slot of each frontier node in the per-level arrays
        let mut slot = vec![DONE; nodes.len()];
        for (s, &node) in frontier.iter().enumerate() {
            slot[node] = s;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        for (f, order) in cols.order.iter().enumerate() {
            let col = &cols.values[f];
            let mut left = vec![Stats::default(); frontier.len()];
            let mut last: Vec<f64> = vec![f64::NAN; frontier.len()];
            for &i in order {
                let node = node_of[i];
                if node == DONE {
                    continue;
                }
                let s = slot[node];
                if s == DONE {
                    continue;
                }
                let x = col[i];
                let l = left[s];
                if l.n > 0 && x > last[s] {
                    let total = totals[node];
                    let r_n = total.n - l.n;
                    if l.n >= params.min_leaf && r_n >= params.min_leaf {
                        let right = Stats { g: total.g - l.g, h: total.h - l.h, n: r_n };
                        let gain = l.score() + right.score() - total.score();
                        if gain > MIN_GAIN && best[s].is_none_or(|b| gain > b.gain) {
                            let mut threshold = 0.5 * (last[s] + x);
                            if threshold >= x {
                                threshold = last[s];
                            }
                            best[s] = Some(Candidate { gain, feature: f, threshold });
                        }
                    }
                }
                left[s].g += grad[i];
                left[s].h += hess[i];
                left[s].n += 1;
                last[s] = x;
            }
        }

        let mut next = Vec::new();
        let mut child_of: Vec<Option<(usize, usize, usize, f64)>> = vec![None; nodes.len()];
        for (s, &node) in frontier.iter().enumerate() {
            if let Some(c) = best[s] {
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                totals.push(Stats::default());
                totals.push(Stats::default());
                nodes[node] = Node::Split { feature: c.feature, threshold: c.threshold, left, right };
                child_of[node] = Some((left, right, c.feature, c.threshold));
                next.push(left);
                next.push(right);
            }
        }
        for i in 0..n {
            let node = node_of[i];
            if node == DONE {
                continue;
            }
            match child_of.get(node).copied().flatten() {
                Some((l, r, f, t)) => {
                    let child = if cols.values[f][i] <= t { l } else { r };
                    node_of[i] = child;
                    totals[child].g += grad[i];
                    totals[child].h += hess[i];
                    totals[child].n += 1;
                }
                None => node_of[i] = DONE,
            }
        }
        frontier = next;
    }

    let leaf_of: Vec<usize> = (0..n)
        .map(|i| {
            let mut j = 0;
            while let Node::Split { feature, threshold, left, right } = &nodes[j] {
                j = if cols.values[*feature][i] <= *threshold { *left } else { *right };
            }
            j
        })
        .collect();
    let mut sums: Vec<Stats> = vec![Stats::default(); nodes.len()];
    for i in 0..n {
        sums[leaf_of[i]].g += grad[i];
        sums[leaf_of[i]].h += hess[i];
    }
    for (j, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf { value } = node {
            *value = params.learning_rate * sums[j].g / sums[j].h.max(MIN_HESSIAN);
        }
    }
    (Tree { nodes }, leaf_of)
}

impl BoostedTrees {
    /// Fits the model. Requires both classes to be present.
    pub fn fit(features: &[FeatureVector], labels: &[bool], params: EstimatorParams) -> Result<Self, EstimatorError> {
        params.validate()?;
        if features.len() != labels.len() {
            return Err(EstimatorError::Shape { features: features.len(), labels: labels.len() });
        }
        let positives = labels.iter().filter(|l| **l).count();
        if positives == 0 || positives == labels.len() {
            return Err(EstimatorError::SingleClass);
        }
        let dim = features[0].len();
        if let Some(bad) = features.iter().find(|v| v.len() != dim) {
            return Err(EstimatorError::Dimension { expected: dim, got: bad.len() });
        }
        let base_rate = positives as f64 / labels.len() as f64;
        let mut model = BoostedTrees::prior_only(dim, base_rate, params);
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let cols = Columns::new(features, dim);
        let mut raw = vec![model.prior_log_odds; y.len()];
        model.train_loss.push(log_loss(&raw, &y));
        let mut grad = vec![0.0; y.len()];
        let mut hess = vec![0.0; y.len()];
        for _ in 0..params.n_rounds {
            for i in 0..y.len() {
                let p = sigmoid(raw[i]);
                grad[i] = y[i] - p;
                hess[i] = p * (1.0 - p);
            }
            let (tree, leaf_of) = grow_tree(&cols, &grad, &hess, &params);
            for (r, &leaf) in raw.iter_mut().zip(&leaf_of) {
                if let Node::Leaf { value } = tree.nodes[leaf] {
                    *r += value;
                }
            }
            model.trees.push(tree);
            model.train_loss.push(log_loss(&raw, &y));
        }
        Ok(model)
    }

    /// A model without trees predicting `base_rate` everywhere.
    pub fn prior_only(n_features: usize, base_rate: f64, params: EstimatorParams) -> Self {
        let p = base_rate.clamp(1e-12, 1.0 - 1e-12);
        BoostedTrees {
            n_features,
            prior_log_odds: (p / (1.0 - p)).ln(),
            trees: Vec::new(),
            params,
            train_loss: Vec::new(),
        }
    }

    pub fn predict_proba(&self, v: &FeatureVector) -> Result<f64, EstimatorError> {
        if v.len() != self.n_features {
            return Err(EstimatorError::Dimension { expected: self.n_features, got: v.len() });
        }
        let raw: f64 = self.prior_log_odds + self.trees.iter().map(|t| t.predict(&v.0)).sum::<f64>();
        Ok(sigmoid(raw))
    }
}

/// Any model usable to score prefixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Boosted(BoostedTrees),
    /// Constant probability for every prefix.
    Constant {
        p: f64,
    },
    /// The true outcome as 0/1; only meaningful on labeled logs.
    Oracle,
}

/// Fits the built-in boosted-tree estimator.
pub fn fit(features: &[FeatureVector], labels: &[bool], params: EstimatorParams) -> Result<Estimator, EstimatorError> {
    BoostedTrees::fit(features, labels, params).map(Estimator::Boosted)
}

/// Training rows: every prefix up to `max_len` of every labeled case,
/// tagged with the case outcome.
pub fn training_set(log: &EventLog, encoder: &EncoderState, max_len: usize) -> (Vec<FeatureVector>, Vec<bool>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (id, trace) in &log.traces {
        let Some(label) = log.label(id) else { continue };
        for p in prefixes(trace, max_len) {
            xs.push(encoder.encode(p));
            ys.push(label);
        }
    }
    (xs, ys)
}

impl Estimator {
    pub fn predict_proba(&self, v: &FeatureVector) -> Result<f64, EstimatorError> {
        match self {
            Estimator::Boosted(m) => m.predict_proba(v),
            Estimator::Constant { p } => Ok(*p),
            Estimator::Oracle => {
                Err(EstimatorError::InvalidParams("the oracle estimator needs case outcomes; use score_log".into()))
            }
        }
    }
}

/// Scores every case of a labeled log: one series per case, ordered by case id.
pub fn score_log(
    est: &Estimator,
    log: &EventLog,
    encoder: &EncoderState,
    max_len: usize,
) -> Result<Vec<ProbabilitySeries>, EstimatorError> {
    let mut out = Vec::with_capacity(log.len());
    for (id, trace) in &log.traces {
        let outcome = log
            .label(id)
            .ok_or_else(|| EstimatorError::Case { case_id: id.clone(), message: "case has no outcome label".into() })?;
        let mut probs = Vec::new();
        for p in prefixes(trace, max_len) {
            let prob = match est {
                Estimator::Oracle => {
                    if outcome {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => est
                    .predict_proba(&encoder.encode(p))
                    .map_err(|e| EstimatorError::Case { case_id: id.clone(), message: e.to_string() })?,
            };
            probs.push(prob);
        }
        out.push(ProbabilitySeries::new(id.clone(), probs, outcome, trace.len()));
    }
    Ok(out)
}

/// Writes the score interchange CSV `case_id,prefix_len,probability,outcome,trace_len`.
pub fn write_scores<W: Write>(series: &[ProbabilitySeries], sink: W) -> Result<(), EstimatorError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["case_id", "prefix_len", "probability", "outcome", "trace_len"])?;
    for s in series {
        for (k, p) in s.probs.iter().enumerate() {
            w.write_record([
                s.case_id.clone(),
                (k + 1).to_string(),
                p.to_string(),
                if s.outcome { "1" } else { "0" }.to_string(),
                s.trace_len.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_outcome(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Reads a score CSV; series come back ordered by case id.
pub fn load_external_scores<R: Read>(source: R) -> Result<Vec<ProbabilitySeries>, EstimatorError> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| EstimatorError::Format { line: 1, message: format!("missing column `{name}`") })
    };
    let (ci, ki, pi, oi, li) =
        (col("case_id")?, col("prefix_len")?, col("probability")?, col("outcome")?, col("trace_len")?);

    struct Row {
        line: usize,
        k: usize,
        p: f64,
        outcome: bool,
        trace_len: usize,
    }
    let mut by_case: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let field = |idx: usize| rec.get(idx).unwrap_or("").trim();
        let bad = |message: String| EstimatorError::Format { line, message };
        let k: usize = field(ki).parse().map_err(|_| bad(format!("bad prefix_len `{}`", field(ki))))?;
        let p: f64 = field(pi).parse().map_err(|_| bad(format!("bad probability `{}`", field(pi))))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(bad(format!("probability {p} outside [0, 1]")));
        }
        let outcome = parse_outcome(field(oi)).ok_or_else(|| bad(format!("bad outcome `{}`", field(oi))))?;
        let trace_len: usize = field(li).parse().map_err(|_| bad(format!("bad trace_len `{}`", field(li))))?;
        by_case.entry(field(ci).to_string()).or_default().push(Row { line, k, p, outcome, trace_len });
    }

    let mut out = Vec::with_capacity(by_case.len());
    for (case_id, mut rows) in by_case {
        rows.sort_by_key(|r| (r.k, r.line));
        let first = &rows[0];
        let (outcome, trace_len) = (first.outcome, first.trace_len);
        let mut probs = Vec::with_capacity(rows.len());
        for (expected, row) in (1..).zip(&rows) {
            let bad = |message: String| EstimatorError::Format { line: row.line, message };
            if row.k != expected {
                return Err(bad(format!(
                    "case `{case_id}`: prefix_len {} breaks the contiguous run (expected {expected})",
                    row.k
                )));
            }
            if row.outcome != outcome || row.trace_len != trace_len {
                return Err(bad(format!("case `{case_id}`: outcome/trace_len not constant")));
            }
            if row.k > trace_len {
                return Err(bad(format!("case `{case_id}`: prefix_len {} > trace_len {trace_len}", row.k)));
            }
            probs.push(row.p);
        }
        out.push(ProbabilitySeries { case_id, probs, outcome, trace_len });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(xs: &[f64]) -> FeatureVector {
        FeatureVector(xs.to_vec())
    }

    fn separable() -> (Vec<FeatureVector>, Vec<bool>) {
        let xs: Vec<FeatureVector> = (0..100).map(|i| fv(&[i as f64])).collect();
        let ys: Vec<bool> = (0..100).map(|i| i >= 50).collect();
        (xs, ys)
    }

    fn params(n_rounds: usize) -> EstimatorParams {
        EstimatorParams { n_rounds, min_leaf: 5, ..Default::default() }
    }

    #[test]
    fn separable_training_accuracy() {
        let (xs, ys) = separable();
        let m = BoostedTrees::fit(&xs, &ys, params(50)).unwrap();
        let correct = xs.iter().zip(&ys).filter(|(x, y)| (m.predict_proba(x).unwrap() > 0.5) == **y).count();
        assert_eq!(correct, 100);
    }

    #[test]
    fn separable_positive_point_confident() {
        let (xs, ys) = separable();
        let m = BoostedTrees::fit(&xs, &ys, params(100)).unwrap();
        assert!(m.predict_proba(&fv(&[80.0])).unwrap() > 0.9);
    }

    #[test]
    fn flipped_labels_mirror_probabilities() {
        let xs: Vec<FeatureVector> = (0..200).map(|i| fv(&[(i * 37 % 101) as f64, (i % 7) as f64])).collect();
        let ys: Vec<bool> = (0..200).map(|i| (i * 37 % 101) > 40 || i % 7 == 3).collect();
        let flipped: Vec<bool> = ys.iter().map(|y| !y).collect();
        let a = BoostedTrees::fit(&xs, &ys, params(30)).unwrap();
        let b = BoostedTrees::fit(&xs, &flipped, params(30)).unwrap();
        for x in &xs {
            let (pa, pb) = (a.predict_proba(x).unwrap(), b.predict_proba(x).unwrap());
            assert!((pa - (1.0 - pb)).abs() < 1e-6, "{pa} vs {pb}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (xs, ys) = separable();
        assert!(matches!(BoostedTrees::fit(&xs, &ys, params(0)), Err(EstimatorError::InvalidParams(_))));
        let all_true = vec![true; xs.len()];
        assert!(matches!(BoostedTrees::fit(&xs, &all_true, params(5)), Err(EstimatorError::SingleClass)));
        let m = BoostedTrees::fit(&xs, &ys, params(2)).unwrap();
        assert!(matches!(m.predict_proba(&fv(&[1.0, 2.0])), Err(EstimatorError::Dimension { .. })));
    }

    #[test]
    fn prior_only_predicts_base_rate() {
        let m = BoostedTrees::prior_only(2, 0.2, EstimatorParams::default());
        for x in [[0.0, 0.0], [5.0, -3.0]] {
            assert!((m.predict_proba(&fv(&x)).unwrap() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_non_increasing() {
        let xs: Vec<FeatureVector> = (0..300).map(|i| fv(&[(i % 17) as f64, (i % 5) as f64, (i / 3) as f64])).collect();
        let ys: Vec<bool> = (0..300).map(|i| (i % 17 > 8) ^ (i % 5 == 0) ^ (i % 11 == 0)).collect();
        let m = BoostedTrees::fit(&xs, &ys, params(60)).unwrap();
        assert_eq!(m.train_loss.len(), 61);
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn model_json_roundtrip() {
        let (xs, ys) = separable();
        let m = BoostedTrees::fit(&xs, &ys, params(3)).unwrap();
        let json = serde_json::to_string(&Estimator::Boosted(m.clone())).unwrap();
        let back: Estimator = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Estimator::Boosted(m));
    }

    #[test]
    fn score_file_parsing() {
        let ok = "case_id,prefix_len,probability,outcome,trace_len\nA,1,0.1,1,3\nA,2,0.2,1,3\nA,3,0.3,1,3\n";
        let s = load_external_scores(ok.as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].probs, [0.1, 0.2, 0.3]);

        let out_of_range = "case_id,prefix_len,probability,outcome,trace_len\nA,1,1.2,1,3\n";
        match load_external_scores(out_of_range.as_bytes()) {
            Err(EstimatorError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let gap = "case_id,prefix_len,probability,outcome,trace_len\nA,1,0.5,1,3\nA,3,0.5,1,3\n";
        match load_external_scores(gap.as_bytes()) {
            Err(EstimatorError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn score_file_roundtrip() {
        let series = vec![
            ProbabilitySeries::new("a", vec![0.125, 0.3333333333333333], true, 4),
            ProbabilitySeries::new("b", vec![0.0], false, 1),
        ];
        let mut buf = Vec::new();
        write_scores(&series, &mut buf).unwrap();
        assert_eq!(load_external_scores(buf.as_slice()).unwrap(), series);
    }
}
