//! Offline evaluation: baselines, cost/benefit/f-score reports, a seeded
//! synthetic log generator with known Bayes-optimal probabilities, and the
//! cost-configuration sweeps (RQ1..RQ8).

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::{DateTime, Duration, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{
    total_cost, AlarmDecision, AlarmModel, CostError, CostFamily, CostFnSpec, EffSpec, Factors, MultiAlarmCostModel,
    NonMonotonicConstants,
};
use crate::encoding::fit_encoder;
use crate::estimator::{
    load_external_scores, score_log, training_set, BoostedTrees, Estimator, EstimatorError, EstimatorParams,
    ProbabilitySeries,
};
use crate::eventlog::{temporal_split, AttrValue, DatasetSplit, Event, EventLog, LogError, Trace};
use crate::optimize::{optimize, tau_grid, OptimizeError, PolicyFamily, SearchSpace};
use crate::policy::{apply_policy, Policy, PolicyError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        let fired = self.tp + self.fp;
        if fired == 0 {
            0.0
        } else {
            self.tp as f64 / fired as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let pos = self.tp + self.fn_;
        if pos == 0 {
            0.0
        } else {
            self.tp as f64 / pos as f64
        }
    }

    /// Harmonic mean of precision and recall; 0 when both are 0.
    pub fn f_score(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub policy: Policy,
    pub n_cases: usize,
    pub total_cost: f64,
    pub avg_cost_per_case: f64,
    /// Never-alarming average cost minus this policy's average cost.
    pub benefit: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub counts: Confusion,
    pub alarms_per_type: BTreeMap<String, usize>,
}

/// Applies a policy and measures cost, benefit and per-case confusion counts.
pub fn evaluate(
    series: &[ProbabilitySeries],
    model: &MultiAlarmCostModel,
    policy: &Policy,
) -> Result<EvaluationReport, ExperimentError> {
    policy.validate()?;
    let decisions = apply_policy(series, policy);
    let cost = total_cost(series, &decisions, model)?;
    let never =
        if *policy == Policy::Never { cost } else { total_cost(series, &apply_policy(series, &Policy::Never), model)? };
    let mut counts = Confusion::default();
    let mut alarms_per_type = BTreeMap::new();
    for s in series {
        let d = &decisions[&s.case_id];
        match (d, s.outcome) {
            (AlarmDecision::Fired { alarm, .. }, outcome) => {
                if outcome {
                    counts.tp += 1;
                } else {
                    counts.fp += 1;
                }
                let name = alarm.as_ref().or(model.default_alarm()).map(|a| a.0.clone()).unwrap_or_default();
                *alarms_per_type.entry(name).or_insert(0) += 1;
            }
            (AlarmDecision::NoAlarm, true) => counts.fn_ += 1,
            (AlarmDecision::NoAlarm, false) => counts.tn += 1,
        }
    }
    Ok(EvaluationReport {
        policy: policy.clone(),
        n_cases: series.len(),
        total_cost: cost.total,
        avg_cost_per_case: cost.avg_per_case,
        benefit: never.avg_per_case - cost.avg_per_case,
        precision: counts.precision(),
        recall: counts.recall(),
        f_score: counts.f_score(),
        counts,
        alarms_per_type,
    })
}

pub const BASELINE_NEVER: &str = "never";
pub const BASELINE_ALWAYS: &str = "always_at_start";
pub const BASELINE_TAU_HALF: &str = "tau_0.5";

/// The never-alarm, alarm-at-start and cost-insensitive `tau = 0.5` baselines.
pub fn baselines(
    series: &[ProbabilitySeries],
    model: &MultiAlarmCostModel,
) -> Result<BTreeMap<String, EvaluationReport>, ExperimentError> {
    if model.alarms.len() != 1 {
        return Err(ExperimentError::Config("baselines need a single-alarm model".into()));
    }
    [
        (BASELINE_NEVER, Policy::Never),
        (BASELINE_ALWAYS, Policy::AlwaysAtStart),
        (BASELINE_TAU_HALF, Policy::Basic { tau: 0.5 }),
    ]
    .into_iter()
    .map(|(name, p)| Ok((name.to_string(), evaluate(series, model, &p)?)))
    .collect()
}

/// Parameters of the synthetic log generator.
///
/// Each case is undesired with probability `class_ratio`. Its first event
/// carries a numeric `amount` drawn from `N(+2s, noise)` for undesired and
/// `N(-2s, noise)` for desired cases, where `s` is `signal`. Every event is
/// an evidence event with probability `evidence_rate`: its activity is
/// `Flag` with probability `theta = (1 + s) / 2` for undesired cases and
/// `1 - theta` for desired ones, `Clear` otherwise. Other events carry one
/// of several neutral activities. The exact posterior given a prefix
/// follows from Bayes' rule over those independent observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticLogSpec {
    pub n_cases: usize,
    pub class_ratio: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// In `[0, 1]`; 0 makes every observation uninformative.
    pub signal: f64,
    pub evidence_rate: f64,
    /// Standard deviation of `amount`.
    pub noise: f64,
    /// Seconds between consecutive case starts.
    pub case_interval_secs: i64,
    pub seed: u64,
}

impl Default for SyntheticLogSpec {
    fn default() -> Self {
        SyntheticLogSpec {
            n_cases: 1000,
            class_ratio: 0.5,
            min_len: 6,
            max_len: 14,
            signal: 0.5,
            evidence_rate: 0.5,
            noise: 1.0,
            case_interval_secs: 1800,
            seed: 0,
        }
    }
}

const NEUTRAL_ACTIVITIES: [&str; 4] = ["Register", "Review", "Update", "Notify"];
const RESOURCES: [&str; 3] = ["R1", "R2", "R3"];

impl SyntheticLogSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if !(self.class_ratio > 0.0 && self.class_ratio < 1.0) {
            return bad(format!("class_ratio must be in (0, 1), got {}", self.class_ratio));
        }
        if !(0.0..=1.0).contains(&self.signal) || !(0.0..=1.0).contains(&self.evidence_rate) {
            return bad("signal and evidence_rate must be in [0, 1]".into());
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return bad("need 1 <= min_len <= max_len".into());
        }
        if self.noise.is_nan() || self.noise <= 0.0 {
            return bad("noise must be > 0".into());
        }
        if self.n_cases == 0 {
            return bad("n_cases must be >= 1".into());
        }
        Ok(())
    }

    fn theta(&self) -> f64 {
        0.5 * (1.0 + self.signal)
    }

    fn amount_mean(&self, undesired: bool) -> f64 {
        if undesired {
            2.0 * self.signal
        } else {
            -2.0 * self.signal
        }
    }

    /// Exact probability of an undesired outcome given the first-event
    /// amount and the counts of `Flag` and `Clear` evidence seen so far.
    pub fn posterior(&self, amount: f64, flags: usize, clears: usize) -> f64 {
        let theta = self.theta();
        let times = |n: usize, p: f64| if n == 0 { 0.0 } else { n as f64 * p.ln() };
        let gauss = |mu: f64| -0.5 * ((amount - mu) / self.noise).powi(2);
        let log1 =
            self.class_ratio.ln() + gauss(self.amount_mean(true)) + times(flags, theta) + times(clears, 1.0 - theta);
        let log0 = (1.0 - self.class_ratio).ln()
            + gauss(self.amount_mean(false))
            + times(flags, 1.0 - theta)
            + times(clears, theta);
        if log1 == f64::NEG_INFINITY {
            return 0.0;
        }
        if log0 == f64::NEG_INFINITY {
            return 1.0;
        }
        1.0 / (1.0 + (log0 - log1).exp())
    }
}

/// A generated log and the exact posterior series of each case.
#[derive(Debug, Clone)]
pub struct SyntheticLog {
    pub log: EventLog,
    pub posterior: Vec<ProbabilitySeries>,
}

pub fn generate_synthetic_log(spec: &SyntheticLogSpec) -> Result<SyntheticLog, ExperimentError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let origin: DateTime<Utc> = DateTime::from_timestamp(1_577_836_800, 0).expect("valid epoch"); // 2020-01-01
    let mut log = EventLog::default();
    let mut posterior = Vec::with_capacity(spec.n_cases);
    let width = spec.n_cases.to_string().len().max(4);
    let theta = spec.theta();
    for i in 0..spec.n_cases {
        let case_id = format!("case_{i:0width$}");
        let undesired = rng.random::<f64>() < spec.class_ratio;
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let amount_dist = Normal::new(spec.amount_mean(undesired), spec.noise).expect("noise > 0");
        let amount: f64 = amount_dist.sample(&mut rng);
        let jitter = rng.random_range(0..=spec.case_interval_secs.max(1) / 2);
        let mut ts = origin + Duration::seconds(i as i64 * spec.case_interval_secs + jitter);
        let (mut flags, mut clears) = (0, 0);
        let mut events = Vec::with_capacity(len);
        let mut probs = Vec::with_capacity(len);
        for k in 0..len {
            let activity = if rng.random::<f64>() < spec.evidence_rate {
                let p_flag = if undesired { theta } else { 1.0 - theta };
                if rng.random::<f64>() < p_flag {
                    flags += 1;
                    "Flag"
                } else {
                    clears += 1;
                    "Clear"
                }
            } else {
                NEUTRAL_ACTIVITIES.choose(&mut rng).expect("non-empty")
            };
            let mut attrs = BTreeMap::new();
            if k == 0 {
                // millisecond-free decimal so the CSV round trip is exact
                attrs.insert("amount".to_string(), AttrValue::Numeric((amount * 1000.0).round() / 1000.0));
            }
            events.push(Event {
                case_id: case_id.clone(),
                activity: activity.to_string(),
                timestamp: ts,
                resource: Some(RESOURCES.choose(&mut rng).expect("non-empty").to_string()),
                attrs,
            });
            let rounded = (amount * 1000.0).round() / 1000.0;
            probs.push(spec.posterior(rounded, flags, clears));
            ts += Duration::seconds(rng.random_range(60..=7200));
        }
        log.traces.insert(case_id.clone(), Trace { case_id: case_id.clone(), events });
        log.labels.insert(case_id.clone(), undesired);
        posterior.push(ProbabilitySeries::new(case_id, probs, undesired, len));
    }
    Ok(SyntheticLog { log, posterior })
}

/// Restricts full-trace series to the cases and (possibly shortened)
/// traces of `log`.
pub fn series_for_log(series: &[ProbabilitySeries], log: &EventLog) -> Vec<ProbabilitySeries> {
    series
        .iter()
        .filter_map(|s| {
            let trace = log.traces.get(&s.case_id)?;
            let n = trace.len().min(s.probs.len());
            Some(ProbabilitySeries::new(s.case_id.clone(), s.probs[..n].to_vec(), s.outcome, trace.len()))
        })
        .collect()
}

/// How thresholding/test probabilities are produced from a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scoring {
    /// Boosted trees trained on the training partition.
    Boosted {
        params: EstimatorParams,
    },
    /// Use externally known per-case probabilities (e.g. the generator's posterior).
    Posterior,
    Oracle,
}

/// Scores the thresholding and test partitions of a split.
pub fn score_split(
    split: &DatasetSplit,
    scoring: &Scoring,
    posterior: Option<&[ProbabilitySeries]>,
) -> Result<(Vec<ProbabilitySeries>, Vec<ProbabilitySeries>), ExperimentError> {
    match scoring {
        Scoring::Posterior => {
            let p =
                posterior.ok_or_else(|| ExperimentError::Config("posterior scoring needs posterior series".into()))?;
            Ok((series_for_log(p, &split.thres), series_for_log(p, &split.test)))
        }
        Scoring::Oracle => {
            let enc = fit_encoder(&split.train);
            let max = usize::MAX;
            Ok((
                score_log(&Estimator::Oracle, &split.thres, &enc, max)?,
                score_log(&Estimator::Oracle, &split.test, &enc, max)?,
            ))
        }
        Scoring::Boosted { params } => {
            let enc = fit_encoder(&split.train);
            let max_len = split.train.max_trace_len();
            let (xs, ys) = training_set(&split.train, &enc, max_len);
            let est = Estimator::Boosted(BoostedTrees::fit(&xs, &ys, *params)?);
            Ok((score_log(&est, &split.thres, &enc, max_len)?, score_log(&est, &split.test, &enc, max_len)?))
        }
    }
}

/// Ready-made probability-series fixtures.
pub mod fixtures {
    use super::*;

    /// Unstable estimator: desired cases hover low with isolated one-event
    /// spikes; undesired cases rise and stay high. Spikes are higher than
    /// the sustained level, so a single threshold cannot separate them.
    pub fn spike_series(n_cases: usize, seed: u64) -> Vec<ProbabilitySeries> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_cases)
            .map(|i| {
                let undesired = i % 2 == 0;
                let len = rng.random_range(6..=12);
                let mut probs: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..0.3)).collect();
                if undesired {
                    let from = rng.random_range(1..len - 2);
                    for p in probs.iter_mut().skip(from) {
                        *p = rng.random_range(0.8..0.88);
                    }
                } else {
                    let at = rng.random_range(0..len);
                    probs[at] = rng.random_range(0.9..0.99);
                }
                ProbabilitySeries::new(format!("s{i:04}"), probs, undesired, len)
            })
            .collect()
    }

    /// Stable estimator: each case's probabilities move monotonically
    /// towards its outcome, without spikes.
    pub fn stable_series(n_cases: usize, seed: u64) -> Vec<ProbabilitySeries> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_cases)
            .map(|i| {
                let undesired = rng.random::<f64>() < 0.5;
                let len = rng.random_range(4..=10);
                let target = if undesired { rng.random_range(0.6..1.0) } else { rng.random_range(0.0..0.4) };
                let probs = (1..=len).map(|k| 0.5 + (target - 0.5) * k as f64 / len as f64).collect();
                ProbabilitySeries::new(format!("t{i:04}"), probs, undesired, len)
            })
            .collect()
    }

    /// Overconfident estimator: undesired cases plateau in `[0.6, 0.88]`,
    /// a fifth of all cases are desired yet plateau in `[0.9, 1.0]`, and the
    /// remaining desired cases stay below `0.45`. False alarms therefore
    /// concentrate at the highest probabilities.
    pub fn high_fp_series(n_cases: usize, seed: u64) -> Vec<ProbabilitySeries> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_cases)
            .map(|i| {
                let u = rng.random::<f64>();
                let (undesired, plateau) = if u < 0.4 {
                    (true, rng.random_range(0.6..0.88))
                } else if u < 0.6 {
                    (false, rng.random_range(0.9..1.0))
                } else {
                    (false, rng.random_range(0.05..0.45))
                };
                let len = rng.random_range(5..=10);
                let probs = (1..=len)
                    .map(|k| {
                        let base = if k == 1 { 0.3 } else { plateau };
                        let p: f64 = base + rng.random_range(-0.02..0.02);
                        p.clamp(0.0, 1.0)
                    })
                    .collect();
                ProbabilitySeries::new(format!("h{i:04}"), probs, undesired, len)
            })
            .collect()
    }
}

/// The research-question sweeps over cost configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Rq {
    Rq1,
    Rq2,
    Rq3,
    Rq4,
    Rq5,
    Rq6,
    Rq7,
    Rq8,
}

impl Rq {
    pub fn label(&self) -> &'static str {
        match self {
            Rq::Rq1 => "RQ1",
            Rq::Rq2 => "RQ2",
            Rq::Rq3 => "RQ3",
            Rq::Rq4 => "RQ4",
            Rq::Rq5 => "RQ5",
            Rq::Rq6 => "RQ6",
            Rq::Rq7 => "RQ7",
            Rq::Rq8 => "RQ8",
        }
    }
}

impl std::str::FromStr for Rq {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_uppercase()))
            .map_err(|_| ExperimentError::Config(format!("unknown research question `{s}`")))
    }
}

/// Where a sweep's thresholding and test probabilities come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    ScoreFiles { thres: PathBuf, test: PathBuf },
    Synthetic { spec: SyntheticLogSpec, scoring: Scoring },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RqConfig {
    pub rq: Rq,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the default search grids of the sweep.
    #[serde(default)]
    pub search: Option<SearchSpace>,
    /// Non-monotonic shape constants; derived from trace lengths when absent.
    #[serde(default)]
    pub constants: Option<NonMonotonicConstants>,
    /// Restricts RQ4..RQ7 to some of the constant / linear / non-monotonic rows.
    #[serde(default)]
    pub families: Option<Vec<CostFamily>>,
}

/// One cost configuration of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RqCell {
    pub family: CostFamily,
    pub c_out: f64,
    pub c_in: f64,
    pub c_com: f64,
    /// `linear_decay`, a constant value, or `non_monotonic`.
    pub eff: String,
    #[serde(skip)]
    pub model: Option<MultiAlarmCostModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RqRow {
    pub rq: Rq,
    pub cell: RqCell,
    /// `optimized`, a baseline name, or a system label.
    pub policy: String,
    pub report: EvaluationReport,
    /// Thresholding-set CV cost of the optimized policy, when one was fitted.
    pub thres_cv_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RqTable {
    pub rq: Rq,
    pub n_cells: usize,
    pub rows: Vec<RqRow>,
}

const C_OUT_RATIOS: [f64; 6] = [1.0, 2.0, 3.0, 5.0, 10.0, 20.0];
const RQ3_C_COM: [f64; 10] = [0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
const RQ47_C_IN: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
const RQ47_C_COM_CONSTANT: [f64; 9] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 15.0, 20.0];
const RQ47_C_COM: [f64; 8] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0];
const RQ8_C_COM: [f64; 9] = [1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0, 30.0, 40.0];

impl NonMonotonicConstants {
    /// Numerators near the shortest case length, divisors near the median.
    pub fn from_lengths(lengths: &[usize]) -> Self {
        let mut v = lengths.to_vec();
        v.sort_unstable();
        let min = v.first().copied().unwrap_or(1).max(1) as u32;
        let median = v.get(v.len() / 2).copied().unwrap_or(1).max(1) as u32;
        NonMonotonicConstants { a: min, b: median, c: min, d: median, e: min, f: median }
    }
}

fn single_cell(
    family: CostFamily,
    c_out: f64,
    c_in: CostFnSpec,
    c_com: CostFnSpec,
    eff: EffSpec,
    eff_label: String,
) -> RqCell {
    let model = MultiAlarmCostModel::single(AlarmModel { c_in, c_com, eff }, CostFnSpec::constant(c_out))
        .expect("sweep configurations are valid");
    RqCell { family, c_out, c_in: c_in.base, c_com: c_com.base, eff: eff_label, model: Some(model) }
}

/// Enumerates the cost configurations of a research question in a fixed order.
pub fn rq_cells(rq: Rq, constants: NonMonotonicConstants, families: Option<&[CostFamily]>) -> Vec<RqCell> {
    let mut cells = Vec::new();
    let c = CostFnSpec::constant;
    match rq {
        Rq::Rq1 => {
            for &c_out in &C_OUT_RATIOS {
                cells.push(single_cell(
                    CostFamily::Constant,
                    c_out,
                    c(1.0),
                    c(0.0),
                    EffSpec::LinearDecay,
                    "linear_decay".into(),
                ));
            }
        }
        Rq::Rq2 => {
            for &c_out in &C_OUT_RATIOS {
                for i in 0..=10 {
                    let v = i as f64 / 10.0;
                    cells.push(single_cell(
                        CostFamily::Constant,
                        c_out,
                        c(1.0),
                        c(0.0),
                        EffSpec::Constant { value: v },
                        v.to_string(),
                    ));
                }
            }
        }
        Rq::Rq3 => {
            for &c_out in &C_OUT_RATIOS {
                for &com in &RQ3_C_COM {
                    cells.push(single_cell(
                        CostFamily::Constant,
                        c_out,
                        c(1.0),
                        c(com),
                        EffSpec::LinearDecay,
                        "linear_decay".into(),
                    ));
                }
            }
        }
        Rq::Rq4 | Rq::Rq5 | Rq::Rq6 | Rq::Rq7 => {
            let wanted = |f: CostFamily| families.is_none_or(|fs| fs.contains(&f));
            if wanted(CostFamily::Constant) {
                for &c_in in &RQ47_C_IN {
                    for &com in &RQ47_C_COM_CONSTANT {
                        cells.push(single_cell(
                            CostFamily::Constant,
                            10.0,
                            c(c_in),
                            c(com),
                            EffSpec::Constant { value: 1.0 },
                            "1".into(),
                        ));
                    }
                }
            }
            if wanted(CostFamily::Linear) {
                for &c_in in &RQ47_C_IN {
                    for &com in &RQ47_C_COM {
                        cells.push(single_cell(
                            CostFamily::Linear,
                            10.0,
                            CostFnSpec::linear(c_in),
                            c(com),
                            EffSpec::LinearDecay,
                            "linear_decay".into(),
                        ));
                    }
                }
            }
            if wanted(CostFamily::NonMonotonic) {
                for &c_in in &RQ47_C_IN {
                    for &com in &RQ47_C_COM {
                        cells.push(single_cell(
                            CostFamily::NonMonotonic,
                            10.0,
                            CostFnSpec::non_monotonic(c_in, constants),
                            CostFnSpec::non_monotonic(com, constants),
                            EffSpec::NonMonotonic { e: constants.e, f: constants.f },
                            "non_monotonic".into(),
                        ));
                    }
                }
            }
        }
        Rq::Rq8 => {
            for &c_in in &RQ47_C_IN {
                for &com in &RQ8_C_COM {
                    let base = AlarmModel { c_in: c(c_in), c_com: c(com), eff: EffSpec::Constant { value: 1.0 } };
                    let model =
                        MultiAlarmCostModel::with_factor_alarms(base, c(10.0), &[Factors::IDENTITY, Factors::ALARM_2])
                            .expect("sweep configurations are valid");
                    cells.push(RqCell {
                        family: CostFamily::Constant,
                        c_out: 10.0,
                        c_in,
                        c_com: com,
                        eff: "1".into(),
                        model: Some(model),
                    });
                }
            }
        }
    }
    cells
}

fn default_space(rq: Rq, seed: u64) -> SearchSpace {
    let base = SearchSpace { cv_seed: seed, ..SearchSpace::default() };
    match rq {
        Rq::Rq4 => base.with_kappas(1..=7),
        Rq::Rq5 | Rq::Rq6 => base.with_tau_grid(tau_grid(20)),
        Rq::Rq7 => base.with_tau_grid(tau_grid(20)).with_kappas(1..=7),
        _ => base,
    }
}

/// Runs a sweep over in-memory thresholding and test series.
pub fn run_rq_on_series(
    rq: Rq,
    thres: &[ProbabilitySeries],
    test: &[ProbabilitySeries],
    space: &SearchSpace,
    constants: NonMonotonicConstants,
    families: Option<&[CostFamily]>,
) -> Result<RqTable, ExperimentError> {
    let cells = rq_cells(rq, constants, families);
    let mut rows = Vec::new();
    for cell in &cells {
        let model = cell.model.as_ref().expect("cells carry models");
        let mut push = |policy: String, report: EvaluationReport, cv: Option<f64>| {
            rows.push(RqRow { rq, cell: cell.clone(), policy, report, thres_cv_cost: cv });
        };
        match rq {
            Rq::Rq8 => {
                let r = optimize(thres, model, space, PolicyFamily::Hierarchical)?;
                push("hierarchical".into(), evaluate(test, model, &r.best)?, Some(r.cv_mean_cost));
                for (id, _) in &model.alarms {
                    let sub = model.restricted_to(id)?;
                    let r = optimize(thres, &sub, space, PolicyFamily::Basic)?;
                    push(format!("single_{id}"), evaluate(test, &sub, &r.best)?, Some(r.cv_mean_cost));
                }
                push(BASELINE_NEVER.into(), evaluate(test, model, &Policy::Never)?, None);
            }
            Rq::Rq6 => {
                for n in 1..=3usize {
                    let s = SearchSpace { fixed_splits: Some((1..=n).collect()), ..space.clone() };
                    let r = optimize(thres, model, &s, PolicyFamily::Intervals { n_intervals: n })?;
                    push(format!("intervals_{n}"), evaluate(test, model, &r.best)?, Some(r.cv_mean_cost));
                }
                for (name, report) in baselines(test, model)? {
                    push(name, report, None);
                }
            }
            _ => {
                let (family, s) = match rq {
                    Rq::Rq1 | Rq::Rq2 | Rq::Rq3 => {
                        (PolicyFamily::Basic, SearchSpace { include_always_alarm: true, ..space.clone() })
                    }
                    Rq::Rq4 => (PolicyFamily::Delayed, space.clone()),
                    _ => (PolicyFamily::Intervals { n_intervals: 2 }, space.clone()),
                };
                let r = optimize(thres, model, &s, family)?;
                push("optimized".into(), evaluate(test, model, &r.best)?, Some(r.cv_mean_cost));
                for (name, report) in baselines(test, model)? {
                    push(name, report, None);
                }
            }
        }
    }
    Ok(RqTable { rq, n_cells: cells.len(), rows })
}

fn read_scores(path: &PathBuf) -> Result<Vec<ProbabilitySeries>, ExperimentError> {
    let file = std::fs::File::open(path)
        .map_err(|source| ExperimentError::Io { context: format!("score file {}", path.display()), source })?;
    Ok(load_external_scores(file)?)
}

/// Resolves the dataset, then runs the sweep.
pub fn run_rq_suite(cfg: &RqConfig) -> Result<RqTable, ExperimentError> {
    let (thres, test) = match &cfg.dataset {
        DatasetSource::ScoreFiles { thres, test } => (read_scores(thres)?, read_scores(test)?),
        DatasetSource::Synthetic { spec, scoring } => {
            let synth = generate_synthetic_log(spec)?;
            let (split, _) = temporal_split(&synth.log, cfg.seed)?;
            score_split(&split, scoring, Some(&synth.posterior))?
        }
    };
    let constants = cfg.constants.unwrap_or_else(|| {
        let lengths: Vec<usize> = thres.iter().chain(&test).map(|s| s.trace_len).collect();
        NonMonotonicConstants::from_lengths(&lengths)
    });
    let space = cfg.search.clone().unwrap_or_else(|| default_space(cfg.rq, cfg.seed));
    run_rq_on_series(cfg.rq, &thres, &test, &space, constants, cfg.families.as_deref())
}

/// Writes sweep rows as CSV.
pub fn write_rq_csv<W: std::io::Write>(table: &RqTable, sink: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "rq",
        "cost_family",
        "c_out",
        "c_in",
        "c_com",
        "eff",
        "policy",
        "policy_detail",
        "thres_cv_cost",
        "avg_cost",
        "benefit",
        "f_score",
        "tp",
        "fp",
        "fn",
        "tn",
    ])?;
    for row in &table.rows {
        let family = serde_json::to_value(row.cell.family).ok().and_then(|v| v.as_str().map(str::to_string));
        let r = &row.report;
        w.write_record([
            row.rq.label().to_string(),
            family.unwrap_or_default(),
            row.cell.c_out.to_string(),
            row.cell.c_in.to_string(),
            row.cell.c_com.to_string(),
            row.cell.eff.clone(),
            row.policy.clone(),
            serde_json::to_string(&r.policy).unwrap_or_default(),
            row.thres_cv_cost.map(|c| c.to_string()).unwrap_or_default(),
            r.avg_cost_per_case.to_string(),
            r.benefit.to_string(),
            r.f_score.to_string(),
            r.counts.tp.to_string(),
            r.counts.fp.to_string(),
            r.counts.fn_.to_string(),
            r.counts.tn.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
