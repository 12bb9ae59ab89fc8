//! Empirical thresholding: choose policy parameters that minimize the
//! cross-validated average cost per case on the thresholding log.
//!
//! The objective of a candidate is the mean, over three seeded case-wise
//! folds, of its average cost per case on each fold. Among candidates with
//! equal objective the most conservative one wins (larger thresholds).

use std::cmp::Ordering;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{case_cost, AlarmDecision, AlarmId, CostError, MultiAlarmCostModel};
use crate::estimator::ProbabilitySeries;
use crate::policy::{Policy, PolicyError};

pub const N_FOLDS: usize = 3;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("cross validation needs at least {N_FOLDS} cases, got {0}")]
    TooFewCases(usize),
    #[error("invalid search space: {0}")]
    Space(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchKind {
    Grid,
    /// Thresholds drawn uniformly from `[0, 1]`, discrete parameters
    /// uniformly from their grids.
    Random {
        n_samples: usize,
        seed: u64,
    },
}

/// Grids searched by the optimizers, plus the CV fold seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub tau_grid: Vec<f64>,
    pub kappa_grid: Vec<usize>,
    /// Candidate start points for the second and later intervals.
    pub split_candidates: Vec<usize>,
    /// When set, interval start points are fixed and only thresholds are searched.
    pub fixed_splits: Option<Vec<usize>>,
    pub kind: SearchKind,
    pub cv_seed: u64,
    /// Adds the always-alarm-at-start policy as a basic-search candidate.
    pub include_always_alarm: bool,
}

/// `0.00, 0.01, ..., 1.00`.
pub fn default_tau_grid() -> Vec<f64> {
    tau_grid(100)
}

/// `steps + 1` evenly spaced thresholds from 0 to 1.
pub fn tau_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            tau_grid: default_tau_grid(),
            kappa_grid: vec![1],
            split_candidates: (2..=10).collect(),
            fixed_splits: None,
            kind: SearchKind::Grid,
            cv_seed: 0,
            include_always_alarm: false,
        }
    }
}

impl SearchSpace {
    pub fn with_kappas(mut self, kappas: impl IntoIterator<Item = usize>) -> Self {
        self.kappa_grid = kappas.into_iter().collect();
        self
    }

    pub fn with_tau_grid(mut self, grid: Vec<f64>) -> Self {
        self.tau_grid = grid;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.cv_seed = seed;
        self
    }

    fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: &str| Err(OptimizeError::Space(m.to_string()));
        if self.tau_grid.is_empty() {
            return bad("tau grid is empty");
        }
        if self.tau_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("tau grid values must lie in [0, 1]");
        }
        if self.kappa_grid.is_empty() || self.kappa_grid.contains(&0) {
            return bad("kappa grid must be non-empty with values >= 1");
        }
        if let SearchKind::Random { n_samples: 0, .. } = self.kind {
            return bad("random search needs n_samples >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best: Policy,
    pub cv_mean_cost: f64,
    pub fold_costs: Vec<f64>,
    pub candidates_evaluated: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Seeded case-wise fold assignment, indexed like the series slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Folds {
    pub fold_of: Vec<usize>,
    pub sizes: [usize; N_FOLDS],
}

impl Folds {
    pub fn new(n_cases: usize, seed: u64) -> Result<Self, OptimizeError> {
        if n_cases < N_FOLDS {
            return Err(OptimizeError::TooFewCases(n_cases));
        }
        let mut order: Vec<usize> = (0..n_cases).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut fold_of = vec![0; n_cases];
        let mut sizes = [0; N_FOLDS];
        for (pos, &case) in order.iter().enumerate() {
            fold_of[case] = pos % N_FOLDS;
            sizes[pos % N_FOLDS] += 1;
        }
        Ok(Folds { fold_of, sizes })
    }
}

/// Precomputed case costs: for each case, the cost of never alarming and
/// of firing each alarm after each prefix.
pub struct CostTable<'a> {
    series: &'a [ProbabilitySeries],
    model: &'a MultiAlarmCostModel,
    no_alarm: Vec<f64>,
    /// `fire[alarm][case][k - 1]`
    fire: Vec<Vec<Vec<f64>>>,
}

impl<'a> CostTable<'a> {
    pub fn new(series: &'a [ProbabilitySeries], model: &'a MultiAlarmCostModel) -> Result<Self, OptimizeError> {
        model.validate()?;
        let mut no_alarm = Vec::with_capacity(series.len());
        for s in series {
            no_alarm.push(case_cost(s.trace_len, s.outcome, &AlarmDecision::NoAlarm, model)?);
        }
        let mut fire = Vec::with_capacity(model.alarms.len());
        for (id, _) in &model.alarms {
            let mut per_case = Vec::with_capacity(series.len());
            for s in series {
                let costs = (1..=s.probs.len())
                    .map(|k| case_cost(s.trace_len, s.outcome, &AlarmDecision::fired_with(id.clone(), k), model))
                    .collect::<Result<Vec<_>, _>>()?;
                per_case.push(costs);
            }
            fire.push(per_case);
        }
        Ok(CostTable { series, model, no_alarm, fire })
    }

    fn alarm_index(&self, alarm: Option<&AlarmId>) -> Result<usize, CostError> {
        match alarm {
            None if self.model.alarms.len() == 1 => Ok(0),
            None => Err(CostError::AmbiguousAlarm(self.model.alarms.len())),
            Some(id) => {
                self.model.alarms.iter().position(|(a, _)| a == id).ok_or_else(|| CostError::UnknownAlarm(id.0.clone()))
            }
        }
    }

    /// Cost of case `i` under `decision`; identical to [`case_cost`].
    pub fn cost(&self, i: usize, decision: &AlarmDecision) -> Result<f64, CostError> {
        match decision {
            AlarmDecision::NoAlarm => Ok(self.no_alarm[i]),
            AlarmDecision::Fired { alarm, at } => {
                let a = self.alarm_index(alarm.as_ref())?;
                self.fire[a][i]
                    .get(at - 1)
                    .copied()
                    .ok_or(CostError::OutOfRange { k: *at, trace_len: self.series[i].probs.len() })
            }
        }
    }

    pub fn series(&self) -> &'a [ProbabilitySeries] {
        self.series
    }
}

/// Fold-wise average costs of a policy.
pub struct CvEvaluator<'a> {
    table: CostTable<'a>,
    folds: Folds,
}

impl<'a> CvEvaluator<'a> {
    pub fn new(
        series: &'a [ProbabilitySeries],
        model: &'a MultiAlarmCostModel,
        seed: u64,
    ) -> Result<Self, OptimizeError> {
        let folds = Folds::new(series.len(), seed)?;
        Ok(CvEvaluator { table: CostTable::new(series, model)?, folds })
    }

    /// Returns `(mean over folds, per-fold average cost)`.
    pub fn evaluate(&self, policy: &Policy) -> Result<(f64, Vec<f64>), OptimizeError> {
        let mut sums = [0.0; N_FOLDS];
        for (i, s) in self.table.series.iter().enumerate() {
            let d = policy.decide(s);
            sums[self.folds.fold_of[i]] += self.table.cost(i, &d)?;
        }
        let per_fold: Vec<f64> = sums.iter().zip(self.folds.sizes).map(|(s, n)| s / n as f64).collect();
        let mean = per_fold.iter().sum::<f64>() / N_FOLDS as f64;
        Ok((mean, per_fold))
    }
}

/// Mean over three seeded folds of the policy's average cost per case.
pub fn cv_objective(
    series: &[ProbabilitySeries],
    model: &MultiAlarmCostModel,
    policy: &Policy,
    seed: u64,
) -> Result<f64, OptimizeError> {
    policy.validate()?;
    Ok(CvEvaluator::new(series, model, seed)?.evaluate(policy)?.0)
}

fn cmp_desc(a: &[f64], b: &[f64]) -> Ordering {
    // lexicographically larger first
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    b.len().cmp(&a.len())
}

fn distinct(taus: &[f64]) -> usize {
    let mut v = taus.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Total preference order used to break cost ties; `Less` means `a` wins.
/// Larger thresholds (fewer alarms) win, then smaller delays and simpler
/// interval layouts.
pub fn tie_break(a: &Policy, b: &Policy) -> Ordering {
    use Policy::*;
    let rank = |p: &Policy| match p {
        Never => 0,
        Basic { .. } => 1,
        Delayed { .. } => 2,
        Intervals { .. } => 3,
        Hierarchical { .. } => 4,
        AlwaysAtStart => 5,
    };
    match (a, b) {
        (Basic { tau: x }, Basic { tau: y }) => y.total_cmp(x),
        (Delayed { tau: t1, kappa: k1 }, Delayed { tau: t2, kappa: k2 }) => t2.total_cmp(t1).then(k1.cmp(k2)),
        (Intervals { splits: s1, taus: t1, kappa: k1 }, Intervals { splits: s2, taus: t2, kappa: k2 }) => {
            cmp_desc(t1, t2).then(distinct(t1).cmp(&distinct(t2))).then(k1.cmp(k2)).then(s1.cmp(s2))
        }
        (
            Hierarchical { tau_no_vs: v1, tau_pairwise: x, order: o1 },
            Hierarchical { tau_no_vs: v2, tau_pairwise: y, order: o2 },
        ) => {
            let taus = |v: &std::collections::BTreeMap<_, f64>| v.values().copied().collect::<Vec<f64>>();
            y.total_cmp(x)
                .then_with(|| cmp_desc(&taus(v1), &taus(v2)))
                .then_with(|| v1.keys().cmp(v2.keys()))
                .then_with(|| o1.cmp(o2))
        }
        _ => rank(a).cmp(&rank(b)),
    }
}

struct Best {
    policy: Policy,
    mean: f64,
    folds: Vec<f64>,
}

/// Exhaustive argmin over an iterator of candidates, in candidate order.
fn search(
    eval: &CvEvaluator<'_>,
    candidates: impl Iterator<Item = Policy>,
) -> Result<OptimizationResult, OptimizeError> {
    let mut best: Option<Best> = None;
    let mut count = 0;
    for policy in candidates {
        count += 1;
        let (mean, folds) = eval.evaluate(&policy)?;
        let better = match &best {
            None => true,
            Some(b) => mean < b.mean || (mean == b.mean && tie_break(&policy, &b.policy) == Ordering::Less),
        };
        if better {
            best = Some(Best { policy, mean, folds });
        }
    }
    let best = best.ok_or_else(|| OptimizeError::Space("no candidates".into()))?;
    Ok(OptimizationResult {
        best: best.policy,
        cv_mean_cost: best.mean,
        fold_costs: best.folds,
        candidates_evaluated: count,
        notes: Vec::new(),
    })
}

fn rng_for(kind: &SearchKind) -> Option<(ChaCha8Rng, usize)> {
    match kind {
        SearchKind::Grid => None,
        SearchKind::Random { n_samples, seed } => Some((ChaCha8Rng::seed_from_u64(*seed), *n_samples)),
    }
}

pub fn optimize_basic(
    series: &[ProbabilitySeries],
    model: &MultiAlarmCostModel,
    space: &SearchSpace,
) -> Result<OptimizationResult, OptimizeError> {
    space.validate()?;
    let eval = CvEvaluator::new(series, model, space.cv_seed)?;
    let taus: Vec<f64> = match rng_for(&space.kind) {
        None => space.tau_grid.clone(),
        Some((mut rng, n)) => (0..n).map(|_| rng.random::<f64>()).collect(),
    };
    let always = space.include_always_alarm.then_some(Policy::AlwaysAtStart);
    search(&eval, taus.into_iter().map(|tau| Policy::Basic { tau }).chain(always))
}

pub fn optimize_delayed(
    series: &[ProbabilitySeries],
    model: &MultiAlarmCostModel,
    space: &SearchSpace,
) -> Result<OptimizationResult, OptimizeError> {
    space.validate()?;
    let eval = CvEvaluator::new(series, model, space.cv_seed)?;
    let candidates: Vec<Policy> = match rng_for(&space.kind) {
        None => space
            .tau_grid
            .iter()
            .flat_map(|&tau| space.kappa_grid.iter().map(move |&kappa| Policy::Delayed { tau, kappa }))
            .collect(),
        Some((mut rng, n)) => (0..n)
            .map(|_| Policy::Delayed {
                tau: rng.random::<f64>(),
                kappa: *space.kappa_grid.choose(&mut rng).expect("non-empty"),
            })
            .collect(),
    };
    search(&eval, candidates.into_iter())
}

/// All strictly increasing `len`-subsets of `items` (which must be sorted).
fn combinations(items: &[usize], len: usize) -> Vec<Vec<usize>> {
    if len == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], len - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Cartesian power of `grid` with `n` factors, in lexicographic order.
fn grid_power(grid: &[f64], n: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let total = grid.len().pow(n as u32);
    (0..total).map(move |mut idx| {
        let mut v = vec![0.0; n];
        for slot in v.iter_mut().rev() {
            *slot = grid[idx % grid.len()];
            idx /= grid.len();
        }
        v
    })
}

/// Joint search over interval start points (unless fixed), per-interval
/// thresholds and the firing delay.
pub fn optimize_intervals(
    series: &[ProbabilitySeries],
    model: &MultiAlarmCostModel,
    space: &SearchSpace,
    n_intervals: usize,
) -> Result<OptimizationResult, OptimizeError> {
    space.validate()?;
    if n_intervals == 0 {
        return Err(OptimizeError::Space("n_intervals must be >= 1".into()));
    }
    let split_sets: Vec<Vec<usize>> = match &space.fixed_splits {
        Some(fixed) => {
            if fixed.len() != n_intervals {
                return Err(OptimizeError::Space(format!(
                    "fixed splits {fixed:?} define {} intervals, expected {n_intervals}",
                    fixed.len()
                )));
            }
            vec![fixed.clone()]
        }
        None => {
            let mut cands: Vec<usize> = space.split_candidates.iter().copied().filter(|s| *s > 1).collect();
            cands.sort_unstable();
            cands.dedup();
            combinations(&cands, n_intervals - 1)
                .into_iter()
                .map(|rest| std::iter::once(1).chain(rest).collect())
                .collect()
        }
    };
    if split_sets.is_empty() {
        return Err(OptimizeError::Space(format!("not enough split candidates for {n_intervals} intervals")));
    }
    let probe = Policy::Intervals { splits: split_sets[0].clone(), taus: vec![0.5; n_intervals], kappa: 1 };
    probe.validate()?;
    let eval = CvEvaluator::new(series, model, space.cv_seed)?;

    match rng_for(&space.kind) {
        None => {
            let candidates = split_sets.iter().flat_map(|splits| {
                grid_power(&space.tau_grid, n_intervals).flat_map(move |taus| {
                    space.kappa_grid.iter().map(move |&kappa| Policy::Intervals {
                        splits: splits.clone(),
                        taus: taus.clone(),
                        kappa,
                    })
                })
            });
            search(&eval, candidates)
        }
        Some((mut rng, n)) => {
            let candidates: Vec<Policy> = (0..n)
                .map(|_| Policy::Intervals {
                    splits: split_sets.choose(&mut rng).expect("non-empty").clone(),
                    taus: (0..n_intervals).map(|_| rng.random::<f64>()).collect(),
                    kappa: *space.kappa_grid.choose(&mut rng).expect("non-empty"),
                })
                .collect();
            search(&eval, candidates.into_iter())
        }
    }
}

/// Two-stage hierarchical thresholding for a two-alarm model.
///
/// Stage one optimizes an alarm-vs-none threshold per alarm with the basic
/// search. Stage two keeps the cases having a prefix above both stage-one
/// thresholds and picks the alarm-vs-alarm threshold minimizing their total
/// cost when each fires at its first such prefix (low alarm up to the
/// threshold, high alarm above).
pub fn optimize_hierarchical(
    series: &[ProbabilitySeries],
    model: &MultiAlarmCostModel,
    space: &SearchSpace,
) -> Result<OptimizationResult, OptimizeError> {
    space.validate()?;
    if model.alarms.len() != 2 {
        return Err(OptimizeError::Space(format!(
            "hierarchical thresholding needs exactly 2 alarms, got {}",
            model.alarms.len()
        )));
    }
    let low = model.alarms[0].0.clone();
    let high = model.alarms[1].0.clone();
    let stage_space = SearchSpace { include_always_alarm: false, ..space.clone() };
    let mut candidates = 0;
    let mut stage_one = Vec::new();
    for id in [&low, &high] {
        let sub = model.restricted_to(id)?;
        let r = optimize_basic(series, &sub, &stage_space)?;
        candidates += r.candidates_evaluated;
        let tau = match r.best {
            Policy::Basic { tau } => tau,
            other => unreachable!("basic search returned {other:?}"),
        };
        stage_one.push(tau);
    }
    let (tau_low, tau_high) = (stage_one[0], stage_one[1]);
    let both = tau_low.max(tau_high);

    // first prefix above both thresholds, per surviving case
    let survivors: Vec<(usize, usize, f64)> = series
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.probs.iter().position(|p| *p > both).map(|j| (i, j + 1, s.probs[j])))
        .collect();

    let mut notes = Vec::new();
    let tau_pairwise = if survivors.is_empty() {
        notes.push("no prefix exceeds both alarm-vs-none thresholds; tau_pairwise defaults to 1.0".into());
        1.0
    } else {
        let table = CostTable::new(series, model)?;
        let pairs: Vec<f64> = match rng_for(&space.kind) {
            None => space.tau_grid.clone(),
            Some((mut rng, n)) => (0..n).map(|_| rng.random::<f64>()).collect(),
        };
        let mut best: Option<(f64, f64)> = None;
        for tau_pair in pairs {
            candidates += 1;
            let mut total = 0.0;
            for &(i, k, p) in &survivors {
                let alarm = if p <= tau_pair { &low } else { &high };
                total += table.cost(i, &AlarmDecision::fired_with(alarm.clone(), k))?;
            }
            let better = match best {
                None => true,
                Some((c, t)) => total < c || (total == c && tau_pair > t),
            };
            if better {
                best = Some((total, tau_pair));
            }
        }
        best.expect("non-empty grid").1
    };

    let policy = Policy::Hierarchical {
        tau_no_vs: [(low.clone(), tau_low), (high.clone(), tau_high)].into_iter().collect(),
        tau_pairwise,
        order: (low, high),
    };
    let eval = CvEvaluator::new(series, model, space.cv_seed)?;
    let (mean, folds) = eval.evaluate(&policy)?;
    Ok(OptimizationResult {
        best: policy,
        cv_mean_cost: mean,
        fold_costs: folds,
        candidates_evaluated: candidates,
        notes,
    })
}

/// Policy family to optimize, as named in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyFamily {
    Basic,
    Delayed,
    Intervals { n_intervals: usize },
    Hierarchical,
}

pub fn optimize(
    series: &[ProbabilitySeries],
    model: &MultiAlarmCostModel,
    space: &SearchSpace,
    family: PolicyFamily,
) -> Result<OptimizationResult, OptimizeError> {
    match family {
        PolicyFamily::Basic => optimize_basic(series, model, space),
        PolicyFamily::Delayed => optimize_delayed(series, model, space),
        PolicyFamily::Intervals { n_intervals } => optimize_intervals(series, model, space, n_intervals),
        PolicyFamily::Hierarchical => optimize_hierarchical(series, model, space),
    }
}
