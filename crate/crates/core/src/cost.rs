//! Alarm and cost models, and the per-case cost of an alarm decision.
//!
//! | outcome   | alarm raised at `i`                     | no alarm |
//! |-----------|-----------------------------------------|----------|
//! | undesired | `c_in(i) + (1 - eff(i)) * c_out`         | `c_out`  |
//! | desired   | `c_in(i) + c_com(i)`                     | `0`      |
//!
//! Cost functions depend only on the firing index `k` and the final trace
//! length. `c_out` is evaluated at `k = |trace|`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::ProbabilitySeries;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("prefix index {k} outside 1..={trace_len}")]
    OutOfRange { k: usize, trace_len: usize },
    #[error("unknown alarm `{0}`")]
    UnknownAlarm(String),
    #[error("decision names no alarm but the model has {0} alarms")]
    AmbiguousAlarm(usize),
    #[error("no decision for case `{0}`")]
    MissingDecision(String),
    #[error("invalid cost model: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostFamily {
    Constant,
    Linear,
    NonMonotonic,
}

/// Shape constants of the non-monotonic configurations. `a`/`b` shape
/// `c_in`, `c`/`d` shape `c_com`, `e`/`f` shape `eff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonMonotonicConstants {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub d: u32,
    pub e: u32,
    pub f: u32,
}

impl NonMonotonicConstants {
    pub const BPIC2017_CANCELLED: Self = Self { a: 10, b: 35, c: 13, d: 32, e: 18, f: 40 };
    pub const BPIC2017_REFUSED: Self = Self { a: 8, b: 33, c: 15, d: 34, e: 20, f: 35 };
    pub const TRAFFIC_FINES: Self = Self { a: 3, b: 5, c: 2, d: 5, e: 3, f: 4 };

    fn validate(&self) -> Result<(), CostError> {
        if self.b == 0 || self.d == 0 || self.f == 0 {
            return Err(CostError::Invalid("non-monotonic divisors b, d, f must be > 0".into()));
        }
        Ok(())
    }
}

/// Which slot of the alarm model a cost function fills; it selects the
/// non-monotonic shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostRole {
    Intervention,
    Compensation,
    Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostFnSpec {
    pub family: CostFamily,
    pub base: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<NonMonotonicConstants>,
}

fn check_range(k: usize, trace_len: usize) -> Result<(), CostError> {
    if k == 0 || k > trace_len {
        Err(CostError::OutOfRange { k, trace_len })
    } else {
        Ok(())
    }
}

impl CostFnSpec {
    pub fn constant(base: f64) -> Self {
        CostFnSpec { family: CostFamily::Constant, base, constants: None }
    }

    pub fn linear(base: f64) -> Self {
        CostFnSpec { family: CostFamily::Linear, base, constants: None }
    }

    pub fn non_monotonic(base: f64, constants: NonMonotonicConstants) -> Self {
        CostFnSpec { family: CostFamily::NonMonotonic, base, constants: Some(constants) }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if !(self.base >= 0.0 && self.base.is_finite()) {
            return Err(CostError::Invalid(format!("base must be finite and >= 0, got {}", self.base)));
        }
        if self.family == CostFamily::NonMonotonic {
            self.constants
                .ok_or_else(|| CostError::Invalid("non_monotonic needs constants a..f".into()))?
                .validate()?;
        }
        Ok(())
    }

    fn scaled(&self, factor: f64) -> Self {
        CostFnSpec { base: self.base * factor, ..*self }
    }

    /// Evaluates the cost at prefix index `k` (1-based); never negative.
    pub fn eval(&self, role: CostRole, k: usize, trace_len: usize) -> Result<f64, CostError> {
        check_range(k, trace_len)?;
        let value = match self.family {
            CostFamily::Constant => self.base,
            CostFamily::Linear => self.base * k as f64 / trace_len as f64,
            CostFamily::NonMonotonic => {
                let c =
                    self.constants.ok_or_else(|| CostError::Invalid("non_monotonic needs constants a..f".into()))?;
                let (cap, div) = match role {
                    CostRole::Intervention | CostRole::Outcome => (c.a, c.b),
                    CostRole::Compensation => (c.c, c.d),
                };
                let steps = (k - 1).min(cap as usize) as f64;
                self.base * (1.0 - steps / div as f64)
            }
        };
        Ok(value.max(0.0))
    }
}

/// Free-function form of [`CostFnSpec::eval`].
pub fn eval_cost_fn(spec: &CostFnSpec, role: CostRole, k: usize, trace_len: usize) -> Result<f64, CostError> {
    spec.eval(role, k, trace_len)
}

/// Mitigation effectiveness of intervening after event `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffSpec {
    Constant {
        value: f64,
    },
    /// `1 - k / |trace|`
    LinearDecay,
    /// `1 - min(e, k - 1) / f`
    NonMonotonic {
        e: u32,
        f: u32,
    },
}

impl EffSpec {
    pub fn validate(&self) -> Result<(), CostError> {
        match self {
            EffSpec::Constant { value } if !(0.0..=1.0).contains(value) => {
                Err(CostError::Invalid(format!("constant eff must be in [0, 1], got {value}")))
            }
            EffSpec::NonMonotonic { f: 0, .. } => Err(CostError::Invalid("eff divisor f must be > 0".into())),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, k: usize, trace_len: usize) -> Result<f64, CostError> {
        check_range(k, trace_len)?;
        let v = match *self {
            EffSpec::Constant { value } => value,
            EffSpec::LinearDecay => 1.0 - k as f64 / trace_len as f64,
            EffSpec::NonMonotonic { e, f } => 1.0 - (k - 1).min(e as usize) as f64 / f as f64,
        };
        Ok(v.clamp(0.0, 1.0))
    }
}

pub fn eval_eff(spec: &EffSpec, k: usize, trace_len: usize) -> Result<f64, CostError> {
    spec.eval(k, trace_len)
}

/// `(c_in, c_com, eff)` of one alarm type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlarmModel {
    pub c_in: CostFnSpec,
    pub c_com: CostFnSpec,
    pub eff: EffSpec,
}

impl AlarmModel {
    pub fn validate(&self) -> Result<(), CostError> {
        self.c_in.validate()?;
        self.c_com.validate()?;
        self.eff.validate()
    }

    /// Scales `c_in` and `c_com` bases by the given factors.
    pub fn with_factors(&self, factors: Factors) -> Self {
        AlarmModel { c_in: self.c_in.scaled(factors.c_in), c_com: self.c_com.scaled(factors.c_com), eff: self.eff }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    pub c_in: f64,
    pub c_com: f64,
}

impl Factors {
    pub const IDENTITY: Self = Factors { c_in: 1.0, c_com: 1.0 };
    /// The second alarm of the two-alarm evaluation setup.
    pub const ALARM_2: Self = Factors { c_in: 1.2, c_com: 0.5 };
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlarmId(pub String);

impl AlarmId {
    pub fn new(id: impl Into<String>) -> Self {
        AlarmId(id.into())
    }
}

impl fmt::Display for AlarmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AlarmId {
    fn from(s: &str) -> Self {
        AlarmId(s.to_string())
    }
}

/// Alarm types in escalation order, plus the cost of an undesired outcome.
/// A single alarm is the plain single-alarm cost model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostModelConfig", into = "CostModelConfig")]
pub struct MultiAlarmCostModel {
    pub alarms: Vec<(AlarmId, AlarmModel)>,
    pub c_out: CostFnSpec,
}

impl MultiAlarmCostModel {
    pub fn new(alarms: Vec<(AlarmId, AlarmModel)>, c_out: CostFnSpec) -> Result<Self, CostError> {
        let model = MultiAlarmCostModel { alarms, c_out };
        model.validate()?;
        Ok(model)
    }

    pub fn single(alarm: AlarmModel, c_out: CostFnSpec) -> Result<Self, CostError> {
        Self::new(vec![(AlarmId::new("alarm"), alarm)], c_out)
    }

    /// One alarm per factor pair, all derived from `base`; ids are `a1`, `a2`, ...
    pub fn with_factor_alarms(base: AlarmModel, c_out: CostFnSpec, factors: &[Factors]) -> Result<Self, CostError> {
        let alarms =
            factors.iter().enumerate().map(|(i, f)| (AlarmId(format!("a{}", i + 1)), base.with_factors(*f))).collect();
        Self::new(alarms, c_out)
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if self.alarms.is_empty() {
            return Err(CostError::Invalid("at least one alarm is required".into()));
        }
        let mut seen = BTreeSet::new();
        for (id, m) in &self.alarms {
            if !seen.insert(id) {
                return Err(CostError::Invalid(format!("duplicate alarm id `{id}`")));
            }
            m.validate()?;
        }
        self.c_out.validate()?;
        if self.c_out.family == CostFamily::NonMonotonic {
            return Err(CostError::Invalid("c_out supports constant and linear families only".into()));
        }
        Ok(())
    }

    pub fn alarm(&self, id: &AlarmId) -> Result<&AlarmModel, CostError> {
        self.alarms.iter().find(|(a, _)| a == id).map(|(_, m)| m).ok_or_else(|| CostError::UnknownAlarm(id.0.clone()))
    }

    /// Single-alarm model holding only alarm `id`.
    pub fn restricted_to(&self, id: &AlarmId) -> Result<Self, CostError> {
        let m = *self.alarm(id)?;
        Ok(MultiAlarmCostModel { alarms: vec![(id.clone(), m)], c_out: self.c_out })
    }

    fn resolve(&self, alarm: Option<&AlarmId>) -> Result<&AlarmModel, CostError> {
        match alarm {
            Some(id) => self.alarm(id),
            None if self.alarms.len() == 1 => Ok(&self.alarms[0].1),
            None => Err(CostError::AmbiguousAlarm(self.alarms.len())),
        }
    }

    /// Id that an unnamed firing resolves to, if unambiguous.
    pub fn default_alarm(&self) -> Option<&AlarmId> {
        (self.alarms.len() == 1).then(|| &self.alarms[0].0)
    }
}

/// One alarm entry of the JSON cost-model config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEntry {
    pub id: AlarmId,
    pub c_in: CostFnSpec,
    pub c_com: CostFnSpec,
    pub eff: EffSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Factors>,
}

/// JSON shape: `{"alarms": [{id, c_in, c_com, eff, factors?}], "c_out": {...}}`.
/// `factors` multiplies the `c_in`/`c_com` bases of that alarm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModelConfig {
    pub alarms: Vec<AlarmEntry>,
    pub c_out: CostFnSpec,
}

impl TryFrom<CostModelConfig> for MultiAlarmCostModel {
    type Error = CostError;

    fn try_from(cfg: CostModelConfig) -> Result<Self, CostError> {
        let alarms = cfg
            .alarms
            .into_iter()
            .map(|e| {
                let m = AlarmModel { c_in: e.c_in, c_com: e.c_com, eff: e.eff };
                (e.id, e.factors.map_or(m, |f| m.with_factors(f)))
            })
            .collect();
        MultiAlarmCostModel::new(alarms, cfg.c_out)
    }
}

impl From<MultiAlarmCostModel> for CostModelConfig {
    fn from(m: MultiAlarmCostModel) -> Self {
        CostModelConfig {
            alarms: m
                .alarms
                .into_iter()
                .map(|(id, a)| AlarmEntry { id, c_in: a.c_in, c_com: a.c_com, eff: a.eff, factors: None })
                .collect(),
            c_out: m.c_out,
        }
    }
}

/// Outcome of an alarm system on one case: at most one firing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlarmDecision {
    NoAlarm,
    /// Fired after the prefix of length `at`. `alarm: None` means the
    /// model's only alarm.
    Fired {
        alarm: Option<AlarmId>,
        at: usize,
    },
}

impl AlarmDecision {
    pub fn fired(at: usize) -> Self {
        AlarmDecision::Fired { alarm: None, at }
    }

    pub fn fired_with(alarm: AlarmId, at: usize) -> Self {
        AlarmDecision::Fired { alarm: Some(alarm), at }
    }

    pub fn fired_at(&self) -> Option<usize> {
        match self {
            AlarmDecision::NoAlarm => None,
            AlarmDecision::Fired { at, .. } => Some(*at),
        }
    }

    pub fn is_fired(&self) -> bool {
        matches!(self, AlarmDecision::Fired { .. })
    }
}

/// Cost of one case given its outcome and the alarm decision.
pub fn case_cost(
    trace_len: usize,
    outcome: bool,
    decision: &AlarmDecision,
    model: &MultiAlarmCostModel,
) -> Result<f64, CostError> {
    let c_out = || model.c_out.eval(CostRole::Outcome, trace_len, trace_len);
    match decision {
        AlarmDecision::NoAlarm => {
            if outcome {
                c_out()
            } else {
                Ok(0.0)
            }
        }
        AlarmDecision::Fired { alarm, at } => {
            let m = model.resolve(alarm.as_ref())?;
            let c_in = m.c_in.eval(CostRole::Intervention, *at, trace_len)?;
            if outcome {
                let eff = m.eff.eval(*at, trace_len)?;
                Ok(c_in + (1.0 - eff) * c_out()?)
            } else {
                Ok(c_in + m.c_com.eval(CostRole::Compensation, *at, trace_len)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub total: f64,
    pub avg_per_case: f64,
}

/// Sums case costs over a series set; every case needs a decision.
pub fn total_cost(
    series: &[ProbabilitySeries],
    decisions: &BTreeMap<String, AlarmDecision>,
    model: &MultiAlarmCostModel,
) -> Result<CostSummary, CostError> {
    let mut total = 0.0;
    for s in series {
        let d = decisions.get(&s.case_id).ok_or_else(|| CostError::MissingDecision(s.case_id.clone()))?;
        total += case_cost(s.trace_len, s.outcome, d, model)?;
    }
    let avg_per_case = if series.is_empty() { 0.0 } else { total / series.len() as f64 };
    Ok(CostSummary { total, avg_per_case })
}
