//! Alarm-firing policies mapping a probability series to an alarm decision.
//!
//! All comparisons are strict: a probability must exceed its threshold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{AlarmDecision, AlarmId};
use crate::estimator::ProbabilitySeries;

#[derive(Debug, Error, PartialEq)]
#[error("invalid policy: {0}")]
pub struct PolicyError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Never raises an alarm.
    Never,
    /// Fires after the first event of every case, whatever the probability.
    AlwaysAtStart,
    Basic {
        tau: f64,
    },
    Delayed {
        tau: f64,
        kappa: usize,
    },
    /// `splits[i]` is the first prefix length governed by `taus[i]`.
    Intervals {
        splits: Vec<usize>,
        taus: Vec<f64>,
        kappa: usize,
    },
    Hierarchical {
        tau_no_vs: BTreeMap<AlarmId, f64>,
        tau_pairwise: f64,
        /// `(low, high)`: the escalation order.
        order: (AlarmId, AlarmId),
    },
}

fn check_tau(tau: f64) -> Result<(), PolicyError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(PolicyError(format!("threshold {tau} outside [0, 1]")))
    }
}

fn check_kappa(kappa: usize) -> Result<(), PolicyError> {
    if kappa >= 1 {
        Ok(())
    } else {
        Err(PolicyError("kappa must be >= 1".into()))
    }
}

impl Policy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            Policy::Never | Policy::AlwaysAtStart => Ok(()),
            Policy::Basic { tau } => check_tau(*tau),
            Policy::Delayed { tau, kappa } => {
                check_tau(*tau)?;
                check_kappa(*kappa)
            }
            Policy::Intervals { splits, taus, kappa } => {
                check_kappa(*kappa)?;
                if splits.is_empty() || splits.len() != taus.len() {
                    return Err(PolicyError("splits and taus must be non-empty and aligned".into()));
                }
                if splits[0] != 1 {
                    return Err(PolicyError("the first split must be 1".into()));
                }
                if splits.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(PolicyError("splits must strictly increase".into()));
                }
                taus.iter().try_for_each(|t| check_tau(*t))
            }
            Policy::Hierarchical { tau_no_vs, tau_pairwise, order } => {
                check_tau(*tau_pairwise)?;
                if order.0 == order.1 {
                    return Err(PolicyError("hierarchical needs two distinct alarms".into()));
                }
                if tau_no_vs.len() != 2 {
                    return Err(PolicyError("hierarchical supports exactly two alarms".into()));
                }
                for id in [&order.0, &order.1] {
                    let t = tau_no_vs
                        .get(id)
                        .ok_or_else(|| PolicyError(format!("no alarm-vs-none threshold for `{id}`")))?;
                    check_tau(*t)?;
                }
                Ok(())
            }
        }
    }

    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Never => "never",
            Policy::AlwaysAtStart => "always_at_start",
            Policy::Basic { .. } => "basic",
            Policy::Delayed { .. } => "delayed",
            Policy::Intervals { .. } => "intervals",
            Policy::Hierarchical { .. } => "hierarchical",
        }
    }

    pub fn decide(&self, series: &ProbabilitySeries) -> AlarmDecision {
        let probs = series.probs.as_slice();
        let single = |k: Option<usize>| k.map_or(AlarmDecision::NoAlarm, AlarmDecision::fired);
        match self {
            Policy::Never => AlarmDecision::NoAlarm,
            Policy::AlwaysAtStart => single((!probs.is_empty()).then_some(1)),
            Policy::Basic { tau } => single(first_basic(probs, *tau)),
            Policy::Delayed { tau, kappa } => single(first_delayed(probs, *tau, *kappa)),
            Policy::Intervals { splits, taus, kappa } => single(first_intervals(probs, splits, taus, *kappa)),
            Policy::Hierarchical { tau_no_vs, tau_pairwise, order } => {
                let low = tau_no_vs.get(&order.0).copied().unwrap_or(1.0);
                let high = tau_no_vs.get(&order.1).copied().unwrap_or(1.0);
                match first_hierarchical(probs, low, high, *tau_pairwise) {
                    Some((Escalation::Low, k)) => AlarmDecision::fired_with(order.0.clone(), k),
                    Some((Escalation::High, k)) => AlarmDecision::fired_with(order.1.clone(), k),
                    None => AlarmDecision::NoAlarm,
                }
            }
        }
    }
}

/// First `k` (1-based) with `probs[k-1] > tau`.
pub fn first_basic(probs: &[f64], tau: f64) -> Option<usize> {
    probs.iter().position(|p| *p > tau).map(|i| i + 1)
}

/// First `k` ending a run of `kappa` consecutive exceedances of `tau`.
pub fn first_delayed(probs: &[f64], tau: f64, kappa: usize) -> Option<usize> {
    let mut run = 0;
    for (i, p) in probs.iter().enumerate() {
        run = if *p > tau { run + 1 } else { 0 };
        if run >= kappa {
            return Some(i + 1);
        }
    }
    None
}

/// Threshold in force at prefix length `k`.
pub fn interval_threshold(splits: &[usize], taus: &[f64], k: usize) -> f64 {
    let i = splits.partition_point(|s| *s <= k);
    taus[i.saturating_sub(1)]
}

/// Like [`first_delayed`], each position judged against its own interval's
/// threshold.
pub fn first_intervals(probs: &[f64], splits: &[usize], taus: &[f64], kappa: usize) -> Option<usize> {
    let mut run = 0;
    for (i, p) in probs.iter().enumerate() {
        let k = i + 1;
        run = if *p > interval_threshold(splits, taus, k) { run + 1 } else { 0 };
        if run >= kappa {
            return Some(k);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Escalation {
    Low,
    High,
}

/// Hierarchical rule at the first prefix exceeding either alarm-vs-none
/// threshold: exactly one exceeded fires that alarm; both exceeded fires the
/// low alarm up to `tau_pairwise` and the high alarm above it.
pub fn first_hierarchical(
    probs: &[f64],
    tau_low: f64,
    tau_high: f64,
    tau_pairwise: f64,
) -> Option<(Escalation, usize)> {
    probs.iter().enumerate().find_map(|(i, &p)| {
        let choice = match (p > tau_low, p > tau_high) {
            (false, false) => return None,
            (true, false) => Escalation::Low,
            (false, true) => Escalation::High,
            (true, true) if p <= tau_pairwise => Escalation::Low,
            (true, true) => Escalation::High,
        };
        Some((choice, i + 1))
    })
}

pub fn decide_basic(series: &ProbabilitySeries, tau: f64) -> AlarmDecision {
    Policy::Basic { tau }.decide(series)
}

pub fn decide_delayed(series: &ProbabilitySeries, tau: f64, kappa: usize) -> AlarmDecision {
    Policy::Delayed { tau, kappa }.decide(series)
}

pub fn decide_intervals(series: &ProbabilitySeries, splits: &[usize], taus: &[f64], kappa: usize) -> AlarmDecision {
    first_intervals(&series.probs, splits, taus, kappa).map_or(AlarmDecision::NoAlarm, AlarmDecision::fired)
}

pub fn decide_hierarchical(series: &ProbabilitySeries, policy: &Policy) -> AlarmDecision {
    policy.decide(series)
}

/// One decision per case, keyed by case id.
pub fn apply_policy(series: &[ProbabilitySeries], policy: &Policy) -> BTreeMap<String, AlarmDecision> {
    series.iter().map(|s| (s.case_id.clone(), policy.decide(s))).collect()
}

/// Writes decisions as CSV `case_id,alarm_id,fired_at`; unfired cases have
/// empty fields, unnamed firings use `default_alarm`.
pub fn write_decisions<W: std::io::Write>(
    decisions: &BTreeMap<String, AlarmDecision>,
    default_alarm: Option<&AlarmId>,
    sink: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["case_id", "alarm_id", "fired_at"])?;
    for (case_id, d) in decisions {
        let (alarm, at) = match d {
            AlarmDecision::NoAlarm => (String::new(), String::new()),
            AlarmDecision::Fired { alarm, at } => {
                (alarm.as_ref().or(default_alarm).map(|a| a.0.clone()).unwrap_or_default(), at.to_string())
            }
        };
        w.write_record([case_id.as_str(), alarm.as_str(), at.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(probs: &[f64]) -> ProbabilitySeries {
        ProbabilitySeries::new("c", probs.to_vec(), true, probs.len())
    }

    #[test]
    fn basic_examples() {
        assert_eq!(decide_basic(&s(&[0.2, 0.6, 0.4]), 0.5).fired_at(), Some(2));
        assert_eq!(decide_basic(&s(&[0.01, 0.6]), 0.0).fired_at(), Some(1));
        assert_eq!(decide_basic(&s(&[0.0, 0.6]), 0.0).fired_at(), Some(2));
        assert_eq!(decide_basic(&s(&[1.0, 1.0]), 1.0), AlarmDecision::NoAlarm);
    }

    #[test]
    fn delayed_examples() {
        assert_eq!(decide_delayed(&s(&[0.9, 0.3, 0.95, 0.96]), 0.8, 2).fired_at(), Some(4));
        assert_eq!(decide_delayed(&s(&[0.1, 0.9, 0.9]), 0.8, 3), AlarmDecision::NoAlarm);
        assert_eq!(decide_delayed(&s(&[0.2, 0.6, 0.4]), 0.5, 1).fired_at(), Some(2));
    }

    #[test]
    fn interval_examples() {
        let d = decide_intervals(&s(&[0.7, 0.7, 0.7]), &[1, 3], &[0.9, 0.6], 1);
        assert_eq!(d.fired_at(), Some(3));
        assert_eq!(interval_threshold(&[1, 3, 5], &[0.1, 0.2, 0.3], 4), 0.2);
        assert_eq!(interval_threshold(&[1, 3, 5], &[0.1, 0.2, 0.3], 9), 0.3);
        // run crossing an interval boundary: each point judged by its own interval
        let d = decide_intervals(&s(&[0.5, 0.75, 0.75]), &[1, 2], &[0.4, 0.8], 2);
        assert_eq!(d, AlarmDecision::NoAlarm);
        let d = decide_intervals(&s(&[0.5, 0.85, 0.75]), &[1, 2], &[0.4, 0.8], 2);
        assert_eq!(d.fired_at(), Some(2));
    }

    fn hier() -> Policy {
        Policy::Hierarchical {
            tau_no_vs: [("a1".into(), 0.5), ("a2".into(), 0.7)].into_iter().collect(),
            tau_pairwise: 0.85,
            order: ("a1".into(), "a2".into()),
        }
    }

    #[test]
    fn hierarchical_regions() {
        let p = hier();
        assert_eq!(p.decide(&s(&[0.6])), AlarmDecision::fired_with("a1".into(), 1));
        assert_eq!(p.decide(&s(&[0.8])), AlarmDecision::fired_with("a1".into(), 1));
        assert_eq!(p.decide(&s(&[0.9])), AlarmDecision::fired_with("a2".into(), 1));
        assert_eq!(p.decide(&s(&[0.1, 0.4, 0.95])), AlarmDecision::fired_with("a2".into(), 3));
        assert_eq!(p.decide(&s(&[0.1, 0.5])), AlarmDecision::NoAlarm);
    }

    #[test]
    fn hierarchical_inverted_thresholds() {
        // only the high alarm's threshold exceeded
        let p = Policy::Hierarchical {
            tau_no_vs: [("a1".into(), 0.8), ("a2".into(), 0.3)].into_iter().collect(),
            tau_pairwise: 0.5,
            order: ("a1".into(), "a2".into()),
        };
        assert_eq!(p.decide(&s(&[0.4])), AlarmDecision::fired_with("a2".into(), 1));
        assert_eq!(p.decide(&s(&[0.9])), AlarmDecision::fired_with("a2".into(), 1));
    }

    #[test]
    fn apply_examples() {
        assert!(apply_policy(&[], &Policy::Basic { tau: 0.5 }).is_empty());
        let set = vec![
            ProbabilitySeries::new("a", vec![1.0, 1.0], true, 2),
            ProbabilitySeries::new("b", vec![0.0, 0.0], false, 2),
            ProbabilitySeries::new("c", vec![0.3, 0.99], false, 2),
        ];
        assert!(apply_policy(&set, &Policy::Basic { tau: 1.0 }).values().all(|d| !d.is_fired()));
        let oracle = &set[..2];
        let d = apply_policy(oracle, &Policy::Basic { tau: 0.5 });
        assert_eq!(d["a"].fired_at(), Some(1));
        assert_eq!(d["b"], AlarmDecision::NoAlarm);
        let always = apply_policy(&set, &Policy::AlwaysAtStart);
        assert!(always.values().all(|d| d.fired_at() == Some(1)));
    }

    #[test]
    fn validation() {
        assert!(Policy::Basic { tau: 1.2 }.validate().is_err());
        assert!(Policy::Delayed { tau: 0.5, kappa: 0 }.validate().is_err());
        assert!(Policy::Intervals { splits: vec![2], taus: vec![0.5], kappa: 1 }.validate().is_err());
        assert!(Policy::Intervals { splits: vec![1, 1], taus: vec![0.5, 0.5], kappa: 1 }.validate().is_err());
        assert!(Policy::Intervals { splits: vec![1, 3], taus: vec![0.5], kappa: 1 }.validate().is_err());
        assert!(hier().validate().is_ok());
        let json = serde_json::to_string(&hier()).unwrap();
        assert_eq!(serde_json::from_str::<Policy>(&json).unwrap(), hier());
    }

    #[test]
    fn decisions_csv() {
        let d: BTreeMap<String, AlarmDecision> =
            [("x".to_string(), AlarmDecision::fired(2)), ("y".to_string(), AlarmDecision::NoAlarm)]
                .into_iter()
                .collect();
        let mut buf = Vec::new();
        write_decisions(&d, Some(&"alarm".into()), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "case_id,alarm_id,fired_at\nx,alarm,2\ny,,\n");
    }
}
