use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use prescriptive_alarms::cost::{
    case_cost, AlarmDecision, AlarmId, AlarmModel, CostFnSpec, EffSpec, MultiAlarmCostModel, NonMonotonicConstants,
};
use prescriptive_alarms::encoding::{fit_encoder, fit_encoder_with};
use prescriptive_alarms::estimator::{score_log, BoostedTrees, Estimator, EstimatorParams, ProbabilitySeries};
use prescriptive_alarms::eventlog::{
    prefixes, read_canonical_csv, temporal_split, truncate_log, write_canonical_csv, AttrValue, Event, EventLog, Trace,
};
use prescriptive_alarms::experiment::{baselines, evaluate, generate_synthetic_log, SyntheticLogSpec};
use prescriptive_alarms::optimize::{cv_objective, optimize_basic, tau_grid, tie_break, SearchSpace};
use prescriptive_alarms::policy::Policy;
use proptest::prelude::*;

fn t0() -> DateTime<Utc> {
    DateTime::from_timestamp(1_600_000_000, 0).unwrap()
}

/// Random labeled log: per case a start offset (minutes) and an activity list.
fn log_strategy(max_cases: usize) -> impl Strategy<Value = EventLog> {
    prop::collection::vec(
        (0i64..10_000, prop::collection::vec(0usize..6, 1..12), any::<bool>(), prop::option::of(-50.0f64..50.0)),
        5..max_cases,
    )
    .prop_map(|cases| {
        let mut log = EventLog::default();
        for (i, (start, acts, label, amount)) in cases.into_iter().enumerate() {
            let id = format!("case{i:03}");
            let events = acts
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let mut attrs = BTreeMap::new();
                    if let (0, Some(x)) = (k, amount) {
                        attrs.insert("amount".to_string(), AttrValue::Numeric((x * 8.0).round() / 8.0));
                    }
                    Event {
                        case_id: id.clone(),
                        activity: format!("act{a}"),
                        timestamp: t0() + Duration::minutes(start + 7 * k as i64),
                        resource: (k % 2 == 0).then(|| format!("r{}", a % 3)),
                        attrs,
                    }
                })
                .collect();
            log.traces.insert(id.clone(), Trace { case_id: id.clone(), events });
            log.labels.insert(id, label);
        }
        log
    })
}

fn series_strategy() -> impl Strategy<Value = ProbabilitySeries> {
    (prop::collection::vec(0u8..=20, 1..15), any::<bool>()).prop_map(|(ps, o)| {
        let n = ps.len();
        ProbabilitySeries::new("c", ps.into_iter().map(|p| p as f64 / 20.0).collect(), o, n)
    })
}

fn series_set(max: usize) -> impl Strategy<Value = Vec<ProbabilitySeries>> {
    prop::collection::vec(series_strategy(), 6..max).prop_map(|v| {
        v.into_iter().enumerate().map(|(i, s)| ProbabilitySeries { case_id: format!("c{i:03}"), ..s }).collect()
    })
}

fn model_strategy() -> impl Strategy<Value = MultiAlarmCostModel> {
    let spec = (0u8..3, 0.0f64..5.0).prop_map(|(f, b)| match f {
        0 => CostFnSpec::constant(b),
        1 => CostFnSpec::linear(b),
        _ => CostFnSpec::non_monotonic(b, NonMonotonicConstants::TRAFFIC_FINES),
    });
    let eff = prop_oneof![
        (0.0f64..=1.0).prop_map(|value| EffSpec::Constant { value }),
        Just(EffSpec::LinearDecay),
        (1u32..5, 1u32..6).prop_map(|(e, f)| EffSpec::NonMonotonic { e, f }),
    ];
    (spec.clone(), spec, eff, 0.0f64..20.0).prop_map(|(c_in, c_com, eff, c_out)| {
        MultiAlarmCostModel::single(AlarmModel { c_in, c_com, eff }, CostFnSpec::constant(c_out)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn canonical_csv_round_trip(log in log_strategy(20)) {
        let mut buf = Vec::new();
        write_canonical_csv(&log, &mut buf).unwrap();
        let back = read_canonical_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, log);
    }

    #[test]
    fn split_partitions_case_ids(log in log_strategy(40), seed in any::<u64>()) {
        let (split, m) = temporal_split(&log, seed).unwrap();
        prop_assert_eq!(m.n_train + m.n_thres + m.n_test, log.len());
        prop_assert_eq!(m.final_train + m.final_thres + m.dropped_cases, m.n_train + m.n_thres);
        let ids = |l: &EventLog| l.traces.keys().cloned().collect::<BTreeSet<_>>();
        let (a, b, c) = (ids(&split.train), ids(&split.thres), ids(&split.test));
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        prop_assert_eq!(c.len(), m.n_test);
        let all = ids(&log);
        prop_assert!(a.union(&b).chain(c.iter()).all(|id| all.contains(id)));
        // the latest-starting cases are the test cases
        let min_test = split.test.traces.values().map(|t| t.start()).min().unwrap();
        for part in [&split.train, &split.thres] {
            for t in part.traces.values() {
                prop_assert!(t.start() <= min_test);
                prop_assert!(t.events.iter().all(|e| e.timestamp < min_test));
            }
        }
    }

    #[test]
    fn truncation_bounds(log in log_strategy(30), p in 0.05f64..=1.0) {
        let original: BTreeMap<_, _> = log.traces.iter().map(|(k, t)| (k.clone(), t.len())).collect();
        let (cut, m) = truncate_log(log, p).unwrap();
        prop_assert!(cut.traces.values().all(|t| t.len() <= m));
        let full = cut.traces.iter().filter(|(k, t)| t.len() == original[*k]).count();
        prop_assert!(full as f64 >= (p * original.len() as f64 - 1e-9).ceil());
    }

    #[test]
    fn prefixes_are_heads(log in log_strategy(8), m in 1usize..15) {
        for t in log.traces.values() {
            let ps: Vec<_> = prefixes(t, m).collect();
            prop_assert_eq!(ps.len(), t.len().min(m));
            for (k, p) in ps.iter().enumerate() {
                prop_assert_eq!(*p, &t.events[..k + 1]);
            }
        }
    }

    #[test]
    fn encoding_counts_monotone_and_dimension_fixed(log in log_strategy(15), min_freq in 1usize..5) {
        let enc = fit_encoder_with(&log, min_freq);
        let count_cols: Vec<usize> = enc.columns.iter().enumerate()
            .filter(|(_, c)| c.contains('=')).map(|(i, _)| i).collect();
        for t in log.traces.values() {
            let mut prev: Option<Vec<f64>> = None;
            for p in prefixes(t, usize::MAX) {
                let v = enc.encode(p).0;
                prop_assert_eq!(v.len(), enc.columns.len());
                prop_assert_eq!(&enc.encode(p).0, &v);
                if let Some(prev) = &prev {
                    for &c in &count_cols {
                        prop_assert!(prev[c] <= v[c]);
                    }
                }
                prev = Some(v);
            }
        }
        let mut unseen = log.traces.values().next().unwrap().events[0].clone();
        unseen.activity = "never-seen".into();
        prop_assert_eq!(enc.encode(&[unseen]).0.len(), enc.columns.len());
    }

    #[test]
    fn case_cost_non_negative(s in series_strategy(), m in model_strategy(), at in 0usize..15) {
        let k = at.min(s.trace_len);
        let d = if k == 0 { AlarmDecision::NoAlarm } else { AlarmDecision::fired(k) };
        prop_assert!(case_cost(s.trace_len, s.outcome, &d, &m).unwrap() >= 0.0);
    }

    #[test]
    fn effectiveness_extremes(c_in in 0.0f64..5.0, c_out in 0.0f64..20.0, len in 1usize..15, at in 1usize..15) {
        let k = at.min(len);
        let with_eff = |value| MultiAlarmCostModel::single(
            AlarmModel { c_in: CostFnSpec::linear(c_in), c_com: CostFnSpec::constant(0.0), eff: EffSpec::Constant { value } },
            CostFnSpec::constant(c_out),
        ).unwrap();
        let c_in_k = c_in * k as f64 / len as f64;
        prop_assert_eq!(case_cost(len, true, &AlarmDecision::fired(k), &with_eff(1.0)).unwrap(), c_in_k);
        prop_assert_eq!(case_cost(len, true, &AlarmDecision::fired(k), &with_eff(0.0)).unwrap(), c_in_k + c_out);
    }

    #[test]
    fn basic_firing_monotone_in_tau(s in series_strategy(), a in 0u8..=20, b in 0u8..=20) {
        let (lo, hi) = (a.min(b) as f64 / 20.0, a.max(b) as f64 / 20.0);
        let at_lo = Policy::Basic { tau: lo }.decide(&s).fired_at();
        let at_hi = Policy::Basic { tau: hi }.decide(&s).fired_at();
        if let Some(h) = at_hi {
            prop_assert!(at_lo.is_some_and(|l| l <= h));
        }
    }

    #[test]
    fn fires_at_most_once_within_trace(s in series_strategy(), tau in 0.0f64..=1.0, kappa in 1usize..5) {
        let policies = [
            Policy::Never,
            Policy::AlwaysAtStart,
            Policy::Basic { tau },
            Policy::Delayed { tau, kappa },
            Policy::Intervals { splits: vec![1, 3], taus: vec![tau, 1.0 - tau], kappa },
        ];
        for p in policies {
            if let Some(k) = p.decide(&s).fired_at() {
                prop_assert!(k >= 1 && k <= s.probs.len());
            }
        }
    }

    #[test]
    fn tie_break_is_a_strict_total_order(t1 in 0u8..=20, t2 in 0u8..=20, k1 in 1usize..4, k2 in 1usize..4, f1 in 0u8..5, f2 in 0u8..5) {
        let make = |f: u8, t: u8, k: usize| {
            let tau = t as f64 / 20.0;
            match f {
                0 => Policy::Basic { tau },
                1 => Policy::Delayed { tau, kappa: k },
                2 => Policy::Intervals { splits: vec![1, k + 1], taus: vec![tau, 0.5], kappa: k },
                3 => Policy::Never,
                _ => Policy::AlwaysAtStart,
            }
        };
        let (a, b) = (make(f1, t1, k1), make(f2, t2, k2));
        let ab = tie_break(&a, &b);
        prop_assert_eq!(ab, tie_break(&b, &a).reverse());
        prop_assert_eq!(ab == Ordering::Equal, a == b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn grid_search_is_exact_argmin(series in series_set(30), m in model_strategy(), seed in any::<u64>()) {
        let space = SearchSpace::default().with_tau_grid(tau_grid(20)).with_seed(seed);
        let r = optimize_basic(&series, &m, &space).unwrap();
        for tau in tau_grid(20) {
            let cost = cv_objective(&series, &m, &Policy::Basic { tau }, seed).unwrap();
            prop_assert!(r.cv_mean_cost <= cost);
        }
        prop_assert_eq!(r.cv_mean_cost, cv_objective(&series, &m, &r.best, seed).unwrap());
        prop_assert_eq!(optimize_basic(&series, &m, &space).unwrap(), r);
    }

    #[test]
    fn evaluation_invariants(series in series_set(30), m in model_strategy(), tau in 0.0f64..=1.0) {
        let never = evaluate(&series, &m, &Policy::Never).unwrap();
        prop_assert_eq!(never.benefit, 0.0);
        let r = evaluate(&series, &m, &Policy::Basic { tau }).unwrap();
        prop_assert!(r.avg_cost_per_case >= 0.0);
        prop_assert!(r.benefit <= never.avg_cost_per_case);
        prop_assert_eq!(r.counts.total(), series.len());
    }

    #[test]
    fn optimized_beats_baselines_on_thresholding_set(series in series_set(30), m in model_strategy(), seed in any::<u64>()) {
        let space = SearchSpace { include_always_alarm: true, ..SearchSpace::default().with_seed(seed) };
        let best = optimize_basic(&series, &m, &space).unwrap().cv_mean_cost;
        prop_assert!(baselines(&series, &m).is_ok());
        for p in [Policy::Never, Policy::AlwaysAtStart, Policy::Basic { tau: 0.5 }] {
            let cost = cv_objective(&series, &m, &p, seed).unwrap();
            prop_assert!(best <= cost);
        }
    }
}

#[test]
fn estimator_probabilities_bounded_and_deterministic() {
    let spec = SyntheticLogSpec { n_cases: 200, seed: 5, ..Default::default() };
    let synth = generate_synthetic_log(&spec).unwrap();
    let enc = fit_encoder(&synth.log);
    let (xs, ys) = prescriptive_alarms::estimator::training_set(&synth.log, &enc, 10);
    let params = EstimatorParams { n_rounds: 15, ..Default::default() };
    let a = Estimator::Boosted(BoostedTrees::fit(&xs, &ys, params).unwrap());
    let b = Estimator::Boosted(BoostedTrees::fit(&xs, &ys, params).unwrap());
    assert_eq!(a, b);
    for est in [&a, &Estimator::Constant { p: 0.3 }, &Estimator::Oracle] {
        for s in score_log(est, &synth.log, &enc, 10).unwrap() {
            assert!(s.probs.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}

#[test]
fn hierarchical_with_shared_model_costs_like_basic() {
    let alarm =
        AlarmModel { c_in: CostFnSpec::constant(1.0), c_com: CostFnSpec::constant(2.0), eff: EffSpec::LinearDecay };
    let model = MultiAlarmCostModel::new(
        vec![(AlarmId::new("a1"), alarm), (AlarmId::new("a2"), alarm)],
        CostFnSpec::constant(8.0),
    )
    .unwrap();
    let single = model.restricted_to(&AlarmId::new("a1")).unwrap();
    let series = prescriptive_alarms::experiment::fixtures::stable_series(80, 3);
    for (t1, t2, tp) in [(0.3, 0.6, 0.7), (0.8, 0.55, 0.2), (0.5, 0.5, 1.0)] {
        let h = Policy::Hierarchical {
            tau_no_vs: [(AlarmId::new("a1"), t1), (AlarmId::new("a2"), t2)].into_iter().collect(),
            tau_pairwise: tp,
            order: (AlarmId::new("a1"), AlarmId::new("a2")),
        };
        let basic = Policy::Basic { tau: f64::min(t1, t2) };
        assert_eq!(
            evaluate(&series, &model, &h).unwrap().total_cost,
            evaluate(&series, &single, &basic).unwrap().total_cost
        );
    }
}
