//! Separate thresholds for early and late prefixes when intervening gets
//! cheaper after the first few events.

use prescriptive_alarms::cost::NonMonotonicConstants;
use prescriptive_alarms::experiment::{generate_synthetic_log, SyntheticLogSpec};
use prescriptive_alarms::optimize::{optimize_intervals, tau_grid};
use prescriptive_alarms::{AlarmModel, CostFnSpec, EffSpec, MultiAlarmCostModel, SearchSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticLogSpec { n_cases: 400, signal: 0.4, seed: 3, ..Default::default() };
    let series = generate_synthetic_log(&spec)?.posterior;
    let k = NonMonotonicConstants { a: 3, b: 5, c: 2, d: 5, e: 3, f: 4 };
    let model = MultiAlarmCostModel::single(
        AlarmModel {
            c_in: CostFnSpec::non_monotonic(2.0, k),
            c_com: CostFnSpec::constant(3.0),
            eff: EffSpec::LinearDecay,
        },
        CostFnSpec::constant(10.0),
    )?;
    let space = SearchSpace::default().with_seed(3).with_tau_grid(tau_grid(20));
    for n in 1..=3 {
        let r = optimize_intervals(&series, &model, &space, n)?;
        println!("{n} interval(s): {:?} cv cost {:.4}", r.best, r.cv_mean_cost);
    }
    let fixed = SearchSpace { fixed_splits: Some(vec![1, 2, 3]), ..space };
    let r = optimize_intervals(&series, &model, &fixed, 3)?;
    println!("splits fixed at 1,2,3: {:?} cv cost {:.4}", r.best, r.cv_mean_cost);
    Ok(())
}
