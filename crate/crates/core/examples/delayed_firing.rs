//! Requiring several consecutive exceedances filters out one-event spikes
//! of an unstable estimator.

use prescriptive_alarms::experiment::fixtures::spike_series;
use prescriptive_alarms::optimize::optimize_delayed;
use prescriptive_alarms::{AlarmModel, CostFnSpec, EffSpec, MultiAlarmCostModel, SearchSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = spike_series(400, 7);
    let model = MultiAlarmCostModel::single(
        AlarmModel {
            c_in: CostFnSpec::constant(1.0),
            c_com: CostFnSpec::constant(5.0),
            eff: EffSpec::Constant { value: 1.0 },
        },
        CostFnSpec::constant(10.0),
    )?;
    for max_kappa in [1, 2, 4, 7] {
        let space = SearchSpace::default().with_seed(7).with_kappas(1..=max_kappa);
        let r = optimize_delayed(&series, &model, &space)?;
        println!(
            "kappa <= {max_kappa}: {:?} cv cost {:.4} ({} candidates)",
            r.best, r.cv_mean_cost, r.candidates_evaluated
        );
    }
    Ok(())
}
