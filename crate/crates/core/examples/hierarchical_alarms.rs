//! Two alarm types: a plain one and one with pricier intervention but half
//! the compensation cost. Hierarchical thresholds pick the type per prefix.

use prescriptive_alarms::cost::Factors;
use prescriptive_alarms::experiment::{evaluate, fixtures::high_fp_series};
use prescriptive_alarms::optimize::{optimize_basic, optimize_hierarchical};
use prescriptive_alarms::{AlarmModel, CostFnSpec, EffSpec, MultiAlarmCostModel, SearchSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let thres = high_fp_series(1000, 1);
    let test = high_fp_series(1000, 2);
    let space = SearchSpace::default().with_seed(1);
    for c_com in [2.0, 10.0, 20.0] {
        let base = AlarmModel {
            c_in: CostFnSpec::constant(1.0),
            c_com: CostFnSpec::constant(c_com),
            eff: EffSpec::Constant { value: 1.0 },
        };
        let model = MultiAlarmCostModel::with_factor_alarms(
            base,
            CostFnSpec::constant(10.0),
            &[Factors::IDENTITY, Factors::ALARM_2],
        )?;
        let h = optimize_hierarchical(&thres, &model, &space)?;
        let report = evaluate(&test, &model, &h.best)?;
        println!("c_com {c_com}: hierarchical test cost {:.4} {:?}", report.avg_cost_per_case, report.alarms_per_type);
        for (id, _) in &model.alarms {
            let sub = model.restricted_to(id)?;
            let r = optimize_basic(&thres, &sub, &space)?;
            println!("  single {id}: test cost {:.4}", evaluate(&test, &sub, &r.best)?.avg_cost_per_case);
        }
    }
    Ok(())
}
