//! Fits a single alarm threshold by cross-validated grid search on a
//! synthetic log and compares it against the baselines on the test split.

use prescriptive_alarms::eventlog::temporal_split;
use prescriptive_alarms::experiment::{
    baselines, evaluate, generate_synthetic_log, score_split, Scoring, SyntheticLogSpec,
};
use prescriptive_alarms::optimize::optimize_basic;
use prescriptive_alarms::{AlarmModel, CostFnSpec, EffSpec, MultiAlarmCostModel, SearchSpace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth =
        generate_synthetic_log(&SyntheticLogSpec { n_cases: 1000, signal: 0.7, seed: 1, ..Default::default() })?;
    let (split, manifest) = temporal_split(&synth.log, 1)?;
    println!("split: {} train / {} thres / {} test", manifest.final_train, manifest.final_thres, manifest.final_test);
    let (thres, test) = score_split(&split, &Scoring::Posterior, Some(&synth.posterior))?;

    let space = SearchSpace { include_always_alarm: true, ..SearchSpace::default().with_seed(1) };
    for c_out in [1.0, 3.0, 10.0, 20.0] {
        let model = MultiAlarmCostModel::single(
            AlarmModel { c_in: CostFnSpec::constant(1.0), c_com: CostFnSpec::constant(0.0), eff: EffSpec::LinearDecay },
            CostFnSpec::constant(c_out),
        )?;
        let fitted = optimize_basic(&thres, &model, &space)?;
        let report = evaluate(&test, &model, &fitted.best)?;
        println!(
            "c_out {c_out:>4}: {:?} cv {:.3} | test cost {:.3} benefit {:.3} f {:.3}",
            fitted.best, fitted.cv_mean_cost, report.avg_cost_per_case, report.benefit, report.f_score
        );
        for (name, b) in baselines(&test, &model)? {
            println!("{:>14} cost {:.3}", name, b.avg_cost_per_case);
        }
    }
    Ok(())
}
