//! Uses probabilities produced elsewhere: load an interchange file,
//! optimize a delayed policy and write per-case decisions.

use prescriptive_alarms::estimator::load_external_scores;
use prescriptive_alarms::experiment::evaluate;
use prescriptive_alarms::optimize::optimize_delayed;
use prescriptive_alarms::policy::{apply_policy, write_decisions};
use prescriptive_alarms::{MultiAlarmCostModel, SearchSpace};

const SCORES: &str = "case_id,prefix_len,probability,outcome,trace_len
c1,1,0.20,1,4
c1,2,0.70,1,4
c1,3,0.80,1,4
c2,1,0.10,0,3
c2,2,0.90,0,3
c2,3,0.15,0,3
c3,1,0.60,1,3
c3,2,0.75,1,3
c4,1,0.30,0,2
c4,2,0.35,0,2
c5,1,0.85,0,3
c5,2,0.20,0,3
c6,1,0.65,1,5
c6,2,0.70,1,5
c6,3,0.90,1,5
";

const MODEL: &str = r#"{
  "alarms": [{"id": "call", "c_in": {"family": "constant", "base": 1.0},
              "c_com": {"family": "constant", "base": 4.0}, "eff": {"kind": "linear_decay"}}],
  "c_out": {"family": "constant", "base": 10.0}
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let series = load_external_scores(SCORES.as_bytes())?;
    let model: MultiAlarmCostModel = serde_json::from_str(MODEL)?;
    let r = optimize_delayed(&series, &model, &SearchSpace::default().with_kappas(1..=3))?;
    println!("{:?} cv cost {:.3}", r.best, r.cv_mean_cost);
    let report = evaluate(&series, &model, &r.best)?;
    println!("cost {:.3} benefit {:.3} counts {:?}", report.avg_cost_per_case, report.benefit, report.counts);
    write_decisions(&apply_policy(&series, &r.best), model.default_alarm(), std::io::stdout().lock())?;
    Ok(())
}
