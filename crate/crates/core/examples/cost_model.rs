//! Builds single- and two-alarm cost models and prices every outcome cell.

use prescriptive_alarms::cost::{case_cost, AlarmDecision, AlarmId, Factors, NonMonotonicConstants};
use prescriptive_alarms::{AlarmModel, CostFnSpec, EffSpec, MultiAlarmCostModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alarm = AlarmModel {
        c_in: CostFnSpec::constant(1.0),
        c_com: CostFnSpec::constant(2.0),
        eff: EffSpec::Constant { value: 0.5 },
    };
    let model = MultiAlarmCostModel::single(alarm, CostFnSpec::constant(10.0))?;
    let fired = AlarmDecision::fired(2);
    println!("single alarm, trace of 5 events, alarm after event 2");
    println!("  undesired & fired   {}", case_cost(5, true, &fired, &model)?);
    println!("  desired   & fired   {}", case_cost(5, false, &fired, &model)?);
    println!("  undesired & silent  {}", case_cost(5, true, &AlarmDecision::NoAlarm, &model)?);
    println!("  desired   & silent  {}", case_cost(5, false, &AlarmDecision::NoAlarm, &model)?);

    // intervention cost that first drops and then flattens out
    let shaped = AlarmModel {
        c_in: CostFnSpec::non_monotonic(3.0, NonMonotonicConstants::TRAFFIC_FINES),
        c_com: CostFnSpec::linear(2.0),
        eff: EffSpec::LinearDecay,
    };
    let two = MultiAlarmCostModel::with_factor_alarms(
        shaped,
        CostFnSpec::constant(10.0),
        &[Factors::IDENTITY, Factors::ALARM_2],
    )?;
    println!("\ntwo alarms, undesired trace of 6 events");
    for k in 1..=6 {
        let a1 = case_cost(6, true, &AlarmDecision::fired_with(AlarmId::new("a1"), k), &two)?;
        let a2 = case_cost(6, true, &AlarmDecision::fired_with(AlarmId::new("a2"), k), &two)?;
        println!("  fire at {k}: a1 {a1:.3}  a2 {a2:.3}");
    }
    println!("\nJSON form:\n{}", serde_json::to_string_pretty(&two)?);
    Ok(())
}
