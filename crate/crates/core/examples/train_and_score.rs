//! Parses a CSV log, labels and splits it, trains boosted trees on prefix
//! encodings and writes the score interchange file.

use prescriptive_alarms::encoding::fit_encoder;
use prescriptive_alarms::estimator::{fit, score_log, training_set, write_scores, EstimatorParams};
use prescriptive_alarms::eventlog::{parse_event_log, temporal_split, write_canonical_csv, LabelRule, Schema};
use prescriptive_alarms::experiment::{generate_synthetic_log, SyntheticLogSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // round-trip a synthetic log through CSV so parsing is exercised
    let synth = generate_synthetic_log(&SyntheticLogSpec { n_cases: 600, seed: 5, ..Default::default() })?;
    let mut csv = Vec::new();
    write_canonical_csv(&synth.log, &mut csv)?;
    let schema = Schema {
        label: Some(LabelRule::Column { column: "label".into(), positive: None }),
        ..Schema::canonical(false)
    };
    let log = parse_event_log(csv.as_slice(), &schema)?;

    let (split, _) = temporal_split(&log, 5)?;
    let encoder = fit_encoder(&split.train);
    println!("{} features: {:?}", encoder.columns.len(), &encoder.columns[..encoder.columns.len().min(8)]);
    let max_len = split.train.max_trace_len();
    let (xs, ys) = training_set(&split.train, &encoder, max_len);
    let est = fit(&xs, &ys, EstimatorParams { n_rounds: 50, ..Default::default() })?;
    if let prescriptive_alarms::estimator::Estimator::Boosted(m) = &est {
        println!(
            "log-loss {:.4} -> {:.4} over {} rounds",
            m.train_loss[0],
            m.train_loss.last().unwrap(),
            m.trees.len()
        );
    }
    let test = score_log(&est, &split.test, &encoder, max_len)?;
    let mut out = Vec::new();
    write_scores(&test[..3], &mut out)?;
    print!("{}", String::from_utf8(out)?);
    Ok(())
}
