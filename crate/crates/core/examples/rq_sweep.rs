//! Runs one research-question sweep on a synthetic log and prints the
//! result table as CSV. Pass the question as the first argument (default RQ1).

use prescriptive_alarms::experiment::{
    run_rq_suite, write_rq_csv, DatasetSource, Rq, RqConfig, Scoring, SyntheticLogSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rq: Rq = std::env::args().nth(1).unwrap_or_else(|| "RQ1".into()).parse()?;
    let cfg = RqConfig {
        rq,
        dataset: DatasetSource::Synthetic {
            spec: SyntheticLogSpec { n_cases: 800, signal: 0.7, seed: 2, ..Default::default() },
            scoring: Scoring::Posterior,
        },
        seed: 2,
        search: None,
        constants: None,
        families: None,
    };
    let table = run_rq_suite(&cfg)?;
    eprintln!("{}: {} cost configurations, {} rows", rq.label(), table.n_cells, table.rows.len());
    write_rq_csv(&table, std::io::stdout().lock())?;
    Ok(())
}
