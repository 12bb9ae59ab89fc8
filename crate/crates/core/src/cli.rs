//! Command-line pipeline: split, score, optimize, evaluate, rq, synth.
//!
//! Each command reads an optional JSON config (`--config`), lets flags
//! override its keys, writes its outputs under `--out-dir`, records the
//! resolved config and seed next to them, and prints a one-line JSON
//! summary on stdout. Exit codes: 0 success, 2 config/validation error,
//! 3 data error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cost::MultiAlarmCostModel;
use crate::encoding::fit_encoder;
use crate::estimator::{
    self, load_external_scores, score_log, write_scores, Estimator, EstimatorError, EstimatorParams, ProbabilitySeries,
};
use crate::eventlog::{
    parse_event_log, read_canonical_csv, temporal_split, truncate_log, write_canonical_csv, EventLog, LogError, Schema,
};
use crate::experiment::{
    evaluate, generate_synthetic_log, run_rq_suite, write_rq_csv, DatasetSource, ExperimentError, Rq, RqConfig,
    Scoring, SyntheticLogSpec, BASELINE_ALWAYS, BASELINE_NEVER, BASELINE_TAU_HALF,
};
use crate::optimize::{optimize, OptimizationResult, OptimizeError, PolicyFamily, SearchSpace};
use crate::policy::{apply_policy, write_decisions, Policy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ppm-alarms", version, about = "Cost-optimal alarms for running business-process cases")]
pub struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Temporal train / thresholding / test split of an event log.
    Split(SplitArgs),
    /// Train the outcome estimator and score the thresholding and test logs.
    Score(ScoreArgs),
    /// Fit an alarm policy on thresholding-set scores.
    Optimize(OptimizeArgs),
    /// Apply a policy to test-set scores and report cost, benefit and f-score.
    Evaluate(EvaluateArgs),
    /// Run one research-question cost sweep.
    Rq(RqArgs),
    /// Generate a synthetic labeled log with exact posterior scores.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// JSON schema describing the log's columns and labeling rule.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Truncate traces to this percentile of case lengths before splitting.
    #[arg(long)]
    pub truncate_percentile: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Directory holding train.csv, thres.csv and test.csv (defaults to --out-dir).
    #[arg(long)]
    pub split_dir: Option<PathBuf>,
    /// Use the true outcome as the probability.
    #[arg(long)]
    pub oracle: bool,
    /// Externally computed thresholding-set scores; bypasses training.
    #[arg(long, requires = "external_test")]
    pub external_thres: Option<PathBuf>,
    #[arg(long, requires = "external_thres")]
    pub external_test: Option<PathBuf>,
    #[arg(long)]
    pub n_rounds: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum FamilyArg {
    Basic,
    Delayed,
    Intervals,
    Hierarchical,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Score file of the thresholding log (defaults to <out-dir>/scores_thres.csv).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// JSON cost-model file.
    #[arg(long)]
    pub cost_model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub n_intervals: Option<usize>,
    /// Largest firing delay searched (delayed and interval families).
    #[arg(long)]
    pub max_kappa: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Score file of the test log (defaults to <out-dir>/scores_test.csv).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub cost_model: Option<PathBuf>,
    /// Policy JSON, or an optimize result file (defaults to <out-dir>/optimize_result.json).
    #[arg(long, conflicts_with = "baseline")]
    pub policy: Option<PathBuf>,
    /// Evaluate a baseline instead: never, always_at_start or tau_0.5.
    #[arg(long)]
    pub baseline: Option<String>,
}

#[derive(Debug, Args)]
pub struct RqArgs {
    /// RQ1 .. RQ8.
    #[arg(long)]
    pub rq: Option<String>,
    /// Thresholding-set score file; with --test, overrides the config's dataset.
    #[arg(long, requires = "test")]
    pub thres: Option<PathBuf>,
    #[arg(long, requires = "thres")]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_cases: Option<usize>,
    #[arg(long)]
    pub class_ratio: Option<f64>,
    #[arg(long)]
    pub signal: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) => m,
        }
    }
}

impl From<LogError> for CliError {
    fn from(e: LogError) -> Self {
        match e {
            LogError::InvalidArgument(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::InvalidParams(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::TooFewCases(_) => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Log(e) => e.into(),
            ExperimentError::Estimator(e) => e.into(),
            ExperimentError::Optimize(e) => e.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

type CmdResult = Result<Value, CliError>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(stdout, "{}", e.render()) } else { write!(stderr, "{}", e.render()) };
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(summary) => {
            let _ = writeln!(stdout, "{summary}");
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", cli.out_dir.display())))?;
    match &cli.command {
        Command::Split(a) => cmd_split(cli, a),
        Command::Score(a) => cmd_score(cli, a),
        Command::Optimize(a) => cmd_optimize(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::Rq(a) => cmd_rq(cli, a),
        Command::Synth(a) => cmd_synth(cli, a),
    }
}

fn open(path: &Path, what: &str) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Config(format!("cannot open {what} {}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    serde_json::from_reader(open(path, what)?)
        .map_err(|e| CliError::Config(format!("invalid {what} {}: {e}", path.display())))
}

fn load_config<T: DeserializeOwned + Default>(cli: &Cli) -> Result<T, CliError> {
    match &cli.config {
        Some(p) => read_json(p, "config file"),
        None => Ok(T::default()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn finish(path: &Path, w: impl FnOnce(&mut BufWriter<File>) -> Result<(), String>) -> Result<(), CliError> {
    let mut f = create(path)?;
    w(&mut f).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    f.flush().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn require(path: Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
    path.ok_or_else(|| CliError::Config(format!("missing `{key}` (flag or config key)")))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub log: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub truncate_percentile: Option<f64>,
    pub seed: u64,
}

fn load_log(path: &Path, schema: &Schema) -> Result<EventLog, CliError> {
    Ok(parse_event_log(open(path, "event log")?, schema)?)
}

pub fn cmd_split(cli: &Cli, a: &SplitArgs) -> CmdResult {
    let mut cfg: SplitConfig = load_config(cli)?;
    cfg.log = a.log.clone().or(cfg.log);
    cfg.schema = a.schema.clone().or(cfg.schema);
    cfg.truncate_percentile = a.truncate_percentile.or(cfg.truncate_percentile);
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    let schema_path = require(cfg.schema.clone(), "schema")?;
    let log_path = require(cfg.log.clone(), "log")?;
    let schema: Schema = read_json(&schema_path, "schema file")?;
    if schema.label.is_none() {
        return Err(CliError::Config(format!("schema {} has no label rule", schema_path.display())));
    }
    let mut log = load_log(&log_path, &schema)?;
    let mut truncated_to = None;
    if let Some(p) = cfg.truncate_percentile {
        let (l, len) = truncate_log(log, p)?;
        log = l;
        truncated_to = Some(len);
    }
    let (split, manifest) = temporal_split(&log, cfg.seed)?;
    for (name, part) in [("train", &split.train), ("thres", &split.thres), ("test", &split.test)] {
        let path = cli.out_dir.join(format!("{name}.csv"));
        let mut w = create(&path)?;
        write_canonical_csv(part, &mut w)?;
        w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    }
    let manifest_value = json!({
        "command": "split",
        "seed": cfg.seed,
        "config": cfg,
        "truncated_to": truncated_to,
        "manifest": manifest,
    });
    write_json(&cli.out_dir.join("split_manifest.json"), &manifest_value)?;
    Ok(json!({
        "command": "split",
        "seed": cfg.seed,
        "train": manifest.final_train,
        "thres": manifest.final_thres,
        "test": manifest.final_test,
        "dropped_events": manifest.dropped_events,
    }))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub split_dir: Option<PathBuf>,
    pub oracle: bool,
    pub external_thres: Option<PathBuf>,
    pub external_test: Option<PathBuf>,
    pub params: EstimatorParams,
    /// Longest prefix scored; defaults to the longest training trace.
    pub max_prefix_len: Option<usize>,
    pub min_frequency: Option<usize>,
}

fn write_score_file(path: &Path, series: &[ProbabilitySeries]) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_scores(series, &mut w)?;
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

fn read_scores(path: &Path) -> Result<Vec<ProbabilitySeries>, CliError> {
    load_external_scores(open(path, "score file")?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn cmd_score(cli: &Cli, a: &ScoreArgs) -> CmdResult {
    let mut cfg: ScoreConfig = load_config(cli)?;
    cfg.split_dir = a.split_dir.clone().or(cfg.split_dir);
    cfg.oracle |= a.oracle;
    cfg.external_thres = a.external_thres.clone().or(cfg.external_thres);
    cfg.external_test = a.external_test.clone().or(cfg.external_test);
    if let Some(n) = a.n_rounds {
        cfg.params.n_rounds = n;
    }
    if let Some(d) = a.max_depth {
        cfg.params.max_depth = d;
    }
    if let Some(lr) = a.learning_rate {
        cfg.params.learning_rate = lr;
    }
    if let Some(seed) = cli.seed {
        cfg.params.seed = seed;
    }
    cfg.params.validate()?;
    let thres_out = cli.out_dir.join("scores_thres.csv");
    let test_out = cli.out_dir.join("scores_test.csv");

    let (thres, test, estimator_kind) = match (&cfg.external_thres, &cfg.external_test) {
        (Some(t), Some(s)) => (read_scores(t)?, read_scores(s)?, "external"),
        (None, None) => {
            let dir = cfg.split_dir.clone().unwrap_or_else(|| cli.out_dir.clone());
            let read = |name: &str| -> Result<EventLog, CliError> {
                Ok(read_canonical_csv(open(&dir.join(format!("{name}.csv")), "split file")?)?)
            };
            let (train, thres_log, test_log) = (read("train")?, read("thres")?, read("test")?);
            let encoder = match cfg.min_frequency {
                Some(f) => crate::encoding::fit_encoder_with(&train, f),
                None => fit_encoder(&train),
            };
            let max_len = cfg.max_prefix_len.unwrap_or_else(|| train.max_trace_len());
            let est = if cfg.oracle {
                Estimator::Oracle
            } else {
                let (xs, ys) = estimator::training_set(&train, &encoder, max_len);
                estimator::fit(&xs, &ys, cfg.params)?
            };
            write_json(
                &cli.out_dir.join("model.json"),
                &json!({ "command": "score", "seed": cfg.params.seed, "config": cfg, "encoder": encoder, "estimator": est }),
            )?;
            let kind = if cfg.oracle { "oracle" } else { "boosted" };
            (score_log(&est, &thres_log, &encoder, max_len)?, score_log(&est, &test_log, &encoder, max_len)?, kind)
        }
        _ => return Err(CliError::Config("external_thres and external_test must be given together".into())),
    };
    write_score_file(&thres_out, &thres)?;
    write_score_file(&test_out, &test)?;
    write_json(
        &cli.out_dir.join("score_run.json"),
        &json!({ "command": "score", "seed": cfg.params.seed, "estimator": estimator_kind, "config": cfg }),
    )?;
    Ok(json!({
        "command": "score",
        "seed": cfg.params.seed,
        "estimator": estimator_kind,
        "thres_cases": thres.len(),
        "test_cases": test.len(),
    }))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub scores: Option<PathBuf>,
    pub cost_model: Option<PathBuf>,
    pub family: Option<PolicyFamily>,
    pub search: SearchSpace,
}

fn load_model(path: &Path) -> Result<MultiAlarmCostModel, CliError> {
    read_json(path, "cost model")
}

pub fn cmd_optimize(cli: &Cli, a: &OptimizeArgs) -> CmdResult {
    let mut cfg: OptimizeConfig = load_config(cli)?;
    cfg.scores = Some(a.scores.clone().or(cfg.scores).unwrap_or_else(|| cli.out_dir.join("scores_thres.csv")));
    cfg.cost_model = a.cost_model.clone().or(cfg.cost_model);
    if let Some(f) = a.family {
        cfg.family = Some(match f {
            FamilyArg::Basic => PolicyFamily::Basic,
            FamilyArg::Delayed => PolicyFamily::Delayed,
            FamilyArg::Hierarchical => PolicyFamily::Hierarchical,
            FamilyArg::Intervals => PolicyFamily::Intervals { n_intervals: a.n_intervals.unwrap_or(2) },
        });
    } else if let (Some(n), Some(PolicyFamily::Intervals { .. })) = (a.n_intervals, cfg.family) {
        cfg.family = Some(PolicyFamily::Intervals { n_intervals: n });
    }
    let family = cfg.family.get_or_insert(PolicyFamily::Basic);
    let family = *family;
    if let Some(k) = a.max_kappa {
        cfg.search.kappa_grid = (1..=k).collect();
    }
    if let Some(seed) = cli.seed {
        cfg.search.cv_seed = seed;
    }
    let model = load_model(&require(cfg.cost_model.clone(), "cost_model")?)?;
    let series = read_scores(cfg.scores.as_deref().expect("defaulted above"))?;
    let result = optimize(&series, &model, &cfg.search, family)?;
    write_json(
        &cli.out_dir.join("optimize_result.json"),
        &json!({ "command": "optimize", "seed": cfg.search.cv_seed, "config": cfg, "result": result }),
    )?;
    Ok(json!({
        "command": "optimize",
        "seed": cfg.search.cv_seed,
        "policy": result.best,
        "cv_mean_cost": result.cv_mean_cost,
        "candidates_evaluated": result.candidates_evaluated,
    }))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub scores: Option<PathBuf>,
    pub cost_model: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub baseline: Option<String>,
}

fn load_policy(path: &Path) -> Result<Policy, CliError> {
    let v: Value = read_json(path, "policy file")?;
    let policy = match v.get("result") {
        Some(r) => serde_json::from_value::<OptimizationResult>(r.clone()).map(|r| r.best),
        None => serde_json::from_value::<Policy>(v),
    };
    policy.map_err(|e| CliError::Config(format!("invalid policy file {}: {e}", path.display())))
}

pub fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> CmdResult {
    let mut cfg: EvaluateConfig = load_config(cli)?;
    cfg.scores = Some(a.scores.clone().or(cfg.scores).unwrap_or_else(|| cli.out_dir.join("scores_test.csv")));
    cfg.cost_model = a.cost_model.clone().or(cfg.cost_model);
    if a.baseline.is_some() {
        cfg.baseline = a.baseline.clone();
        cfg.policy = None;
    } else if a.policy.is_some() {
        cfg.policy = a.policy.clone();
        cfg.baseline = None;
    }
    let policy = match &cfg.baseline {
        Some(b) => match b.as_str() {
            BASELINE_NEVER => Policy::Never,
            BASELINE_ALWAYS => Policy::AlwaysAtStart,
            BASELINE_TAU_HALF => Policy::Basic { tau: 0.5 },
            other => return Err(CliError::Config(format!("unknown baseline `{other}`"))),
        },
        None => {
            let p = cfg.policy.get_or_insert_with(|| cli.out_dir.join("optimize_result.json"));
            load_policy(p)?
        }
    };
    let model = load_model(&require(cfg.cost_model.clone(), "cost_model")?)?;
    let series = read_scores(cfg.scores.as_deref().expect("defaulted above"))?;
    let report = evaluate(&series, &model, &policy)?;
    let decisions = apply_policy(&series, &policy);
    finish(&cli.out_dir.join("decisions.csv"), |w| {
        write_decisions(&decisions, model.default_alarm(), w).map_err(|e| e.to_string())
    })?;
    write_json(
        &cli.out_dir.join("evaluation.json"),
        &json!({ "command": "evaluate", "seed": cli.seed, "config": cfg, "report": report }),
    )?;
    Ok(json!({
        "command": "evaluate",
        "policy": policy.name(),
        "avg_cost_per_case": report.avg_cost_per_case,
        "benefit": report.benefit,
        "f_score": report.f_score,
    }))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RqConfigFile {
    rq: Option<Rq>,
    dataset: Option<DatasetSource>,
    seed: Option<u64>,
    search: Option<SearchSpace>,
    constants: Option<crate::cost::NonMonotonicConstants>,
    families: Option<Vec<crate::cost::CostFamily>>,
}

pub fn cmd_rq(cli: &Cli, a: &RqArgs) -> CmdResult {
    let file: RqConfigFile = load_config(cli)?;
    let rq = match &a.rq {
        Some(s) => s.parse::<Rq>()?,
        None => file.rq.ok_or_else(|| CliError::Config("missing `rq` (flag or config key)".into()))?,
    };
    let dataset = match (&a.thres, &a.test) {
        (Some(thres), Some(test)) => DatasetSource::ScoreFiles { thres: thres.clone(), test: test.clone() },
        _ => file.dataset.unwrap_or_else(|| DatasetSource::Synthetic {
            spec: SyntheticLogSpec { seed: cli.seed.unwrap_or(0), ..SyntheticLogSpec::default() },
            scoring: Scoring::Posterior,
        }),
    };
    if let DatasetSource::ScoreFiles { thres, test } = &dataset {
        for p in [thres, test] {
            if !p.exists() {
                return Err(CliError::Config(format!("score file {} does not exist", p.display())));
            }
        }
    }
    let cfg = RqConfig {
        rq,
        dataset,
        seed: cli.seed.or(file.seed).unwrap_or(0),
        search: file.search,
        constants: file.constants,
        families: file.families,
    };
    let table = run_rq_suite(&cfg)?;
    let csv_path = cli.out_dir.join(format!("{}.csv", rq.label().to_lowercase()));
    finish(&csv_path, |w| write_rq_csv(&table, w).map_err(|e| e.to_string()))?;
    write_json(
        &cli.out_dir.join(format!("{}_run.json", rq.label().to_lowercase())),
        &json!({ "command": "rq", "seed": cfg.seed, "config": cfg, "n_cells": table.n_cells, "n_rows": table.rows.len() }),
    )?;
    Ok(json!({
        "command": "rq",
        "rq": rq.label(),
        "seed": cfg.seed,
        "cells": table.n_cells,
        "rows": table.rows.len(),
        "output": path_str(&csv_path),
    }))
}

pub fn cmd_synth(cli: &Cli, a: &SynthArgs) -> CmdResult {
    let mut spec: SyntheticLogSpec = load_config(cli)?;
    spec.n_cases = a.n_cases.unwrap_or(spec.n_cases);
    spec.class_ratio = a.class_ratio.unwrap_or(spec.class_ratio);
    spec.signal = a.signal.unwrap_or(spec.signal);
    spec.seed = cli.seed.unwrap_or(spec.seed);
    let synth = generate_synthetic_log(&spec)?;
    let log_path = cli.out_dir.join("synthetic_log.csv");
    let mut w = create(&log_path)?;
    write_canonical_csv(&synth.log, &mut w)?;
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    write_json(&cli.out_dir.join("synthetic_schema.json"), &Schema::canonical(true))?;
    write_score_file(&cli.out_dir.join("posterior_scores.csv"), &synth.posterior)?;
    write_json(&cli.out_dir.join("synth_run.json"), &json!({ "command": "synth", "seed": spec.seed, "config": spec }))?;
    Ok(json!({
        "command": "synth",
        "seed": spec.seed,
        "cases": synth.log.len(),
        "events": synth.log.event_count(),
        "undesired": synth.log.labels.values().filter(|&&y| y).count(),
    }))
}
