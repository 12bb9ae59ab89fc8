//! Cost-optimal alarm policies for prescriptive process monitoring.
//!
//! Given per-prefix estimates of the probability that a running case ends
//! in an undesired outcome, this crate decides when (and which) alarm to
//! raise so that the expected cost of interventions, compensations and
//! undesired outcomes is minimal. Thresholds are tuned empirically on a
//! held-out log.
//!
//! Pipeline: [`eventlog`] (ingest, label, split) → [`encoding`] (prefix
//! features) → [`estimator`] (probabilities) → [`policy`] + [`cost`]
//! (decisions and their cost) → [`optimize`] (threshold search) →
//! [`experiment`] (baselines, metrics, sweeps).

pub mod cli;
pub mod cost;
pub mod encoding;
pub mod estimator;
pub mod eventlog;
pub mod experiment;
pub mod optimize;
pub mod policy;

pub use cost::{AlarmDecision, AlarmId, AlarmModel, CostFnSpec, EffSpec, MultiAlarmCostModel};
pub use estimator::ProbabilitySeries;
pub use eventlog::{Event, EventLog, Trace};
pub use optimize::{OptimizationResult, SearchSpace};
pub use policy::Policy;
