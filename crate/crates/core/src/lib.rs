//! Trace-driven simulation of serverless function provisioning.
//!
//! The crate ingests per-minute invocation traces, categorizes every function
//! by its invocation pattern (waiting-time regularity, density, bursts,
//! co-occurrence with peer functions), and replays a held-out window under a
//! provisioning policy that pre-loads instances ahead of predicted invocations
//! and evicts them after a per-category give-up time. A fixed keep-alive policy
//! is provided as the baseline, and every run produces cold-start and
//! wasted-memory accounting.
//!
//! Module map:
//!
//! - [`trace_store`]: datasets, CSV ingestion/export, synthetic traces, splits.
//! - [`timing`]: waiting/active time extraction, slacking transforms, statistics.
//! - [`classifier`]: deterministic categories, forgetting, indeterminate assignment.
//! - [`correlation`]: co-occurrence rates, offline links, online trackers.
//! - [`predictor`]: per-function runtime profiles, predictions, adaptive adjusting.
//! - [`provision`]: the slot-by-slot provisioning engine for both policies.
//! - [`metrics`]: simulation driver, reports, sweeps and export.

pub mod classifier;
pub mod config;
pub mod correlation;
pub mod error;
pub mod metrics;
pub mod predictor;
pub mod provision;
pub mod timing;
pub mod trace_store;

pub use classifier::{FunctionCategory, PredictiveValues};
pub use config::{ClassifierConfig, ProvisionConfig, SimConfig, SpesConfig};
pub use error::{Error, Result};
pub use trace_store::{FunctionMeta, InvocationSeries, TraceDataset, TriggerType, MINUTES_PER_DAY};
