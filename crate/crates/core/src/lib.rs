//! Slotted-time simulator and optimization library for offloading
//! semantic-extraction tasks to a multi-SBS mobile edge computing system.
//!
//! Time is split into long slots (LTS, user admission) that each contain `p`
//! short slots (STS, association / bandwidth / compute allocation). Three
//! scalar tandem queues (offloading, bus transfer, processing) couple the
//! short slots, and a Lyapunov drift-plus-penalty objective drives the
//! per-slot allocators.
//!
//! Module map:
//!
//! - [`config`]: scenario parameters, TOML loading and validation
//! - [`scenario`]: SBS layout, user placement and mobility
//! - [`channel`]: LoS/NLoS path loss, gains, interference, uplink rate
//! - [`tasks`]: task catalog, CNN complexity model, demand sampling
//! - [`queues`]: tandem queue dynamics and the drift-bound checker
//! - [`allocator`]: per-STS solvers and the alternating allocation loop
//! - [`admission`]: per-LTS revenue/cost accounting and admission loop
//! - [`engine`]: outer simulation loop, baselines, record streams
//! - [`metrics`]: CSV / JSONL record emission and parsing
//! - [`oracle`]: brute-force reference solvers used by tests and `selftest`

// `!(x <= y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admission;
pub mod allocator;
pub mod channel;
pub mod config;
pub mod engine;
mod error;
pub mod grid;
pub mod metrics;
pub mod oracle;
pub mod queues;
pub mod scenario;
pub mod tasks;

pub use config::{Baseline, ScenarioConfig};
pub use error::{Error, Result};
