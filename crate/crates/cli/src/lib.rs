//! Experiment orchestration for the infocap toolkit: configuration
//! ingestion, the staircase / capacity / decoder experiment drivers, metric
//! computation, bit-exact CSV persistence, and the analytic check suite.
//!
//! The `infocap` binary is a thin wrapper over this library; integration
//! and acceptance tests drive the same entry points directly.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod metrics;
pub mod records;
