//! Experiment drivers: staircase benchmark, capacity-learner sweeps, and
//! decoder sweeps. Each driver returns its results in memory and can
//! persist them as `records.csv`, `metrics.csv`, and `summary.txt`.

pub mod cortical;
pub mod mind;
pub mod stairs;

use std::path::Path;

use infocap_core::Result;

use crate::records::{write_records_csv, write_summary, MetricRecord, Table};

/// In-memory result of one experiment run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MetricRecord>,
    pub metrics: Table,
    pub summary: Vec<String>,
}

impl RunOutput {
    /// Writes the three standard output files into `out_dir`.
    pub fn persist(&self, out_dir: &Path) -> Result<()> {
        write_records_csv(&out_dir.join("records.csv"), &self.records)?;
        self.metrics.write_csv(&out_dir.join("metrics.csv"))?;
        write_summary(&out_dir.join("summary.txt"), &self.summary)?;
        Ok(())
    }
}

/// Builds a rayon pool of the requested width (or rayon's default).
pub(crate) fn worker_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    builder
        .build()
        .map_err(|e| infocap_core::Error::config(format!("worker pool: {e}")))
}
