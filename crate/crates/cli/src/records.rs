//! Record types and bit-exact CSV persistence.
//!
//! CSV files are comma-separated with a header row, floats at 17 significant
//! digits (`{:.16e}`), and LF line endings, so identical runs produce
//! byte-identical files.

use std::io::Write;
use std::path::Path;

use infocap_core::Result;

/// One logged training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub run_id: String,
    pub seed: u64,
    pub family: String,
    pub step_index: usize,
    pub iteration: usize,
    pub estimate_nats: f64,
    /// Present only when the scenario has an exact oracle.
    pub true_nats: Option<f64>,
}

/// Formats a float at 17 significant digits, round-trip exact for f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn write_records_csv(path: &Path, records: &[MetricRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str("run_id,seed,family,step_index,iteration,estimate_nats,true_nats\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.run_id,
            r.seed,
            r.family,
            r.step_index,
            r.iteration,
            format_float(r.estimate_nats),
            format_opt(r.true_nats),
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// A generic table: fixed header, rows of preformatted cells. Used for the
/// per-experiment `metrics.csv`.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }
}

pub fn write_summary(path: &Path, lines: &[String]) -> Result<()> {
    let mut out = String::new();
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, 1.0, -2.5e-17, 0.19274475702175742, 1e300] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v, back, "{s}");
        }
    }

    #[test]
    fn records_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let records = vec![MetricRecord {
            run_id: "gan_dime-s0".into(),
            seed: 0,
            family: "gan_dime".into(),
            step_index: 1,
            iteration: 1,
            estimate_nats: 0.5,
            true_nats: None,
        }];
        write_records_csv(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("run_id,seed,family,step_index,iteration,estimate_nats,true_nats\n"));
        assert!(text.ends_with("gan_dime-s0,0,gan_dime,1,1,5.0000000000000000e-1,\n"));
        assert!(!text.contains('\r'));
    }
}
