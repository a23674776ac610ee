//! Bias/variance/MSE over the trailing window of staircase records.

use std::collections::BTreeMap;

use infocap_core::{Error, Result};

use crate::records::MetricRecord;

/// Statistics for one `(family, step)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub family: String,
    pub step_index: usize,
    pub true_nats: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub n_values: usize,
}

/// Computes bias, population variance, and MSE per `(family, step)` over the
/// last `window` iterations of each step, pooled across seeds. The identity
/// `mse = bias² + variance` holds exactly because the variance is the
/// population form.
pub fn metrics(records: &[MetricRecord], window: usize) -> Result<Vec<MetricRow>> {
    if window == 0 {
        return Err(Error::config("metric window must be positive".to_string()));
    }
    // (family, step) → (truth, per-run traces).
    let mut cells: BTreeMap<(String, usize), (Option<f64>, BTreeMap<String, Vec<f64>>)> =
        BTreeMap::new();
    for r in records {
        let cell = cells
            .entry((r.family.clone(), r.step_index))
            .or_insert_with(|| (r.true_nats, BTreeMap::new()));
        if cell.0 != r.true_nats {
            return Err(Error::config(format!(
                "inconsistent truth within ({}, step {})",
                r.family, r.step_index
            )));
        }
        cell.1.entry(r.run_id.clone()).or_default().push(r.estimate_nats);
    }
    let mut rows = Vec::new();
    for ((family, step_index), (truth, runs)) in cells {
        let truth = truth.ok_or_else(|| {
            Error::config(format!(
                "({family}, step {step_index}) has no oracle truth; metrics need one"
            ))
        })?;
        let mut values = Vec::new();
        for trace in runs.values() {
            if window > trace.len() {
                return Err(Error::config(format!(
                    "window {window} exceeds the {} iterations of ({family}, step {step_index})",
                    trace.len()
                )));
            }
            values.extend_from_slice(&trace[trace.len() - window..]);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let bias = mean - truth;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let mse = values.iter().map(|v| (v - truth) * (v - truth)).sum::<f64>() / n;
        rows.push(MetricRow {
            family,
            step_index,
            true_nats: truth,
            bias,
            variance,
            mse,
            n_values: values.len(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(family: &str, step: usize, iter: usize, estimate: f64, truth: f64) -> MetricRecord {
        MetricRecord {
            run_id: format!("{family}-s0"),
            seed: 0,
            family: family.into(),
            step_index: step,
            iteration: iter,
            estimate_nats: estimate,
            true_nats: Some(truth),
        }
    }

    #[test]
    fn exact_estimates_have_zero_error() {
        let records: Vec<_> = (0..10).map(|i| record("kl_dime", 1, i, 2.0, 2.0)).collect();
        let rows = metrics(&records, 5).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].bias, 0.0);
        assert_eq!(rows[0].variance, 0.0);
        assert_eq!(rows[0].mse, 0.0);
    }

    #[test]
    fn constant_offset_is_pure_bias() {
        let records: Vec<_> = (0..10).map(|i| record("kl_dime", 1, i, 3.0, 2.0)).collect();
        let rows = metrics(&records, 10).unwrap();
        assert_eq!(rows[0].bias, 1.0);
        assert_eq!(rows[0].variance, 0.0);
        assert_eq!(rows[0].mse, 1.0);
    }

    #[test]
    fn hand_computed_spread() {
        let records = vec![
            record("kl_dime", 1, 0, 2.1, 2.0),
            record("kl_dime", 1, 1, 1.9, 2.0),
        ];
        let rows = metrics(&records, 2).unwrap();
        assert!(rows[0].bias.abs() < 1e-15);
        assert!((rows[0].variance - 0.01).abs() < 1e-15);
        assert!((rows[0].mse - 0.01).abs() < 1e-15);
    }

    #[test]
    fn mse_identity_holds_to_1e12() {
        let mut rng = infocap_core::sampling::SplitRng::new(5);
        let records: Vec<_> = (0..500)
            .map(|i| record("gan_dime", 2, i, 4.0 + rng.standard_normal(), 4.0))
            .collect();
        let rows = metrics(&records, 100).unwrap();
        let row = &rows[0];
        assert!((row.mse - (row.bias * row.bias + row.variance)).abs() <= 1e-12);
    }

    #[test]
    fn window_larger_than_trace_is_config_error() {
        let records: Vec<_> = (0..10).map(|i| record("cpc", 1, i, 2.0, 2.0)).collect();
        assert!(metrics(&records, 11).is_err());
        assert!(metrics(&records, 0).is_err());
    }
}
