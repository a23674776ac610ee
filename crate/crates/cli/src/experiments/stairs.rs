//! The staircase benchmark: the true MI rises by 2 nats every
//! `iters_per_step` iterations (by raising the Gaussian correlation), each
//! estimator family training continuously across steps. Every iteration is
//! logged; bias/variance/MSE are computed over the trailing window per step.

use infocap_core::channels::{rho_for_target_mi, GaussianScenario, Mapping};
use infocap_core::estimators::{Family, MiEstimator};
use infocap_core::sampling::{derange, permute_naive, DerangeMode, Shuffle, SplitRng};
use infocap_core::{Error, Result};

use crate::config::Scoped;
use crate::metrics::metrics;
use crate::records::{format_float, MetricRecord, Table};

use super::RunOutput;

/// How marginal pairs are built each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Cyclic-shift derangement (default).
    Shift,
    /// Rejection-sampled random derangement.
    Random,
    /// Uniform random permutation — the ablation that caps the estimate.
    Naive,
}

impl Pairing {
    fn parse(tag: &str) -> Result<Self> {
        match tag {
            "shift" => Ok(Pairing::Shift),
            "random" => Ok(Pairing::Random),
            "naive" => Ok(Pairing::Naive),
            _ => Err(Error::config(format!("unknown pairing `{tag}`"))),
        }
    }

    fn draw(self, n: usize, rng: &mut SplitRng) -> Result<Shuffle> {
        match self {
            Pairing::Shift => derange(n, DerangeMode::Shift, rng),
            Pairing::Random => derange(n, DerangeMode::Random, rng),
            Pairing::Naive => Ok(permute_naive(n, rng)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StairsConfig {
    pub d: usize,
    pub batch: usize,
    pub families: Vec<Family>,
    pub steps: usize,
    pub iters_per_step: usize,
    pub seeds: Vec<u64>,
    pub scenario: GaussianScenario,
    pub window: usize,
    pub hidden: Vec<usize>,
    pub pairing: Pairing,
    /// Nats added per staircase step.
    pub step_nats: f64,
}

impl StairsConfig {
    pub fn from_scoped(scoped: &Scoped<'_>) -> Result<Self> {
        let families = scoped
            .list("families")
            .ok_or_else(|| Error::config("stairs needs a `families` list".to_string()))?
            .iter()
            .map(|tag| Family::parse(tag))
            .collect::<Result<Vec<_>>>()?;
        let seeds = scoped
            .list_u64("seeds")?
            .ok_or_else(|| Error::config("stairs needs a `seeds` list".to_string()))?;
        if seeds.is_empty() || families.is_empty() {
            return Err(Error::config("families and seeds must be non-empty".to_string()));
        }
        let d = scoped.get_usize("d", 20)?;
        let scenario = match scoped.get_str("channel", "gaussian") {
            "gaussian" => GaussianScenario::linear(d),
            "cubic" => GaussianScenario::mapped(d, Mapping::Cubic),
            "half_cube" => GaussianScenario::mapped(d, Mapping::HalfCube),
            "asinh" => GaussianScenario::mapped(d, Mapping::Asinh),
            other => return Err(Error::config(format!("unknown stairs channel `{other}`"))),
        };
        Ok(StairsConfig {
            d,
            batch: scoped.get_usize("batch", 64)?,
            families,
            steps: scoped.get_usize("steps", 5)?,
            iters_per_step: scoped.get_usize("iters_per_step", 4000)?,
            seeds,
            scenario,
            window: scoped.get_usize("window", 100)?,
            hidden: scoped.list_usize("hidden")?.unwrap_or_else(|| vec![256, 256]),
            pairing: Pairing::parse(scoped.get_str("pairing", "shift"))?,
            step_nats: scoped.get_f64("step_nats", 2.0)?,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.batch < 2 {
            return Err(Error::config("batch must be at least 2".to_string()));
        }
        if self.steps == 0 || self.iters_per_step == 0 {
            return Err(Error::config("steps and iters_per_step must be positive".to_string()));
        }
        if self.window > self.iters_per_step {
            return Err(Error::config(format!(
                "window {} exceeds iters_per_step {}",
                self.window, self.iters_per_step
            )));
        }
        Ok(())
    }
}

/// One full staircase for one `(family, seed)` cell.
fn staircase_cell(
    config: &StairsConfig,
    family: Family,
    seed: u64,
    mut rng: SplitRng,
) -> Result<Vec<MetricRecord>> {
    let run_id = format!("{}-s{}", family.name(), seed);
    let net_seed = rng.next_seed();
    let mut est = MiEstimator::with_architecture(
        family,
        config.d,
        config.d,
        &config.hidden,
        net_seed,
    )?
    .allow_fixed_points(config.pairing == Pairing::Naive);
    let mut records = Vec::with_capacity(config.steps * config.iters_per_step);
    let mut iteration = 0usize;
    for step in 1..=config.steps {
        let truth = config.step_nats * step as f64;
        let rho = rho_for_target_mi(config.d, truth);
        for _ in 0..config.iters_per_step {
            iteration += 1;
            let batch = config.scenario.sample(rho, config.batch, &mut rng)?;
            // CPC scores all pairs and ignores the shuffle.
            let shuffle = if matches!(family, Family::Cpc) {
                Shuffle::identity(config.batch)
            } else {
                config.pairing.draw(config.batch, &mut rng)?
            };
            let out = est.train_step(&batch, &shuffle)?;
            records.push(MetricRecord {
                run_id: run_id.clone(),
                seed,
                family: family.name(),
                step_index: step,
                iteration,
                estimate_nats: out.estimate_nats,
                true_nats: Some(truth),
            });
        }
    }
    Ok(records)
}

fn use_rng_for_cell(master_seed: u64, cell: usize) -> SplitRng {
    SplitRng::with_stream(master_seed, 0).split(cell as u64)
}

pub fn run(config: &StairsConfig, master_seed: u64, threads: Option<usize>) -> Result<RunOutput> {
    config.validate()?;
    let cells: Vec<(Family, u64)> = config
        .families
        .iter()
        .flat_map(|&family| config.seeds.iter().map(move |&seed| (family, seed)))
        .collect();
    let pool = super::worker_pool(threads)?;
    let results: Vec<Result<Vec<MetricRecord>>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .enumerate()
            .map(|(idx, &(family, seed))| {
                staircase_cell(config, family, seed, use_rng_for_cell(master_seed, idx))
            })
            .collect()
    });
    let mut records = Vec::new();
    for cell in results {
        records.extend(cell?);
    }

    let rows = metrics(&records, config.window)?;
    let mut table = Table::new(&[
        "family",
        "step_index",
        "true_nats",
        "bias",
        "variance",
        "mse",
        "n_values",
    ]);
    for row in &rows {
        table.push(vec![
            row.family.clone(),
            row.step_index.to_string(),
            format_float(row.true_nats),
            format_float(row.bias),
            format_float(row.variance),
            format_float(row.mse),
            row.n_values.to_string(),
        ]);
    }

    let mut summary = vec![format!(
        "stairs: d={} batch={} steps={} iters_per_step={} window={} pairing={:?} seeds={:?}",
        config.d,
        config.batch,
        config.steps,
        config.iters_per_step,
        config.window,
        config.pairing,
        config.seeds,
    )];
    for row in &rows {
        summary.push(format!(
            "{} step {} (I={:.1}): bias {:+.4} variance {:.4} mse {:.4}",
            row.family, row.step_index, row.true_nats, row.bias, row.variance, row.mse
        ));
    }
    Ok(RunOutput {
        records,
        metrics: table,
        summary,
    })
}

/// Mean estimate over the trailing `window` iterations of one step for one
/// run; acceptance checks use this as the "plateau" readout.
pub fn plateau(records: &[MetricRecord], run_id: &str, step: usize, window: usize) -> f64 {
    let trace: Vec<f64> = records
        .iter()
        .filter(|r| r.run_id == run_id && r.step_index == step)
        .map(|r| r.estimate_nats)
        .collect();
    let tail = &trace[trace.len().saturating_sub(window)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}
