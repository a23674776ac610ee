//! Capacity-learner sweeps: train one learner per sweep value (peak
//! amplitude, average power, or Nakagami shape) and report the learned mass
//! points, the capacity estimate, and the relevant analytic bounds.

use infocap_core::channels::{NakagamiNoiseModel, ReparamChannel};
use infocap_core::cortical::{
    awgn_capacity, binary_awgn_mi, cluster_mass_points, mckellips_bound, CapacityLearner,
    ConstraintSpec, CorticalConfig, LatentSource, MassPoint, PowerConstraint,
};
use infocap_core::sampling::SplitRng;
use infocap_core::{Error, Result};

use crate::config::Scoped;
use crate::records::{format_float, MetricRecord, Table};

use super::RunOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Awgn,
    Nakagami,
    Cauchy,
    Rayleigh,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Peak,
    AvgHard,
    AvgHinge,
    CauchyLog,
    RayleighAvg,
}

#[derive(Debug, Clone)]
pub struct CorticalRunConfig {
    pub channel: ChannelKind,
    pub constraint: ConstraintKind,
    /// Sweep values: peak amplitude A, average power P, Nakagami m, or the
    /// Rayleigh average bound, depending on channel/constraint.
    pub sweep: Vec<f64>,
    pub noise_sigma: f64,
    pub cauchy_gamma: f64,
    pub nakagami_sigma2: f64,
    pub gen_iters: usize,
    pub k_disc: usize,
    pub batch: usize,
    pub alpha: f64,
    pub lr: f64,
    pub beta1: f64,
    pub latent: LatentSource,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    /// Cluster radius as a fraction of the sweep value (defaults to 0.05·A).
    pub cluster_eps_frac: f64,
    pub eval_n: usize,
    pub cluster_n: usize,
    pub seeds: Vec<u64>,
}

impl CorticalRunConfig {
    pub fn from_scoped(scoped: &Scoped<'_>) -> Result<Self> {
        let channel = match scoped.get_str("channel", "awgn") {
            "awgn" => ChannelKind::Awgn,
            "nakagami" => ChannelKind::Nakagami,
            "cauchy" => ChannelKind::Cauchy,
            "rayleigh" => ChannelKind::Rayleigh,
            "independent" => ChannelKind::Independent,
            other => return Err(Error::config(format!("unknown cortical channel `{other}`"))),
        };
        let constraint = match scoped.get_str("constraint", "peak") {
            "peak" => ConstraintKind::Peak,
            "avg_hard" => ConstraintKind::AvgHard,
            "avg_hinge" => ConstraintKind::AvgHinge,
            "cauchy_log" => ConstraintKind::CauchyLog,
            "rayleigh_avg" => ConstraintKind::RayleighAvg,
            other => return Err(Error::config(format!("unknown constraint `{other}`"))),
        };
        let sweep = scoped
            .list_f64("sweep")?
            .ok_or_else(|| Error::config("cortical needs a `sweep` list".to_string()))?;
        let latent = match scoped.get_str("latent", "gaussian(30)") {
            tag if tag.starts_with("gaussian(") => {
                let d: usize = tag
                    .trim_start_matches("gaussian(")
                    .trim_end_matches(')')
                    .parse()
                    .map_err(|_| Error::config(format!("bad latent `{tag}`")))?;
                LatentSource::Gaussian(d)
            }
            tag if tag.starts_with("bernoulli(") => {
                let k: usize = tag
                    .trim_start_matches("bernoulli(")
                    .trim_end_matches(')')
                    .parse()
                    .map_err(|_| Error::config(format!("bad latent `{tag}`")))?;
                LatentSource::Bernoulli(k)
            }
            other => return Err(Error::config(format!("unknown latent `{other}`"))),
        };
        Ok(CorticalRunConfig {
            channel,
            constraint,
            sweep,
            noise_sigma: scoped.get_f64("noise_sigma", 1.0)?,
            cauchy_gamma: scoped.get_f64("cauchy_gamma", 1.0)?,
            nakagami_sigma2: scoped.get_f64("nakagami_sigma2", 1.0)?,
            gen_iters: scoped.get_usize("gen_iters", 500)?,
            k_disc: scoped.get_usize("k_disc", 10)?,
            batch: scoped.get_usize("batch", 512)?,
            alpha: scoped.get_f64("alpha", 1.0)?,
            lr: scoped.get_f64("lr", 2e-4)?,
            beta1: scoped.get_f64("beta1", 0.5)?,
            latent,
            gen_hidden: scoped
                .list_usize("gen_hidden")?
                .unwrap_or_else(|| vec![100, 100, 100]),
            disc_hidden: scoped
                .list_usize("disc_hidden")?
                .unwrap_or_else(|| vec![100, 100]),
            cluster_eps_frac: scoped.get_f64("cluster_eps_frac", 0.05)?,
            eval_n: scoped.get_usize("eval_n", 1 << 15)?,
            cluster_n: scoped.get_usize("cluster_n", 8000)?,
            seeds: scoped.list_u64("seeds")?.unwrap_or_else(|| vec![0]),
        })
    }

    fn build(&self, sweep_value: f64, seed: u64) -> Result<CapacityLearner> {
        let channel = match self.channel {
            ChannelKind::Awgn => ReparamChannel::Awgn {
                dim: 1,
                sigma: self.noise_sigma,
            },
            ChannelKind::Nakagami => ReparamChannel::Nakagami {
                model: NakagamiNoiseModel::new(sweep_value, self.nakagami_sigma2)?,
            },
            ChannelKind::Cauchy => ReparamChannel::Cauchy {
                gamma: self.cauchy_gamma,
            },
            ChannelKind::Rayleigh => ReparamChannel::RayleighEquiv,
            ChannelKind::Independent => ReparamChannel::Independent {
                dim: 1,
                sigma: self.noise_sigma,
            },
        };
        let constraint = match self.constraint {
            ConstraintKind::Peak => ConstraintSpec::peak(sweep_value),
            ConstraintKind::AvgHard => ConstraintSpec::avg_hard(sweep_value),
            ConstraintKind::AvgHinge => ConstraintSpec {
                constraints: vec![PowerConstraint::AvgHinge {
                    p: sweep_value,
                    lambda: 1.0,
                }],
            },
            ConstraintKind::CauchyLog => ConstraintSpec {
                constraints: vec![PowerConstraint::CauchyLog {
                    a: sweep_value,
                    gamma: self.cauchy_gamma,
                    lambda: 1.0,
                }],
            },
            ConstraintKind::RayleighAvg => ConstraintSpec {
                constraints: vec![PowerConstraint::RayleighAvg {
                    a: sweep_value,
                    lambda: 1.0,
                }],
            },
        };
        // Nakagami sweeps vary the noise shape, not the constraint: pin the
        // average power to 1 there unless hard scaling was requested.
        let constraint = if self.channel == ChannelKind::Nakagami {
            ConstraintSpec::avg_hard(1.0)
        } else {
            constraint
        };
        CapacityLearner::new(
            channel,
            constraint,
            CorticalConfig {
                alpha: self.alpha,
                k_disc_steps: self.k_disc,
                batch: self.batch,
                latent: self.latent,
                gen_hidden: self.gen_hidden.clone(),
                disc_hidden: self.disc_hidden.clone(),
                lr: self.lr,
                beta1: self.beta1,
                seed,
            },
        )
    }
}

/// Result of one sweep cell, kept for acceptance checks.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub sweep_value: f64,
    pub seed: u64,
    pub capacity_nats: f64,
    pub clusters: Vec<MassPoint>,
}

pub fn run(
    config: &CorticalRunConfig,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<(RunOutput, Vec<SweepCell>)> {
    let cells: Vec<(f64, u64)> = config
        .sweep
        .iter()
        .flat_map(|&a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = super::worker_pool(threads)?;
    type CellOut = (Vec<MetricRecord>, SweepCell);
    let results: Vec<Result<CellOut>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .enumerate()
            .map(|(idx, &(sweep_value, seed))| {
                let mut rng = SplitRng::with_stream(master_seed, 0).split(idx as u64);
                let net_seed = rng.next_seed();
                let mut learner = config.build(sweep_value, net_seed)?;
                let trace = learner.train(config.gen_iters, &mut rng)?;
                let run_id = format!("v{sweep_value}-s{seed}");
                let sweep_index = config
                    .sweep
                    .iter()
                    .position(|&v| v == sweep_value)
                    .unwrap_or(0);
                let records: Vec<MetricRecord> = trace
                    .iter()
                    .map(|t| MetricRecord {
                        run_id: run_id.clone(),
                        seed,
                        family: "cortical".into(),
                        step_index: sweep_index + 1,
                        iteration: t.iteration + 1,
                        estimate_nats: t.capacity_nats,
                        true_nats: None,
                    })
                    .collect();
                let estimate = learner.capacity_estimate(config.eval_n, &mut rng)?;
                let samples = learner.sample_inputs(config.cluster_n, &mut rng)?;
                let eps = (config.cluster_eps_frac * sweep_value.abs()).max(1e-3);
                let clusters = cluster_mass_points(&samples, eps)?;
                Ok((
                    records,
                    SweepCell {
                        sweep_value,
                        seed,
                        capacity_nats: estimate.nats,
                        clusters,
                    },
                ))
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut sweep_cells = Vec::new();
    for r in results {
        let (cell_records, cell) = r?;
        records.extend(cell_records);
        sweep_cells.push(cell);
    }

    let mut table = Table::new(&[
        "sweep_value",
        "seed",
        "capacity_nats",
        "n_clusters",
        "centers",
        "masses",
        "mckellips_nats",
        "awgn_bound_nats",
        "binary_awgn_nats",
    ]);
    let mut summary = vec![format!(
        "cortical: channel={:?} constraint={:?} sweep={:?} gen_iters={} k={} batch={}",
        config.channel, config.constraint, config.sweep, config.gen_iters, config.k_disc, config.batch,
    )];
    for cell in &sweep_cells {
        // Keep only mass points that carry real probability; stragglers from
        // greedy clustering stay in the CSV through the full list.
        let significant: Vec<&MassPoint> =
            cell.clusters.iter().filter(|c| c.mass >= 0.02).collect();
        let centers = cell
            .clusters
            .iter()
            .map(|c| format!("{:.6}", c.center[0]))
            .collect::<Vec<_>>()
            .join(";");
        let masses = cell
            .clusters
            .iter()
            .map(|c| format!("{:.6}", c.mass))
            .collect::<Vec<_>>()
            .join(";");
        let (mck, awgn, binary) =
            if config.channel == ChannelKind::Awgn && config.constraint == ConstraintKind::Peak {
                (
                    format_float(mckellips_bound(cell.sweep_value)),
                    format_float(awgn_capacity(cell.sweep_value * cell.sweep_value, 1)),
                    format_float(binary_awgn_mi(cell.sweep_value, config.noise_sigma)),
                )
            } else {
                (String::new(), String::new(), String::new())
            };
        table.push(vec![
            format_float(cell.sweep_value),
            cell.seed.to_string(),
            format_float(cell.capacity_nats),
            significant.len().to_string(),
            centers,
            masses,
            mck,
            awgn,
            binary,
        ]);
        summary.push(format!(
            "sweep {} seed {}: capacity {:.4} nats, {} mass points at {:?}",
            cell.sweep_value,
            cell.seed,
            cell.capacity_nats,
            significant.len(),
            significant
                .iter()
                .map(|c| (c.center[0], c.mass))
                .collect::<Vec<_>>(),
        ));
    }
    Ok((
        RunOutput {
            records,
            metrics: table,
            summary,
        },
        sweep_cells,
    ))
}

/// Mass points with at least 2% probability, the ones the sweep reports.
pub fn significant_clusters(cell: &SweepCell) -> Vec<&MassPoint> {
    cell.clusters.iter().filter(|c| c.mass >= 0.02).collect()
}
