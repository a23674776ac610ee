//! Trainable mutual-information estimators.
//!
//! An [`MiEstimator`] binds a discriminator network, a family objective
//! ([`Family`]) and a pairing strategy into one trainable object. Training
//! ascends the family's value function on a joint batch plus a shuffled
//! (marginal) view; estimation applies the family's readout.
//!
//! The deranged single-network layout is the build target: one network takes
//! concatenated `(x, y)` columns, and marginal samples come from deranging
//! the batch's `y` half, `Ω(N)` work per step. CPC is the exception — it
//! cannot use derangements, so its steps score the full `N×N` pair matrix
//! through the same single network.
//!
//! Alongside the trainable path the module carries the validation
//! machinery: readouts evaluated at an exact density ratio
//! ([`estimate_with_oracle_ratio`], [`DiscreteJoint`]), the Gaussian variance
//! formula ([`variance_gaussian`]), and the closed-form optimum of the
//! naive-permutation value function ([`permuted_optimum`]).

use ndarray::{s, Array2};

use crate::divergence::{
    log_mean_exp, safe_ln, value_cpc, value_fdime, value_gamma, value_mine, value_nwj,
    value_smile, FGenerator, MineEma,
};
use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamState, Mlp};
use crate::sampling::{Batch, Shuffle};

/// Default abort threshold on the training value; beyond this the loss has
/// diverged and the run stops with a diagnostic.
pub const DIVERGENCE_ABORT: f64 = 1e6;

/// Estimator family tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    KlDime,
    GanDime,
    HdDime,
    GammaDime(f64),
    /// Donsker-Varadhan bound with an EMA-smoothed partition gradient.
    Mine { ema_decay: f64 },
    Nwj,
    /// Clipped-partition readout trained with the GAN/JS gradient.
    Smile { tau: f64 },
    /// InfoNCE over the full batch score matrix; bounded by ln N.
    Cpc,
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::KlDime => "kl_dime".into(),
            Family::GanDime => "gan_dime".into(),
            Family::HdDime => "hd_dime".into(),
            Family::GammaDime(g) => format!("gamma_dime({g})"),
            Family::Mine { .. } => "mine".into(),
            Family::Nwj => "nwj".into(),
            Family::Smile { tau } => format!("smile({tau})"),
            Family::Cpc => "cpc".into(),
        }
    }

    /// Parses the names accepted by configs: `kl_dime`, `gan_dime`,
    /// `hd_dime`, `gamma_dime(γ)`, `mine`, `nwj`, `smile(τ)`, `cpc`.
    pub fn parse(tag: &str) -> Result<Family> {
        let tag = tag.trim();
        match tag {
            "kl_dime" => Ok(Family::KlDime),
            "gan_dime" => Ok(Family::GanDime),
            "hd_dime" => Ok(Family::HdDime),
            "mine" => Ok(Family::Mine { ema_decay: 0.9 }),
            "nwj" => Ok(Family::Nwj),
            "cpc" => Ok(Family::Cpc),
            "smile" => Ok(Family::Smile { tau: 1.0 }),
            _ => {
                if let Some(arg) = tag.strip_prefix("gamma_dime(").and_then(|r| r.strip_suffix(')')) {
                    let g: f64 = arg
                        .parse()
                        .map_err(|_| Error::config(format!("bad gamma: {arg}")))?;
                    if g <= 0.0 {
                        return Err(Error::config("gamma must be positive".to_string()));
                    }
                    Ok(Family::GammaDime(g))
                } else if let Some(arg) = tag.strip_prefix("smile(").and_then(|r| r.strip_suffix(')')) {
                    let tau: f64 = arg
                        .parse()
                        .map_err(|_| Error::config(format!("bad tau: {arg}")))?;
                    Ok(Family::Smile { tau })
                } else {
                    Err(Error::config(format!("unknown estimator family: {tag}")))
                }
            }
        }
    }

    /// Generator behind the f-DIME families.
    pub fn generator(&self) -> Option<FGenerator> {
        match self {
            Family::KlDime => Some(FGenerator::Kl),
            Family::GanDime => Some(FGenerator::Gan),
            Family::HdDime => Some(FGenerator::Hd),
            _ => None,
        }
    }

    /// Output activation this family's discriminator uses. The estimator
    /// applies it outside the network so gradient formulas can use the
    /// numerically fused forms.
    pub fn output_activation(&self) -> Activation {
        match self {
            Family::KlDime | Family::HdDime | Family::GammaDime(_) => Activation::Softplus,
            Family::GanDime => Activation::Sigmoid,
            Family::Mine { .. } | Family::Nwj | Family::Smile { .. } | Family::Cpc => {
                Activation::Identity
            }
        }
    }

    /// Whether the readout needs marginal samples (a partition term). The
    /// f-DIME readouts use joint samples only.
    pub fn readout_uses_marginals(&self) -> bool {
        matches!(
            self,
            Family::Mine { .. } | Family::Nwj | Family::Smile { .. } | Family::Cpc
        )
    }
}

/// One MI estimate, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct MiEstimate {
    pub value_nats: f64,
    pub n_samples: usize,
    pub family: Family,
}

/// Result of one training step: the pre-step value of the family's training
/// objective, and the MI readout computed from the same forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStep {
    pub value: f64,
    pub estimate_nats: f64,
}

/// A discriminator network bound to a family objective.
#[derive(Debug, Clone)]
pub struct MiEstimator {
    family: Family,
    net: Mlp,
    adam: AdamState,
    mine_ema: Option<MineEma>,
    allow_fixed_points: bool,
    abort_threshold: f64,
    dim_x: usize,
    dim_y: usize,
}

impl MiEstimator {
    /// Builds an estimator with the benchmark architecture: two hidden
    /// layers of 256 ReLU units on concatenated `(x, y)` input.
    pub fn new(family: Family, dim_x: usize, dim_y: usize, seed: u64) -> Result<Self> {
        Self::with_architecture(family, dim_x, dim_y, &[256, 256], seed)
    }

    pub fn with_architecture(
        family: Family,
        dim_x: usize,
        dim_y: usize,
        hidden: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let mut dims = vec![dim_x + dim_y];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let mut acts = vec![Activation::Relu; hidden.len()];
        // Raw final layer; the family activation is applied by the estimator.
        acts.push(Activation::Identity);
        let net = Mlp::new(&dims, &acts, seed)?;
        let adam = AdamState::new(&net);
        let mine_ema = match family {
            Family::Mine { ema_decay } => Some(MineEma::new(ema_decay)),
            _ => None,
        };
        Ok(MiEstimator {
            family,
            net,
            adam,
            mine_ema,
            allow_fixed_points: false,
            abort_threshold: DIVERGENCE_ABORT,
            dim_x,
            dim_y,
        })
    }

    /// Permits shuffles with fixed points (the naive-permutation ablation).
    pub fn allow_fixed_points(mut self, allow: bool) -> Self {
        self.allow_fixed_points = allow;
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn adam_mut(&mut self) -> &mut AdamState {
        &mut self.adam
    }

    pub fn iterations(&self) -> u64 {
        self.adam.step_count()
    }

    fn check_batch(&self, batch: &Batch, shuffle: &Shuffle) -> Result<()> {
        if batch.x.nrows() != self.dim_x || batch.y.nrows() != self.dim_y {
            return Err(Error::config(format!(
                "batch is {}+{} dimensional, estimator expects {}+{}",
                batch.x.nrows(),
                batch.y.nrows(),
                self.dim_x,
                self.dim_y
            )));
        }
        if shuffle.len() != batch.len() {
            return Err(Error::config(format!(
                "shuffle length {} vs batch size {}",
                shuffle.len(),
                batch.len()
            )));
        }
        if shuffle.fixed_points() > 0 && !self.allow_fixed_points {
            return Err(Error::config(format!(
                "shuffle has {} fixed points; derangements are required unless the \
                 permutation ablation is enabled",
                shuffle.fixed_points()
            )));
        }
        Ok(())
    }

    /// Concatenated input: first N columns are joint pairs, last N are
    /// marginal pairs `(x_i, y_{perm[i]})`.
    fn paired_input(&self, batch: &Batch, shuffle: &Shuffle) -> Array2<f64> {
        let n = batch.len();
        let (dx, dy) = (self.dim_x, self.dim_y);
        let mut input = Array2::zeros((dx + dy, 2 * n));
        input.slice_mut(s![0..dx, 0..n]).assign(&batch.x);
        input.slice_mut(s![dx.., 0..n]).assign(&batch.y);
        input.slice_mut(s![0..dx, n..]).assign(&batch.x);
        for (i, &j) in shuffle.perm().iter().enumerate() {
            input.slice_mut(s![dx.., n + i]).assign(&batch.y.column(j));
        }
        input
    }

    /// All-pairs input for CPC: column `i·N + j` holds `(x_i, y_j)`.
    fn all_pairs_input(&self, batch: &Batch) -> Array2<f64> {
        let n = batch.len();
        let (dx, dy) = (self.dim_x, self.dim_y);
        let mut input = Array2::zeros((dx + dy, n * n));
        for i in 0..n {
            let x_col = batch.x.column(i);
            for j in 0..n {
                let col = i * n + j;
                input.slice_mut(s![0..dx, col]).assign(&x_col);
                input.slice_mut(s![dx.., col]).assign(&batch.y.column(j));
            }
        }
        input
    }

    /// One gradient-ascent step on the family's value function. Returns the
    /// pre-step value together with the MI readout from the same forward
    /// pass, so per-iteration logging costs nothing extra.
    pub fn train_step(&mut self, batch: &Batch, shuffle: &Shuffle) -> Result<TrainStep> {
        let out = if matches!(self.family, Family::Cpc) {
            self.train_step_cpc(batch)
        } else {
            self.check_batch(batch, shuffle)?;
            self.train_step_paired(batch, shuffle)
        }?;
        if !out.value.is_finite() || out.value.abs() > self.abort_threshold {
            return Err(Error::numeric(format!(
                "{} training diverged at iteration {} (value {})",
                self.family.name(),
                self.adam.step_count(),
                out.value
            )));
        }
        Ok(out)
    }

    fn train_step_paired(&mut self, batch: &Batch, shuffle: &Shuffle) -> Result<TrainStep> {
        let n = batch.len();
        let input = self.paired_input(batch, shuffle);
        let (raw, cache) = self.net.forward(&input)?;
        let o_joint: Vec<f64> = (0..n).map(|i| raw[[0, i]]).collect();
        let o_marg: Vec<f64> = (0..n).map(|i| raw[[0, n + i]]).collect();

        let (value, estimate, grad_joint, grad_marg) =
            self.objective_and_grads(&o_joint, &o_marg)?;

        let mut upstream = Array2::zeros((1, 2 * n));
        for i in 0..n {
            // Ascent: Adam descends, so feed the negated gradient.
            upstream[[0, i]] = -grad_joint[i];
            upstream[[0, n + i]] = -grad_marg[i];
        }
        let grads = self.net.backward_params(&cache, &upstream)?;
        adam_step(&mut self.net, &grads, &mut self.adam)?;
        Ok(TrainStep {
            value,
            estimate_nats: estimate,
        })
    }

    fn train_step_cpc(&mut self, batch: &Batch) -> Result<TrainStep> {
        let n = batch.len();
        if n < 2 {
            return Err(Error::config("cpc needs at least two samples".to_string()));
        }
        let input = self.all_pairs_input(batch);
        let (raw, cache) = self.net.forward(&input)?;
        let scores = raw
            .into_shape_with_order((n, n))
            .expect("square score matrix");
        let eval = value_cpc(&scores)?;

        // dJ/dS_ab = (1/N)·(δ_ab − softmax_b(S_a·))
        let mut upstream = Array2::zeros((1, n * n));
        let inv_n = 1.0 / n as f64;
        for i in 0..n {
            let row = scores.row(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = row.iter().map(|&v| (v - m).exp()).sum();
            for j in 0..n {
                let softmax = (scores[[i, j]] - m).exp() / denom;
                let delta = if i == j { 1.0 } else { 0.0 };
                upstream[[0, i * n + j]] = -(inv_n * (delta - softmax));
            }
        }
        let grads = self.net.backward_params(&cache, &upstream)?;
        adam_step(&mut self.net, &grads, &mut self.adam)?;
        Ok(TrainStep {
            value: eval.total,
            estimate_nats: eval.total,
        })
    }

    /// Value, readout, and per-sample gradients `dJ/d(raw output)` for the
    /// non-CPC families. Gradients use fused forms that stay finite where
    /// the naive activation/denominator composition would overflow.
    fn objective_and_grads(
        &mut self,
        o_joint: &[f64],
        o_marg: &[f64],
    ) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        let n = o_joint.len();
        let inv_n = 1.0 / n as f64;
        match self.family {
            Family::KlDime => {
                let d_j: Vec<f64> = o_joint.iter().map(|&o| softplus(o)).collect();
                let d_m: Vec<f64> = o_marg.iter().map(|&o| softplus(o)).collect();
                let eval = value_fdime(FGenerator::Kl, &d_j, &d_m)?;
                let estimate = mean_by(&d_j, safe_ln);
                // d ln(softplus(o))/do → 1 as o → −∞.
                let gj: Vec<f64> = o_joint.iter().map(|&o| inv_n * sig_over_softplus(o)).collect();
                let gm: Vec<f64> = o_marg.iter().map(|&o| -inv_n * sigmoid(o)).collect();
                Ok((eval.total, estimate, gj, gm))
            }
            Family::GanDime => {
                let d_j: Vec<f64> = o_joint.iter().map(|&o| sigmoid(o)).collect();
                let d_m: Vec<f64> = o_marg.iter().map(|&o| sigmoid(o)).collect();
                let eval = value_fdime(FGenerator::Gan, &d_j, &d_m)?;
                let estimate = mean_by(&d_j, |d| safe_ln(1.0 - d) - safe_ln(d));
                // d ln(1−σ(o))/do = −σ(o);  d ln σ(o)/do = σ(−o).
                let gj: Vec<f64> = o_joint.iter().map(|&o| -inv_n * sigmoid(o)).collect();
                let gm: Vec<f64> = o_marg.iter().map(|&o| inv_n * sigmoid(-o)).collect();
                Ok((eval.total, estimate, gj, gm))
            }
            Family::HdDime => {
                let d_j: Vec<f64> = o_joint.iter().map(|&o| softplus(o)).collect();
                let d_m: Vec<f64> = o_marg.iter().map(|&o| softplus(o)).collect();
                let eval = value_fdime(FGenerator::Hd, &d_j, &d_m)?;
                let estimate = mean_by(&d_j, |d| -2.0 * safe_ln(d));
                let gj: Vec<f64> = o_joint.iter().map(|&o| -inv_n * sigmoid(o)).collect();
                let gm: Vec<f64> = o_marg
                    .iter()
                    .zip(&d_m)
                    .map(|(&o, &d)| {
                        let dd = d.max(1e-150);
                        inv_n * sigmoid(o) / (dd * dd)
                    })
                    .collect();
                Ok((eval.total, estimate, gj, gm))
            }
            Family::GammaDime(gamma) => {
                let d_j: Vec<f64> = o_joint.iter().map(|&o| softplus(o)).collect();
                let d_m: Vec<f64> = o_marg.iter().map(|&o| softplus(o)).collect();
                let eval = value_gamma(gamma, &d_j, &d_m)?;
                let estimate = gamma * mean_by(&d_j, safe_ln);
                let gj: Vec<f64> = o_joint
                    .iter()
                    .map(|&o| inv_n * gamma * sig_over_softplus(o))
                    .collect();
                let gm: Vec<f64> = o_marg
                    .iter()
                    .zip(&d_m)
                    .map(|(&o, &d)| -inv_n * gamma * d.powf(gamma - 1.0) * sigmoid(o))
                    .collect();
                Ok((eval.total, estimate, gj, gm))
            }
            Family::Mine { .. } => {
                let ema = self.mine_ema.as_mut().expect("mine estimator carries its ema");
                let eval = value_mine(o_joint, o_marg, ema)?;
                let log_ema = ema.log_value().expect("updated above");
                let gj = vec![inv_n; n];
                // Partition gradient smoothed by the EMA denominator.
                let gm: Vec<f64> = o_marg
                    .iter()
                    .map(|&t| -inv_n * (t - log_ema).min(700.0).exp())
                    .collect();
                Ok((eval.total, eval.total, gj, gm))
            }
            Family::Nwj => {
                let eval = value_nwj(o_joint, o_marg)?;
                let gj = vec![inv_n; n];
                let gm: Vec<f64> = o_marg
                    .iter()
                    .map(|&t| -inv_n * (t - 1.0).min(700.0).exp())
                    .collect();
                Ok((eval.total, eval.total, gj, gm))
            }
            Family::Smile { tau } => {
                // Train on the GAN/JS objective with T = ln((1−D)/D); read
                // out with the clipped partition. Training directly on the
                // clipped objective diverges for small τ.
                let train_value = mean_by(o_joint, |o| -softplus(-o))
                    - mean_by(o_marg, softplus)
                    + (4.0f64).ln();
                let readout = value_smile(o_joint, o_marg, tau)?.total;
                let gj: Vec<f64> = o_joint.iter().map(|&o| inv_n * sigmoid(-o)).collect();
                let gm: Vec<f64> = o_marg.iter().map(|&o| -inv_n * sigmoid(o)).collect();
                Ok((train_value, readout, gj, gm))
            }
            Family::Cpc => unreachable!("cpc takes the all-pairs path"),
        }
    }

    /// MI readout from the current discriminator. The f-DIME families use
    /// the joint samples only; MINE/NWJ/SMILE need the marginal view for
    /// their partition term, and CPC scores all pairs.
    pub fn estimate_mi(&self, batch: &Batch, shuffle: &Shuffle) -> Result<MiEstimate> {
        let n = batch.len();
        let value_nats = match self.family {
            Family::Cpc => {
                let input = self.all_pairs_input(batch);
                let (raw, _) = self.net.forward(&input)?;
                let scores = raw.into_shape_with_order((n, n)).expect("square score matrix");
                value_cpc(&scores)?.total
            }
            family if !family.readout_uses_marginals() => {
                let mut input = Array2::zeros((self.dim_x + self.dim_y, n));
                input.slice_mut(s![0..self.dim_x, ..]).assign(&batch.x);
                input.slice_mut(s![self.dim_x.., ..]).assign(&batch.y);
                let (raw, _) = self.net.forward(&input)?;
                let outputs: Vec<f64> = raw.row(0).to_vec();
                match family {
                    Family::KlDime => mean_by(&outputs, |o| safe_ln(softplus(o))),
                    Family::GanDime => mean_by(&outputs, |o| {
                        let d = sigmoid(o);
                        safe_ln(1.0 - d) - safe_ln(d)
                    }),
                    Family::HdDime => mean_by(&outputs, |o| -2.0 * safe_ln(softplus(o))),
                    Family::GammaDime(g) => g * mean_by(&outputs, |o| safe_ln(softplus(o))),
                    _ => unreachable!(),
                }
            }
            _ => {
                self.check_batch(batch, shuffle)?;
                let input = self.paired_input(batch, shuffle);
                let (raw, _) = self.net.forward(&input)?;
                let t_joint: Vec<f64> = (0..n).map(|i| raw[[0, i]]).collect();
                let t_marg: Vec<f64> = (0..n).map(|i| raw[[0, n + i]]).collect();
                match self.family {
                    Family::Mine { .. } => mean_slice(&t_joint) - log_mean_exp(&t_marg),
                    Family::Nwj => value_nwj(&t_joint, &t_marg)?.total,
                    Family::Smile { tau } => value_smile(&t_joint, &t_marg, tau)?.total,
                    _ => unreachable!(),
                }
            }
        };
        Ok(MiEstimate {
            value_nats,
            n_samples: n,
            family: self.family,
        })
    }
}

#[inline]
fn softplus(o: f64) -> f64 {
    Activation::Softplus.apply(o)
}

#[inline]
fn sigmoid(o: f64) -> f64 {
    Activation::Softplus.deriv(o)
}

/// `σ(o)/softplus(o)`, which tends to 1 as `o → −∞`; the branch avoids
/// 0/0 underflow.
#[inline]
fn sig_over_softplus(o: f64) -> f64 {
    if o < -30.0 {
        1.0
    } else {
        sigmoid(o) / softplus(o).max(1e-300)
    }
}

fn mean_by(values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    values.iter().map(|&v| f(v)).sum::<f64>() / values.len() as f64
}

fn mean_slice(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Evaluates a family's readout with the exact density ratio substituted for
/// the trained discriminator, bypassing training entirely.
///
/// `ratio_fn(x_col, y_col)` must return the positive ratio
/// `p_XY/(p_X·p_Y)` at that point.
pub fn estimate_with_oracle_ratio(
    family: Family,
    ratio_fn: &dyn Fn(&[f64], &[f64]) -> f64,
    batch: &Batch,
    shuffle: &Shuffle,
) -> Result<MiEstimate> {
    let n = batch.len();
    let ratio_at = |i: usize, j: usize| -> f64 {
        let x: Vec<f64> = batch.x.column(i).to_vec();
        let y: Vec<f64> = batch.y.column(j).to_vec();
        ratio_fn(&x, &y)
    };
    let r_joint: Vec<f64> = (0..n).map(|i| ratio_at(i, i)).collect();
    if r_joint.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::config("ratio function must be positive".to_string()));
    }
    let value_nats = match family {
        Family::KlDime | Family::GanDime | Family::HdDime => {
            let gen = family.generator().unwrap();
            mean_by(&r_joint, |r| gen.readout(gen.optimal_discriminator(r)))
        }
        Family::GammaDime(g) => {
            // D* = R^{1/γ}; readout γ·mean ln D*.
            g * mean_by(&r_joint, |r| safe_ln(r.powf(1.0 / g)))
        }
        Family::Mine { .. } | Family::Nwj | Family::Smile { .. } => {
            let r_marg: Vec<f64> = shuffle
                .perm()
                .iter()
                .enumerate()
                .map(|(i, &j)| ratio_at(i, j))
                .collect();
            match family {
                Family::Mine { .. } => {
                    let t_m: Vec<f64> = r_marg.iter().map(|&r| r.ln()).collect();
                    mean_by(&r_joint, f64::ln) - log_mean_exp(&t_m)
                }
                Family::Nwj => {
                    // T* = ln R + 1.
                    mean_by(&r_joint, |r| r.ln() + 1.0) - mean_slice(&r_marg)
                }
                Family::Smile { tau } => {
                    let clipped: Vec<f64> =
                        r_marg.iter().map(|&r| r.ln().clamp(-tau, tau)).collect();
                    mean_by(&r_joint, f64::ln) - log_mean_exp(&clipped)
                }
                _ => unreachable!(),
            }
        }
        Family::Cpc => {
            let mut scores = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    scores[[i, j]] = ratio_at(i, j).ln();
                }
            }
            value_cpc(&scores)?.total
        }
    };
    Ok(MiEstimate {
        value_nats,
        n_samples: n,
        family,
    })
}

/// A fully enumerable discrete joint pmf, the exact-arithmetic counterpart
/// of a sampled batch.
#[derive(Debug, Clone)]
pub struct DiscreteJoint {
    pmf: Array2<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(pmf: Array2<f64>) -> Result<Self> {
        if pmf.iter().any(|&p| p < 0.0) {
            return Err(Error::config("pmf entries must be non-negative".to_string()));
        }
        let total: f64 = pmf.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("pmf sums to {total}, expected 1")));
        }
        let px: Vec<f64> = (0..pmf.nrows()).map(|i| pmf.row(i).sum()).collect();
        let py: Vec<f64> = (0..pmf.ncols()).map(|j| pmf.column(j).sum()).collect();
        Ok(DiscreteJoint { pmf, px, py })
    }

    pub fn pmf(&self) -> &Array2<f64> {
        &self.pmf
    }

    pub fn marginal_x(&self) -> &[f64] {
        &self.px
    }

    pub fn marginal_y(&self) -> &[f64] {
        &self.py
    }

    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        self.pmf[[i, j]] / (self.px[i] * self.py[j])
    }

    /// Exact mutual information by enumeration: `Σ p·ln(p/(p_x·p_y))`.
    pub fn mi_enumerated(&self) -> f64 {
        let mut total = 0.0;
        for ((i, j), &p) in self.pmf.indexed_iter() {
            if p > 0.0 {
                total += p * self.ratio(i, j).ln();
            }
        }
        total
    }

    /// Family readout with the exact ratio, as an expectation over the
    /// enumerated joint rather than a Monte Carlo batch. Defined for every
    /// family except CPC, whose value depends on a batch layout.
    pub fn oracle_readout(&self, family: Family) -> Result<f64> {
        let mut joint_term = 0.0;
        for ((i, j), &p) in self.pmf.indexed_iter() {
            if p == 0.0 {
                continue;
            }
            let r = self.ratio(i, j);
            let contribution = match family {
                Family::KlDime | Family::GanDime | Family::HdDime => {
                    let gen = family.generator().unwrap();
                    gen.readout(gen.optimal_discriminator(r))
                }
                Family::GammaDime(g) => g * safe_ln(r.powf(1.0 / g)),
                Family::Mine { .. } | Family::Smile { .. } => r.ln(),
                Family::Nwj => r.ln() + 1.0,
                Family::Cpc => {
                    return Err(Error::config(
                        "cpc readout is batch-shaped; it has no enumerated form".to_string(),
                    ))
                }
            };
            joint_term += p * contribution;
        }
        // Partition terms under the product of marginals, where needed.
        let marg_expectation = |f: &dyn Fn(f64) -> f64| -> f64 {
            let mut total = 0.0;
            for i in 0..self.px.len() {
                for j in 0..self.py.len() {
                    total += self.px[i] * self.py[j] * f(self.ratio(i, j));
                }
            }
            total
        };
        let value = match family {
            Family::Mine { .. } => joint_term - marg_expectation(&|r| r).ln(),
            Family::Nwj => joint_term - marg_expectation(&|r| r),
            Family::Smile { tau } => {
                joint_term - marg_expectation(&|r| r.max(1e-300).ln().clamp(-tau, tau).exp()).ln()
            }
            _ => joint_term,
        };
        Ok(value)
    }
}

/// Variance of the oracle-ratio estimate on the correlated scalar Gaussian:
/// `(1 − e^{−2I})/M`.
pub fn variance_gaussian(mi_nats: f64, m: usize) -> f64 {
    (1.0 - (-2.0 * mi_nats).exp()) / m as f64
}

/// Closed-form optimum of the naive-permutation KL value function:
/// `D̂ = N·R / (K·R + N − K)` for batch size `N` with `K` fixed points.
///
/// `K = 0` recovers the density ratio; `R → ∞` caps the discriminator at
/// `N/K`, which is what bounds the permuted estimator by `ln N`.
pub fn permuted_optimum(ratio: f64, n: usize, k: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::config("batch size must be positive".to_string()));
    }
    if k > n {
        return Err(Error::config(format!("fixed points {k} exceed batch size {n}")));
    }
    if !(ratio > 0.0) {
        return Err(Error::config(format!("ratio must be positive, got {ratio}")));
    }
    Ok(n as f64 * ratio / (k as f64 * ratio + (n - k) as f64))
}
