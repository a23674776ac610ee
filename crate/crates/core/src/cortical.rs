//! Cooperative max-max capacity learning.
//!
//! A generator maps latent noise to channel inputs; a discriminator learns
//! the ratio between paired and unpaired channel input/output samples. Both
//! ascend the same value function
//!
//! `J_α(G, D) = α·E[ln D(x, y)] − E[D(x, ỹ)]`
//!
//! (ỹ a deranged output batch), and the channel capacity is read directly
//! off the value at the optimum: `C = J/α + 1 − ln α`. Each outer iteration
//! runs `K` discriminator ascent steps followed by one generator step whose
//! gradient flows through the discriminator and the (reparameterizable)
//! channel back into the generator.

use ndarray::{s, Array2};

use crate::channels::ReparamChannel;
use crate::divergence::safe_ln;
use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamState, Mlp};
use crate::sampling::{derange, DerangeMode, SplitRng};

/// Input-distribution constraints, imposed either structurally (hard
/// scaling) or as hinge penalties subtracted from the generator objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerConstraint {
    /// `λ·mean_i max(‖x_i‖² − A², 0)` (peak power `A²`).
    PeakHinge { a: f64, lambda: f64 },
    /// Rescale each batch so `mean ‖x‖² = P` exactly.
    AvgHardScale { p: f64 },
    /// `λ·max(mean ‖x‖² − P, 0)` (average power `P`).
    AvgHinge { p: f64, lambda: f64 },
    /// Logarithmic constraint of the additive-Cauchy scenario:
    /// `λ·max(mean ln(((A+γ)/A)² + (x/A)²) − ln 4, 0)`.
    CauchyLog { a: f64, gamma: f64, lambda: f64 },
    /// Rayleigh-equivalent average constraint on rates `s ∈ (0,1]`:
    /// `λ·max(mean (1/s − 1) − a, 0)`.
    RayleighAvg { a: f64, lambda: f64 },
}

/// A set of constraints applied together; hard scaling is structural,
/// penalties contribute to the generator objective.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSpec {
    pub constraints: Vec<PowerConstraint>,
}

impl ConstraintSpec {
    pub fn none() -> Self {
        ConstraintSpec::default()
    }

    pub fn peak(a: f64) -> Self {
        ConstraintSpec {
            constraints: vec![PowerConstraint::PeakHinge { a, lambda: 1.0 }],
        }
    }

    pub fn avg_hard(p: f64) -> Self {
        ConstraintSpec {
            constraints: vec![PowerConstraint::AvgHardScale { p }],
        }
    }

    fn hard_scale_target(&self) -> Option<f64> {
        self.constraints.iter().find_map(|c| match c {
            PowerConstraint::AvgHardScale { p } => Some(*p),
            _ => None,
        })
    }
}

/// Hinge-penalty value of `spec` on a batch of generator outputs.
pub fn constraint_penalty(x: &Array2<f64>, spec: &ConstraintSpec) -> f64 {
    let n = x.ncols() as f64;
    let mut total = 0.0;
    for c in &spec.constraints {
        match *c {
            PowerConstraint::PeakHinge { a, lambda } => {
                let mut acc = 0.0;
                for col in x.columns() {
                    let norm2: f64 = col.iter().map(|v| v * v).sum();
                    acc += (norm2 - a * a).max(0.0);
                }
                total += lambda * acc / n;
            }
            PowerConstraint::AvgHinge { p, lambda } => {
                let mean_power = x.iter().map(|v| v * v).sum::<f64>() / n;
                total += lambda * (mean_power - p).max(0.0);
            }
            PowerConstraint::CauchyLog { a, gamma, lambda } => {
                let c0 = (a + gamma) / a;
                let mean_log = x
                    .iter()
                    .map(|&v| (c0 * c0 + (v / a) * (v / a)).ln())
                    .sum::<f64>()
                    / n;
                total += lambda * (mean_log - (4.0f64).ln()).max(0.0);
            }
            PowerConstraint::RayleighAvg { a, lambda } => {
                let mean = x.iter().map(|&s| 1.0 / s - 1.0).sum::<f64>() / n;
                total += lambda * (mean - a).max(0.0);
            }
            PowerConstraint::AvgHardScale { .. } => {}
        }
    }
    total
}

/// Gradient of [`constraint_penalty`] with respect to each sample.
fn constraint_penalty_grad(x: &Array2<f64>, spec: &ConstraintSpec) -> Array2<f64> {
    let n = x.ncols() as f64;
    let mut grad = Array2::zeros(x.raw_dim());
    for c in &spec.constraints {
        match *c {
            PowerConstraint::PeakHinge { a, lambda } => {
                for (j, col) in x.columns().into_iter().enumerate() {
                    let norm2: f64 = col.iter().map(|v| v * v).sum();
                    if norm2 > a * a {
                        for (r, &v) in col.iter().enumerate() {
                            grad[[r, j]] += lambda * 2.0 * v / n;
                        }
                    }
                }
            }
            PowerConstraint::AvgHinge { p, lambda } => {
                let mean_power = x.iter().map(|v| v * v).sum::<f64>() / n;
                if mean_power > p {
                    ndarray::Zip::from(&mut grad).and(x).for_each(|g, &v| {
                        *g += lambda * 2.0 * v / n;
                    });
                }
            }
            PowerConstraint::CauchyLog { a, gamma, lambda } => {
                let c0 = (a + gamma) / a;
                let mean_log = x
                    .iter()
                    .map(|&v| (c0 * c0 + (v / a) * (v / a)).ln())
                    .sum::<f64>()
                    / n;
                if mean_log > (4.0f64).ln() {
                    ndarray::Zip::from(&mut grad).and(x).for_each(|g, &v| {
                        let u = v / a;
                        *g += lambda * (2.0 * u / a) / (c0 * c0 + u * u) / n;
                    });
                }
            }
            PowerConstraint::RayleighAvg { a, lambda } => {
                let mean = x.iter().map(|&s| 1.0 / s - 1.0).sum::<f64>() / n;
                if mean > a {
                    ndarray::Zip::from(&mut grad).and(x).for_each(|g, &s| {
                        *g += lambda * (-1.0 / (s * s)) / n;
                    });
                }
            }
            PowerConstraint::AvgHardScale { .. } => {}
        }
    }
    grad
}

/// Latent source feeding the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentSource {
    /// Standard normal of the given dimension (continuous inputs).
    Gaussian(usize),
    /// `k` fair coin flips (discrete constellations of up to 2^k points).
    Bernoulli(usize),
}

impl LatentSource {
    fn dim(&self) -> usize {
        match self {
            LatentSource::Gaussian(d) | LatentSource::Bernoulli(d) => *d,
        }
    }

    fn sample(&self, n: usize, rng: &mut SplitRng) -> Array2<f64> {
        match self {
            LatentSource::Gaussian(d) => rng.normal_matrix(*d, n),
            LatentSource::Bernoulli(d) => {
                let mut z = Array2::zeros((*d, n));
                for v in z.iter_mut() {
                    *v = if rng.uniform() < 0.5 { 1.0 } else { 0.0 };
                }
                z
            }
        }
    }
}

/// Hyperparameters for a capacity learner.
#[derive(Debug, Clone)]
pub struct CorticalConfig {
    pub alpha: f64,
    pub k_disc_steps: usize,
    pub batch: usize,
    pub latent: LatentSource,
    pub gen_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
    pub lr: f64,
    pub beta1: f64,
    pub seed: u64,
}

impl Default for CorticalConfig {
    fn default() -> Self {
        CorticalConfig {
            alpha: 1.0,
            k_disc_steps: 10,
            batch: 512,
            latent: LatentSource::Gaussian(30),
            gen_hidden: vec![100, 100, 100],
            disc_hidden: vec![100, 100],
            lr: 2e-4,
            beta1: 0.5,
            seed: 0,
        }
    }
}

/// One point of the training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub value: f64,
    pub capacity_nats: f64,
}

/// Capacity readout: `nats = value/α + 1 − ln α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityEstimate {
    pub nats: f64,
    pub value_function: f64,
    pub alpha: f64,
}

/// The readout identity applied to a raw value-function number.
pub fn capacity_from_value(value: f64, alpha: f64) -> f64 {
    value / alpha + 1.0 - alpha.ln()
}

/// Generator/discriminator pair with the cooperative training loop.
#[derive(Debug, Clone)]
pub struct CapacityLearner {
    generator: Mlp,
    discriminator: Mlp,
    gen_adam: AdamState,
    disc_adam: AdamState,
    config: CorticalConfig,
    constraint: ConstraintSpec,
    channel: ReparamChannel,
}

impl CapacityLearner {
    pub fn new(
        channel: ReparamChannel,
        constraint: ConstraintSpec,
        config: CorticalConfig,
    ) -> Result<Self> {
        if !(config.alpha > 0.0) {
            return Err(Error::config(format!(
                "alpha must be positive, got {}",
                config.alpha
            )));
        }
        let dim = channel.dim();
        // Rates of the Rayleigh-equivalent model live in (0,1]; a sigmoid
        // output keeps the generator inside that domain structurally.
        let gen_out_act = match channel {
            ReparamChannel::RayleighEquiv => Activation::Sigmoid,
            _ => Activation::Identity,
        };
        let mut gen_dims = vec![config.latent.dim()];
        gen_dims.extend_from_slice(&config.gen_hidden);
        gen_dims.push(dim);
        let mut gen_acts = vec![Activation::Relu; config.gen_hidden.len()];
        gen_acts.push(gen_out_act);
        let generator = Mlp::new(&gen_dims, &gen_acts, config.seed)?;

        let mut disc_dims = vec![2 * dim];
        disc_dims.extend_from_slice(&config.disc_hidden);
        disc_dims.push(1);
        let mut disc_acts = vec![Activation::Relu; config.disc_hidden.len()];
        // Raw output; softplus is applied inside the objective so the fused
        // gradient forms stay finite. The discriminator value is positive.
        disc_acts.push(Activation::Identity);
        let discriminator = Mlp::new(&disc_dims, &disc_acts, config.seed.wrapping_add(1))?;

        let gen_adam =
            AdamState::with_hyperparams(&generator, config.lr, config.beta1, 0.999, 1e-8);
        let disc_adam =
            AdamState::with_hyperparams(&discriminator, config.lr, config.beta1, 0.999, 1e-8);
        Ok(CapacityLearner {
            generator,
            discriminator,
            gen_adam,
            disc_adam,
            config,
            constraint,
            channel,
        })
    }

    pub fn generator(&self) -> &Mlp {
        &self.generator
    }

    pub fn discriminator(&self) -> &Mlp {
        &self.discriminator
    }

    pub fn channel(&self) -> ReparamChannel {
        self.channel
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }

    /// Draws a batch of constrained channel inputs from the generator.
    pub fn sample_inputs(&self, n: usize, rng: &mut SplitRng) -> Result<Array2<f64>> {
        let z = self.config.latent.sample(n, rng);
        let (x, _) = self.generator.forward(&z)?;
        Ok(self.apply_hard_scaling(x).0)
    }

    /// Hard average-power scaling: divide by the batch RMS, multiply by √P.
    /// Returns the scaled batch plus `(scale, mean_power)` for the chain rule.
    fn apply_hard_scaling(&self, x: Array2<f64>) -> (Array2<f64>, Option<(f64, f64)>) {
        match self.constraint.hard_scale_target() {
            None => (x, None),
            Some(p) => {
                let n = x.ncols() as f64;
                let mean_power = (x.iter().map(|v| v * v).sum::<f64>() / n).max(1e-12);
                let scale = (p / mean_power).sqrt();
                (x * scale, Some((scale, mean_power)))
            }
        }
    }

    /// Discriminator objective on raw outputs: `α·mean ln D_j − mean D_m`
    /// with `D = softplus(raw)`, plus the per-column ascent gradients.
    fn disc_objective(&self, o_joint: &[f64], o_marg: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = o_joint.len() as f64;
        let alpha = self.config.alpha;
        let softplus = |o: f64| Activation::Softplus.apply(o);
        let sigmoid = |o: f64| Activation::Softplus.deriv(o);
        let value = alpha * o_joint.iter().map(|&o| safe_ln(softplus(o))).sum::<f64>() / n
            - o_marg.iter().map(|&o| softplus(o)).sum::<f64>() / n;
        let gj: Vec<f64> = o_joint
            .iter()
            .map(|&o| {
                let ratio = if o < -30.0 {
                    1.0
                } else {
                    sigmoid(o) / softplus(o).max(1e-300)
                };
                alpha * ratio / n
            })
            .collect();
        let gm: Vec<f64> = o_marg.iter().map(|&o| -sigmoid(o) / n).collect();
        (value, gj, gm)
    }

    /// Builds the paired/deranged discriminator input `[x;y | x;ỹ]`.
    fn disc_input(x: &Array2<f64>, y: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
        let dim = x.nrows();
        let n = x.ncols();
        let mut input = Array2::zeros((2 * dim, 2 * n));
        input.slice_mut(s![0..dim, 0..n]).assign(x);
        input.slice_mut(s![dim.., 0..n]).assign(y);
        input.slice_mut(s![0..dim, n..]).assign(x);
        for (i, &j) in perm.iter().enumerate() {
            input.slice_mut(s![dim.., n + i]).assign(&y.column(j));
        }
        input
    }

    /// One full outer iteration: `K` discriminator ascent steps, then one
    /// generator ascent step through channel and discriminator. Returns the
    /// value observed at the generator step.
    pub fn outer_step(&mut self, rng: &mut SplitRng) -> Result<f64> {
        let n = self.config.batch;
        for _ in 0..self.config.k_disc_steps {
            let z = self.config.latent.sample(n, rng);
            let (x_raw, _) = self.generator.forward(&z)?;
            let (x, _) = self.apply_hard_scaling(x_raw);
            let (y, _) = self.channel.apply(&x, rng)?;
            let shuffle = derange(n, DerangeMode::Shift, rng)?;
            let input = Self::disc_input(&x, &y, shuffle.perm());
            let (raw, cache) = self.discriminator.forward(&input)?;
            let o_j: Vec<f64> = (0..n).map(|i| raw[[0, i]]).collect();
            let o_m: Vec<f64> = (0..n).map(|i| raw[[0, n + i]]).collect();
            let (_, gj, gm) = self.disc_objective(&o_j, &o_m);
            let mut upstream = Array2::zeros((1, 2 * n));
            for i in 0..n {
                upstream[[0, i]] = -gj[i];
                upstream[[0, n + i]] = -gm[i];
            }
            let grads = self.discriminator.backward_params(&cache, &upstream)?;
            adam_step(&mut self.discriminator, &grads, &mut self.disc_adam)?;
        }

        // Generator step.
        let z = self.config.latent.sample(n, rng);
        let (x_raw, gen_cache) = self.generator.forward(&z)?;
        let (x, scaling) = self.apply_hard_scaling(x_raw.clone());
        let (y, dydx) = self.channel.apply(&x, rng)?;
        let shuffle = derange(n, DerangeMode::Shift, rng)?;
        let input = Self::disc_input(&x, &y, shuffle.perm());
        let (raw, disc_cache) = self.discriminator.forward(&input)?;
        let o_j: Vec<f64> = (0..n).map(|i| raw[[0, i]]).collect();
        let o_m: Vec<f64> = (0..n).map(|i| raw[[0, n + i]]).collect();
        let (value, gj, gm) = self.disc_objective(&o_j, &o_m);

        let mut upstream = Array2::zeros((1, 2 * n));
        for i in 0..n {
            upstream[[0, i]] = gj[i];
            upstream[[0, n + i]] = gm[i];
        }
        let disc_grads = self.discriminator.backward(&disc_cache, &upstream)?;
        let dinput = disc_grads.input.expect("input gradient requested");
        let dim = x.nrows();

        // Assemble dJ/dx from the four ways x enters the objective: as x in
        // joint and marginal columns, and through the channel as y (joint
        // directly, marginal via the derangement).
        let mut dx = Array2::<f64>::zeros((dim, n));
        dx += &dinput.slice(s![0..dim, 0..n]);
        dx += &dinput.slice(s![0..dim, n..2 * n]);
        let dy_joint = dinput.slice(s![dim..2 * dim, 0..n]);
        let dy_marg = dinput.slice(s![dim..2 * dim, n..2 * n]);
        for i in 0..n {
            for r in 0..dim {
                dx[[r, i]] += dy_joint[[r, i]] * dydx[[r, i]];
            }
        }
        for (i, &j) in shuffle.perm().iter().enumerate() {
            for r in 0..dim {
                // Marginal column i holds y_j; route its gradient back to x_j.
                dx[[r, j]] += dy_marg[[r, i]] * dydx[[r, j]];
            }
        }
        // Hinge penalties subtract from the generator objective.
        dx -= &constraint_penalty_grad(&x, &self.constraint);

        // Chain through the hard scaling x = s(x_raw)·x_raw if present.
        let dx_raw = match scaling {
            None => dx,
            Some((scale, mean_power)) => {
                let nf = n as f64;
                let inner: f64 = dx.iter().zip(x_raw.iter()).map(|(&g, &v)| g * v).sum();
                let mut out = dx * scale;
                let coeff = scale * inner / (nf * mean_power);
                ndarray::Zip::from(&mut out).and(&x_raw).for_each(|o, &v| {
                    *o -= coeff * v;
                });
                out
            }
        };

        let mut gen_upstream = dx_raw;
        gen_upstream.mapv_inplace(|v| -v); // ascent
        let gen_grads = self.generator.backward_params(&gen_cache, &gen_upstream)?;
        adam_step(&mut self.generator, &gen_grads, &mut self.gen_adam)?;

        if !value.is_finite() {
            return Err(Error::numeric("capacity learner value diverged".to_string()));
        }
        Ok(value)
    }

    /// Runs `outer_iters` full iterations, tracing value and capacity.
    pub fn train(&mut self, outer_iters: usize, rng: &mut SplitRng) -> Result<Vec<TracePoint>> {
        let mut trace = Vec::with_capacity(outer_iters);
        for it in 0..outer_iters {
            let value = self.outer_step(rng)?;
            trace.push(TracePoint {
                iteration: it,
                value,
                capacity_nats: capacity_from_value(value, self.config.alpha),
            });
        }
        Ok(trace)
    }

    /// Monte Carlo capacity readout with the current generator and
    /// discriminator on a fresh evaluation batch.
    pub fn capacity_estimate(&self, n_eval: usize, rng: &mut SplitRng) -> Result<CapacityEstimate> {
        let z = self.config.latent.sample(n_eval, rng);
        let (x_raw, _) = self.generator.forward(&z)?;
        let (x, _) = self.apply_hard_scaling(x_raw);
        let (y, _) = self.channel.apply(&x, rng)?;
        let shuffle = derange(n_eval, DerangeMode::Shift, rng)?;
        let input = Self::disc_input(&x, &y, shuffle.perm());
        let (raw, _) = self.discriminator.forward(&input)?;
        let o_j: Vec<f64> = (0..n_eval).map(|i| raw[[0, i]]).collect();
        let o_m: Vec<f64> = (0..n_eval).map(|i| raw[[0, n_eval + i]]).collect();
        let (value, _, _) = self.disc_objective(&o_j, &o_m);
        Ok(CapacityEstimate {
            nats: capacity_from_value(value, self.config.alpha),
            value_function: value,
            alpha: self.config.alpha,
        })
    }
}

/// A point mass found by greedy agglomeration.
#[derive(Debug, Clone, PartialEq)]
pub struct MassPoint {
    pub center: Vec<f64>,
    pub mass: f64,
}

/// Greedy agglomeration of samples into `eps`-balls; masses sum to one.
/// Clusters are reported sorted by their first coordinate.
pub fn cluster_mass_points(samples: &Array2<f64>, eps: f64) -> Result<Vec<MassPoint>> {
    if !(eps > 0.0) {
        return Err(Error::config(format!("cluster radius must be positive, got {eps}")));
    }
    let n = samples.ncols();
    if n == 0 {
        return Err(Error::config("no samples to cluster".to_string()));
    }
    let dim = samples.nrows();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for col in samples.columns() {
        let mut assigned = false;
        for (sum, count) in sums.iter_mut().zip(counts.iter_mut()) {
            let dist2: f64 = (0..dim)
                .map(|r| {
                    let c = sum[r] / *count as f64;
                    (col[r] - c) * (col[r] - c)
                })
                .sum();
            if dist2.sqrt() <= eps {
                for r in 0..dim {
                    sum[r] += col[r];
                }
                *count += 1;
                assigned = true;
                break;
            }
        }
        if !assigned {
            sums.push(col.to_vec());
            counts.push(1);
        }
    }
    let mut points: Vec<MassPoint> = sums
        .into_iter()
        .zip(counts)
        .map(|(sum, count)| MassPoint {
            center: sum.iter().map(|v| v / count as f64).collect(),
            mass: count as f64 / n as f64,
        })
        .collect();
    points.sort_by(|a, b| a.center[0].partial_cmp(&b.center[0]).unwrap());
    Ok(points)
}

/// McKellips upper bound on the peak-power-constrained scalar AWGN capacity,
/// in nats: `min{ ln(1 + 2A/√(2πe)), ½·ln(1 + A²) }`.
pub fn mckellips_bound(a: f64) -> f64 {
    let branch1 = (1.0 + 2.0 * a / (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt()).ln();
    let branch2 = 0.5 * (1.0 + a * a).ln();
    branch1.min(branch2)
}

/// Shannon AWGN capacity `(d/2)·ln(1 + snr/d)` in nats, the trivial upper
/// bound for a peak constraint with `snr = A²`.
pub fn awgn_capacity(snr: f64, d: usize) -> f64 {
    (d as f64 / 2.0) * (1.0 + snr / d as f64).ln()
}

/// Exact mutual information of equiprobable binary input `±a` through AWGN
/// of deviation `sigma`, by Simpson quadrature: the capacity oracle for the
/// two-mass-point regime.
pub fn binary_awgn_mi(a: f64, sigma: f64) -> f64 {
    let half_width = a + 12.0 * sigma;
    let steps = 24_000usize; // even
    let h = 2.0 * half_width / steps as f64;
    let p = |y: f64| {
        0.5 * (crate::channels::normal_pdf(y - a, sigma * sigma)
            + crate::channels::normal_pdf(y + a, sigma * sigma))
    };
    let integrand = |y: f64| {
        let v = p(y);
        if v > 0.0 {
            -v * v.ln()
        } else {
            0.0
        }
    };
    let mut acc = integrand(-half_width) + integrand(half_width);
    for k in 1..steps {
        let y = -half_width + k as f64 * h;
        acc += integrand(y) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let h_y = acc * h / 3.0;
    let h_noise = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).ln();
    h_y - h_noise
}
