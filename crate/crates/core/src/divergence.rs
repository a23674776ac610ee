//! f-divergence generators, their Fenchel conjugates, and the training value
//! functions for every estimator family.
//!
//! The discriminative estimators share one shape: a value function with a
//! joint-sample term and a marginal-sample term, maximized over a
//! discriminator. What differs per family is the generator `f`, the output
//! activation that keeps the discriminator in its domain, and the readout
//! that turns a trained discriminator value into a log-density-ratio.
//!
//! All values are in nats.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::Activation;

/// Floor for logarithm arguments; a guard against under/overflow, not part
/// of any formula.
pub const LOG_FLOOR: f64 = 1e-300;

#[inline]
pub(crate) fn safe_ln(v: f64) -> f64 {
    v.max(LOG_FLOOR).ln()
}

/// Stable `ln(mean(exp(t)))`.
pub(crate) fn log_mean_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = values.iter().map(|&t| (t - m).exp()).sum();
    m + (sum / values.len() as f64).ln()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// An f-divergence generator: the Fenchel conjugate pair plus the
/// discriminator-side conventions that make it trainable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FGenerator {
    /// `f(u) = u ln u`; discriminator converges to the density ratio itself.
    Kl,
    /// `f(u) = u ln u − (u+1) ln(u+1) + ln 4`; discriminator converges to
    /// `1/(1+R)`.
    Gan,
    /// Squared Hellinger distance `f(u) = (√u − 1)²`; discriminator converges
    /// to `1/√R`.
    Hd,
}

impl FGenerator {
    /// Fenchel conjugate `f*`.
    pub fn conjugate(self, t: f64) -> f64 {
        match self {
            FGenerator::Kl => (t - 1.0).exp(),
            FGenerator::Gan => -(-(t.exp()) + 1.0).max(LOG_FLOOR).ln(),
            FGenerator::Hd => t / (1.0 - t),
        }
    }

    /// Derivative of the conjugate, `(f*)'`. Applied to the optimal
    /// discriminator this recovers the density ratio.
    pub fn conjugate_deriv(self, t: f64) -> f64 {
        match self {
            FGenerator::Kl => (t - 1.0).exp(),
            FGenerator::Gan => {
                let e = t.exp();
                e / (1.0 - e)
            }
            FGenerator::Hd => {
                let d = 1.0 - t;
                1.0 / (d * d)
            }
        }
    }

    /// Activation that maps a raw network output into this family's
    /// discriminator domain.
    pub fn output_activation(self) -> Activation {
        match self {
            FGenerator::Kl | FGenerator::Hd => Activation::Softplus,
            FGenerator::Gan => Activation::Sigmoid,
        }
    }

    /// Log-density-ratio readout from a discriminator value.
    pub fn readout(self, d: f64) -> f64 {
        match self {
            FGenerator::Kl => safe_ln(d),
            FGenerator::Gan => safe_ln(1.0 - d) - safe_ln(d),
            FGenerator::Hd => -2.0 * safe_ln(d),
        }
    }

    /// Value of the optimal discriminator at density ratio `r`.
    pub fn optimal_discriminator(self, r: f64) -> f64 {
        match self {
            FGenerator::Kl => r,
            FGenerator::Gan => 1.0 / (1.0 + r),
            FGenerator::Hd => (1.0 / r).sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FGenerator::Kl => "kl",
            FGenerator::Gan => "gan",
            FGenerator::Hd => "hd",
        }
    }

    fn check_domain(self, values: &[f64], which: &str) -> Result<()> {
        let ok = match self {
            FGenerator::Kl | FGenerator::Hd => values.iter().all(|v| v.is_finite() && *v >= 0.0),
            FGenerator::Gan => values.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::numeric(format!(
                "{} discriminator {which} values outside the activation codomain",
                self.name()
            )))
        }
    }
}

/// Monte Carlo evaluation of a training value function.
///
/// `total = joint_term − marginal_term + offset`; the offset carries the
/// additive constant some families include.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueFunctionEval {
    pub joint_term: f64,
    pub marginal_term: f64,
    pub offset: f64,
    pub total: f64,
}

impl ValueFunctionEval {
    fn new(joint_term: f64, marginal_term: f64, offset: f64) -> Self {
        ValueFunctionEval {
            joint_term,
            marginal_term,
            offset,
            total: joint_term - marginal_term + offset,
        }
    }
}

/// Value function for the f-DIME families.
///
/// - kl:  `mean ln D_joint − mean D_marg + 1`
/// - gan: `mean ln(1−D_joint) + mean ln D_marg + ln 4`
/// - hd:  `2 − mean D_joint − mean 1/D_marg`
pub fn value_fdime(
    gen: FGenerator,
    d_joint: &[f64],
    d_marg: &[f64],
) -> Result<ValueFunctionEval> {
    gen.check_domain(d_joint, "joint")?;
    gen.check_domain(d_marg, "marginal")?;
    let eval = match gen {
        FGenerator::Kl => {
            let j = mean(&d_joint.iter().map(|&d| safe_ln(d)).collect::<Vec<_>>());
            let m = mean(d_marg);
            ValueFunctionEval::new(j, m, 1.0)
        }
        FGenerator::Gan => {
            let j = mean(&d_joint.iter().map(|&d| safe_ln(1.0 - d)).collect::<Vec<_>>());
            let m = -mean(&d_marg.iter().map(|&d| safe_ln(d)).collect::<Vec<_>>());
            ValueFunctionEval::new(j, m, (4.0f64).ln())
        }
        FGenerator::Hd => {
            let j = -mean(d_joint);
            let m = mean(&d_marg.iter().map(|&d| 1.0 / d.max(LOG_FLOOR)).collect::<Vec<_>>());
            ValueFunctionEval::new(j, m, 2.0)
        }
    };
    if !eval.total.is_finite() {
        return Err(Error::numeric(format!(
            "{} value function is non-finite",
            gen.name()
        )));
    }
    Ok(eval)
}

/// γ-scaled KL value function `γ·mean ln D_joint − mean D_marg^γ`.
///
/// The mutual information satisfies `I ≥ total + 1`, with equality at the
/// optimal discriminator `D* = R^{1/γ}`.
pub fn value_gamma(gamma: f64, d_joint: &[f64], d_marg: &[f64]) -> Result<ValueFunctionEval> {
    if !(gamma > 0.0) {
        return Err(Error::config(format!("gamma must be positive, got {gamma}")));
    }
    FGenerator::Kl.check_domain(d_joint, "joint")?;
    FGenerator::Kl.check_domain(d_marg, "marginal")?;
    let j = gamma * mean(&d_joint.iter().map(|&d| safe_ln(d)).collect::<Vec<_>>());
    let m = mean(&d_marg.iter().map(|&d| d.powf(gamma)).collect::<Vec<_>>());
    Ok(ValueFunctionEval::new(j, m, 0.0))
}

/// Exponential-moving-average state for MINE's partition term, kept in the
/// log domain so large critic outputs cannot overflow it.
#[derive(Debug, Clone)]
pub struct MineEma {
    decay: f64,
    log_value: Option<f64>,
}

impl MineEma {
    /// `decay` is the weight on history; the toolkit default is 0.9.
    pub fn new(decay: f64) -> Self {
        MineEma {
            decay,
            log_value: None,
        }
    }

    /// Folds in a fresh `ln(mean e^T)` observation and returns the smoothed
    /// log-partition value. The first observation seeds the average.
    pub fn update(&mut self, log_partition: f64) -> f64 {
        let new = match self.log_value {
            None => log_partition,
            Some(prev) => {
                // ln(decay·e^prev + (1−decay)·e^new), stably.
                let a = prev + self.decay.ln();
                let b = log_partition + (1.0 - self.decay).ln();
                let m = a.max(b);
                m + ((a - m).exp() + (b - m).exp()).ln()
            }
        };
        self.log_value = Some(new);
        new
    }

    pub fn log_value(&self) -> Option<f64> {
        self.log_value
    }
}

/// MINE value `mean T_joint − ln(mean e^{T_marg})`.
///
/// The returned eval is the (biased) estimate itself; the EMA is updated so
/// the caller's gradient path can divide by the smoothed partition instead
/// of the per-batch one.
pub fn value_mine(
    t_joint: &[f64],
    t_marg: &[f64],
    ema: &mut MineEma,
) -> Result<ValueFunctionEval> {
    check_finite(t_joint, "mine joint")?;
    check_finite(t_marg, "mine marginal")?;
    let log_partition = log_mean_exp(t_marg);
    ema.update(log_partition);
    let eval = ValueFunctionEval::new(mean(t_joint), log_partition, 0.0);
    if !eval.total.is_finite() {
        return Err(Error::numeric("mine value function is non-finite".to_string()));
    }
    Ok(eval)
}

/// NWJ value `mean T_joint − mean e^{T_marg − 1}`.
pub fn value_nwj(t_joint: &[f64], t_marg: &[f64]) -> Result<ValueFunctionEval> {
    check_finite(t_joint, "nwj joint")?;
    check_finite(t_marg, "nwj marginal")?;
    let m = mean(&t_marg.iter().map(|&t| (t - 1.0).exp()).collect::<Vec<_>>());
    let eval = ValueFunctionEval::new(mean(t_joint), m, 0.0);
    if !eval.total.is_finite() {
        return Err(Error::numeric("nwj value function is non-finite".to_string()));
    }
    Ok(eval)
}

/// SMILE readout `mean T_joint − ln(mean clip(e^{T_marg}, e^{−τ}, e^{τ}))`.
///
/// This is a readout only: training uses the GAN/JS gradient (training on
/// the clipped objective itself diverges for small τ).
pub fn value_smile(t_joint: &[f64], t_marg: &[f64], tau: f64) -> Result<ValueFunctionEval> {
    if !(tau > 0.0) {
        return Err(Error::config(format!("smile tau must be positive, got {tau}")));
    }
    check_finite(t_joint, "smile joint")?;
    check_finite(t_marg, "smile marginal")?;
    // clip(e^t, e^-τ, e^τ) = e^{clamp(t, -τ, τ)}, so clip in the log domain.
    let clipped: Vec<f64> = t_marg.iter().map(|&t| t.clamp(-tau, tau)).collect();
    Ok(ValueFunctionEval::new(mean(t_joint), log_mean_exp(&clipped), 0.0))
}

/// CPC / InfoNCE value over an `N × N` score matrix whose diagonal holds the
/// paired scores: `mean_i [ S_ii − ln(mean_j e^{S_ij}) ]`. Bounded above by
/// `ln N` for any finite scores.
pub fn value_cpc(scores: &Array2<f64>) -> Result<ValueFunctionEval> {
    let n = scores.nrows();
    if n == 0 || scores.ncols() != n {
        return Err(Error::config(format!(
            "cpc needs a square score matrix, got {}×{}",
            scores.nrows(),
            scores.ncols()
        )));
    }
    let mut joint = 0.0;
    let mut marg = 0.0;
    for i in 0..n {
        let row = scores.row(i);
        joint += scores[[i, i]];
        marg += log_mean_exp(row.as_slice().expect("row-major score matrix"));
    }
    let eval = ValueFunctionEval::new(joint / n as f64, marg / n as f64, 0.0);
    if !eval.total.is_finite() {
        return Err(Error::numeric("cpc value function is non-finite".to_string()));
    }
    Ok(eval)
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(format!("{what} values contain non-finite entries")))
    }
}
