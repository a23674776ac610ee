//! Synthetic stochastic channels and noise models, with closed-form true-MI
//! oracles where they exist.
//!
//! Channels are memoryless across batch columns: column `j` of the output
//! depends only on column `j` of the input (and fresh noise). The capacity
//! learner additionally needs channels to be reparameterizable — noise drawn
//! independently of the input and composed differentiably — which is what
//! [`ReparamChannel`] encodes.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sampling::{gaussian_pair_batch, Batch, SplitRng};

/// Exact mutual information of the componentwise correlated Gaussian pair:
/// `I = −(d/2)·ln(1−ρ²)` nats.
pub fn true_mi_gaussian(d: usize, rho: f64) -> f64 {
    -(d as f64 / 2.0) * (1.0 - rho * rho).ln()
}

/// Correlation that makes [`true_mi_gaussian`] hit `target` nats:
/// `ρ = √(1 − e^{−2I/d})`.
pub fn rho_for_target_mi(d: usize, target_nats: f64) -> f64 {
    (1.0 - (-2.0 * target_nats / d as f64).exp()).sqrt()
}

/// Pointwise log density ratio `ln p_XY/(p_X p_Y)` for the correlated
/// Gaussian pair, summed over components.
pub fn gaussian_log_ratio(rho: f64, x: &[f64], y: &[f64]) -> f64 {
    let c = 1.0 - rho * rho;
    let mut total = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        total += -0.5 * c.ln() - (rho * rho * (a * a + b * b) - 2.0 * rho * a * b) / (2.0 * c);
    }
    total
}

/// Strictly monotone elementwise output maps. They leave the mutual
/// information unchanged, so the Gaussian oracle still applies to the
/// transformed pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mapping {
    Cubic,
    HalfCube,
    Asinh,
}

impl Mapping {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Mapping::Cubic => v * v * v,
            Mapping::HalfCube => v.signum() * v.abs().powf(1.5),
            Mapping::Asinh => v.asinh(),
        }
    }

    pub fn invert(self, v: f64) -> f64 {
        match self {
            Mapping::Cubic => v.cbrt(),
            Mapping::HalfCube => v.signum() * v.abs().powf(2.0 / 3.0),
            Mapping::Asinh => v.sinh(),
        }
    }
}

/// Applies a monotone map elementwise to an output batch.
pub fn apply_mapping(tag: Mapping, y: &Array2<f64>) -> Array2<f64> {
    y.mapv(|v| tag.apply(v))
}

/// The benchmark scenario family: a `d`-dimensional correlated Gaussian pair
/// whose `y` half may pass through a monotone map. Carries its exact MI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianScenario {
    pub d: usize,
    pub mapping: Option<Mapping>,
}

impl GaussianScenario {
    pub fn linear(d: usize) -> Self {
        GaussianScenario { d, mapping: None }
    }

    pub fn mapped(d: usize, mapping: Mapping) -> Self {
        GaussianScenario {
            d,
            mapping: Some(mapping),
        }
    }

    pub fn sample(&self, rho: f64, n: usize, rng: &mut SplitRng) -> Result<Batch> {
        let mut batch = gaussian_pair_batch(self.d, rho, n, rng)?;
        if let Some(map) = self.mapping {
            batch.y.mapv_inplace(|v| map.apply(v));
        }
        Ok(batch)
    }

    pub fn true_mi(&self, rho: f64) -> f64 {
        true_mi_gaussian(self.d, rho)
    }

    /// Log density ratio at a transformed sample point. Monotone maps leave
    /// the ratio at corresponding points unchanged, so this inverts the map
    /// and defers to the Gaussian form.
    pub fn log_ratio(&self, rho: f64, x: &[f64], y: &[f64]) -> f64 {
        match self.mapping {
            None => gaussian_log_ratio(rho, x, y),
            Some(map) => {
                let inverted: Vec<f64> = y.iter().map(|&v| map.invert(v)).collect();
                gaussian_log_ratio(rho, x, &inverted)
            }
        }
    }
}

/// Complex Nakagami-m background noise in its Gaussian-component
/// approximation: independent real/imaginary parts with variances
/// `σ²(1±b)/2`, `b = √(1/m − 1)`, valid for `½ ≤ m ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NakagamiNoiseModel {
    pub m: f64,
    pub sigma2: f64,
}

impl NakagamiNoiseModel {
    pub fn new(m: f64, sigma2: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&m) {
            return Err(Error::config(format!("nakagami shape must be in [0.5, 1], got {m}")));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::config(format!("noise power must be positive, got {sigma2}")));
        }
        Ok(NakagamiNoiseModel { m, sigma2 })
    }

    /// Skew parameter `b = √(1/m − 1)`; zero at m = 1 (plain AWGN).
    pub fn b(&self) -> f64 {
        (1.0 / self.m - 1.0).sqrt()
    }

    /// `(real, imaginary)` component variances; they sum to `σ²`.
    pub fn component_variances(&self) -> (f64, f64) {
        let b = self.b();
        (self.sigma2 * (1.0 + b) / 2.0, self.sigma2 * (1.0 - b) / 2.0)
    }
}

/// Draws `N` complex noise samples as a `2 × N` real matrix (row 0 real,
/// row 1 imaginary).
pub fn nakagami_noise(model: &NakagamiNoiseModel, n: usize, rng: &mut SplitRng) -> Array2<f64> {
    let (var_re, var_im) = model.component_variances();
    let (s_re, s_im) = (var_re.sqrt(), var_im.sqrt());
    let mut out = Array2::zeros((2, n));
    for j in 0..n {
        out[[0, j]] = s_re * rng.standard_normal();
        out[[1, j]] = s_im * rng.standard_normal();
    }
    out
}

/// Bernoulli-Gaussian (truncated Middleton) impulsive noise: with probability
/// `P` a sample is hit by the high-variance component `N(0, B·σ_b²)`,
/// otherwise by `N(0, σ_b²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiddletonNoiseModel {
    pub p: f64,
    pub b: f64,
    pub sigma_b2: f64,
}

impl MiddletonNoiseModel {
    pub fn new(p: f64, b: f64, sigma_b2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config(format!("impulse probability must be in [0,1], got {p}")));
        }
        if !(b > 0.0) || !(sigma_b2 > 0.0) {
            return Err(Error::config("variance parameters must be positive".to_string()));
        }
        Ok(MiddletonNoiseModel { p, b, sigma_b2 })
    }

    /// Mixture density at `t`.
    pub fn pdf(&self, t: f64) -> f64 {
        (1.0 - self.p) * normal_pdf(t, self.sigma_b2) + self.p * normal_pdf(t, self.b * self.sigma_b2)
    }

    /// Mixture variance `σ_b²·(1 − P + P·B)`.
    pub fn variance(&self) -> f64 {
        self.sigma_b2 * (1.0 - self.p + self.p * self.b)
    }
}

pub fn normal_pdf(t: f64, variance: f64) -> f64 {
    (-t * t / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Draws a `rows × cols` matrix of Middleton noise.
pub fn middleton_noise(
    model: &MiddletonNoiseModel,
    rows: usize,
    cols: usize,
    rng: &mut SplitRng,
) -> Array2<f64> {
    let s_low = model.sigma_b2.sqrt();
    let s_high = (model.b * model.sigma_b2).sqrt();
    let mut out = Array2::zeros((rows, cols));
    for v in out.iter_mut() {
        let impulse = rng.uniform() < model.p;
        let n = rng.standard_normal();
        *v = n * if impulse { s_high } else { s_low };
    }
    out
}

/// Draws `rows × cols` Cauchy noise with scale `gamma`.
pub fn cauchy_noise(gamma: f64, rows: usize, cols: usize, rng: &mut SplitRng) -> Result<Array2<f64>> {
    crate::sampling::draw(crate::sampling::Dist::Cauchy { gamma }, rows, cols, rng)
}

/// Rayleigh-equivalent scalar fading model: the output given `s` is
/// exponential with rate `s`, i.e. `p(v|s) = s·e^{−s·v}`.
///
/// In the capacity model the rate is `S = 1/(1+U²) ∈ (0,1]`; that domain is
/// enforced by the generator's output activation, while the sampler itself
/// accepts any positive rate.
pub fn rayleigh_equiv_output(s: &Array2<f64>, rng: &mut SplitRng) -> Result<Array2<f64>> {
    if s.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::config("rayleigh-equivalent rates must be positive".to_string()));
    }
    let mut out = Array2::zeros(s.raw_dim());
    for (o, &rate) in out.iter_mut().zip(s.iter()) {
        // -ln(1-U)/s with U in [0,1) keeps the log argument positive.
        *o = -(1.0 - rng.uniform()).ln() / rate;
    }
    Ok(out)
}

/// Memoryless non-linearity followed by AWGN: `y = sign(x)·√|x| + σ·n`.
pub fn nonlinear_sqrt_channel(x: &Array2<f64>, sigma: f64, rng: &mut SplitRng) -> Result<Array2<f64>> {
    if sigma < 0.0 {
        return Err(Error::config(format!("noise level must be non-negative, got {sigma}")));
    }
    let mut out = x.mapv(|v| v.signum() * v.abs().sqrt());
    if sigma > 0.0 {
        for v in out.iter_mut() {
            *v += sigma * rng.standard_normal();
        }
    }
    Ok(out)
}

/// Channels the capacity learner can train through: the noise enters
/// independently of the input, and the output is differentiable in the input,
/// so generator gradients flow through [`ReparamChannel::apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReparamChannel {
    /// `y = x + σ·n`, any dimension.
    Awgn { dim: usize, sigma: f64 },
    /// Complex channel with Nakagami-m component noise (dimension 2).
    Nakagami { model: NakagamiNoiseModel },
    /// Scalar additive Cauchy noise.
    Cauchy { gamma: f64 },
    /// Scalar Rayleigh-equivalent model; input is the rate `s ∈ (0,1]`.
    RayleighEquiv,
    /// Output is pure noise; the input is ignored (zero capacity).
    Independent { dim: usize, sigma: f64 },
}

impl ReparamChannel {
    pub fn dim(&self) -> usize {
        match self {
            ReparamChannel::Awgn { dim, .. } | ReparamChannel::Independent { dim, .. } => *dim,
            ReparamChannel::Nakagami { .. } => 2,
            ReparamChannel::Cauchy { .. } | ReparamChannel::RayleighEquiv => 1,
        }
    }

    /// Applies the channel, returning the output and the elementwise
    /// derivative `∂y/∂x` for the chain rule. All channels here act
    /// componentwise, so an elementwise factor is exact.
    pub fn apply(&self, x: &Array2<f64>, rng: &mut SplitRng) -> Result<(Array2<f64>, Array2<f64>)> {
        if x.nrows() != self.dim() {
            return Err(Error::config(format!(
                "channel expects {} input rows, got {}",
                self.dim(),
                x.nrows()
            )));
        }
        let n = x.ncols();
        match self {
            ReparamChannel::Awgn { sigma, .. } => {
                let noise = rng.normal_matrix(x.nrows(), n);
                Ok((x + &(noise * *sigma), Array2::ones(x.raw_dim())))
            }
            ReparamChannel::Nakagami { model } => {
                let noise = nakagami_noise(model, n, rng);
                Ok((x + &noise, Array2::ones(x.raw_dim())))
            }
            ReparamChannel::Cauchy { gamma } => {
                let noise = cauchy_noise(*gamma, x.nrows(), n, rng)?;
                Ok((x + &noise, Array2::ones(x.raw_dim())))
            }
            ReparamChannel::RayleighEquiv => {
                let v = rayleigh_equiv_output(x, rng)?;
                // v = -ln(1-u)/s  ⇒  ∂v/∂s = -v/s.
                let dydx = -&v / x;
                Ok((v, dydx))
            }
            ReparamChannel::Independent { sigma, .. } => {
                let noise = rng.normal_matrix(x.nrows(), n);
                Ok((noise * *sigma, Array2::zeros(x.raw_dim())))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_oracle_closed_form() {
        assert_eq!(true_mi_gaussian(20, 0.0), 0.0);
        let mi = true_mi_gaussian(20, 0.42580);
        assert!((mi - 2.0).abs() < 5e-3, "{mi}");
        let rho = (1.0 - (-2.0f64).exp()).sqrt();
        assert!((true_mi_gaussian(1, rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rho_inversion_round_trips() {
        assert_eq!(rho_for_target_mi(3, 0.0), 0.0);
        let rho = rho_for_target_mi(5, 10.0);
        assert!((rho - (1.0 - (-4.0f64).exp()).sqrt()).abs() < 1e-12);
        assert!((rho - 0.99084).abs() < 5e-5, "{rho}");
        let mut rng = SplitRng::new(1);
        for _ in 0..100 {
            let d = 1 + (rng.uniform() * 30.0) as usize;
            // Up to 2 nats per component, the staircase operating range.
            // Beyond that 1−ρ² underflows relative to ρ and the identity is
            // limited by f64 cancellation rather than by the formulas.
            let target = rng.uniform() * (2.0 * d as f64).min(12.0);
            let back = true_mi_gaussian(d, rho_for_target_mi(d, target));
            assert!((back - target).abs() <= 1e-12, "d={d} target={target} back={back}");
        }
    }

    #[test]
    fn log_ratio_mean_matches_mi() {
        let d = 4;
        let rho = 0.7;
        let n = 200_000;
        let mut rng = SplitRng::new(2);
        let b = gaussian_pair_batch(d, rho, n, &mut rng).unwrap();
        let mut total = 0.0;
        for j in 0..n {
            total += gaussian_log_ratio(
                rho,
                b.x.column(j).as_slice().unwrap_or(&b.x.column(j).to_vec()),
                &b.y.column(j).to_vec(),
            );
        }
        let mean = total / n as f64;
        let truth = true_mi_gaussian(d, rho);
        assert!((mean - truth).abs() < 0.05, "mean {mean} truth {truth}");
    }

    #[test]
    fn mappings_are_monotone_and_match_hand_values() {
        assert_eq!(Mapping::Cubic.apply(2.0), 8.0);
        assert_eq!(Mapping::Asinh.apply(0.0), 0.0);
        let hc = Mapping::HalfCube.apply(-4.0);
        assert!((hc + 8.0).abs() < 1e-12, "{hc}");
        for map in [Mapping::Cubic, Mapping::HalfCube, Mapping::Asinh] {
            let pts: Vec<f64> = (-40..40).map(|i| i as f64 / 7.0).collect();
            let mapped: Vec<f64> = pts.iter().map(|&v| map.apply(v)).collect();
            for w in mapped.windows(2) {
                assert!(w[0] < w[1], "{map:?} not strictly increasing");
            }
            for &v in &pts {
                assert!((map.invert(map.apply(v)) - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mapped_scenario_ratio_is_invariant() {
        let lin = GaussianScenario::linear(3);
        let cub = GaussianScenario::mapped(3, Mapping::Cubic);
        let rho = 0.6;
        let mut rng = SplitRng::new(7);
        let b = lin.sample(rho, 50, &mut rng).unwrap();
        for j in 0..b.len() {
            let x: Vec<f64> = b.x.column(j).to_vec();
            let y: Vec<f64> = b.y.column(j).to_vec();
            let y_cubed: Vec<f64> = y.iter().map(|&v| Mapping::Cubic.apply(v)).collect();
            let r_lin = lin.log_ratio(rho, &x, &y);
            let r_cub = cub.log_ratio(rho, &x, &y_cubed);
            assert!((r_lin - r_cub).abs() < 1e-9);
        }
    }

    #[test]
    fn nakagami_variances() {
        let m1 = NakagamiNoiseModel::new(1.0, 2.0).unwrap();
        assert_eq!(m1.b(), 0.0);
        let (re, im) = m1.component_variances();
        assert_eq!(re, 1.0);
        assert_eq!(im, 1.0);

        let m05 = NakagamiNoiseModel::new(0.5, 2.0).unwrap();
        assert!((m05.b() - 1.0).abs() < 1e-15);
        let (_, im) = m05.component_variances();
        assert!(im.abs() < 1e-12, "imaginary part variance {im}");

        let m06 = NakagamiNoiseModel::new(0.6, 1.0).unwrap();
        assert!((m06.b() - 0.81650).abs() < 5e-6);
        let (re, im) = m06.component_variances();
        assert!((re - 0.90825).abs() < 5e-6);
        assert!((im - 0.09175).abs() < 5e-6);

        for i in 0..=10 {
            let m = 0.5 + 0.05 * i as f64;
            let model = NakagamiNoiseModel::new(m, 3.7).unwrap();
            let (re, im) = model.component_variances();
            assert!((re + im - 3.7).abs() < 1e-12);
        }
        assert!(NakagamiNoiseModel::new(0.3, 1.0).is_err());
        assert!(NakagamiNoiseModel::new(1.2, 1.0).is_err());
    }

    #[test]
    fn nakagami_empirical_component_variances() {
        let model = NakagamiNoiseModel::new(0.6, 1.0).unwrap();
        let mut rng = SplitRng::new(3);
        let n = 400_000;
        let noise = nakagami_noise(&model, n, &mut rng);
        let (re, im) = model.component_variances();
        let var = |row: usize| {
            let r = noise.row(row);
            let m = r.mean().unwrap();
            r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64
        };
        assert!((var(0) - re).abs() / re < 0.02);
        assert!((var(1) - im).abs() / im < 0.02);
    }

    #[test]
    fn middleton_variance_and_pure_gaussian_limit() {
        let model = MiddletonNoiseModel::new(0.05, 5.0, 1.0).unwrap();
        assert!((model.variance() - 1.2).abs() < 1e-12);
        let mut rng = SplitRng::new(4);
        let n = 1_000_000;
        let noise = middleton_noise(&model, 1, n, &mut rng);
        let emp = noise.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((emp - 1.2).abs() / 1.2 < 0.02, "empirical variance {emp}");

        let pure = MiddletonNoiseModel::new(0.0, 5.0, 1.0).unwrap();
        let noise = middleton_noise(&pure, 1, 100_000, &mut rng);
        let emp = noise.iter().map(|v| v * v).sum::<f64>() / 100_000.0;
        assert!((emp - 1.0).abs() < 0.02);
    }

    #[test]
    fn middleton_pdf_integrates_to_one() {
        let model = MiddletonNoiseModel::new(0.05, 5.0, 1.0).unwrap();
        // Simpson's rule over ±12 standard deviations of the wide component.
        let half = 12.0 * (model.b * model.sigma_b2).sqrt();
        let steps = 40_000;
        let h = 2.0 * half / steps as f64;
        let mut integral = model.pdf(-half) + model.pdf(half);
        for k in 1..steps {
            let t = -half + k as f64 * h;
            integral += model.pdf(t) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        integral *= h / 3.0;
        assert!((integral - 1.0).abs() <= 1e-9, "integral {integral}");
    }

    #[test]
    fn rayleigh_equivalent_mean() {
        let mut rng = SplitRng::new(5);
        let s = Array2::from_elem((1, 500_000), 2.0);
        let v = rayleigh_equiv_output(&s, &mut rng).unwrap();
        let mean = v.mean().unwrap();
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
        let bad = Array2::from_elem((1, 3), -0.5);
        assert!(rayleigh_equiv_output(&bad, &mut rng).is_err());
    }

    #[test]
    fn sqrt_channel_noiseless_values() {
        let mut rng = SplitRng::new(6);
        let x = ndarray::array![[4.0, -1.0, -3.0, -1.0, 1.0, 3.0]];
        let y = nonlinear_sqrt_channel(&x, 0.0, &mut rng).unwrap();
        let three: f64 = 3.0;
        let expected = [2.0, -1.0, -three.sqrt(), -1.0, 1.0, three.sqrt()];
        for (got, want) in y.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn channels_are_columnwise_memoryless() {
        // Changing one input column changes only that output column when the
        // noise stream is replayed.
        let channels = [
            ReparamChannel::Awgn { dim: 2, sigma: 0.5 },
            ReparamChannel::Nakagami {
                model: NakagamiNoiseModel::new(0.7, 1.0).unwrap(),
            },
            ReparamChannel::Cauchy { gamma: 0.3 },
            ReparamChannel::RayleighEquiv,
        ];
        for ch in channels {
            let mut rng = SplitRng::new(77);
            let cols = 6;
            let x = match ch {
                ReparamChannel::RayleighEquiv => {
                    let mut m = Array2::zeros((ch.dim(), cols));
                    for v in m.iter_mut() {
                        *v = 0.2 + 0.7 * rng.uniform();
                    }
                    m
                }
                _ => rng.normal_matrix(ch.dim(), cols),
            };
            let (y1, _) = ch.apply(&x, &mut SplitRng::new(123)).unwrap();
            let mut x2 = x.clone();
            for r in 0..ch.dim() {
                x2[[r, 3]] = x[[r, 3]] * 0.5 + 0.1;
            }
            let (y2, _) = ch.apply(&x2, &mut SplitRng::new(123)).unwrap();
            for j in 0..cols {
                for r in 0..ch.dim() {
                    if j == 3 {
                        continue;
                    }
                    assert_eq!(y1[[r, j]], y2[[r, j]], "{ch:?} column {j} changed");
                }
            }
        }
    }

    #[test]
    fn independent_channel_ignores_input() {
        let ch = ReparamChannel::Independent { dim: 1, sigma: 1.0 };
        let a = Array2::from_elem((1, 5), 100.0);
        let b = Array2::from_elem((1, 5), -3.0);
        let (ya, dydx) = ch.apply(&a, &mut SplitRng::new(9)).unwrap();
        let (yb, _) = ch.apply(&b, &mut SplitRng::new(9)).unwrap();
        assert_eq!(ya, yb);
        assert!(dydx.iter().all(|&v| v == 0.0));
    }
}
