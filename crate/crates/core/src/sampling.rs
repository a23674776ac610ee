//! Seeded randomness, joint-batch construction, and the derangement /
//! permutation machinery that produces product-of-marginals samples.
//!
//! Everything downstream of this module is deterministic given a seed. A
//! [`SplitRng`] is a counter-based generator addressed by `(seed, stream)`;
//! independent parallel work derives child streams with [`SplitRng::split`]
//! instead of sharing one generator.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Cap on rejection rounds when sampling a random derangement. The expected
/// number of tries is e ≈ 2.72, so hitting this means the generator is broken.
const DERANGEMENT_MAX_TRIES: usize = 1000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seedable counter-based generator with derivable independent streams.
///
/// Two instances constructed with the same `(seed, stream)` produce identical
/// output. Children created through [`split`](Self::split) use streams mixed
/// from the parent's, so sibling streams never collide in practice.
#[derive(Debug, Clone)]
pub struct SplitRng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            seed,
            stream,
        }
    }

    /// Derives an independent child stream; `index` distinguishes siblings.
    pub fn split(&self, index: u64) -> Self {
        let child = splitmix64(self.stream ^ splitmix64(index.wrapping_add(1)));
        Self::with_stream(self.seed, child)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws a raw 64-bit value, e.g. to derive a network init seed.
    pub fn next_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Fills a matrix with i.i.d. standard normal entries, column-major order.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        let mut out = Array2::zeros((rows, cols));
        for col in 0..cols {
            for row in 0..rows {
                out[[row, col]] = self.standard_normal();
            }
        }
        out
    }
}

impl RngCore for SplitRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// Distribution tags accepted by [`draw`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    StdNormal,
    Uniform { lo: f64, hi: f64 },
    Bernoulli { p: f64 },
    /// Zero-median Cauchy with scale `gamma`.
    Cauchy { gamma: f64 },
}

/// Draws an i.i.d. `rows × cols` sample matrix from `dist`.
///
/// Cauchy samples come from the tangent transform of a uniform variable and
/// Bernoulli from thresholding one, so the output stream is a fixed function
/// of the generator stream.
pub fn draw(dist: Dist, rows: usize, cols: usize, rng: &mut SplitRng) -> Result<Array2<f64>> {
    match dist {
        Dist::StdNormal => Ok(rng.normal_matrix(rows, cols)),
        Dist::Uniform { lo, hi } => {
            if !(lo < hi) {
                return Err(Error::config(format!(
                    "uniform bounds must satisfy lo < hi, got [{lo}, {hi})"
                )));
            }
            let mut out = Array2::zeros((rows, cols));
            for v in out.iter_mut() {
                *v = lo + (hi - lo) * rng.uniform();
            }
            Ok(out)
        }
        Dist::Bernoulli { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("bernoulli p must be in [0,1], got {p}")));
            }
            let mut out = Array2::zeros((rows, cols));
            for v in out.iter_mut() {
                *v = if rng.uniform() < p { 1.0 } else { 0.0 };
            }
            Ok(out)
        }
        Dist::Cauchy { gamma } => {
            if !(gamma > 0.0) {
                return Err(Error::config(format!("cauchy scale must be positive, got {gamma}")));
            }
            let mut out = Array2::zeros((rows, cols));
            for v in out.iter_mut() {
                *v = gamma * (std::f64::consts::PI * (rng.uniform() - 0.5)).tan();
            }
            Ok(out)
        }
    }
}

/// N paired samples from a joint distribution, stored one sample per column.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl Batch {
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.ncols() != y.ncols() {
            return Err(Error::config(format!(
                "batch halves disagree on sample count: {} vs {}",
                x.ncols(),
                y.ncols()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Correlated Gaussian pairs: `y = ρ·x + √(1−ρ²)·n` componentwise, with `x`
/// and `n` independent standard normal `d`-vectors.
pub fn gaussian_pair_batch(d: usize, rho: f64, n: usize, rng: &mut SplitRng) -> Result<Batch> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::config(format!("correlation must be in [0,1), got {rho}")));
    }
    let x = rng.normal_matrix(d, n);
    let noise = rng.normal_matrix(d, n);
    let scale = (1.0 - rho * rho).sqrt();
    let y = &x * rho + &noise * scale;
    Batch::new(x, y)
}

/// A permutation of `0..n` together with its fixed-point count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shuffle {
    perm: Vec<usize>,
    fixed_points: usize,
}

impl Shuffle {
    fn from_perm(perm: Vec<usize>) -> Self {
        let fixed_points = perm.iter().enumerate().filter(|(i, &p)| *i == p).count();
        Self { perm, fixed_points }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_perm((0..n).collect())
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Number of indices left in place; zero for a derangement.
    pub fn fixed_points(&self) -> usize {
        self.fixed_points
    }

    pub fn is_derangement(&self) -> bool {
        self.fixed_points == 0 && !self.perm.is_empty()
    }
}

/// How to build a zero-fixed-point shuffle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerangeMode {
    /// Cyclic shift `i → (i+1) mod N`: cheapest, statistically equivalent.
    Shift,
    /// Rejection-sample uniform permutations until none has a fixed point.
    Random,
}

/// Produces a derangement of `0..n` (no index maps to itself).
pub fn derange(n: usize, mode: DerangeMode, rng: &mut SplitRng) -> Result<Shuffle> {
    if n < 2 {
        return Err(Error::config(format!("derangement needs n >= 2, got {n}")));
    }
    match mode {
        DerangeMode::Shift => {
            let perm: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
            Ok(Shuffle {
                perm,
                fixed_points: 0,
            })
        }
        DerangeMode::Random => {
            let mut perm: Vec<usize> = (0..n).collect();
            for _ in 0..DERANGEMENT_MAX_TRIES {
                perm.shuffle(rng);
                if perm.iter().enumerate().all(|(i, &p)| i != p) {
                    return Ok(Shuffle {
                        perm,
                        fixed_points: 0,
                    });
                }
            }
            Err(Error::numeric(format!(
                "no derangement found after {DERANGEMENT_MAX_TRIES} rejection rounds (n = {n})"
            )))
        }
    }
}

/// Uniform random permutation of `0..n`, with fixed points counted exactly.
pub fn permute_naive(n: usize, rng: &mut SplitRng) -> Shuffle {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    Shuffle::from_perm(perm)
}

/// Re-pairs the batch as `(x_i, y_{perm[i]})`. Built from a derangement, the
/// result is treated as a draw from the product of marginals.
pub fn marginal_view(batch: &Batch, shuffle: &Shuffle) -> Result<Batch> {
    if shuffle.len() != batch.len() {
        return Err(Error::config(format!(
            "shuffle length {} does not match batch size {}",
            shuffle.len(),
            batch.len()
        )));
    }
    let mut y = Array2::zeros(batch.y.raw_dim());
    for (i, &j) in shuffle.perm().iter().enumerate() {
        y.column_mut(i).assign(&batch.y.column(j));
    }
    Ok(Batch {
        x: batch.x.clone(),
        y,
    })
}

/// Applies a shuffle to the columns of a bare matrix.
pub fn permute_columns(m: &Array2<f64>, shuffle: &Shuffle) -> Array2<f64> {
    let mut out = Array2::zeros(m.raw_dim());
    for (i, &j) in shuffle.perm().iter().enumerate() {
        out.column_mut(i).assign(&m.column(j));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for (&a, &b) in x.iter().zip(y) {
            cov += (a - mx) * (b - my);
            vx += (a - mx) * (a - mx);
            vy += (b - my) * (b - my);
        }
        cov / (vx.sqrt() * vy.sqrt())
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = SplitRng::with_stream(7, 3);
        let mut b = SplitRng::with_stream(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_streams_differ() {
        let root = SplitRng::new(1);
        let mut c0 = root.split(0);
        let mut c1 = root.split(1);
        let a: Vec<u64> = (0..8).map(|_| c0.next_u64()).collect();
        let b: Vec<u64> = (0..8).map(|_| c1.next_u64()).collect();
        assert_ne!(a, b);
    }

    #[test]
    fn bernoulli_one_is_all_ones() {
        let mut rng = SplitRng::new(0);
        let m = draw(Dist::Bernoulli { p: 1.0 }, 4, 16, &mut rng).unwrap();
        assert!(m.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn standard_normal_moments() {
        let mut rng = SplitRng::new(11);
        let m = draw(Dist::StdNormal, 1, 1_000_000, &mut rng).unwrap();
        let mean = m.mean().unwrap();
        let var = m.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m.len() as f64);
        assert!(mean.abs() < 0.004, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn cauchy_median_abs_matches_scale() {
        // |Cauchy(0, γ)| has median exactly γ.
        let gamma = 2.5;
        let mut rng = SplitRng::new(5);
        let m = draw(Dist::Cauchy { gamma }, 1, 1_000_000, &mut rng).unwrap();
        let mut a: Vec<f64> = m.iter().map(|v| v.abs()).collect();
        a.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let median = a[a.len() / 2];
        assert!((median - gamma).abs() / gamma < 0.02, "median {median}");
    }

    #[test]
    fn invalid_params_rejected() {
        let mut rng = SplitRng::new(0);
        assert!(draw(Dist::Cauchy { gamma: -1.0 }, 1, 1, &mut rng).is_err());
        assert!(draw(Dist::Bernoulli { p: 1.5 }, 1, 1, &mut rng).is_err());
        assert!(draw(Dist::Uniform { lo: 1.0, hi: 1.0 }, 1, 1, &mut rng).is_err());
        assert!(gaussian_pair_batch(2, 1.0, 8, &mut rng).is_err());
    }

    #[test]
    fn gaussian_pairs_uncorrelated_at_rho_zero() {
        let n = 100_000;
        let mut rng = SplitRng::new(2);
        let b = gaussian_pair_batch(1, 0.0, n, &mut rng).unwrap();
        let c = corr(b.x.row(0).as_slice().unwrap(), b.y.row(0).as_slice().unwrap());
        assert!(c.abs() < 3.0 / (n as f64).sqrt(), "corr {c}");
    }

    #[test]
    fn gaussian_pairs_hit_requested_correlation() {
        let n = 100_000;
        let mut rng = SplitRng::new(3);
        let b = gaussian_pair_batch(3, 0.9, n, &mut rng).unwrap();
        for r in 0..3 {
            let c = corr(b.x.row(r).as_slice().unwrap(), b.y.row(r).as_slice().unwrap());
            assert!((c - 0.9).abs() < 0.01, "row {r}: corr {c}");
        }
    }

    #[test]
    fn shift_derangement_is_cyclic() {
        let mut rng = SplitRng::new(0);
        let s = derange(3, DerangeMode::Shift, &mut rng).unwrap();
        assert_eq!(s.perm(), &[1, 2, 0]);
        assert_eq!(s.fixed_points(), 0);
    }

    #[test]
    fn only_derangement_of_two_is_the_swap() {
        let mut rng = SplitRng::new(0);
        for mode in [DerangeMode::Shift, DerangeMode::Random] {
            let s = derange(2, mode, &mut rng).unwrap();
            assert_eq!(s.perm(), &[1, 0]);
        }
    }

    #[test]
    fn derangements_have_no_fixed_points() {
        let mut rng = SplitRng::new(9);
        for n in 2..=7 {
            for mode in [DerangeMode::Shift, DerangeMode::Random] {
                for _ in 0..200 {
                    let s = derange(n, mode, &mut rng).unwrap();
                    assert_eq!(s.fixed_points(), 0, "n={n} mode={mode:?}");
                    assert!(s.is_derangement());
                }
            }
        }
        for &n in &[64, 257, 1000] {
            let s = derange(n, DerangeMode::Random, &mut rng).unwrap();
            assert_eq!(s.fixed_points(), 0);
        }
    }

    #[test]
    fn random_derangement_uniform_over_n3() {
        // N=3 has exactly two derangements: [1,2,0] and [2,0,1].
        let mut rng = SplitRng::new(17);
        let mut counts = [0usize; 2];
        let tries = 20_000;
        for _ in 0..tries {
            let s = derange(3, DerangeMode::Random, &mut rng).unwrap();
            match s.perm() {
                [1, 2, 0] => counts[0] += 1,
                [2, 0, 1] => counts[1] += 1,
                other => panic!("not a derangement: {other:?}"),
            }
        }
        let p = counts[0] as f64 / tries as f64;
        // 5σ band around 1/2 for a binomial proportion.
        let sigma = (0.25 / tries as f64).sqrt();
        assert!((p - 0.5).abs() < 5.0 * sigma, "p {p}");
    }

    #[test]
    fn derange_rejects_tiny_n() {
        let mut rng = SplitRng::new(0);
        assert!(derange(1, DerangeMode::Shift, &mut rng).is_err());
    }

    #[test]
    fn fixed_point_counting() {
        let s = Shuffle::from_perm(vec![0, 2, 1]);
        assert_eq!(s.fixed_points(), 1);
        let id = Shuffle::identity(5);
        assert_eq!(id.fixed_points(), 5);
    }

    #[test]
    fn naive_permutation_mean_fixed_points_is_one() {
        let mut rng = SplitRng::new(23);
        let reps = 100_000;
        let mut total = 0usize;
        for _ in 0..reps {
            total += permute_naive(64, &mut rng).fixed_points();
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean fixed points {mean}");
    }

    #[test]
    fn naive_permutation_is_uniform_n3() {
        let mut rng = SplitRng::new(29);
        let tries = 100_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..tries {
            *counts.entry(permute_naive(3, &mut rng).perm().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expected = tries as f64 / 6.0;
        let sigma = (tries as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for (perm, count) in counts {
            assert!(
                (count as f64 - expected).abs() < 5.0 * sigma,
                "perm {perm:?} count {count}"
            );
        }
    }

    #[test]
    fn marginal_view_identity_and_swap() {
        let mut rng = SplitRng::new(4);
        let b = gaussian_pair_batch(2, 0.5, 2, &mut rng).unwrap();
        let same = marginal_view(&b, &Shuffle::identity(2)).unwrap();
        assert_eq!(same.y, b.y);
        let swapped = marginal_view(&b, &derange(2, DerangeMode::Shift, &mut rng).unwrap()).unwrap();
        assert_eq!(swapped.y.column(0), b.y.column(1));
        assert_eq!(swapped.y.column(1), b.y.column(0));
        assert_eq!(swapped.x, b.x);
    }

    #[test]
    fn marginal_view_length_mismatch_is_config_error() {
        let mut rng = SplitRng::new(4);
        let b = gaussian_pair_batch(2, 0.5, 8, &mut rng).unwrap();
        assert!(marginal_view(&b, &Shuffle::identity(4)).is_err());
    }

    #[test]
    fn deranged_pairs_decorrelate() {
        let n = 100_000;
        let mut rng = SplitRng::new(31);
        let b = gaussian_pair_batch(1, 0.9, n, &mut rng).unwrap();
        let s = derange(n, DerangeMode::Random, &mut rng).unwrap();
        let m = marginal_view(&b, &s).unwrap();
        let c = corr(m.x.row(0).as_slice().unwrap(), m.y.row(0).as_slice().unwrap());
        assert!(c.abs() < 3.0 / (n as f64).sqrt(), "corr {c}");
    }

    #[test]
    fn seeded_reproducibility() {
        let make = || {
            let mut rng = SplitRng::new(42);
            let b = gaussian_pair_batch(4, 0.3, 32, &mut rng).unwrap();
            let s = derange(32, DerangeMode::Random, &mut rng).unwrap();
            (b, s)
        };
        let (b1, s1) = make();
        let (b2, s2) = make();
        assert_eq!(b1.x, b2.x);
        assert_eq!(b1.y, b2.y);
        assert_eq!(s1, s2);
    }
}
