//! Maximum-mutual-information neural decoding.
//!
//! A single discriminator network maps a channel output `y` to `M` values
//! `D_i(y) ∈ (0,1)`, one per alphabet symbol, trained to maximize
//!
//! `J = E_y[ Σ_i ln D_i(y) ] + E_{x,y}[ ln(1 − D(y))·onehot(x) ]`.
//!
//! At the optimum `D_i = 1/(1 + P(x_i|y))`, so `(1−D_i)/D_i` recovers the
//! symbol posterior. Decoding picks the symbol with the largest posterior
//! (equivalently, minimal a-posteriori information), and the same posteriors
//! yield source entropy, conditional entropy, average mutual information,
//! and the decoding error probability.
//!
//! This module reports entropies in bits, the conventional unit for decoder
//! metrics; the estimator modules elsewhere work in nats.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamState, Mlp};
use crate::sampling::{Batch, SplitRng};

/// A finite channel-input alphabet with its prior.
#[derive(Debug, Clone)]
pub struct Alphabet {
    /// One symbol per column, `d × M`.
    symbols: Array2<f64>,
    prior: Vec<f64>,
}

impl Alphabet {
    pub fn new(symbols: Array2<f64>, prior: Vec<f64>) -> Result<Self> {
        let m = symbols.ncols();
        if m == 0 {
            return Err(Error::config("alphabet must not be empty".to_string()));
        }
        if prior.len() != m {
            return Err(Error::config(format!(
                "prior has {} entries for {m} symbols",
                prior.len()
            )));
        }
        if prior.iter().any(|&p| p < 0.0) {
            return Err(Error::config("prior entries must be non-negative".to_string()));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("prior sums to {total}, expected 1")));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if symbols.column(i) == symbols.column(j) {
                    return Err(Error::config(format!("symbols {i} and {j} coincide")));
                }
            }
        }
        Ok(Alphabet { symbols, prior })
    }

    /// Uniform prior over the given symbols.
    pub fn uniform(symbols: Array2<f64>) -> Result<Self> {
        let m = symbols.ncols();
        Alphabet::new(symbols, vec![1.0 / m as f64; m])
    }

    /// Scalar 4-PAM alphabet `{−3, −1, 1, 3}`.
    pub fn pam4(prior: Vec<f64>) -> Result<Self> {
        Alphabet::new(ndarray::array![[-3.0, -1.0, 1.0, 3.0]], prior)
    }

    pub fn len(&self) -> usize {
        self.symbols.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.symbols.nrows()
    }

    pub fn symbol(&self, i: usize) -> ArrayView1<'_, f64> {
        self.symbols.column(i)
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Source entropy `H(X)` in bits.
    pub fn entropy_bits(&self) -> f64 {
        -self
            .prior
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>()
    }

    /// Average symbol energy under the prior.
    pub fn avg_energy(&self) -> f64 {
        self.prior
            .iter()
            .enumerate()
            .map(|(i, &p)| p * self.symbols.column(i).iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Draws `n` symbol indices from the prior by inverse-cdf.
    pub fn sample_indices(&self, n: usize, rng: &mut SplitRng) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for &p in &self.prior {
            acc += p;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u = rng.uniform();
                cdf.iter().position(|&c| u < c).unwrap_or(self.len() - 1)
            })
            .collect()
    }

    /// Assembles the symbol matrix for a label sequence.
    pub fn symbols_for(&self, indices: &[usize]) -> Array2<f64> {
        let mut x = Array2::zeros((self.dim(), indices.len()));
        for (j, &i) in indices.iter().enumerate() {
            x.column_mut(j).assign(&self.symbols.column(i));
        }
        x
    }
}

/// Noise deviation that realizes a target `Eb/N0` (dB) for this alphabet:
/// `σ² = N0/2` with `N0 = (E_s/log2 M)/10^(dB/10)`.
pub fn noise_sigma_for_ebn0(alphabet: &Alphabet, ebn0_db: f64) -> f64 {
    let es = alphabet.avg_energy();
    let bits = (alphabet.len() as f64).log2();
    let n0 = es / bits / 10f64.powf(ebn0_db / 10.0);
    (n0 / 2.0).sqrt()
}

/// Raw and normalized symbol posteriors recovered from discriminator values.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl PosteriorTable {
    /// From discriminator outputs `D_i ∈ (0,1)`: `raw_i = (1−D_i)/D_i`.
    /// Raw values already sum to one at the optimum; finite training makes
    /// renormalization necessary before any entropy arithmetic.
    pub fn from_discriminator(d: &[f64]) -> Self {
        let raw: Vec<f64> = d
            .iter()
            .map(|&di| (1.0 - di).max(0.0) / di.max(1e-300))
            .collect();
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: Vec<f64>) -> Self {
        let total: f64 = raw.iter().sum();
        let normalized = if total > 0.0 {
            raw.iter().map(|&r| r / total).collect()
        } else {
            vec![1.0 / raw.len() as f64; raw.len()]
        };
        PosteriorTable { raw, normalized }
    }

    /// Index of the largest posterior; ties go to the lowest index.
    pub fn decode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.normalized.iter().enumerate() {
            if p > self.normalized[best] {
                best = i;
            }
        }
        best
    }
}

/// Entropy and error readouts from a set of posteriors, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    pub h_x_bits: f64,
    pub h_x_given_y_bits: f64,
    pub mi_bits: f64,
    pub p_e: f64,
}

/// Monte Carlo entropy estimates from per-sample posterior tables:
/// `H(X)` from the averaged posterior, `H(X|Y)` as the double sum,
/// `I = H(X) − H(X|Y)`, and `P_e = 1 − mean max-posterior`.
pub fn entropies_from_posteriors(posteriors: &[PosteriorTable]) -> Result<EntropyReport> {
    if posteriors.is_empty() {
        return Err(Error::config("need at least one posterior sample".to_string()));
    }
    let m = posteriors[0].normalized.len();
    let n = posteriors.len() as f64;
    let mut p_x = vec![0.0; m];
    let mut h_cond = 0.0;
    let mut max_acc = 0.0;
    for table in posteriors {
        if table.normalized.len() != m {
            return Err(Error::config(
                "posterior tables disagree on alphabet size".to_string(),
            ));
        }
        let mut best: f64 = 0.0;
        for (i, &p) in table.normalized.iter().enumerate() {
            p_x[i] += p / n;
            if p > 0.0 {
                h_cond -= p * p.log2() / n;
            }
            best = best.max(p);
        }
        max_acc += best / n;
    }
    let h_x = -p_x
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>();
    Ok(EntropyReport {
        h_x_bits: h_x,
        h_x_given_y_bits: h_cond,
        mi_bits: h_x - h_cond,
        p_e: 1.0 - max_acc,
    })
}

/// The M-output discriminator decoder.
#[derive(Debug, Clone)]
pub struct MindDecoder {
    net: Mlp,
    alphabet: Alphabet,
    adam: AdamState,
}

impl MindDecoder {
    /// Default architecture: two hidden layers of 256 ReLU units from the
    /// channel-output dimension to M raw scores (sigmoid applied outside).
    pub fn new(alphabet: Alphabet, y_dim: usize, seed: u64) -> Result<Self> {
        Self::with_architecture(alphabet, y_dim, &[256, 256], seed)
    }

    pub fn with_architecture(
        alphabet: Alphabet,
        y_dim: usize,
        hidden: &[usize],
        seed: u64,
    ) -> Result<Self> {
        let mut dims = vec![y_dim];
        dims.extend_from_slice(hidden);
        dims.push(alphabet.len());
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Identity);
        let net = Mlp::new(&dims, &acts, seed)?;
        let adam = AdamState::new(&net);
        Ok(MindDecoder {
            net,
            alphabet,
            adam,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    /// Discriminator values `D_i(y) ∈ (0,1)` for a batch of outputs.
    pub fn discriminator_values(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        let (raw, _) = self.net.forward(y)?;
        Ok(raw.mapv(|o| Activation::Softplus.deriv(o))) // sigmoid
    }

    /// One ascent step of the supervised value function on labeled samples.
    /// Returns the pre-step value.
    pub fn train_step(&mut self, y: &Array2<f64>, labels: &[usize]) -> Result<f64> {
        let n = y.ncols();
        if labels.len() != n {
            return Err(Error::config(format!(
                "{} labels for {n} received samples",
                labels.len()
            )));
        }
        let m = self.alphabet.len();
        let (raw, cache) = self.net.forward(y)?;
        let sigmoid = |o: f64| Activation::Softplus.deriv(o);
        let softplus = |o: f64| Activation::Softplus.apply(o);
        let inv_n = 1.0 / n as f64;
        let mut value = 0.0;
        let mut upstream = Array2::zeros((m, n));
        for j in 0..n {
            if labels[j] >= m {
                return Err(Error::config(format!("label {} out of range", labels[j])));
            }
            for i in 0..m {
                let o = raw[[i, j]];
                // ln σ(o) = −softplus(−o); ln(1−σ(o)) = −softplus(o).
                value += -softplus(-o) * inv_n;
                let mut g = sigmoid(-o) * inv_n;
                if i == labels[j] {
                    value += -softplus(o) * inv_n;
                    g -= sigmoid(o) * inv_n;
                }
                upstream[[i, j]] = -g; // ascent via descending optimizer
            }
        }
        if !value.is_finite() {
            return Err(Error::numeric(format!(
                "decoder training diverged at iteration {}",
                self.adam.step_count()
            )));
        }
        let grads = self.net.backward_params(&cache, &upstream)?;
        adam_step(&mut self.net, &grads, &mut self.adam)?;
        Ok(value)
    }

    /// Trains against a channel closure `(symbols, rng) → outputs`, drawing
    /// labels from the alphabet prior each iteration. Returns the value
    /// trace.
    pub fn train<C>(
        &mut self,
        mut channel: C,
        iters: usize,
        batch: usize,
        rng: &mut SplitRng,
    ) -> Result<Vec<f64>>
    where
        C: FnMut(&Array2<f64>, &mut SplitRng) -> Result<Array2<f64>>,
    {
        let mut trace = Vec::with_capacity(iters);
        for _ in 0..iters {
            let labels = self.alphabet.sample_indices(batch, rng);
            let x = self.alphabet.symbols_for(&labels);
            let y = channel(&x, rng)?;
            trace.push(self.train_step(&y, &labels)?);
        }
        Ok(trace)
    }

    /// Posterior table for one received sample.
    pub fn posterior(&self, y: &[f64]) -> Result<PosteriorTable> {
        let col = Array2::from_shape_vec((y.len(), 1), y.to_vec())
            .map_err(|e| Error::config(e.to_string()))?;
        let d = self.discriminator_values(&col)?;
        Ok(PosteriorTable::from_discriminator(&d.column(0).to_vec()))
    }

    /// Decodes one received sample: argmax posterior, ties to lowest index.
    pub fn decode(&self, y: &[f64]) -> Result<usize> {
        Ok(self.posterior(y)?.decode())
    }

    /// Posterior tables for a whole batch (one forward pass).
    pub fn posteriors(&self, y: &Array2<f64>) -> Result<Vec<PosteriorTable>> {
        let d = self.discriminator_values(y)?;
        Ok((0..y.ncols())
            .map(|j| PosteriorTable::from_discriminator(&d.column(j).to_vec()))
            .collect())
    }

    /// Entropy/error readouts over a batch of received samples.
    pub fn estimate_entropies(&self, y: &Array2<f64>) -> Result<EntropyReport> {
        entropies_from_posteriors(&self.posteriors(y)?)
    }
}

/// MAP decision from an explicit likelihood: `argmax_i prior_i·p(y|x_i)`.
pub fn map_oracle(
    likelihood: &dyn Fn(&[f64], &[f64]) -> f64,
    alphabet: &Alphabet,
    y: &[f64],
) -> usize {
    decide(likelihood, alphabet, y, true)
}

/// Maximum-likelihood decision ignoring the prior. For AWGN this reduces to
/// the nearest symbol.
pub fn maxl_oracle(
    likelihood: &dyn Fn(&[f64], &[f64]) -> f64,
    alphabet: &Alphabet,
    y: &[f64],
) -> usize {
    decide(likelihood, alphabet, y, false)
}

fn decide(
    likelihood: &dyn Fn(&[f64], &[f64]) -> f64,
    alphabet: &Alphabet,
    y: &[f64],
    weight_prior: bool,
) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..alphabet.len() {
        let x: Vec<f64> = alphabet.symbol(i).to_vec();
        let mut score = likelihood(y, &x);
        if weight_prior {
            score *= alphabet.prior()[i];
        }
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

/// Monte Carlo symbol error rate of an arbitrary decision rule over a
/// channel closure.
pub fn symbol_error_rate<D, C>(
    mut decide: D,
    alphabet: &Alphabet,
    mut channel: C,
    n_symbols: usize,
    rng: &mut SplitRng,
) -> Result<f64>
where
    D: FnMut(&[f64]) -> usize,
    C: FnMut(&Array2<f64>, &mut SplitRng) -> Result<Array2<f64>>,
{
    let chunk = 4096;
    let mut errors = 0usize;
    let mut done = 0usize;
    while done < n_symbols {
        let take = chunk.min(n_symbols - done);
        let labels = alphabet.sample_indices(take, rng);
        let x = alphabet.symbols_for(&labels);
        let y = channel(&x, rng)?;
        for (j, &label) in labels.iter().enumerate() {
            let obs: Vec<f64> = y.column(j).to_vec();
            if decide(&obs) != label {
                errors += 1;
            }
        }
        done += take;
    }
    Ok(errors as f64 / n_symbols as f64)
}

/// Monte Carlo value of the unsupervised (scalar-discriminator) objective:
/// `|T_x|·E_{u,y}[ln D(u,y)] + E_{x,y}[ln(1−D(x,y))]`, used to validate the
/// scalar formulation; the supervised path above is the training surface.
pub fn mind_value_unsupervised(
    discriminator: &dyn Fn(&[f64], &[f64]) -> f64,
    joint: &Batch,
    uniform_pairs: &Batch,
    support_measure: f64,
) -> Result<f64> {
    if !(support_measure > 0.0) {
        return Err(Error::config(format!(
            "support measure must be positive, got {support_measure}"
        )));
    }
    let eval = |b: &Batch, f: &dyn Fn(f64) -> f64| -> f64 {
        let n = b.len() as f64;
        (0..b.len())
            .map(|j| {
                let x: Vec<f64> = b.x.column(j).to_vec();
                let y: Vec<f64> = b.y.column(j).to_vec();
                f(discriminator(&x, &y))
            })
            .sum::<f64>()
            / n
    };
    let first = support_measure * eval(uniform_pairs, &|d: f64| d.max(1e-300).ln());
    let second = eval(joint, &|d: f64| (1.0 - d).max(1e-300).ln());
    Ok(first + second)
}
