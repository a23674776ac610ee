//! Minimal dense feed-forward network with exact reverse-mode gradients and
//! an Adam optimizer.
//!
//! Data layout: matrices are `f64`, one sample per column. A layer `l` maps
//! activations `a_{l-1}` (shape `dims[l-1] × N`) to `z_l = W_l a_{l-1} + b_l`
//! and `a_l = φ_l(z_l)`, with `W_l` of shape `dims[l] × dims[l-1]`.
//!
//! [`Mlp::forward`] returns the output together with a [`ForwardCache`] of
//! pre- and post-activations; [`Mlp::backward`] consumes the cache and an
//! upstream gradient to produce exact parameter gradients (and optionally the
//! gradient with respect to the input, which the capacity learner needs to
//! backpropagate through a channel into its generator).

use ndarray::{Array2, Axis};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sampling::SplitRng;

/// Elementwise activation tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Softplus,
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Activation::Identity => t,
            Activation::Relu => t.max(0.0),
            Activation::LeakyRelu(slope) => {
                if t > 0.0 {
                    t
                } else {
                    slope * t
                }
            }
            // max(t,0) + log1p(exp(-|t|)) never overflows.
            Activation::Softplus => t.max(0.0) + (-t.abs()).exp().ln_1p(),
            Activation::Sigmoid => sigmoid(t),
            Activation::Tanh => t.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation.
    #[inline]
    pub fn deriv(self, t: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if t > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Softplus => sigmoid(t),
            Activation::Sigmoid => {
                let s = sigmoid(t);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let c = t.tanh();
                1.0 - c * c
            }
        }
    }

    fn tag(&self) -> String {
        match self {
            Activation::Identity => "identity".into(),
            Activation::Relu => "relu".into(),
            Activation::LeakyRelu(s) => format!("leaky_relu({s})"),
            Activation::Softplus => "softplus".into(),
            Activation::Sigmoid => "sigmoid".into(),
            Activation::Tanh => "tanh".into(),
        }
    }

    fn from_tag(tag: &str) -> Result<Self> {
        let tag = tag.trim();
        match tag {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "softplus" => Ok(Activation::Softplus),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            _ => {
                if let Some(rest) = tag.strip_prefix("leaky_relu(").and_then(|r| r.strip_suffix(')')) {
                    let slope: f64 = rest
                        .parse()
                        .map_err(|_| Error::config(format!("bad leaky_relu slope: {rest}")))?;
                    Ok(Activation::LeakyRelu(slope))
                } else {
                    Err(Error::config(format!("unknown activation tag: {tag}")))
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Dense feed-forward network.
#[derive(Debug, Clone)]
pub struct Mlp {
    dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array2<f64>>,
    activations: Vec<Activation>,
}

/// Pre- and post-activations cached by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.ncols()
    }

    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("cache holds at least one layer")
    }

    /// Cached pre-activations, one matrix per layer. Finite-difference
    /// checks use these to detect samples sitting on a ReLU kink.
    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre
    }
}

/// Exact gradients of `sum_batch ⟨upstream_j, output_j⟩` w.r.t. parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array2<f64>>,
    /// Gradient w.r.t. the input batch, when requested.
    pub input: Option<Array2<f64>>,
}

impl Gradients {
    /// All-zero gradients shaped like `net`'s parameters.
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array2::zeros(b.raw_dim())).collect(),
            input: None,
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.mapv_inplace(|v| v * factor);
        }
        for b in &mut self.biases {
            b.mapv_inplace(|v| v * factor);
        }
        if let Some(i) = &mut self.input {
            i.mapv_inplace(|v| v * factor);
        }
    }
}

impl Mlp {
    /// Builds a network with fan-scaled symmetric-uniform initial weights
    /// (`U(±√(6/(fan_in+fan_out)))`) and zero biases, deterministic in `seed`.
    pub fn new(layer_dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::config(format!(
                "need at least input and output widths, got {} dims",
                layer_dims.len()
            )));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::config("layer widths must be positive".to_string()));
        }
        if activations.len() != layer_dims.len() - 1 {
            return Err(Error::config(format!(
                "{} activations for {} layers",
                activations.len(),
                layer_dims.len() - 1
            )));
        }
        let mut rng = SplitRng::new(seed);
        let mut weights = Vec::with_capacity(activations.len());
        let mut biases = Vec::with_capacity(activations.len());
        for l in 0..activations.len() {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut w = Array2::zeros((fan_out, fan_in));
            for v in w.iter_mut() {
                *v = (2.0 * rng.uniform() - 1.0) * limit;
            }
            weights.push(w);
            biases.push(Array2::zeros((fan_out, 1)));
        }
        Ok(Mlp {
            dims: layer_dims.to_vec(),
            weights,
            biases,
            activations: activations.to_vec(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array2<f64>] {
        &self.biases
    }

    /// Overwrites one layer's parameters (shape-checked). Tests and analytic
    /// substitutions use this to pin a network to a known function.
    pub fn set_layer(&mut self, layer: usize, weights: Array2<f64>, bias: Array2<f64>) -> Result<()> {
        if layer >= self.weights.len() {
            return Err(Error::config(format!("layer {layer} out of range")));
        }
        if weights.raw_dim() != self.weights[layer].raw_dim()
            || bias.raw_dim() != self.biases[layer].raw_dim()
        {
            return Err(Error::config(format!("shape mismatch for layer {layer}")));
        }
        self.weights[layer] = weights;
        self.biases[layer] = bias;
        Ok(())
    }

    /// Forward pass over a `dims[0] × N` batch, caching activations.
    pub fn forward(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if batch.nrows() != self.input_dim() {
            return Err(Error::config(format!(
                "input has {} rows, network expects {}",
                batch.nrows(),
                self.input_dim()
            )));
        }
        check_finite(batch, 0)?;
        let mut pre = Vec::with_capacity(self.num_layers());
        let mut post = Vec::with_capacity(self.num_layers());
        let mut current = batch;
        for (l, ((w, b), act)) in self
            .weights
            .iter()
            .zip(&self.biases)
            .zip(&self.activations)
            .enumerate()
        {
            let mut z = w.dot(current);
            z += b; // (out, 1) broadcasts over the batch
            check_finite(&z, l + 1)?;
            let a = z.mapv(|t| act.apply(t));
            pre.push(z);
            post.push(a);
            current = post.last().unwrap();
        }
        let output = post.last().unwrap().clone();
        Ok((
            output,
            ForwardCache {
                input: batch.clone(),
                pre,
                post,
            },
        ))
    }

    /// Backward pass: gradients of `sum_j ⟨upstream_j, output_j⟩`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Array2<f64>) -> Result<Gradients> {
        self.backward_impl(cache, upstream, true)
    }

    /// Backward pass skipping the input gradient (saves one matrix product).
    pub fn backward_params(&self, cache: &ForwardCache, upstream: &Array2<f64>) -> Result<Gradients> {
        self.backward_impl(cache, upstream, false)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        upstream: &Array2<f64>,
        want_input_grad: bool,
    ) -> Result<Gradients> {
        let layers = self.num_layers();
        if cache.pre.len() != layers {
            return Err(Error::config("cache does not match this network".to_string()));
        }
        if upstream.nrows() != self.output_dim() || upstream.ncols() != cache.batch_size() {
            return Err(Error::config(format!(
                "upstream gradient is {}×{}, expected {}×{}",
                upstream.nrows(),
                upstream.ncols(),
                self.output_dim(),
                cache.batch_size()
            )));
        }
        let mut dweights = vec![Array2::zeros((0, 0)); layers];
        let mut dbiases = vec![Array2::zeros((0, 0)); layers];
        let mut dinput = None;

        // delta = dL/dz_l, starting from the output layer.
        let mut delta = {
            let mut d = upstream.clone();
            apply_deriv_inplace(&mut d, &cache.pre[layers - 1], self.activations[layers - 1]);
            d
        };
        for l in (0..layers).rev() {
            let below: &Array2<f64> = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            dweights[l] = delta.dot(&below.t());
            dbiases[l] = delta
                .sum_axis(Axis(1))
                .into_shape_with_order((self.dims[l + 1], 1))
                .expect("bias gradient reshape");
            if l > 0 {
                let mut next = self.weights[l].t().dot(&delta);
                apply_deriv_inplace(&mut next, &cache.pre[l - 1], self.activations[l - 1]);
                delta = next;
            } else if want_input_grad {
                dinput = Some(self.weights[0].t().dot(&delta));
            }
        }
        Ok(Gradients {
            weights: dweights,
            biases: dbiases,
            input: dinput,
        })
    }

    /// Writes parameters as a header line plus flat little-endian `f64`s.
    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let acts: Vec<String> = self.activations.iter().map(|a| a.tag()).collect();
        writeln!(file, "infocap-mlp v1; dims={}; acts={}", dims.join(","), acts.join(","))?;
        let mut bytes = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for v in w.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for v in b.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        file.write_all(&bytes)?;
        Ok(())
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let mut raw = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut raw)?;
        let newline = raw
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::config("snapshot missing header line".to_string()))?;
        let header = std::str::from_utf8(&raw[..newline])
            .map_err(|_| Error::config("snapshot header is not utf-8".to_string()))?;
        let body = &raw[newline + 1..];

        let rest = header
            .strip_prefix("infocap-mlp v1;")
            .ok_or_else(|| Error::config(format!("unrecognized snapshot header: {header}")))?;
        let mut dims = None;
        let mut acts = None;
        for field in rest.split(';') {
            let field = field.trim();
            if let Some(list) = field.strip_prefix("dims=") {
                dims = Some(
                    list.split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<usize>()
                                .map_err(|_| Error::config(format!("bad dim: {s}")))
                        })
                        .collect::<Result<Vec<_>>>()?,
                );
            } else if let Some(list) = field.strip_prefix("acts=") {
                acts = Some(
                    list.split(',')
                        .map(Activation::from_tag)
                        .collect::<Result<Vec<_>>>()?,
                );
            }
        }
        let dims = dims.ok_or_else(|| Error::config("snapshot header missing dims".to_string()))?;
        let acts = acts.ok_or_else(|| Error::config("snapshot header missing acts".to_string()))?;
        let mut net = Mlp::new(&dims, &acts, 0)?;

        let expected: usize = net
            .weights
            .iter()
            .zip(&net.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum();
        if body.len() != expected * 8 {
            return Err(Error::config(format!(
                "snapshot body holds {} bytes, expected {}",
                body.len(),
                expected * 8
            )));
        }
        let mut offset = 0usize;
        let mut take = |n: usize| {
            let chunk = &body[offset..offset + 8 * n];
            offset += 8 * n;
            chunk
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<f64>>()
        };
        for l in 0..net.num_layers() {
            let (rows, cols) = (net.dims[l + 1], net.dims[l]);
            let w = Array2::from_shape_vec((rows, cols), take(rows * cols))
                .expect("weight shape from header");
            let b = Array2::from_shape_vec((rows, 1), take(rows)).expect("bias shape from header");
            net.weights[l] = w;
            net.biases[l] = b;
        }
        Ok(net)
    }
}

#[inline]
fn apply_deriv_inplace(delta: &mut Array2<f64>, pre: &Array2<f64>, act: Activation) {
    if act == Activation::Identity {
        return;
    }
    ndarray::Zip::from(delta).and(pre).for_each(|d, &z| {
        *d *= act.deriv(z);
    });
}

fn check_finite(m: &Array2<f64>, layer: usize) -> Result<()> {
    // A NaN or infinity poisons the sum; only then scan for the culprit.
    if m.sum().is_finite() {
        return Ok(());
    }
    let bad = m.iter().find(|v| !v.is_finite()).copied().unwrap_or(f64::NAN);
    Err(Error::numeric(format!(
        "non-finite value {bad} at layer {layer}"
    )))
}

/// Adam optimizer state for one [`Mlp`].
#[derive(Debug, Clone)]
pub struct AdamState {
    m_weights: Vec<Array2<f64>>,
    v_weights: Vec<Array2<f64>>,
    m_biases: Vec<Array2<f64>>,
    v_biases: Vec<Array2<f64>>,
    step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zero-moment state with the toolkit's default training settings
    /// (lr 5e-4, β₁ 0.9, β₂ 0.999, ε 1e-8).
    pub fn new(net: &Mlp) -> Self {
        Self::with_hyperparams(net, 5e-4, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparams(net: &Mlp, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            m_weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_biases: net.biases.iter().map(|b| Array2::zeros(b.raw_dim())).collect(),
            v_biases: net.biases.iter().map(|b| Array2::zeros(b.raw_dim())).collect(),
            step_count: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected adaptive-moment descent step on `grads`.
///
/// To ascend an objective, pass the negated gradients.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.weights.len() != net.weights.len() || grads.biases.len() != net.biases.len() {
        return Err(Error::config("gradient layer count mismatch".to_string()));
    }
    for l in 0..net.weights.len() {
        if grads.weights[l].raw_dim() != net.weights[l].raw_dim()
            || grads.biases[l].raw_dim() != net.biases[l].raw_dim()
        {
            return Err(Error::config(format!("gradient shape mismatch at layer {l}")));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);

    let update = |param: &mut Array2<f64>, grad: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>| {
        ndarray::Zip::from(param)
            .and(grad)
            .and(m)
            .and(v)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    };
    for l in 0..net.weights.len() {
        update(
            &mut net.weights[l],
            &grads.weights[l],
            &mut state.m_weights[l],
            &mut state.v_weights[l],
        );
        update(
            &mut net.biases[l],
            &grads.biases[l],
            &mut state.m_biases[l],
            &mut state.v_biases[l],
        );
    }
    Ok(())
}

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Compares `analytic` against central finite differences of `loss` at
/// `net`'s current parameters, perturbing every weight and bias by `±step`.
///
/// The relative error uses `max(|a|, |fd|, 1)` in the denominator so that
/// near-zero gradients are judged on absolute terms.
pub fn gradient_check<F>(
    net: &Mlp,
    loss: F,
    analytic: &Gradients,
    step: f64,
    tol: f64,
) -> GradCheckReport
where
    F: Fn(&Mlp) -> f64,
{
    let mut max_rel = 0.0f64;
    let mut probe = net.clone();
    let mut check_param = |layer: usize, is_weight: bool, idx: (usize, usize), a: f64| {
        let bump = |net: &mut Mlp, delta: f64| {
            if is_weight {
                net.weights[layer][[idx.0, idx.1]] += delta;
            } else {
                net.biases[layer][[idx.0, idx.1]] += delta;
            }
        };
        bump(&mut probe, step);
        let up = loss(&probe);
        bump(&mut probe, -2.0 * step);
        let down = loss(&probe);
        bump(&mut probe, step);
        let fd = (up - down) / (2.0 * step);
        let denom = a.abs().max(fd.abs()).max(1.0);
        max_rel = max_rel.max((a - fd).abs() / denom);
    };
    for l in 0..net.num_layers() {
        for ((r, c), &a) in analytic.weights[l].indexed_iter() {
            check_param(l, true, (r, c), a);
        }
        for ((r, c), &a) in analytic.biases[l].indexed_iter() {
            check_param(l, false, (r, c), a);
        }
    }
    GradCheckReport {
        max_rel_err: max_rel,
        passed: max_rel <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;


    #[test]
    fn identity_net_computes_identity() {
        let mut net = Mlp::new(&[1, 1], &[Activation::Identity], 0).unwrap();
        net.set_layer(0, array![[1.0]], array![[0.0]]).unwrap();
        let x = array![[-2.0, 0.0, 3.5]];
        let (y, _) = net.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn softplus_at_zero_is_ln_two() {
        let v = Activation::Softplus.apply(0.0);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15, "{v}");
    }

    #[test]
    fn same_seed_bitwise_identical() {
        let a = Mlp::new(&[3, 8, 2], &[Activation::Tanh, Activation::Identity], 99).unwrap();
        let b = Mlp::new(&[3, 8, 2], &[Activation::Tanh, Activation::Identity], 99).unwrap();
        for (wa, wb) in a.weights().iter().zip(b.weights()) {
            assert_eq!(wa, wb);
        }
    }

    #[test]
    fn config_errors_on_bad_shapes() {
        assert!(Mlp::new(&[3], &[], 0).is_err());
        assert!(Mlp::new(&[3, 2], &[Activation::Relu, Activation::Relu], 0).is_err());
        assert!(Mlp::new(&[3, 0, 1], &[Activation::Relu, Activation::Relu], 0).is_err());
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Relu, Activation::Identity], 1).unwrap();
        net.set_layer(0, Array2::zeros((3, 2)), Array2::zeros((3, 1))).unwrap();
        net.set_layer(1, Array2::zeros((1, 3)), Array2::zeros((1, 1))).unwrap();
        let (y, _) = net.forward(&array![[1.0, -4.0], [2.0, 5.0]]).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_evaluated_relu_chain() {
        // W1 = [[1], [-1]], relu, then sum layer: relu(x) + relu(-x).
        let mut net = Mlp::new(&[1, 2, 1], &[Activation::Relu, Activation::Identity], 0).unwrap();
        net.set_layer(0, array![[1.0], [-1.0]], Array2::zeros((2, 1))).unwrap();
        net.set_layer(1, array![[1.0, 1.0]], Array2::zeros((1, 1))).unwrap();
        let (y, _) = net.forward(&array![[1.0]]).unwrap();
        assert_eq!(y[[0, 0]], 1.0);
        let (y, _) = net.forward(&array![[-3.0]]).unwrap();
        assert_eq!(y[[0, 0]], 3.0);
    }

    #[test]
    fn batched_forward_matches_columnwise() {
        let net = Mlp::new(
            &[3, 5, 2],
            &[Activation::Softplus, Activation::Sigmoid],
            7,
        )
        .unwrap();
        let mut rng = SplitRng::new(3);
        let batch = rng.normal_matrix(3, 9);
        let (full, _) = net.forward(&batch).unwrap();
        for j in 0..9 {
            let col = batch.column(j).insert_axis(ndarray::Axis(1)).to_owned();
            let (single, _) = net.forward(&col).unwrap();
            for r in 0..2 {
                assert!((full[[r, j]] - single[[r, 0]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_input_is_numeric_error() {
        let net = Mlp::new(&[1, 1], &[Activation::Identity], 0).unwrap();
        let err = net.forward(&array![[f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
        assert!(err.to_string().contains("layer 0"));
    }

    #[test]
    fn linear_backward_matches_hand_derivative() {
        // y = w x + b with upstream 1: dW = x0, db = 1.
        let mut net = Mlp::new(&[1, 1], &[Activation::Identity], 0).unwrap();
        net.set_layer(0, array![[2.0]], array![[0.5]]).unwrap();
        let x0 = 3.25;
        let (_, cache) = net.forward(&array![[x0]]).unwrap();
        let grads = net.backward(&cache, &array![[1.0]]).unwrap();
        assert_eq!(grads.weights[0][[0, 0]], x0);
        assert_eq!(grads.biases[0][[0, 0]], 1.0);
        assert_eq!(grads.input.as_ref().unwrap()[[0, 0]], 2.0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::new(&[2, 4, 1], &[Activation::Tanh, Activation::Identity], 5).unwrap();
        let mut rng = SplitRng::new(8);
        let batch = rng.normal_matrix(2, 6);
        let (_, cache) = net.forward(&batch).unwrap();
        let grads = net.backward(&cache, &Array2::zeros((1, 6))).unwrap();
        for w in &grads.weights {
            assert!(w.iter().all(|&v| v == 0.0));
        }
        for b in &grads.biases {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_rejects_mismatched_upstream() {
        let net = Mlp::new(&[2, 3, 1], &[Activation::Relu, Activation::Identity], 0).unwrap();
        let mut rng = SplitRng::new(0);
        let batch = rng.normal_matrix(2, 4);
        let (_, cache) = net.forward(&batch).unwrap();
        assert!(net.backward(&cache, &Array2::zeros((1, 5))).is_err());
        assert!(net.backward(&cache, &Array2::zeros((2, 4))).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = Mlp::new(
            &[3, 6, 4, 1],
            &[Activation::Softplus, Activation::Tanh, Activation::Identity],
            21,
        )
        .unwrap();
        let mut rng = SplitRng::new(22);
        let batch = rng.normal_matrix(3, 5);
        let upstream = rng.normal_matrix(1, 5);
        let (_, cache) = net.forward(&batch).unwrap();
        let analytic = net.backward(&cache, &upstream).unwrap();
        let loss = |m: &Mlp| {
            let (out, _) = m.forward(&batch).unwrap();
            (&out * &upstream).sum()
        };
        let report = gradient_check(&net, loss, &analytic, 1e-6, 1e-5);
        assert!(report.passed, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let net = Mlp::new(&[2, 5, 1], &[Activation::Softplus, Activation::Identity], 13).unwrap();
        let mut rng = SplitRng::new(14);
        let batch = rng.normal_matrix(2, 3);
        let upstream = rng.normal_matrix(1, 3);
        let (_, cache) = net.forward(&batch).unwrap();
        let grads = net.backward(&cache, &upstream).unwrap();
        let dinput = grads.input.unwrap();
        let h = 1e-6;
        for r in 0..2 {
            for c in 0..3 {
                let mut up = batch.clone();
                up[[r, c]] += h;
                let mut down = batch.clone();
                down[[r, c]] -= h;
                let f = |b: &Array2<f64>| {
                    let (out, _) = net.forward(b).unwrap();
                    (&out * &upstream).sum()
                };
                let fd = (f(&up) - f(&down)) / (2.0 * h);
                assert!(
                    (fd - dinput[[r, c]]).abs() < 1e-6,
                    "({r},{c}): fd {fd} vs {}",
                    dinput[[r, c]]
                );
            }
        }
    }

    #[test]
    fn quadratic_loss_fd_is_exact() {
        // Central differences are exact for quadratics, so the check should
        // agree to near machine precision on a linear net with squared loss.
        let mut net = Mlp::new(&[1, 1], &[Activation::Identity], 0).unwrap();
        net.set_layer(0, array![[1.5]], array![[-0.25]]).unwrap();
        let x = array![[2.0, -1.0, 0.5]];
        let loss = |m: &Mlp| {
            let (out, _) = m.forward(&x).unwrap();
            out.iter().map(|v| v * v).sum::<f64>()
        };
        let (_, cache) = net.forward(&x).unwrap();
        let (out, _) = net.forward(&x).unwrap();
        let upstream = out.mapv(|v| 2.0 * v);
        let analytic = net.backward(&cache, &upstream).unwrap();
        let report = gradient_check(&net, loss, &analytic, 1e-4, 1e-9);
        assert!(report.passed, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn zero_tolerance_fails_on_nonlinear_net() {
        // Documents that discretization error is nonzero off the quadratic case.
        let net = Mlp::new(&[2, 4, 1], &[Activation::Tanh, Activation::Identity], 3).unwrap();
        let mut rng = SplitRng::new(4);
        let batch = rng.normal_matrix(2, 4);
        let (_, cache) = net.forward(&batch).unwrap();
        let upstream = Array2::from_elem((1, 4), 1.0);
        let analytic = net.backward(&cache, &upstream).unwrap();
        let loss = |m: &Mlp| {
            let (out, _) = m.forward(&batch).unwrap();
            out.sum()
        };
        let report = gradient_check(&net, loss, &analytic, 1e-6, 0.0);
        assert!(!report.passed);
        assert!(report.max_rel_err > 0.0);
    }

    #[test]
    fn adam_no_op_on_zero_gradients() {
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Relu, Activation::Identity], 6).unwrap();
        let before = net.clone();
        let grads = Gradients::zeros_like(&net);
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &grads, &mut state).unwrap();
        for (a, b) in net.weights().iter().zip(before.weights()) {
            assert_eq!(a, b);
        }
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut net = Mlp::new(&[1, 1], &[Activation::Identity], 0).unwrap();
        net.set_layer(0, array![[0.0]], array![[0.0]]).unwrap();
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0][[0, 0]] = 1.0;
        let mut state = AdamState::with_hyperparams(&net, 0.1, 0.9, 0.999, 1e-8);
        adam_step(&mut net, &grads, &mut state).unwrap();
        // Bias correction makes the first step ≈ lr · sign(grad).
        assert!((net.weights()[0][[0, 0]] + 0.1).abs() < 1e-6);
    }

    #[test]
    fn adam_eps_sensitivity_is_bounded_by_lr() {
        let run = |eps: f64| {
            let mut net = Mlp::new(&[1, 1], &[Activation::Identity], 0).unwrap();
            net.set_layer(0, array![[0.0]], array![[0.0]]).unwrap();
            let mut grads = Gradients::zeros_like(&net);
            grads.weights[0][[0, 0]] = 1.0;
            let mut state = AdamState::with_hyperparams(&net, 0.1, 0.9, 0.999, eps);
            adam_step(&mut net, &grads, &mut state).unwrap();
            net.weights()[0][[0, 0]]
        };
        let diff = (run(1e-8) - run(1e-3)).abs();
        assert!(diff < 0.1, "eps changed the update by {diff}");
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Relu, Activation::Identity], 6).unwrap();
        let other = Mlp::new(&[2, 4, 1], &[Activation::Relu, Activation::Identity], 6).unwrap();
        let grads = Gradients::zeros_like(&other);
        let mut state = AdamState::new(&net);
        assert!(adam_step(&mut net, &grads, &mut state).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.mlp");
        let net = Mlp::new(
            &[3, 7, 2],
            &[Activation::LeakyRelu(0.2), Activation::Softplus],
            1234,
        )
        .unwrap();
        net.save_snapshot(&path).unwrap();
        let loaded = Mlp::load_snapshot(&path).unwrap();
        assert_eq!(net.dims(), loaded.dims());
        for (a, b) in net.weights().iter().zip(loaded.weights()) {
            assert_eq!(a, b);
        }
        for (a, b) in net.biases().iter().zip(loaded.biases()) {
            assert_eq!(a, b);
        }
        let mut rng = SplitRng::new(9);
        let x = rng.normal_matrix(3, 4);
        let (y1, _) = net.forward(&x).unwrap();
        let (y2, _) = loaded.forward(&x).unwrap();
        assert_eq!(y1, y2);
    }
}
