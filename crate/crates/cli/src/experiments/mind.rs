//! Decoder sweeps: one decoder trained per SNR point, compared against the
//! genie MAP and prior-ignorant MaxL oracles on Monte Carlo symbol error
//! rate, plus the decoder's own entropy and error-probability readouts.

use infocap_core::channels::{normal_pdf, MiddletonNoiseModel};
use infocap_core::mind::{
    map_oracle, maxl_oracle, noise_sigma_for_ebn0, Alphabet, MindDecoder,
};
use infocap_core::sampling::SplitRng;
use infocap_core::{Error, Result};
use ndarray::Array2;

use crate::config::Scoped;
use crate::records::{format_float, MetricRecord, Table};

use super::RunOutput;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecoderChannel {
    /// `y = x + σn`.
    Awgn,
    /// `y = sign(x)√|x| + σn`.
    SqrtAwgn,
    /// `y = x + n` with Bernoulli-Gaussian noise scaled to deviation σ.
    Middleton { p: f64, b: f64 },
}

impl DecoderChannel {
    fn apply(&self, x: &Array2<f64>, sigma: f64, rng: &mut SplitRng) -> Result<Array2<f64>> {
        match *self {
            DecoderChannel::Awgn => Ok(x + &(rng.normal_matrix(x.nrows(), x.ncols()) * sigma)),
            DecoderChannel::SqrtAwgn => {
                infocap_core::channels::nonlinear_sqrt_channel(x, sigma, rng)
            }
            DecoderChannel::Middleton { p, b } => {
                // Base variance chosen so the mixture variance equals σ².
                let model = self.middleton_model(sigma, p, b)?;
                let noise =
                    infocap_core::channels::middleton_noise(&model, x.nrows(), x.ncols(), rng);
                Ok(x + &noise)
            }
        }
    }

    fn middleton_model(&self, sigma: f64, p: f64, b: f64) -> Result<MiddletonNoiseModel> {
        let sigma_b2 = sigma * sigma / (1.0 - p + p * b);
        MiddletonNoiseModel::new(p, b, sigma_b2)
    }

    /// Likelihood `p(y|x)` used by the genie decoders.
    fn likelihood(&self, sigma: f64) -> Result<Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>> {
        match *self {
            DecoderChannel::Awgn => {
                let var = sigma * sigma;
                Ok(Box::new(move |y, x| {
                    y.iter()
                        .zip(x)
                        .map(|(&a, &b)| normal_pdf(a - b, var))
                        .product()
                }))
            }
            DecoderChannel::SqrtAwgn => {
                let var = sigma * sigma;
                Ok(Box::new(move |y, x| {
                    y.iter()
                        .zip(x)
                        .map(|(&a, &b)| normal_pdf(a - b.signum() * b.abs().sqrt(), var))
                        .product()
                }))
            }
            DecoderChannel::Middleton { p, b } => {
                let model = self.middleton_model(sigma, p, b)?;
                Ok(Box::new(move |y, x| {
                    y.iter().zip(x).map(|(&a, &b)| model.pdf(a - b)).product()
                }))
            }
        }
    }

    /// Gaussian-assumption likelihood (what a prior-ignorant MaxL receiver
    /// that also assumes AWGN would use).
    fn gaussian_likelihood(sigma: f64) -> impl Fn(&[f64], &[f64]) -> f64 {
        let var = sigma * sigma;
        move |y: &[f64], x: &[f64]| {
            y.iter()
                .zip(x)
                .map(|(&a, &b)| normal_pdf(a - b, var))
                .product()
        }
    }
}

#[derive(Debug, Clone)]
pub struct MindRunConfig {
    pub alphabet: Alphabet,
    pub channel: DecoderChannel,
    pub ebn0_db: Vec<f64>,
    pub iters: usize,
    pub batch: usize,
    pub hidden: Vec<usize>,
    pub eval_symbols: usize,
    pub entropy_samples: usize,
    pub seeds: Vec<u64>,
}

impl MindRunConfig {
    pub fn from_scoped(scoped: &Scoped<'_>) -> Result<Self> {
        let prior = scoped.list_f64("prior")?;
        let alphabet = match scoped.get_str("alphabet", "pam4") {
            "pam4" => {
                let prior = prior.unwrap_or_else(|| vec![0.25; 4]);
                Alphabet::pam4(prior)?
            }
            "bpsk" => {
                let prior = prior.unwrap_or_else(|| vec![0.5; 2]);
                Alphabet::new(ndarray::array![[-1.0, 1.0]], prior)?
            }
            other => return Err(Error::config(format!("unknown alphabet `{other}`"))),
        };
        let channel = match scoped.get_str("channel", "awgn") {
            "awgn" => DecoderChannel::Awgn,
            "sqrt_awgn" => DecoderChannel::SqrtAwgn,
            "middleton" => DecoderChannel::Middleton {
                p: scoped.get_f64("middleton_p", 0.05)?,
                b: scoped.get_f64("middleton_b", 5.0)?,
            },
            other => return Err(Error::config(format!("unknown decoder channel `{other}`"))),
        };
        let ebn0_db = scoped
            .list_f64("ebn0_db")?
            .ok_or_else(|| Error::config("mind needs an `ebn0_db` list".to_string()))?;
        Ok(MindRunConfig {
            alphabet,
            channel,
            ebn0_db,
            iters: scoped.get_usize("iters", 4000)?,
            batch: scoped.get_usize("batch", 256)?,
            hidden: scoped.list_usize("hidden")?.unwrap_or_else(|| vec![256, 256]),
            eval_symbols: scoped.get_usize("eval_symbols", 200_000)?,
            entropy_samples: scoped.get_usize("entropy_samples", 65_536)?,
            seeds: scoped.list_u64("seeds")?.unwrap_or_else(|| vec![0]),
        })
    }
}

/// Evaluated operating point, kept for acceptance checks.
#[derive(Debug, Clone)]
pub struct SnrPoint {
    pub ebn0_db: f64,
    pub seed: u64,
    pub ser_mind: f64,
    pub ser_map: f64,
    pub ser_maxl: f64,
    pub pe_estimate: f64,
    pub h_x_bits: f64,
    pub h_x_given_y_bits: f64,
    pub mi_bits: f64,
}

/// Chunked Monte Carlo comparison of the three decision rules on shared
/// channel realizations.
fn evaluate_point(
    decoder: &MindDecoder,
    config: &MindRunConfig,
    sigma: f64,
    rng: &mut SplitRng,
) -> Result<(f64, f64, f64)> {
    let alphabet = decoder.alphabet();
    let channel_lik = config.channel.likelihood(sigma)?;
    let gauss_lik = DecoderChannel::gaussian_likelihood(sigma);
    let mut errors = [0usize; 3];
    let mut done = 0usize;
    let chunk = 8192;
    while done < config.eval_symbols {
        let take = chunk.min(config.eval_symbols - done);
        let labels = alphabet.sample_indices(take, rng);
        let x = alphabet.symbols_for(&labels);
        let y = config.channel.apply(&x, sigma, rng)?;
        let tables = decoder.posteriors(&y)?;
        for (j, &label) in labels.iter().enumerate() {
            let obs: Vec<f64> = y.column(j).to_vec();
            if tables[j].decode() != label {
                errors[0] += 1;
            }
            if map_oracle(channel_lik.as_ref(), alphabet, &obs) != label {
                errors[1] += 1;
            }
            if maxl_oracle(&gauss_lik, alphabet, &obs) != label {
                errors[2] += 1;
            }
        }
        done += take;
    }
    let n = config.eval_symbols as f64;
    Ok((
        errors[0] as f64 / n,
        errors[1] as f64 / n,
        errors[2] as f64 / n,
    ))
}

pub fn run(
    config: &MindRunConfig,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<(RunOutput, Vec<SnrPoint>)> {
    let cells: Vec<(f64, u64)> = config
        .ebn0_db
        .iter()
        .flat_map(|&snr| config.seeds.iter().map(move |&s| (snr, s)))
        .collect();
    let pool = super::worker_pool(threads)?;
    type CellOut = (Vec<MetricRecord>, SnrPoint);
    let results: Vec<Result<CellOut>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .enumerate()
            .map(|(idx, &(ebn0, seed))| {
                let mut rng = SplitRng::with_stream(master_seed, 0).split(idx as u64);
                let net_seed = rng.next_seed();
                let sigma = noise_sigma_for_ebn0(&config.alphabet, ebn0);
                let mut decoder = MindDecoder::with_architecture(
                    config.alphabet.clone(),
                    config.alphabet.dim(),
                    &config.hidden,
                    net_seed,
                )?;
                let channel = config.channel;
                let trace = decoder.train(
                    move |x: &Array2<f64>, rng: &mut SplitRng| channel.apply(x, sigma, rng),
                    config.iters,
                    config.batch,
                    &mut rng,
                )?;
                let run_id = format!("snr{ebn0}-s{seed}");
                let sweep_index = config.ebn0_db.iter().position(|&v| v == ebn0).unwrap_or(0);
                let records: Vec<MetricRecord> = trace
                    .iter()
                    .enumerate()
                    .map(|(it, &value)| MetricRecord {
                        run_id: run_id.clone(),
                        seed,
                        family: "mind".into(),
                        step_index: sweep_index + 1,
                        iteration: it + 1,
                        estimate_nats: value,
                        true_nats: None,
                    })
                    .collect();

                let (ser_mind, ser_map, ser_maxl) =
                    evaluate_point(&decoder, config, sigma, &mut rng)?;
                // Entropy readouts over fresh prior-weighted outputs.
                let labels = config.alphabet.sample_indices(config.entropy_samples, &mut rng);
                let x = config.alphabet.symbols_for(&labels);
                let y = config.channel.apply(&x, sigma, &mut rng)?;
                let report = decoder.estimate_entropies(&y)?;
                Ok((
                    records,
                    SnrPoint {
                        ebn0_db: ebn0,
                        seed,
                        ser_mind,
                        ser_map,
                        ser_maxl,
                        pe_estimate: report.p_e,
                        h_x_bits: report.h_x_bits,
                        h_x_given_y_bits: report.h_x_given_y_bits,
                        mi_bits: report.mi_bits,
                    },
                ))
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut points = Vec::new();
    for r in results {
        let (cell_records, point) = r?;
        records.extend(cell_records);
        points.push(point);
    }

    let mut table = Table::new(&[
        "ebn0_db",
        "seed",
        "ser_mind",
        "ser_map",
        "ser_maxl",
        "pe_estimate",
        "h_x_bits",
        "h_x_given_y_bits",
        "mi_bits",
    ]);
    let mut summary = vec![format!(
        "mind: channel={:?} M={} iters={} batch={} eval_symbols={}",
        config.channel,
        config.alphabet.len(),
        config.iters,
        config.batch,
        config.eval_symbols,
    )];
    for p in &points {
        table.push(vec![
            format_float(p.ebn0_db),
            p.seed.to_string(),
            format_float(p.ser_mind),
            format_float(p.ser_map),
            format_float(p.ser_maxl),
            format_float(p.pe_estimate),
            format_float(p.h_x_bits),
            format_float(p.h_x_given_y_bits),
            format_float(p.mi_bits),
        ]);
        summary.push(format!(
            "Eb/N0 {} dB seed {}: SER mind {:.5} map {:.5} maxl {:.5}; H(X) {:.4} I {:.4} bits",
            p.ebn0_db, p.seed, p.ser_mind, p.ser_map, p.ser_maxl, p.h_x_bits, p.mi_bits
        ));
    }
    Ok((
        RunOutput {
            records,
            metrics: table,
            summary,
        },
        points,
    ))
}
