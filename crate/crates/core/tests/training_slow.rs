//! Training-based integration checks: statistical behavior that needs real
//! optimization runs rather than closed forms. Seeds are fixed so every run
//! is deterministic.

use infocap_core::channels::{rho_for_target_mi, ReparamChannel};
use infocap_core::cortical::{
    cluster_mass_points, CapacityLearner, ConstraintSpec, CorticalConfig, LatentSource,
    PowerConstraint,
};
use infocap_core::estimators::{estimate_with_oracle_ratio, variance_gaussian, Family};
use infocap_core::mind::{
    map_oracle, noise_sigma_for_ebn0, symbol_error_rate, Alphabet, MindDecoder,
};
use infocap_core::sampling::{derange, gaussian_pair_batch, DerangeMode, SplitRng};
use ndarray::array;

/// Monte Carlo variance of the oracle-ratio estimate on the scalar Gaussian
/// matches (1−e^{−2I})/M within 10% over 1000 repetitions.
#[test]
fn oracle_ratio_variance_matches_lemma() {
    let target = 2.0;
    let m = 64;
    let reps = 1000;
    let rho = rho_for_target_mi(1, target);
    let mut rng = SplitRng::new(2024);
    let ratio =
        move |x: &[f64], y: &[f64]| infocap_core::channels::gaussian_log_ratio(rho, x, y).exp();
    let mut estimates = Vec::with_capacity(reps);
    for _ in 0..reps {
        let batch = gaussian_pair_batch(1, rho, m, &mut rng).unwrap();
        let shuffle = derange(m, DerangeMode::Shift, &mut rng).unwrap();
        let est = estimate_with_oracle_ratio(Family::KlDime, &ratio, &batch, &shuffle).unwrap();
        estimates.push(est.value_nats);
    }
    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / reps as f64;
    let predicted = variance_gaussian(target, m);
    let rel = (var - predicted).abs() / predicted;
    assert!(
        rel < 0.10,
        "empirical variance {var} vs predicted {predicted} (relative error {rel})"
    );
}

/// Equiprobable BPSK over AWGN: at y = 0 the trained decoder must report a
/// symmetric posterior, and the raw discriminator values converge to the
/// optimum 1/(1+P) = 2/3.
#[test]
fn bpsk_decoder_is_symmetric_at_origin() {
    let alphabet = Alphabet::uniform(array![[-1.0, 1.0]]).unwrap();
    let sigma = 1.0;
    let mut decoder = MindDecoder::with_architecture(alphabet, 1, &[64, 64], 11).unwrap();
    let mut rng = SplitRng::new(42);
    let channel = move |x: &ndarray::Array2<f64>, rng: &mut SplitRng| {
        Ok(x + &(rng.normal_matrix(1, x.ncols()) * sigma))
    };
    decoder.train(channel, 1500, 256, &mut rng).unwrap();
    let table = decoder.posterior(&[0.0]).unwrap();
    assert!(
        (table.normalized[0] - 0.5).abs() < 0.02,
        "posterior at origin {:?}",
        table.normalized
    );
    let d = decoder
        .discriminator_values(&array![[0.0]])
        .unwrap();
    for i in 0..2 {
        assert!(
            (d[[i, 0]] - 2.0 / 3.0).abs() < 0.02,
            "D_{i}(0) = {}",
            d[[i, 0]]
        );
    }
    // The MIND decisions should agree with the MAP oracle almost everywhere
    // in the bulk of the output density.
    let lik =
        move |y: &[f64], x: &[f64]| infocap_core::channels::normal_pdf(y[0] - x[0], sigma * sigma);
    let mut disagreements = 0;
    for k in 0..200 {
        let y = -3.0 + k as f64 * 0.03;
        if decoder.decode(&[y]).unwrap() != map_oracle(&lik, decoder.alphabet(), &[y]) {
            disagreements += 1;
        }
    }
    assert!(disagreements <= 8, "{disagreements} grid disagreements");
}

/// Per-SNR training protocol: the symbol error rate at 12 dB must not
/// exceed the one at 4 dB (3σ margin).
#[test]
fn ser_decreases_with_snr() {
    let mut results = Vec::new();
    for (seed, ebn0) in [(5u64, 4.0f64), (6u64, 12.0f64)] {
        let alphabet = Alphabet::uniform(array![[-3.0, -1.0, 1.0, 3.0]]).unwrap();
        let sigma = noise_sigma_for_ebn0(&alphabet, ebn0);
        let mut decoder =
            MindDecoder::with_architecture(alphabet.clone(), 1, &[64, 64], seed).unwrap();
        let mut rng = SplitRng::new(seed);
        let channel = move |x: &ndarray::Array2<f64>, rng: &mut SplitRng| {
            Ok(x + &(rng.normal_matrix(1, x.ncols()) * sigma))
        };
        decoder.train(channel, 2000, 256, &mut rng).unwrap();
        let n = 100_000;
        let ser = symbol_error_rate(
            |y| decoder.decode(y).unwrap(),
            decoder.alphabet(),
            channel,
            n,
            &mut rng,
        )
        .unwrap();
        results.push((ser, n));
    }
    let (high_noise, n) = results[0];
    let (low_noise, _) = results[1];
    let sigma_stat = ((high_noise * (1.0 - high_noise) + low_noise * (1.0 - low_noise))
        / n as f64)
        .sqrt();
    assert!(
        low_noise <= high_noise - 3.0 * sigma_stat,
        "SER did not drop with SNR: {high_noise} at 4 dB vs {low_noise} at 12 dB"
    );
}

/// The Rayleigh-equivalent capacity learner concentrates mass at the rate
/// boundary s = 1, the known accumulation point of the optimal input.
#[test]
fn rayleigh_learner_accumulates_at_unit_rate() {
    let mut learner = CapacityLearner::new(
        ReparamChannel::RayleighEquiv,
        ConstraintSpec {
            constraints: vec![PowerConstraint::RayleighAvg { a: 1.0, lambda: 1.0 }],
        },
        CorticalConfig {
            batch: 256,
            latent: LatentSource::Gaussian(8),
            gen_hidden: vec![64, 64],
            disc_hidden: vec![64, 64],
            seed: 17,
            lr: 5e-4,
            ..CorticalConfig::default()
        },
    )
    .unwrap();
    let mut rng = SplitRng::new(99);
    learner.train(2000, &mut rng).unwrap();
    let samples = learner.sample_inputs(4000, &mut rng).unwrap();
    let eps = 0.05;
    let clusters = cluster_mass_points(&samples, eps).unwrap();
    let near_one = clusters
        .iter()
        .any(|c| (c.center[0] - 1.0).abs() <= eps && c.mass > 0.3);
    assert!(
        near_one,
        "no cluster near s = 1; clusters: {:?}",
        clusters
            .iter()
            .map(|c| (c.center[0], c.mass))
            .collect::<Vec<_>>()
    );
}
