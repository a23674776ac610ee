//! The deterministic analytic check suite behind `infocap checks`.
//!
//! Every closed-form invariant the toolkit relies on is evaluated here:
//! gradient exactness, value-function zeros at unit ratio, the enumerated
//! 2×2 oracle agreement across families, the Gaussian variance formula, the
//! permuted-optimum closed form against an independent brute-force
//! maximization, the metrics identity, and the capacity readout. The whole
//! suite is seconds of work; any failure is a release blocker.

use infocap_core::cortical::{awgn_capacity, capacity_from_value, mckellips_bound};
use infocap_core::divergence::{value_fdime, value_gamma, FGenerator};
use infocap_core::estimators::{permuted_optimum, variance_gaussian, DiscreteJoint, Family};
use infocap_core::nn::{gradient_check, Activation, Mlp};
use infocap_core::sampling::SplitRng;
use ndarray::array;

use crate::metrics::metrics;
use crate::records::MetricRecord;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    fn add(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn lines(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                format!(
                    "{} {} — {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )
            })
            .collect();
        lines.push(format!(
            "{}: {}/{} checks passed",
            if self.passed() { "OK" } else { "FAILED" },
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        ));
        lines
    }
}

/// Maximizes a concave scalar function by bisection on its central-difference
/// slope; never consults an analytic derivative, so it is an independent
/// oracle for closed-form optima.
fn maximize_concave(g: &dyn Fn(f64) -> f64, lo_start: f64) -> f64 {
    let slope = |d: f64| {
        let h = 1e-6 * d.abs().max(1.0);
        (g(d + h) - g(d - h)) / (2.0 * h)
    };
    let mut lo = lo_start;
    let mut hi = lo_start.max(1.0);
    let mut guard = 0;
    while slope(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return f64::NAN;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn run_checks() -> CheckReport {
    let mut report = CheckReport::default();

    // Gradient exactness on a mixed-activation network.
    {
        let net = Mlp::new(
            &[4, 16, 16, 1],
            &[Activation::Softplus, Activation::Tanh, Activation::Identity],
            3,
        )
        .expect("static dims");
        let mut rng = SplitRng::new(7);
        let batch = rng.normal_matrix(4, 8);
        let upstream = rng.normal_matrix(1, 8);
        let (_, cache) = net.forward(&batch).expect("finite batch");
        let analytic = net.backward(&cache, &upstream).expect("valid shapes");
        let loss = |m: &Mlp| {
            let (out, _) = m.forward(&batch).expect("finite batch");
            (&out * &upstream).sum()
        };
        let result = gradient_check(&net, loss, &analytic, 1e-6, 1e-5);
        report.add(
            "gradient-vs-finite-difference",
            result.passed,
            format!("max relative error {:.3e} (tol 1e-5)", result.max_rel_err),
        );
    }

    // Value-function zeros at unit ratio.
    {
        let ones = vec![1.0; 8];
        let halves = vec![0.5; 8];
        let kl = value_fdime(FGenerator::Kl, &ones, &ones).expect("in domain").total;
        let gan = value_fdime(FGenerator::Gan, &halves, &halves).expect("in domain").total;
        let hd = value_fdime(FGenerator::Hd, &ones, &ones).expect("in domain").total;
        let worst = kl.abs().max(gan.abs()).max(hd.abs());
        report.add(
            "value-function-zeros",
            worst <= 1e-15,
            format!("kl {kl:e}, gan {gan:e}, hd {hd:e}"),
        );
    }

    // γ = 1 agrees with the KL value up to its +1 offset.
    {
        let mut rng = SplitRng::new(11);
        let dj: Vec<f64> = (0..64).map(|_| rng.uniform() * 3.0 + 0.01).collect();
        let dm: Vec<f64> = (0..64).map(|_| rng.uniform() * 3.0 + 0.01).collect();
        let gamma = value_gamma(1.0, &dj, &dm).expect("positive inputs").total;
        let kl = value_fdime(FGenerator::Kl, &dj, &dm).expect("positive inputs").total;
        let diff = (gamma - (kl - 1.0)).abs();
        report.add(
            "gamma-one-kl-identity",
            diff <= 1e-12,
            format!("|γ=1 − (kl − 1)| = {diff:.3e}"),
        );
    }

    // Enumerated 2×2 oracle agreement across families.
    {
        let joint = DiscreteJoint::new(array![[0.4, 0.1], [0.1, 0.4]]).expect("valid pmf");
        let truth = joint.mi_enumerated();
        let families = [
            Family::KlDime,
            Family::GanDime,
            Family::HdDime,
            Family::GammaDime(2.0),
            Family::Mine { ema_decay: 0.9 },
            Family::Nwj,
            Family::Smile { tau: 50.0 },
        ];
        let mut worst: f64 = 0.0;
        for family in families {
            let v = joint.oracle_readout(family).expect("enumerable family");
            worst = worst.max((v - truth).abs());
        }
        report.add(
            "oracle-ratio-2x2",
            worst <= 1e-12,
            format!("truth {truth:.5} nats, max family deviation {worst:.3e}"),
        );
    }

    // Gaussian variance formula spot values.
    {
        let at_two = variance_gaussian(2.0, 64);
        let ok = variance_gaussian(0.0, 5) == 0.0
            && (at_two - 0.0153388).abs() < 1e-6
            && (variance_gaussian(400.0, 16) - 1.0 / 16.0).abs() < 1e-15;
        report.add(
            "variance-lemma-formula",
            ok,
            format!("(1−e^−4)/64 = {at_two:.7}"),
        );
    }

    // Permuted-optimum closed form vs brute-force maximization on a 3-point
    // discrete toy (N = 3, K = 1).
    {
        let joint = DiscreteJoint::new(array![
            [0.30, 0.10, 0.05],
            [0.05, 0.20, 0.05],
            [0.02, 0.03, 0.20]
        ])
        .expect("valid pmf");
        let (n_batch, k) = (3usize, 1usize);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let p_joint = joint.pmf()[[i, j]];
                let p_prod = joint.marginal_x()[i] * joint.marginal_y()[j];
                // Pointwise permuted objective: p·ln D − (K/N·p + (N−K)/N·q)·D.
                let b = k as f64 / n_batch as f64 * p_joint
                    + (n_batch - k) as f64 / n_batch as f64 * p_prod;
                let g = move |d: f64| p_joint * d.ln() - b * d;
                let numeric = maximize_concave(&g, 1e-9);
                let formula = permuted_optimum(joint.ratio(i, j), n_batch, k).expect("valid args");
                worst = worst.max((numeric - formula).abs());
            }
        }
        report.add(
            "permuted-optimum-brute-force",
            worst <= 1e-9,
            format!("max |numeric − formula| = {worst:.3e} (tol 1e-9)"),
        );
    }

    // Permuted ceiling: huge ratio with one fixed point caps at N.
    {
        let d = permuted_optimum(1e6, 128, 1).expect("valid args");
        let ceiling = d.ln();
        report.add(
            "permutation-log-n-ceiling",
            (d - 128.0).abs() < 0.2 && (ceiling - (128f64).ln()).abs() < 2e-3,
            format!("D̂ = {d:.3}, implied estimate ceiling {ceiling:.3} nats (ln 128 = {:.3})", (128f64).ln()),
        );
    }

    // Metrics identity on synthetic records.
    {
        let mut rng = SplitRng::new(13);
        let records: Vec<MetricRecord> = (0..400)
            .map(|i| MetricRecord {
                run_id: "synthetic-s0".into(),
                seed: 0,
                family: "synthetic".into(),
                step_index: 1,
                iteration: i,
                estimate_nats: 2.0 + rng.standard_normal() * 0.3,
                true_nats: Some(2.0),
            })
            .collect();
        let rows = metrics(&records, 100).expect("well-formed records");
        let row = &rows[0];
        let gap = (row.mse - (row.bias * row.bias + row.variance)).abs();
        report.add(
            "mse-identity",
            gap <= 1e-12,
            format!("|mse − bias² − var| = {gap:.3e}"),
        );
    }

    // Capacity readout identity and α-invariance at the analytic optimum.
    {
        let joint = DiscreteJoint::new(array![[0.4, 0.1], [0.1, 0.4]]).expect("valid pmf");
        let truth = joint.mi_enumerated();
        let mut worst: f64 = 0.0;
        for alpha in [0.5f64, 1.0, 2.0] {
            let mut j_term = 0.0;
            let mut m_term = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let r = joint.ratio(i, j);
                    j_term += joint.pmf()[[i, j]] * (alpha * r).ln();
                    m_term += joint.marginal_x()[i] * joint.marginal_y()[j] * alpha * r;
                }
            }
            let c = capacity_from_value(alpha * j_term - m_term, alpha);
            worst = worst.max((c - truth).abs());
        }
        let zero = capacity_from_value(2.0 * (2.0f64).ln() - 2.0, 2.0);
        report.add(
            "capacity-readout-alpha-invariance",
            worst <= 1e-9 && zero.abs() <= 1e-15,
            format!("max |C(α) − I| = {worst:.3e}; D≡α readout {zero:e}"),
        );
    }

    // Peak-power bounds at A = 1.
    {
        let mck = mckellips_bound(1.0);
        let trivial = awgn_capacity(1.0, 1);
        let ok = (mck - 0.34657359027997264).abs() < 1e-12 && mck <= trivial;
        report.add(
            "peak-power-bounds",
            ok,
            format!("mckellips(1) = {mck:.6} nats ≤ trivial {trivial:.6}"),
        );
    }

    report
}
