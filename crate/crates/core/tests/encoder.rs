use std::f64::consts::PI;

use temq::signal::{generate_realization, AmplitudeLaw, BandlimitedProcess};
use temq::tem::{encode, TemParams};
use temq::waveform::Interval;

const OMEGA0: f64 = 2.0 * PI * 50.0;

fn support() -> Interval {
    Interval::new(-0.45, 0.45).unwrap()
}

fn params() -> TemParams {
    TemParams::with_unit_kappa(1.2, 0.0015).unwrap()
}

/// Composite 5-point Gauss–Legendre over `n` panels.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / n as f64;
    (0..n)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            X.iter().zip(W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

#[test]
fn every_interval_carries_the_threshold_charge() {
    for seed in [11, 12, 13] {
        let p = generate_realization(seed, OMEGA0, support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
        let seq = encode(&p, &params(), 1e-6).unwrap();
        let instants = seq.instants();
        for w in instants.windows(2) {
            let charge = integrate(|t| p.evaluate(t) + 1.2, w[0], w[1], 8);
            assert!((charge - 0.0015).abs() / 0.0015 < 1e-6, "seed {seed}: {charge}");
        }
    }
}

#[test]
fn shifting_the_signal_shifts_the_instants() {
    let p = generate_realization(21, OMEGA0, support(), AmplitudeLaw::UniformCoefficients, 1.0).unwrap();
    let tau = 1000.0 * 1e-6;
    let centers = p.centers();
    let shifted_support = Interval::new(support().start + tau, support().end + tau).unwrap();
    let q = BandlimitedProcess::from_coefficients(
        p.coefficients().to_vec(),
        centers[0] + tau,
        OMEGA0,
        shifted_support,
        p.bound(),
    )
    .unwrap();
    let a = encode(&p, &params(), 1e-6).unwrap();
    let b = encode(&q, &params(), 1e-6).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.instants().iter().zip(b.instants()) {
        assert!((y - x - tau).abs() < 1e-9, "{x} {y}");
    }
}

#[test]
fn realizations_respect_the_amplitude_bound() {
    for seed in 30..36 {
        for law in [AmplitudeLaw::GaussianCoefficients, AmplitudeLaw::UniformCoefficients] {
            let p = generate_realization(seed, OMEGA0, support(), law, 1.0).unwrap();
            let peak = p.evaluate_grid(1e-6).unwrap().peak_abs();
            assert!(peak <= 1.0 + 1e-9 && peak > 0.999, "seed {seed}: {peak}");
            for w in p.centers().windows(2) {
                assert!((w[1] - w[0] - PI / OMEGA0).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn doubling_the_threshold_never_adds_firings() {
    let p = generate_realization(40, OMEGA0, support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
    let mut last = usize::MAX;
    for delta in [0.0005, 0.001, 0.0015] {
        let n = encode(&p, &TemParams::with_unit_kappa(1.2, delta).unwrap(), 1e-6)
            .unwrap()
            .len();
        assert!(n <= last);
        last = n;
    }
}
