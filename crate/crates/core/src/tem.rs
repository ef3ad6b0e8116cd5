//! Integrate-and-fire time encoding.
//!
//! The encoder integrates `(f(t) + b)/κ` from the left edge of the support
//! and fires whenever the integral reaches `Δ`, resetting to zero. Between
//! firings, consecutive instants satisfy `∫_{t_n}^{t_{n+1}} (f + b) = κΔ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::BandlimitedProcess;
use crate::waveform::Waveform;

/// Largest grid step accepted by [`encode`].
pub const MAX_ENCODER_STEP: f64 = 1e-5;

/// Encoder bias `b`, integrator scale `κ` and threshold `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemParams {
    pub bias: f64,
    pub kappa: f64,
    pub threshold: f64,
}

impl TemParams {
    pub fn new(bias: f64, kappa: f64, threshold: f64) -> Result<Self> {
        let p = TemParams { bias, kappa, threshold };
        if !(kappa > 0.0 && kappa.is_finite()) || !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "kappa and threshold must be positive, got kappa={kappa}, delta={threshold}"
            )));
        }
        if !bias.is_finite() {
            return Err(Error::InvalidParams(format!("bias must be finite, got {bias}")));
        }
        Ok(p)
    }

    /// `κ = 1`, the usual normalization.
    pub fn with_unit_kappa(bias: f64, threshold: f64) -> Result<Self> {
        TemParams::new(bias, 1.0, threshold)
    }

    /// Integral of `f + b` between two firings, `κΔ`.
    pub fn charge(&self) -> f64 {
        self.kappa * self.threshold
    }

    /// Fails unless `b > c`, which keeps the integrand strictly positive.
    pub fn check_bias(&self, c: f64) -> Result<()> {
        if self.bias > c {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "bias b={} must exceed the amplitude bound c={c}",
                self.bias
            )))
        }
    }
}

/// First firing instant plus the intervals between consecutive firings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiringSequence {
    pub first_instant: f64,
    pub intervals: Vec<f64>,
}

impl FiringSequence {
    /// Rebuilds a sequence from absolute instants.
    pub fn from_instants(instants: &[f64]) -> Result<Self> {
        let first_instant = *instants
            .first()
            .ok_or_else(|| Error::EmptySequence("no instants".into()))?;
        let intervals: Vec<f64> = instants.windows(2).map(|w| w[1] - w[0]).collect();
        if intervals.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::invalid("firing instants must be strictly increasing"));
        }
        Ok(FiringSequence {
            first_instant,
            intervals,
        })
    }

    /// `t_1, t_1 + T_1, t_1 + T_1 + T_2, ...`; one more entry than intervals.
    pub fn instants(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut t = self.first_instant;
        out.push(t);
        for dt in &self.intervals {
            t += dt;
            out.push(t);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn max_interval(&self) -> Option<f64> {
        self.intervals.iter().copied().reduce(f64::max)
    }
}

/// `(κΔ/(b+c), κΔ/(b−c))`.
pub fn interval_bounds(params: &TemParams, c: f64) -> Result<(f64, f64)> {
    params.check_bias(c)?;
    if c < 0.0 {
        return Err(Error::invalid(format!("amplitude bound must be non-negative, got {c}")));
    }
    let q = params.charge();
    Ok((q / (params.bias + c), q / (params.bias - c)))
}

/// True iff every interval is shorter than `π/Ω0` (vacuously true when empty).
pub fn validate_nyquist(sequence: &FiringSequence, omega0: f64) -> bool {
    let nyquist = PI / omega0;
    sequence.intervals.iter().all(|&t| t < nyquist)
}

/// Encodes a realization sampled on a grid of spacing `grid_step`.
pub fn encode(process: &BandlimitedProcess, params: &TemParams, grid_step: f64) -> Result<FiringSequence> {
    if !(grid_step > 0.0 && grid_step <= MAX_ENCODER_STEP) {
        return Err(Error::invalid(format!(
            "encoder grid step must be in (0, {MAX_ENCODER_STEP}], got {grid_step}"
        )));
    }
    params.check_bias(process.bound())?;
    let samples = process.evaluate_grid(grid_step)?;
    encode_samples(&samples, params, process.bound())
}

/// Encodes an already sampled signal with amplitude bound `c`.
///
/// The integral is accumulated cell by cell with the trapezoidal rule; inside
/// the cell where it crosses the threshold, the crossing instant is found by
/// linear interpolation of the running integral. Any charge left after the
/// last firing is discarded.
pub fn encode_samples(samples: &Waveform, params: &TemParams, c: f64) -> Result<FiringSequence> {
    params.check_bias(c)?;
    let h = samples.step();
    let charge = params.charge();
    let values = samples.values();
    let mut instants = Vec::new();
    let mut acc = 0.0;
    for i in 1..values.len() {
        let inc = 0.5 * h * (values[i - 1] + values[i] + 2.0 * params.bias);
        if inc <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "integrand f+b is not positive near t={}",
                samples.time(i)
            )));
        }
        let cell_start = samples.time(i - 1);
        let mut consumed = 0.0;
        while acc + inc * (1.0 - consumed) >= charge {
            consumed += (charge - acc) / inc;
            instants.push(cell_start + consumed * h);
            acc = 0.0;
        }
        acc += inc * (1.0 - consumed);
    }
    if instants.is_empty() {
        return Err(Error::EmptySequence(format!(
            "integral over the support never reaches κΔ = {charge:.6e}"
        )));
    }
    FiringSequence::from_instants(&instants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_realization, AmplitudeLaw};
    use crate::waveform::Interval;

    const OMEGA0: f64 = 2.0 * PI * 50.0;

    fn reference_params() -> TemParams {
        TemParams::with_unit_kappa(1.2, 0.0015).unwrap()
    }

    fn support() -> Interval {
        Interval::new(-0.45, 0.45).unwrap()
    }

    fn zero_process() -> BandlimitedProcess {
        BandlimitedProcess::from_coefficients(vec![0.0], 0.0, OMEGA0, support(), 1.0).unwrap()
    }

    #[test]
    fn bounds_for_the_reference_parameters() {
        let (lo, hi) = interval_bounds(&reference_params(), 1.0).unwrap();
        assert!((lo - 0.0015 / 2.2).abs() < 1e-18);
        assert!((hi - 0.0075).abs() < 1e-16);
        assert!((lo - 6.818e-4).abs() < 1e-7);
        // the largest interval stays below the Nyquist period of a 50 Hz band
        assert!(hi < PI / OMEGA0);
        let (a, b) = interval_bounds(&reference_params(), 0.0).unwrap();
        assert_eq!(a, b);
        assert!((a - 0.0015 / 1.2).abs() < 1e-18);
        assert!(matches!(
            interval_bounds(&reference_params(), 1.2),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn constant_input_fires_periodically() {
        let seq = encode(&zero_process(), &reference_params(), 1e-6).unwrap();
        assert!(seq.len() > 700);
        for t in &seq.intervals {
            assert!((t - 0.00125).abs() < 1e-6, "{t}");
        }
        assert!((seq.first_instant - (-0.45 + 0.00125)).abs() < 1e-6);
    }

    #[test]
    fn parameter_errors() {
        assert!(TemParams::new(1.2, 0.0, 0.0015).is_err());
        assert!(TemParams::new(1.2, 1.0, -1.0).is_err());
        let weak = TemParams::with_unit_kappa(0.9, 0.0015).unwrap();
        assert!(matches!(
            encode(&zero_process(), &weak, 1e-6),
            Err(Error::InvalidParams(_))
        ));
        assert!(encode(&zero_process(), &reference_params(), 1e-4).is_err());
    }

    #[test]
    fn too_short_support_has_no_firing() {
        let short = Interval::new(0.0, 0.0005).unwrap();
        let p = BandlimitedProcess::from_coefficients(vec![0.0], 0.0, OMEGA0, short, 1.0).unwrap();
        assert!(matches!(
            encode(&p, &reference_params(), 1e-6),
            Err(Error::EmptySequence(_))
        ));
    }

    #[test]
    fn nyquist_check() {
        let ok = FiringSequence {
            first_instant: 0.0,
            intervals: vec![0.001, 0.0075, 0.005],
        };
        assert!(validate_nyquist(&ok, OMEGA0));
        let bad = FiringSequence {
            first_instant: 0.0,
            intervals: vec![0.001, 0.02],
        };
        assert!(!validate_nyquist(&bad, OMEGA0));
        let empty = FiringSequence {
            first_instant: 0.0,
            intervals: vec![],
        };
        assert!(validate_nyquist(&empty, OMEGA0));
    }

    #[test]
    fn larger_threshold_fires_less() {
        let p = generate_realization(2, OMEGA0, support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
        let fine = encode(&p, &reference_params(), 1e-6).unwrap();
        let coarse = encode(&p, &TemParams::with_unit_kappa(1.2, 0.003).unwrap(), 1e-6).unwrap();
        assert!(fine.len() >= coarse.len());
        let ratio = (fine.len() + 1) as f64 / (coarse.len() + 1) as f64;
        assert!((ratio - 2.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn kappa_scales_the_charge() {
        let p = generate_realization(4, OMEGA0, support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
        let a = encode(&p, &TemParams::new(1.2, 2.0, 0.00075).unwrap(), 1e-6).unwrap();
        let b = encode(&p, &reference_params(), 1e-6).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.instants().iter().zip(b.instants()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
