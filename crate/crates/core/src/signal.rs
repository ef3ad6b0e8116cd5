//! Bounded bandlimited test signals built as finite sinc series.
//!
//! A realization is `f(t) = Σ_k a_k sinc(Ω0 (t - t_k))` with centers `t_k`
//! on a grid of spacing `π/Ω0`, so every realization is bandlimited to
//! `[-Ω0, Ω0]` by construction. Centers extend one spacing past each end of
//! the support, and the coefficients are rescaled so that the peak of `|f|`
//! over the support equals the requested amplitude bound `c`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{Histogram, HistogramAccumulator};
use crate::error::{Error, Result};
use crate::waveform::{Interval, Waveform};

/// Evaluation grid used for peak normalization and amplitude statistics.
pub const DEFAULT_GRID_STEP: f64 = 1e-6;

/// `sin(x)/x` with `sinc(0) = 1`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Distribution of the i.i.d. sinc coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeLaw {
    /// Standard normal coefficients; amplitudes come out truncated-Gaussian.
    #[default]
    GaussianCoefficients,
    /// Coefficients uniform on `[-1, 1]`.
    UniformCoefficients,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandlimitedProcess {
    coefficients: Vec<f64>,
    /// `coefficients[k] * (-1)^k`, used by the shared-sine evaluation.
    alternating: Vec<f64>,
    first_center: f64,
    omega0: f64,
    bound: f64,
    support: Interval,
}

impl BandlimitedProcess {
    /// Sinc series with centers `first_center + k π/Ω0`. The amplitude
    /// bound is taken from the caller as is; use [`Self::normalize_to`] to
    /// make it tight.
    pub fn from_coefficients(
        coefficients: Vec<f64>,
        first_center: f64,
        omega0: f64,
        support: Interval,
        bound: f64,
    ) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::invalid(format!("band edge must be positive, got {omega0}")));
        }
        if coefficients.is_empty() {
            return Err(Error::invalid("a sinc series needs at least one term"));
        }
        if coefficients.iter().any(|a| !a.is_finite()) || !first_center.is_finite() {
            return Err(Error::invalid("sinc coefficients and centers must be finite"));
        }
        if !(bound > 0.0) {
            return Err(Error::invalid(format!("amplitude bound must be positive, got {bound}")));
        }
        let alternating = alternate(&coefficients);
        Ok(BandlimitedProcess {
            coefficients,
            alternating,
            first_center,
            omega0,
            bound,
            support,
        })
    }

    /// Rescales the coefficients so that `max |f|` over the support equals
    /// `target`. The peak is located on the 1 µs grid and then refined
    /// locally, so the bound also holds between grid points.
    pub fn normalize_to(self, target: f64) -> Result<Self> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::invalid(format!("target bound must be positive, got {target}")));
        }
        let peak = self.refined_peak()?;
        if !(peak > 0.0) {
            return Err(Error::invalid("cannot normalize the zero signal"));
        }
        let scale = target / peak;
        let coefficients: Vec<f64> = self.coefficients.iter().map(|a| a * scale).collect();
        BandlimitedProcess::from_coefficients(coefficients, self.first_center, self.omega0, self.support, target)
    }

    fn refined_peak(&self) -> Result<f64> {
        let step = DEFAULT_GRID_STEP.min(self.support.len() / 2.0);
        let grid = self.evaluate_grid(step)?;
        let values = grid.values();
        let grid_peak = grid.peak_abs();
        // |f| can exceed the grid maximum by at most ~Ω0² c h² / 8 between
        // samples, so only near-maximal local peaks need refining.
        let slack = 0.5 * (self.omega0 * step).powi(2) * grid_peak + 1e-15;
        let mut peak = grid_peak;
        for i in 0..values.len() {
            let v = values[i].abs();
            if v + slack < grid_peak {
                continue;
            }
            let left = if i > 0 { values[i - 1].abs() } else { f64::NEG_INFINITY };
            let right = values.get(i + 1).map_or(f64::NEG_INFINITY, |x| x.abs());
            if v < left || v < right {
                continue;
            }
            let lo = (grid.time(i) - step).max(self.support.start);
            let hi = (grid.time(i) + step).min(self.support.end);
            peak = peak.max(golden_max(|t| self.evaluate(t).abs(), lo, hi));
        }
        Ok(peak)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.coefficients.len()).map(|k| self.center(k)).collect()
    }

    fn center(&self, k: usize) -> f64 {
        self.first_center + k as f64 * self.nyquist_period()
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Amplitude bound `c`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    /// `π/Ω0`, the center spacing and the largest admissible sampling gap.
    pub fn nyquist_period(&self) -> f64 {
        PI / self.omega0
    }

    /// `Σ_k a_k sinc(Ω0 (t - t_k))`.
    ///
    /// Because the centers are `π/Ω0` apart, `sin(Ω0 (t - t_k)) = (-1)^k
    /// sin(Ω0 (t - t_0))`, so one sine serves every term. The term nearest
    /// to `t` is evaluated directly to avoid dividing a rounded sine by a
    /// small argument.
    pub fn evaluate(&self, t: f64) -> f64 {
        let shared = (self.omega0 * (t - self.first_center)).sin();
        let spacing = self.nyquist_period();
        let mut sum = 0.0;
        for (k, (&a, &alt)) in self.coefficients.iter().zip(&self.alternating).enumerate() {
            let x = self.omega0 * (t - (self.first_center + k as f64 * spacing));
            if x.abs() < 0.5 {
                sum += a * sinc(x);
            } else {
                sum += alt * shared / x;
            }
        }
        sum
    }

    /// Samples on the grid `support.start + i * grid_step`.
    pub fn evaluate_grid(&self, grid_step: f64) -> Result<Waveform> {
        Waveform::sample(self.support, grid_step, |t| self.evaluate(t))
    }
}

fn alternate(coefficients: &[f64]) -> Vec<f64> {
    coefficients
        .iter()
        .enumerate()
        .map(|(k, a)| if k % 2 == 0 { *a } else { -*a })
        .collect()
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut best = f(lo).max(f(hi)).max(f1).max(f2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
        best = best.max(f1).max(f2);
        if hi - lo < 1e-15 * (1.0 + lo.abs()) {
            break;
        }
    }
    best
}

/// Draws one realization.
///
/// Centers sit on the integer multiples of `π/Ω0` that lie within one spacing
/// of the support, coefficients are i.i.d. from `law` using a ChaCha8 stream
/// seeded with `seed`, and the result is normalized to peak `target_bound`.
pub fn generate_realization(
    seed: u64,
    omega0: f64,
    support: Interval,
    law: AmplitudeLaw,
    target_bound: f64,
) -> Result<BandlimitedProcess> {
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::invalid(format!("band edge must be positive, got {omega0}")));
    }
    if !(support.len() > 0.0) {
        return Err(Error::invalid("support has zero length"));
    }
    let spacing = PI / omega0;
    let inside_lo = (support.start / spacing - 1e-9).ceil() as i64;
    let inside_hi = (support.end / spacing + 1e-9).floor() as i64;
    if inside_hi < inside_lo {
        return Err(Error::invalid(format!(
            "no sinc center with spacing {spacing:.6e} s fits inside [{}, {}]",
            support.start, support.end
        )));
    }
    let first = inside_lo - 1;
    let count = (inside_hi + 1 - first + 1) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefficients: Vec<f64> = (0..count)
        .map(|_| match law {
            AmplitudeLaw::GaussianCoefficients => rng.sample::<f64, _>(StandardNormal),
            AmplitudeLaw::UniformCoefficients => rng.random_range(-1.0..=1.0),
        })
        .collect();
    BandlimitedProcess::from_coefficients(coefficients, first as f64 * spacing, omega0, support, target_bound)?
        .normalize_to(target_bound)
}

/// Pooled amplitude histogram over `[-c, c]` across realizations sampled on
/// a `grid_step` grid.
pub fn estimate_amplitude_pdf(realizations: &[BandlimitedProcess], grid_step: f64, n_bins: usize) -> Result<Histogram> {
    let first = realizations
        .first()
        .ok_or_else(|| Error::invalid("amplitude histogram needs at least one realization"))?;
    let c = first.bound();
    let mut acc = HistogramAccumulator::new(Interval::new(-c, c)?, n_bins)?;
    for p in realizations {
        if p.bound() != c {
            return Err(Error::invalid("realizations disagree on the amplitude bound"));
        }
        acc.extend(p.evaluate_grid(grid_step)?.into_values());
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    const OMEGA0: f64 = 2.0 * PI * 50.0;

    fn default_support() -> Interval {
        Interval::new(-0.45, 0.45).unwrap()
    }

    fn naive(p: &BandlimitedProcess, t: f64) -> f64 {
        p.coefficients()
            .iter()
            .zip(p.centers())
            .map(|(a, c)| a * sinc(p.omega0() * (t - c)))
            .sum()
    }

    fn single_term() -> BandlimitedProcess {
        BandlimitedProcess::from_coefficients(vec![1.0], 0.0, OMEGA0, default_support(), 1.0).unwrap()
    }

    #[test]
    fn sinc_values() {
        let p = single_term();
        assert_eq!(p.evaluate(0.0), 1.0);
        assert!(p.evaluate(PI / OMEGA0).abs() < 1e-15);
        let quarter = p.evaluate(PI / (2.0 * OMEGA0));
        assert!((quarter - 2.0 / PI).abs() < 1e-15, "{quarter}");
    }

    #[test]
    fn realization_layout() {
        let p = generate_realization(7, OMEGA0, default_support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
        let centers = p.centers();
        let inside = centers.iter().filter(|c| default_support().contains(**c)).count();
        assert!(inside <= 91, "{inside} centers inside");
        assert_eq!(inside, 91);
        assert_eq!(centers.len(), 93);
        for w in centers.windows(2) {
            assert!(((w[1] - w[0]) - 0.01).abs() < 1e-15);
        }
        assert!((centers[0] + 0.46).abs() < 1e-15);
    }

    #[test]
    fn fast_evaluation_matches_the_series() {
        let p = generate_realization(3, OMEGA0, default_support(), AmplitudeLaw::UniformCoefficients, 1.0).unwrap();
        for i in 0..2000 {
            let t = -0.47 + 0.94 * i as f64 / 1999.0;
            assert!((p.evaluate(t) - naive(&p, t)).abs() < 1e-12, "t = {t}");
        }
        // on and next to the centers
        for c in p.centers() {
            for d in [0.0, 1e-9, -3e-7, 2e-5] {
                assert!((p.evaluate(c + d) - naive(&p, c + d)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = generate_realization(11, OMEGA0, default_support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
        let b = generate_realization(11, OMEGA0, default_support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
        let c = generate_realization(12, OMEGA0, default_support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
        assert_ne!(a.coefficients(), c.coefficients());
    }

    #[test]
    fn peak_is_tight_and_bounded() {
        let p = generate_realization(5, OMEGA0, default_support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
        let fine = p.evaluate_grid(1e-6).unwrap();
        assert!(fine.peak_abs() <= 1.0 + 1e-9);
        assert!(fine.peak_abs() > 1.0 - 1e-7);
        // a grid not aligned with the normalization grid
        let odd = Waveform::sample(Interval::new(-0.45 + 3.3e-7, 0.45).unwrap(), 7.7e-7, |t| p.evaluate(t)).unwrap();
        assert!(odd.peak_abs() <= 1.0 + 1e-9);
    }

    #[test]
    fn grid_agrees_with_pointwise_evaluation() {
        let p = generate_realization(9, OMEGA0, default_support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap();
        let grid = p.evaluate_grid(1e-6).unwrap();
        assert_eq!(grid.len(), 900_001);
        for i in (0..grid.len()).step_by(10_007) {
            assert_eq!(grid.values()[i], p.evaluate(grid.time(i)));
        }
    }

    #[test]
    fn zero_signal_cannot_be_normalized() {
        let zero = BandlimitedProcess::from_coefficients(vec![0.0; 93], -0.46, OMEGA0, default_support(), 1.0).unwrap();
        assert!(matches!(zero.normalize_to(1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn argument_errors() {
        let tiny = Interval::new(0.001, 0.002).unwrap();
        assert!(generate_realization(1, OMEGA0, tiny, AmplitudeLaw::GaussianCoefficients, 1.0).is_err());
        assert!(generate_realization(1, -1.0, default_support(), AmplitudeLaw::GaussianCoefficients, 1.0).is_err());
        assert!(single_term().evaluate_grid(2.0).is_err());
    }

    #[test]
    fn zero_process_histogram_puts_everything_at_zero() {
        let zero = BandlimitedProcess::from_coefficients(vec![0.0; 5], -0.02, OMEGA0, default_support(), 1.0).unwrap();
        let h = estimate_amplitude_pdf(&[zero], 1e-4, 64).unwrap();
        let zero_bin = h.bin_of(0.0);
        assert_eq!(h.masses()[zero_bin], 1.0);
        assert!(estimate_amplitude_pdf(&[], 1e-4, 64).is_err());
    }

    #[test]
    fn pooled_amplitude_histogram_is_bell_shaped() {
        let ps: Vec<_> = (0..10)
            .map(|s| {
                generate_realization(s, OMEGA0, default_support(), AmplitudeLaw::GaussianCoefficients, 1.0).unwrap()
            })
            .collect();
        let h = estimate_amplitude_pdf(&ps, 1e-5, 32).unwrap();
        assert!((h.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let m = h.masses();
        let center = m[15] + m[16];
        let tails = m[0] + m[1] + m[30] + m[31];
        assert!(center > 5.0 * tails, "center {center} tails {tails}");
    }
}
