//! Reconstruction from time encodings and from non-uniform samples.
//!
//! Both reconstructions fit a sinc series `f̂(t) = Σ_k c_k sinc(Ω0 (t − s_k))`
//! by ridge-regularized least squares. For a time encoding the anchors are
//! the interval midpoints and the data are the interval integrals
//! `q_n = κΔ − b T_n`; for non-uniform samples the anchors are the sample
//! times and the data are the amplitudes.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::signal::sinc;
use crate::tem::{FiringSequence, TemParams};
use crate::waveform::{Interval, Waveform};

/// Floor reported by [`nmse_db`] for an exact reconstruction.
pub const NMSE_FLOOR_DB: f64 = -300.0;

// 8-point Gauss–Legendre rule on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Firing instants and the signal integral over each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TemMeasurements {
    /// `t̂_1, ..., t̂_{N+1}`.
    pub instants: Vec<f64>,
    /// `q_n = κΔ − b T̂_n`, one per interval.
    pub integrals: Vec<f64>,
}

impl TemMeasurements {
    pub fn len(&self) -> usize {
        self.integrals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.integrals.is_empty()
    }
}

/// Solves the firing condition for `∫ f` over each interval.
pub fn measurements_from_sequence(sequence: &FiringSequence, params: &TemParams) -> Result<TemMeasurements> {
    if let Some((n, t)) = sequence.intervals.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
        return Err(Error::invalid(format!("interval {n} is not positive: {t}")));
    }
    let q = params.charge();
    Ok(TemMeasurements {
        instants: sequence.instants(),
        integrals: sequence.intervals.iter().map(|t| q - params.bias * t).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionConfig {
    pub omega0: f64,
    /// Ridge parameter relative to the largest diagonal entry of the normal matrix.
    pub regularization: f64,
    pub output_grid_step: f64,
    /// Fraction of the grid dropped at each end when computing NMSE.
    pub edge_trim_fraction: f64,
}

impl ReconstructionConfig {
    pub fn new(omega0: f64) -> Self {
        ReconstructionConfig {
            omega0,
            regularization: 1e-8,
            output_grid_step: 1e-4,
            edge_trim_fraction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::invalid(format!("omega0 must be positive, got {}", self.omega0)));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::invalid("regularization must be non-negative"));
        }
        if !(self.output_grid_step > 0.0) {
            return Err(Error::invalid("output grid step must be positive"));
        }
        if !(0.0..0.5).contains(&self.edge_trim_fraction) {
            return Err(Error::invalid("edge trim fraction must be in [0, 0.5)"));
        }
        Ok(())
    }
}

/// `Σ_k c_k sinc(Ω0 (t − s_k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SincSeries {
    pub anchors: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub omega0: f64,
}

impl SincSeries {
    pub fn evaluate(&self, t: f64) -> f64 {
        self.anchors
            .iter()
            .zip(&self.coefficients)
            .map(|(s, c)| c * sinc(self.omega0 * (t - s)))
            .sum()
    }

    /// Samples the series on `support` with spacing `step`.
    pub fn sample(&self, support: Interval, step: f64) -> Result<Waveform> {
        let n = support.grid_len(step)?;
        let basis = SincBasis::new(&self.anchors, self.omega0);
        let values = (0..n)
            .map(|i| {
                let t = support.start + i as f64 * step;
                let (st, ct) = (self.omega0 * t).sin_cos();
                (0..self.anchors.len())
                    .map(|k| self.coefficients[k] * basis.value(k, t, st, ct))
                    .sum()
            })
            .collect();
        Waveform::new(support.start, step, values)
    }
}

/// Sinc atoms with the anchor phases precomputed, so that
/// `sin(Ω0 (t − s)) = sin(Ω0 t) cos(Ω0 s) − cos(Ω0 t) sin(Ω0 s)` costs one
/// multiply-add per atom once `sin(Ω0 t)` and `cos(Ω0 t)` are known.
struct SincBasis<'a> {
    anchors: &'a [f64],
    sin: Vec<f64>,
    cos: Vec<f64>,
    omega0: f64,
}

impl<'a> SincBasis<'a> {
    fn new(anchors: &'a [f64], omega0: f64) -> Self {
        let (sin, cos) = anchors.iter().map(|s| (omega0 * s).sin_cos()).unzip();
        SincBasis {
            anchors,
            sin,
            cos,
            omega0,
        }
    }

    #[inline]
    fn value(&self, k: usize, t: f64, sin_t: f64, cos_t: f64) -> f64 {
        let x = self.omega0 * (t - self.anchors[k]);
        if x.abs() < 0.5 {
            sinc(x)
        } else {
            (sin_t * self.cos[k] - cos_t * self.sin[k]) / x
        }
    }
}

fn check_gaps(times: &[f64], omega0: f64) -> Result<()> {
    let nyquist = PI / omega0;
    let mut max_gap: f64 = 0.0;
    for w in times.windows(2) {
        let gap = w[1] - w[0];
        if !(gap > 0.0) {
            return Err(Error::invalid(format!(
                "times must be strictly increasing near {}",
                w[0]
            )));
        }
        max_gap = max_gap.max(gap);
    }
    if max_gap >= nyquist {
        return Err(Error::NyquistViolated { max_gap, nyquist });
    }
    Ok(())
}

/// Ridge solve of `min ‖A c − y‖² + λ‖c‖²` through the normal equations,
/// with `λ = regularization · max diag(AᵀA)`.
fn ridge_solve(a: &Mat<f64>, y: &[f64], regularization: f64) -> Result<Vec<f64>> {
    let rhs_in = Mat::from_fn(y.len(), 1, |i, _| y[i]);
    let mut gram = a.transpose() * a;
    let rhs = a.transpose() * &rhs_in;
    let n = gram.nrows();
    let peak = (0..n).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return if y.iter().all(|v| *v == 0.0) {
            Ok(vec![0.0; n])
        } else {
            Err(Error::NumericalFailure("system matrix is zero".into()))
        };
    }
    let lambda = regularization * peak;
    for i in 0..n {
        gram[(i, i)] += lambda;
    }
    let llt = gram
        .llt(Side::Lower)
        .map_err(|e| Error::NumericalFailure(format!("Cholesky factorization failed: {e:?}")))?;
    let c = llt.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| c[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite coefficients".into()));
    }
    Ok(out)
}

/// Fits the integral model to a time encoding.
///
/// `M[n,k] = ∫_{t̂_n}^{t̂_{n+1}} sinc(Ω0 (t − s_k)) dt` is evaluated with an
/// 8-point Gauss–Legendre rule per interval, which is exact to rounding for
/// intervals this short relative to the band.
pub fn fit_tem(meas: &TemMeasurements, config: &ReconstructionConfig) -> Result<SincSeries> {
    config.validate()?;
    let n = meas.len();
    if n < 2 || meas.instants.len() != n + 1 {
        return Err(Error::invalid(format!(
            "need at least 2 intervals and one more instant than integrals, got {} and {}",
            n,
            meas.instants.len()
        )));
    }
    check_gaps(&meas.instants, config.omega0)?;
    let anchors: Vec<f64> = meas.instants.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let basis = SincBasis::new(&anchors, config.omega0);
    let mut m = Mat::<f64>::zeros(n, n);
    for row in 0..n {
        let (a, b) = (meas.instants[row], meas.instants[row + 1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let t = mid + half * node;
            let (st, ct) = (config.omega0 * t).sin_cos();
            let w = weight * half;
            for k in 0..n {
                m[(row, k)] += w * basis.value(k, t, st, ct);
            }
        }
    }
    let coefficients = ridge_solve(&m, &meas.integrals, config.regularization)?;
    Ok(SincSeries {
        anchors,
        coefficients,
        omega0: config.omega0,
    })
}

/// Reconstructs a time-encoded signal on `support` at the output grid.
pub fn reconstruct_tem(meas: &TemMeasurements, config: &ReconstructionConfig, support: Interval) -> Result<Waveform> {
    fit_tem(meas, config)?.sample(support, config.output_grid_step)
}

/// Fits the interpolation model `Φ c = a` with `Φ[n,k] = sinc(Ω0 (t_n − t_k))`.
pub fn fit_nus(times: &[f64], amplitudes: &[f64], config: &ReconstructionConfig) -> Result<SincSeries> {
    config.validate()?;
    if times.is_empty() || times.len() != amplitudes.len() {
        return Err(Error::invalid(format!(
            "need matching non-empty times and amplitudes, got {} and {}",
            times.len(),
            amplitudes.len()
        )));
    }
    check_gaps(times, config.omega0)?;
    let n = times.len();
    let basis = SincBasis::new(times, config.omega0);
    let phases: Vec<(f64, f64)> = times.iter().map(|t| (config.omega0 * t).sin_cos()).collect();
    let phi = Mat::from_fn(n, n, |i, k| basis.value(k, times[i], phases[i].0, phases[i].1));
    let coefficients = ridge_solve(&phi, amplitudes, config.regularization)?;
    Ok(SincSeries {
        anchors: times.to_vec(),
        coefficients,
        omega0: config.omega0,
    })
}

/// Reconstructs from non-uniform samples on `support` at the output grid.
pub fn reconstruct_nus(
    times: &[f64],
    amplitudes: &[f64],
    config: &ReconstructionConfig,
    support: Interval,
) -> Result<Waveform> {
    fit_nus(times, amplitudes, config)?.sample(support, config.output_grid_step)
}

/// `10 log10(Σ (f − f̂)² / Σ f²)` over the grid with `edge_trim_fraction`
/// of the points dropped at each end. An exact match reports
/// [`NMSE_FLOOR_DB`].
pub fn nmse_db(reference: &Waveform, estimate: &Waveform, edge_trim_fraction: f64) -> Result<f64> {
    if !reference.same_grid(estimate) {
        return Err(Error::invalid("reference and estimate are on different grids"));
    }
    if !(0.0..0.5).contains(&edge_trim_fraction) {
        return Err(Error::invalid("edge trim fraction must be in [0, 0.5)"));
    }
    let n = reference.len();
    let trim = (n as f64 * edge_trim_fraction).floor() as usize;
    let range = trim..n - trim;
    let (f, g) = (&reference.values()[range.clone()], &estimate.values()[range]);
    let energy: f64 = f.iter().map(|v| v * v).sum();
    if !(energy > 0.0) {
        return Err(Error::UndefinedNmse);
    }
    let error: f64 = f.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum();
    if error == 0.0 {
        return Ok(NMSE_FLOOR_DB);
    }
    Ok((10.0 * (error / energy).log10()).max(NMSE_FLOOR_DB))
}
