//! Distribution of firing intervals.
//!
//! Over one interval the encoder sees `T = κΔ / (f̄ + b)`, where `f̄` is the
//! mean of the signal over that interval. Treating `f̄` as distributed like
//! the amplitude `F` gives the change of variables
//!
//! ```text
//! P_T(T) = P_F(κΔ/T − b) · κΔ/T²,   κΔ/(b+c) ≤ T ≤ κΔ/(b−c),
//! ```
//!
//! and zero elsewhere. [`induced_interval_pdf`] evaluates this map on a node
//! table, [`empirical_interval_histogram`] pools observed intervals, and
//! [`distribution_divergence`] measures how far the two are apart.

use crate::density::{Density, Histogram, HistogramAccumulator, DEFAULT_TABLE_POINTS};
use crate::error::{Error, Result};
use crate::tem::{interval_bounds, FiringSequence, TemParams};
use crate::waveform::Interval;

/// Histogram bins used when none are specified.
pub const DEFAULT_BINS: usize = 64;

/// Interval density induced by the amplitude density `amplitude` on `[-c, c]`.
///
/// Each amplitude node `x` maps to `T = κΔ/(x + b)` with value
/// `p(x) κΔ/T²`; cells are subdivided so that the table has at least
/// [`DEFAULT_TABLE_POINTS`] nodes. Because the nodes are images of amplitude
/// nodes, jumps in a piecewise-constant amplitude density stay jumps. If the
/// amplitude support is narrower than `[-c, c]`, the result is padded with
/// zeros out to the full interval range.
pub fn induced_interval_pdf(amplitude: &Density, params: &TemParams, c: f64) -> Result<Density> {
    let (t_min, t_max) = interval_bounds(params, c)?;
    let support = amplitude.support();
    let tol = 1e-12 * c.max(1.0);
    if support.start < -c - tol || support.end > c + tol {
        return Err(Error::invalid(format!(
            "amplitude density on [{}, {}] has mass outside [-{c}, {c}]",
            support.start, support.end
        )));
    }
    let q = params.charge();
    let b = params.bias;

    let xs = amplitude.nodes();
    let ps = amplitude.values();
    let positive_cells = xs.windows(2).filter(|w| w[1] > w[0]).count().max(1);
    let per_cell = DEFAULT_TABLE_POINTS.div_ceil(positive_cells).max(1);

    // Amplitude-side nodes in increasing order, refined.
    let mut fx = Vec::with_capacity(positive_cells * per_cell + 2);
    let mut fp = Vec::with_capacity(positive_cells * per_cell + 2);
    fx.push(xs[0].max(-c));
    fp.push(ps[0]);
    for j in 0..xs.len() - 1 {
        let (x0, x1) = (xs[j], xs[j + 1]);
        if x1 > x0 {
            for s in 1..per_cell {
                let u = s as f64 / per_cell as f64;
                fx.push(x0 + u * (x1 - x0));
                fp.push(ps[j] + u * (ps[j + 1] - ps[j]));
            }
        }
        fx.push(x1.clamp(-c, c));
        fp.push(ps[j + 1]);
    }

    // Map to the interval axis; decreasing x gives increasing T.
    let mut tx = Vec::with_capacity(fx.len() + 4);
    let mut tp = Vec::with_capacity(fx.len() + 4);
    let hi_edge = q / (fx[fx.len() - 1] + b);
    if hi_edge > t_min {
        tx.extend([t_min, hi_edge]);
        tp.extend([0.0, 0.0]);
    }
    for (x, p) in fx.iter().zip(&fp).rev() {
        let t = q / (x + b);
        tx.push(t);
        tp.push(p * q / (t * t));
    }
    let lo_edge = q / (fx[0] + b);
    if lo_edge < t_max {
        tx.extend([lo_edge, t_max]);
        tp.extend([0.0, 0.0]);
    }
    // Mapped endpoints can differ from the bounds in the last ulp.
    tx[0] = tx[0].min(t_min);
    let last = tx.len() - 1;
    tx[last] = tx[last].max(t_max);
    for i in 1..tx.len() {
        if tx[i] < tx[i - 1] {
            tx[i] = tx[i - 1];
        }
    }
    Density::tabulated(tx, tp)
}

/// Pools the intervals of all sequences into `n_bins` equal bins over
/// `[κΔ/(b+c), κΔ/(b−c)]`.
pub fn empirical_interval_histogram(
    sequences: &[FiringSequence],
    params: &TemParams,
    c: f64,
    n_bins: usize,
) -> Result<Histogram> {
    let (lo, hi) = interval_bounds(params, c)?;
    let range = if hi > lo {
        Interval::new(lo, hi)?
    } else {
        // c = 0 collapses the support to a point; keep a one-ulp-wide window.
        Interval::new(lo * (1.0 - 1e-9), hi * (1.0 + 1e-9))?
    };
    let mut acc = HistogramAccumulator::new(range, n_bins)?;
    for s in sequences {
        acc.extend(s.intervals.iter().copied());
    }
    if acc.count() == 0 {
        return Err(Error::invalid("no intervals to histogram"));
    }
    acc.finish()
}

/// Total-variation distance `½ Σ_bins |m_j − ∫_bin p|`, plus half the
/// density mass that falls outside the histogram range.
pub fn distribution_divergence(hist: &Histogram, density: &Density) -> Result<f64> {
    let range = hist.range();
    let support = density.support();
    if support.end <= range.start || support.start >= range.end {
        return Err(Error::invalid(format!(
            "histogram [{}, {}] and density [{}, {}] do not overlap",
            range.start, range.end, support.start, support.end
        )));
    }
    let mut tv = 0.0;
    let mut inside = 0.0;
    for (w, m) in hist.edges().windows(2).zip(hist.masses()) {
        let p = density.integral(w[0], w[1]);
        inside += p;
        tv += (m - p).abs();
    }
    tv += (density.mass() - inside).max(0.0);
    Ok((0.5 * tv).clamp(0.0, 1.0))
}
