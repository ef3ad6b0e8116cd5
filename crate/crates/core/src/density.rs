//! Histograms and tabulated probability densities.
//!
//! A [`Density`] is a piecewise-linear function on a node table. Nodes may be
//! repeated once to encode a jump, so the same representation covers smooth
//! tabulations (closed-form laws sampled on a grid) and piecewise-constant
//! densities built from histograms. Every integral below is exact for the
//! interpolant, which makes bin masses, CDFs and moments mutually consistent.

use std::io::Write;

use crate::error::{Error, Result};
use crate::numfmt;
use crate::waveform::Interval;

/// Default number of nodes used when tabulating a closed-form density.
pub const DEFAULT_TABLE_POINTS: usize = 4096;

/// A normalized histogram over equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    masses: Vec<f64>,
    n_samples: u64,
}

impl Histogram {
    /// Bins `samples` into `n_bins` equal cells over `range`. Samples outside
    /// the range are clamped into the end bins; non-finite samples are skipped.
    pub fn from_samples(samples: &[f64], range: Interval, n_bins: usize) -> Result<Self> {
        let mut acc = HistogramAccumulator::new(range, n_bins)?;
        acc.extend(samples.iter().copied());
        acc.finish()
    }

    /// Builds a histogram from explicit edges and (unnormalized) weights.
    pub fn from_weights(edges: Vec<f64>, weights: Vec<f64>, n_samples: u64) -> Result<Self> {
        if edges.len() < 3 || edges.len() != weights.len() + 1 {
            return Err(Error::invalid(
                "histogram needs at least two bins and one weight per bin",
            ));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("histogram edges must be finite and strictly increasing"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("histogram weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("histogram has no mass"));
        }
        let masses = weights.iter().map(|w| w / total).collect();
        Ok(Histogram {
            edges,
            masses,
            n_samples,
        })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Probability mass per bin; sums to one.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn n_bins(&self) -> usize {
        self.masses.len()
    }

    pub fn range(&self) -> Interval {
        Interval {
            start: self.edges[0],
            end: self.edges[self.edges.len() - 1],
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Mass divided by bin width.
    pub fn heights(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .zip(&self.masses)
            .map(|(w, m)| m / (w[1] - w[0]))
            .collect()
    }

    /// Index of the bin holding `x` (half-open bins, last bin closed, clamped).
    pub fn bin_of(&self, x: f64) -> usize {
        let i = self.edges.partition_point(|&e| e <= x);
        i.saturating_sub(1).min(self.n_bins() - 1)
    }

    /// CSV `bin_lo,bin_hi,mass,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,mass,density")?;
        for ((w, m), h) in self.edges.windows(2).zip(&self.masses).zip(self.heights()) {
            writeln!(
                out,
                "{},{},{},{}",
                numfmt::sig(w[0], 6),
                numfmt::sig(w[1], 6),
                numfmt::sig(*m, 6),
                numfmt::sig(h, 6)
            )?;
        }
        out.flush()
    }
}

/// Streaming counter behind [`Histogram::from_samples`]; lets callers pool
/// samples from many sources without holding them all in memory.
#[derive(Debug, Clone)]
pub struct HistogramAccumulator {
    range: Interval,
    counts: Vec<u64>,
    n: u64,
}

impl HistogramAccumulator {
    pub fn new(range: Interval, n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::invalid(format!("need at least 2 bins, got {n_bins}")));
        }
        Ok(HistogramAccumulator {
            range,
            counts: vec![0; n_bins],
            n: 0,
        })
    }

    pub fn push(&mut self, x: f64) {
        if !x.is_finite() {
            return;
        }
        let bins = self.counts.len();
        let u = (x - self.range.start) / self.range.len() * bins as f64;
        let i = if u <= 0.0 {
            0
        } else {
            (u.floor() as usize).min(bins - 1)
        };
        self.counts[i] += 1;
        self.n += 1;
    }

    pub fn extend(&mut self, xs: impl IntoIterator<Item = f64>) {
        for x in xs {
            self.push(x);
        }
    }

    pub fn merge(&mut self, other: &HistogramAccumulator) {
        assert_eq!(
            self.counts.len(),
            other.counts.len(),
            "merging histograms with different bins"
        );
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn finish(self) -> Result<Histogram> {
        if self.n == 0 {
            return Err(Error::invalid("histogram received no samples"));
        }
        let bins = self.counts.len();
        let edges = (0..=bins)
            .map(|i| self.range.start + self.range.len() * i as f64 / bins as f64)
            .collect();
        let masses = self.counts.iter().map(|&c| c as f64 / self.n as f64).collect();
        Ok(Histogram {
            edges,
            masses,
            n_samples: self.n,
        })
    }
}

/// Piecewise-linear density on a node table; zero outside its support.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    xs: Vec<f64>,
    ps: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Density {
    /// Builds a density from nodes `xs` (non-decreasing; a repeated node is a
    /// jump) and non-negative values `ps`. The table is not renormalized; its
    /// integral is available as [`Density::mass`].
    pub fn tabulated(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ps.len() {
            return Err(Error::invalid(
                "density table needs at least two nodes and one value per node",
            ));
        }
        if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("density nodes must be finite and non-decreasing"));
        }
        if !(xs[0] < xs[xs.len() - 1]) {
            return Err(Error::invalid("density support is degenerate"));
        }
        if ps.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("density values must be finite and non-negative"));
        }
        let mut cumulative = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 1..xs.len() {
            acc += 0.5 * (xs[i] - xs[i - 1]) * (ps[i] + ps[i - 1]);
            cumulative.push(acc);
        }
        Ok(Density { xs, ps, cumulative })
    }

    /// Tabulates `f` on `n_points` equally spaced nodes over `support`.
    pub fn from_fn(support: Interval, n_points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::invalid("need at least two nodes"));
        }
        let last = (n_points - 1) as f64;
        let xs: Vec<f64> = (0..n_points)
            .map(|i| support.start + support.len() * i as f64 / last)
            .collect();
        let ps = xs.iter().map(|&x| f(x)).collect();
        Density::tabulated(xs, ps)
    }

    pub fn uniform(support: Interval) -> Self {
        let h = 1.0 / support.len();
        Density::tabulated(vec![support.start, support.end], vec![h, h]).expect("valid uniform table")
    }

    /// Zero-mean Gaussian of scale `sigma` truncated to `[-bound, bound]`,
    /// tabulated on [`DEFAULT_TABLE_POINTS`] nodes and normalized.
    pub fn truncated_gaussian(sigma: f64, bound: f64) -> Result<Self> {
        if !(sigma > 0.0 && bound > 0.0) {
            return Err(Error::invalid("truncated Gaussian needs positive sigma and bound"));
        }
        let support = Interval::new(-bound, bound)?;
        let d = Density::from_fn(support, DEFAULT_TABLE_POINTS, |x| (-0.5 * (x / sigma).powi(2)).exp())?;
        d.normalized()
    }

    /// Piecewise-constant density whose bin masses equal the histogram's.
    pub fn from_histogram(h: &Histogram) -> Self {
        let heights = h.heights();
        let mut xs = Vec::with_capacity(2 * h.n_bins());
        let mut ps = Vec::with_capacity(2 * h.n_bins());
        for (w, p) in h.edges().windows(2).zip(heights) {
            xs.extend([w[0], w[1]]);
            ps.extend([p, p]);
        }
        Density::tabulated(xs, ps).expect("histogram edges are valid nodes")
    }

    /// Same shape scaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::DegenerateDensity("density has zero mass".into()));
        }
        Density::tabulated(self.xs.clone(), self.ps.iter().map(|p| p / m).collect())
    }

    pub fn support(&self) -> Interval {
        Interval {
            start: self.xs[0],
            end: self.xs[self.xs.len() - 1],
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ps
    }

    pub fn max_value(&self) -> f64 {
        self.ps.iter().fold(0.0_f64, |m, &p| m.max(p))
    }

    /// Integral over the support: the normalization certificate.
    pub fn mass(&self) -> f64 {
        self.cumulative[self.cumulative.len() - 1]
    }

    /// Pointwise value; right-continuous at jumps, zero outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if !(x >= self.xs[0] && x <= self.xs[n - 1]) {
            return 0.0;
        }
        let i = self.xs.partition_point(|&v| v <= x);
        if i == n {
            return self.ps[n - 1];
        }
        let j = i - 1;
        self.lerp(j, x)
    }

    fn lerp(&self, j: usize, x: f64) -> f64 {
        let w = self.xs[j + 1] - self.xs[j];
        if w <= 0.0 {
            return self.ps[j + 1];
        }
        let u = (x - self.xs[j]) / w;
        self.ps[j] + u * (self.ps[j + 1] - self.ps[j])
    }

    /// `∫_{start}^{x} p`.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return self.mass();
        }
        let j = self.xs.partition_point(|&v| v <= x) - 1;
        let h = x - self.xs[j];
        self.cumulative[j] + 0.5 * h * (self.ps[j] + self.lerp(j, x))
    }

    /// Smallest `x` with `cdf(x) = target`, for `0 <= target <= mass()`.
    /// Exact for the piecewise-linear interpolant.
    pub fn inverse_cdf(&self, target: f64) -> f64 {
        let n = self.xs.len();
        if target <= 0.0 {
            return self.xs[0];
        }
        if target >= self.mass() {
            return self.xs[n - 1];
        }
        let i = self.cumulative.partition_point(|&c| c < target);
        let j = i - 1;
        let width = self.xs[i] - self.xs[j];
        let rest = target - self.cumulative[j];
        let slope = (self.ps[i] - self.ps[j]) / width;
        let p0 = self.ps[j];
        // solve p0 h + slope h²/2 = rest in the cancellation-free form
        let disc = (p0 * p0 + 2.0 * slope * rest).max(0.0);
        let denom = p0 + disc.sqrt();
        let h = if denom > 0.0 { 2.0 * rest / denom } else { 0.0 };
        self.xs[j] + h.clamp(0.0, width)
    }

    /// `∫_a^b p` for `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.cdf(b) - self.cdf(a)
    }

    /// Moments `∫_a^b (x - center)^k p(x) dx` for `k = 0, 1, 2`, exact for
    /// the piecewise-linear interpolant.
    pub fn moments_about(&self, a: f64, b: f64, center: f64) -> [f64; 3] {
        let mut m = [0.0; 3];
        if !(b > a) {
            return m;
        }
        let n = self.xs.len();
        let mut j = self.xs.partition_point(|&v| v <= a).saturating_sub(1);
        while j + 1 < n && self.xs[j] < b {
            let (x0, x1) = (self.xs[j], self.xs[j + 1]);
            let w = x1 - x0;
            let lo = a.max(x0);
            let hi = b.min(x1);
            if w > 0.0 && hi > lo {
                let slope = (self.ps[j + 1] - self.ps[j]) / w;
                let alpha = self.ps[j] + slope * (center - x0);
                let (va, vb) = (lo - center, hi - center);
                let mut pa = va;
                let mut pb = vb;
                for (k, mk) in m.iter_mut().enumerate() {
                    let kf = k as f64;
                    let next_a = pa * va;
                    let next_b = pb * vb;
                    *mk += alpha * (pb - pa) / (kf + 1.0) + slope * (next_b - next_a) / (kf + 2.0);
                    pa = next_a;
                    pb = next_b;
                }
            }
            j += 1;
        }
        m
    }

    /// CSV `x,density` over the node table.
    pub fn write_csv<W: Write>(&self, mut out: W, x_label: &str) -> std::io::Result<()> {
        writeln!(out, "{x_label},density")?;
        for (x, p) in self.xs.iter().zip(&self.ps) {
            writeln!(out, "{},{}", numfmt::sig(*x, 6), numfmt::sig(*p, 6))?;
        }
        out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn histogram_masses_sum_to_one_and_clamp() {
        let h = Histogram::from_samples(&[-5.0, 0.1, 0.5, 0.99, 1.0, 7.0], unit(), 4).unwrap();
        assert_eq!(h.masses(), &[2.0 / 6.0, 0.0, 1.0 / 6.0, 3.0 / 6.0]);
        assert!((h.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(h.bin_of(0.5), 2);
        assert_eq!(h.bin_of(1.0), 3);
    }

    #[test]
    fn empty_or_single_bin_histograms_are_rejected() {
        assert!(Histogram::from_samples(&[], unit(), 4).is_err());
        assert!(Histogram::from_samples(&[0.5], unit(), 1).is_err());
    }

    #[test]
    fn piecewise_constant_density_reproduces_bin_masses() {
        let h = Histogram::from_samples(&[0.1, 0.2, 0.3, 0.6, 0.9, 0.95], unit(), 5).unwrap();
        let d = Density::from_histogram(&h);
        for (w, m) in h.edges().windows(2).zip(h.masses()) {
            assert!((d.integral(w[0], w[1]) - m).abs() < 1e-15);
        }
        assert!((d.mass() - 1.0).abs() < 1e-15);
        // right-continuous at the jump between bins 0 and 1
        assert_eq!(d.eval(0.2), h.heights()[1]);
        assert_eq!(d.eval(-0.1), 0.0);
    }

    #[test]
    fn cdf_of_a_linear_ramp() {
        let d = Density::tabulated(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert!((d.cdf(0.5) - 0.25).abs() < 1e-15);
        assert!((d.inverse_cdf(0.25) - 0.5).abs() < 1e-15);
        assert_eq!(d.inverse_cdf(0.0), 0.0);
        assert_eq!(d.inverse_cdf(2.0), 1.0);
        assert!((d.mass() - 1.0).abs() < 1e-15);
        let m = d.moments_about(0.0, 1.0, 0.0);
        assert!((m[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((m[2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn moments_do_not_depend_on_the_center() {
        let d = Density::truncated_gaussian(0.3, 1.0).unwrap();
        let about0 = d.moments_about(-0.2, 0.7, 0.0);
        let about_half = d.moments_about(-0.2, 0.7, 0.5);
        assert!((about0[0] - about_half[0]).abs() < 1e-13);
        // first moment about 0.5 = m1 - 0.5 m0
        assert!((about_half[1] - (about0[1] - 0.5 * about0[0])).abs() < 1e-13);
        assert!((d.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_cdf_skips_jumps_and_flat_regions() {
        let d = Density::tabulated(
            vec![0.0, 1.0, 1.0, 2.0, 3.0, 3.0, 4.0],
            vec![1.0, 1.0, 0.0, 0.0, 0.0, 2.0, 2.0],
        )
        .unwrap();
        assert!((d.mass() - 3.0).abs() < 1e-15);
        assert!((d.inverse_cdf(0.5) - 0.5).abs() < 1e-15);
        assert!((d.inverse_cdf(2.0) - 3.5).abs() < 1e-15);
        for k in 1..30 {
            let r = 3.0 * k as f64 / 30.0;
            assert!((d.cdf(d.inverse_cdf(r)) - r).abs() < 1e-14);
        }
    }

    #[test]
    fn table_validation() {
        assert!(Density::tabulated(vec![0.0], vec![1.0]).is_err());
        assert!(Density::tabulated(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Density::tabulated(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(Density::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }
}
