//! Scalar quantizers: uniform, power-law compander and Lloyd–Max.
//!
//! A [`Codebook`] with `B = 2^bits` cells has boundaries
//! `b_0 < b_1 < ... < b_B` and levels `l_0 < ... < l_{B-1}` with
//! `b_i < l_i < b_{i+1}`. Cells are half-open, `[b_i, b_{i+1})`, the last one
//! closed, and inputs outside `[b_0, b_B]` are clamped to the end cells.
//!
//! Uniform and companded codebooks are stored implicitly (their boundaries
//! are computed on demand), so very fine resolutions cost no memory.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::waveform::Interval;

/// Finest resolution accepted by any designer.
pub const MAX_BITS: u32 = 30;
/// Finest resolution for codebooks that store their tables.
pub const MAX_EXPLICIT_BITS: u32 = 20;
/// Default exponent of the escort transform.
pub const DEFAULT_GAMMA: f64 = 0.1;
/// Relative floor applied to a density before it is raised to `γ`.
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-12;

/// Which designer produced a codebook.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "designer", rename_all = "kebab-case")]
pub enum Designer {
    Uniform,
    Compander { gamma: f64 },
    LloydMax,
}

#[derive(Debug, Clone)]
enum Table {
    Uniform { lo: f64, hi: f64 },
    Companded(Arc<Compander>),
    Explicit { boundaries: Vec<f64>, levels: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Codebook {
    bits: u32,
    designer: Designer,
    table: Table,
}

fn check_bits(bits: u32, max: u32) -> Result<usize> {
    if bits == 0 || bits > max {
        return Err(Error::invalid(format!("bits must be in 1..={max}, got {bits}")));
    }
    Ok(1usize << bits)
}

/// Equal-width cells over `support` with levels at the cell midpoints.
pub fn design_uniform(support: Interval, bits: u32) -> Result<Codebook> {
    check_bits(bits, MAX_BITS)?;
    Ok(Codebook {
        bits,
        designer: Designer::Uniform,
        table: Table::Uniform {
            lo: support.start,
            hi: support.end,
        },
    })
}

impl Codebook {
    /// Codebook from explicit tables; checks the interleaving invariant.
    pub fn from_tables(boundaries: Vec<f64>, levels: Vec<f64>, designer: Designer) -> Result<Self> {
        let cells = levels.len();
        if cells < 2 || !cells.is_power_of_two() || boundaries.len() != cells + 1 {
            return Err(Error::invalid(format!(
                "need 2^bits levels and one more boundary, got {} levels and {} boundaries",
                cells,
                boundaries.len()
            )));
        }
        if boundaries.iter().chain(&levels).any(|v| !v.is_finite()) {
            return Err(Error::invalid("codebook entries must be finite"));
        }
        for i in 0..cells {
            if !(boundaries[i] < levels[i] && levels[i] < boundaries[i + 1]) {
                return Err(Error::invalid(format!(
                    "level {i} = {} is not strictly inside [{}, {}]",
                    levels[i],
                    boundaries[i],
                    boundaries[i + 1]
                )));
            }
        }
        Ok(Codebook {
            bits: cells.trailing_zeros(),
            designer,
            table: Table::Explicit { boundaries, levels },
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn cells(&self) -> usize {
        1usize << self.bits
    }

    pub fn designer(&self) -> Designer {
        self.designer
    }

    pub fn support(&self) -> Interval {
        Interval {
            start: self.boundary(0),
            end: self.boundary(self.cells()),
        }
    }

    /// Boundary `i` for `i` in `0..=cells()`.
    pub fn boundary(&self, i: usize) -> f64 {
        let cells = self.cells();
        match &self.table {
            Table::Uniform { lo, hi } => {
                if i == cells {
                    *hi
                } else {
                    lo + (hi - lo) * (i as f64 / cells as f64)
                }
            }
            Table::Companded(g) => g.expand(i as f64 / cells as f64),
            Table::Explicit { boundaries, .. } => boundaries[i],
        }
    }

    /// Level `i` for `i` in `0..cells()`.
    pub fn level(&self, i: usize) -> f64 {
        let cells = self.cells() as f64;
        match &self.table {
            Table::Uniform { lo, hi } => lo + (hi - lo) * ((i as f64 + 0.5) / cells),
            Table::Companded(g) => g.expand((i as f64 + 0.5) / cells),
            Table::Explicit { levels, .. } => levels[i],
        }
    }

    /// All boundaries; allocates `2^bits + 1` values.
    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.cells()).map(|i| self.boundary(i)).collect()
    }

    /// All levels; allocates `2^bits` values.
    pub fn levels(&self) -> Vec<f64> {
        (0..self.cells()).map(|i| self.level(i)).collect()
    }

    /// Index of the cell containing `x` and its level.
    pub fn quantize(&self, x: f64) -> (usize, f64) {
        let index = self.index_of(x);
        (index, self.level(index))
    }

    fn index_of(&self, x: f64) -> usize {
        let cells = self.cells();
        match &self.table {
            Table::Explicit { boundaries, .. } => boundaries[1..cells].partition_point(|&b| b <= x),
            Table::Uniform { lo, hi } => {
                let guess = ((x - lo) / (hi - lo) * cells as f64).floor();
                let mut i = if guess.is_nan() {
                    0
                } else {
                    guess.clamp(0.0, (cells - 1) as f64) as usize
                };
                // settle ties against the boundary formula itself
                while i > 0 && x < self.boundary(i) {
                    i -= 1;
                }
                while i + 1 < cells && x >= self.boundary(i + 1) {
                    i += 1;
                }
                i
            }
            Table::Companded(_) => {
                // number of interior boundaries <= x
                let (mut lo, mut hi) = (1usize, cells);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if self.boundary(mid) <= x {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                lo - 1
            }
        }
    }

    pub fn quantize_sequence(&self, values: &[f64]) -> (Vec<usize>, Vec<f64>) {
        values.iter().map(|&x| self.quantize(x)).unzip()
    }

    pub fn to_record(&self) -> Result<CodebookRecord> {
        if self.bits > MAX_EXPLICIT_BITS {
            return Err(Error::invalid(format!(
                "refusing to serialize {} levels; at most {MAX_EXPLICIT_BITS} bits",
                self.cells()
            )));
        }
        let gamma = match self.designer {
            Designer::Compander { gamma } => Some(gamma),
            _ => None,
        };
        Ok(CodebookRecord {
            designer: self.designer,
            gamma,
            bits: self.bits,
            boundaries: self.boundaries(),
            levels: self.levels(),
        })
    }

    pub fn from_record(record: &CodebookRecord) -> Result<Self> {
        let cb = Codebook::from_tables(record.boundaries.clone(), record.levels.clone(), record.designer)?;
        if cb.bits != record.bits {
            return Err(Error::invalid(format!(
                "record says {} bits but holds {} levels",
                record.bits,
                record.levels.len()
            )));
        }
        Ok(cb)
    }
}

/// Serialized codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookRecord {
    #[serde(flatten)]
    pub designer: Designer,
    /// Repeated from the designer tag so flat readers see it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma: Option<f64>,
    pub bits: u32,
    pub boundaries: Vec<f64>,
    pub levels: Vec<f64>,
}

/// Escort exponent, base density and the relative floor applied before the
/// power.
#[derive(Debug, Clone)]
pub struct CompanderSpec {
    pub gamma: f64,
    pub density: Density,
    pub floor: f64,
}

impl CompanderSpec {
    pub fn new(gamma: f64, density: Density) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must be in (0, 1], got {gamma}")));
        }
        Ok(CompanderSpec {
            gamma,
            density,
            floor: DEFAULT_DENSITY_FLOOR,
        })
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }
}

/// The compressor `G(x) = ∫_{x_0}^{x} w / ∫ w` with escort weight
/// `w = max(p, floor · max p)^γ`, and its inverse.
#[derive(Debug, Clone)]
pub struct Compander {
    gamma: f64,
    weight: Density,
}

impl Compander {
    pub fn new(spec: &CompanderSpec) -> Result<Self> {
        if !(spec.gamma > 0.0 && spec.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must be in (0, 1], got {}", spec.gamma)));
        }
        if !(spec.floor >= 0.0) {
            return Err(Error::invalid("density floor must be non-negative"));
        }
        let peak = spec.density.max_value();
        if !(peak > 0.0) {
            return Err(Error::DegenerateDensity("base density is identically zero".into()));
        }
        let floor = spec.floor * peak;
        let xs = spec.density.nodes();
        let ws: Vec<f64> = spec
            .density
            .values()
            .iter()
            .map(|p| p.max(floor).powf(spec.gamma))
            .collect();
        for i in 1..xs.len() {
            if xs[i] > xs[i - 1] && ws[i] == 0.0 && ws[i - 1] == 0.0 {
                return Err(Error::DegenerateDensity(format!(
                    "density vanishes on [{}, {}]; the compressor is not invertible",
                    xs[i - 1],
                    xs[i]
                )));
            }
        }
        let weight = Density::tabulated(xs.to_vec(), ws)?;
        Ok(Compander {
            gamma: spec.gamma,
            weight,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn support(&self) -> Interval {
        self.weight.support()
    }

    /// `G(x)` in `[0, 1]`.
    pub fn compress(&self, x: f64) -> f64 {
        (self.weight.cdf(x) / self.weight.mass()).clamp(0.0, 1.0)
    }

    /// `G^{-1}(u)` for `u` in `[0, 1]`.
    pub fn expand(&self, u: f64) -> f64 {
        self.weight.inverse_cdf(u.clamp(0.0, 1.0) * self.weight.mass())
    }

    /// Uniform quantization of `G(x)` into `2^bits` cells, mapped back.
    pub fn codebook(self: &Arc<Self>, bits: u32) -> Result<Codebook> {
        check_bits(bits, MAX_BITS)?;
        Ok(Codebook {
            bits,
            designer: Designer::Compander { gamma: self.gamma },
            table: Table::Companded(Arc::clone(self)),
        })
    }
}

/// Boundaries at `G^{-1}(i/B)`, levels at `G^{-1}((i + ½)/B)`.
pub fn design_compander(spec: &CompanderSpec, bits: u32) -> Result<Codebook> {
    Arc::new(Compander::new(spec)?).codebook(bits)
}

/// Data a Lloyd–Max design is fitted to.
#[derive(Debug, Clone, Copy)]
pub enum TrainingSet<'a> {
    Samples(&'a [f64]),
    Density(&'a Density),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydMaxOptions {
    /// Stop once the relative distortion decrease falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LloydMaxOptions {
    fn default() -> Self {
        LloydMaxOptions {
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LloydMaxDesign {
    pub codebook: Codebook,
    /// Mean-squared error of the final codebook on the training set.
    pub distortion: f64,
    /// Distortion after each iteration, ending with the final codebook's.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-cell statistics of the training set: mass, centroid and the
/// second-moment function needed for distortion.
trait CellStats {
    fn support(&self) -> Interval;
    /// `(mass, centroid)` of `[a, b)`; centroid is `None` for empty cells.
    fn centroid(&self, a: f64, b: f64, last: bool) -> (f64, Option<f64>);
    /// `∫_[a,b) (x − level)² dP`, unnormalized.
    fn squared_error(&self, a: f64, b: f64, last: bool, level: f64) -> f64;
    fn total(&self) -> f64;
}

struct SampleStats {
    sorted: Vec<f64>,
    support: Interval,
}

impl SampleStats {
    fn range(&self, a: f64, b: f64, last: bool) -> &[f64] {
        let lo = self.sorted.partition_point(|&x| x < a);
        let hi = if last {
            self.sorted.len()
        } else {
            self.sorted.partition_point(|&x| x < b)
        };
        &self.sorted[lo..hi.max(lo)]
    }
}

impl CellStats for SampleStats {
    fn support(&self) -> Interval {
        self.support
    }

    fn centroid(&self, a: f64, b: f64, last: bool) -> (f64, Option<f64>) {
        let s = self.range(a, b, last);
        if s.is_empty() {
            return (0.0, None);
        }
        let mid = 0.5 * (a + b);
        let mean_offset = s.iter().map(|x| x - mid).sum::<f64>() / s.len() as f64;
        (s.len() as f64, Some(mid + mean_offset))
    }

    fn squared_error(&self, a: f64, b: f64, last: bool, level: f64) -> f64 {
        self.range(a, b, last).iter().map(|x| (x - level).powi(2)).sum()
    }

    fn total(&self) -> f64 {
        self.sorted.len() as f64
    }
}

struct DensityStats<'a> {
    density: &'a Density,
}

impl CellStats for DensityStats<'_> {
    fn support(&self) -> Interval {
        self.density.support()
    }

    fn centroid(&self, a: f64, b: f64, _last: bool) -> (f64, Option<f64>) {
        let mid = 0.5 * (a + b);
        let m = self.density.moments_about(a, b, mid);
        if m[0] <= 0.0 {
            return (0.0, None);
        }
        (m[0], Some(mid + m[1] / m[0]))
    }

    fn squared_error(&self, a: f64, b: f64, _last: bool, level: f64) -> f64 {
        let m = self.density.moments_about(a, b, level);
        m[2].max(0.0)
    }

    fn total(&self) -> f64 {
        self.density.mass()
    }
}

/// Lloyd–Max design: alternate nearest-neighbour boundaries (midpoints of
/// adjacent levels) and centroid levels, starting from the uniform codebook
/// on the training support.
///
/// In sample mode the support is the sample range widened by `1e-9` of its
/// length on each side so that an extreme sample never sits on an outer
/// boundary. A cell that receives no training mass keeps its previous level.
pub fn design_lloyd_max(training: TrainingSet<'_>, bits: u32, options: LloydMaxOptions) -> Result<LloydMaxDesign> {
    let cells = check_bits(bits, MAX_EXPLICIT_BITS)?;
    match training {
        TrainingSet::Samples(samples) => {
            let mut sorted: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
            sorted.sort_by(f64::total_cmp);
            let mut distinct = sorted.clone();
            distinct.dedup();
            if distinct.len() < cells {
                return Err(Error::invalid(format!(
                    "{} distinct samples cannot train {cells} levels",
                    distinct.len()
                )));
            }
            let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
            let pad = 1e-9 * (hi - lo);
            let support = Interval::new(lo - pad, hi + pad)?;
            lloyd(&SampleStats { sorted, support }, cells, options)
        }
        TrainingSet::Density(density) => {
            if !(density.mass() > 0.0) {
                return Err(Error::DegenerateDensity("training density has zero mass".into()));
            }
            lloyd(&DensityStats { density }, cells, options)
        }
    }
}

fn midpoints(support: Interval, levels: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(levels.len() + 1);
    b.push(support.start);
    b.extend(levels.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    b.push(support.end);
    b
}

fn distortion(stats: &dyn CellStats, boundaries: &[f64], levels: &[f64]) -> f64 {
    let n = levels.len();
    let total: f64 = (0..n)
        .map(|i| stats.squared_error(boundaries[i], boundaries[i + 1], i + 1 == n, levels[i]))
        .sum();
    total / stats.total()
}

fn lloyd(stats: &dyn CellStats, cells: usize, options: LloydMaxOptions) -> Result<LloydMaxDesign> {
    let support = stats.support();
    let width = support.len() / cells as f64;
    let mut levels: Vec<f64> = (0..cells).map(|i| support.start + width * (i as f64 + 0.5)).collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let boundaries = midpoints(support, &levels);
        for i in 0..cells {
            let (_, centroid) = stats.centroid(boundaries[i], boundaries[i + 1], i + 1 == cells);
            if let Some(c) = centroid {
                levels[i] = c;
            }
        }
        let d = distortion(stats, &boundaries, &levels);
        let previous = history.last().copied();
        history.push(d);
        if let Some(prev) = previous {
            if d == 0.0 || (prev - d) <= options.tolerance * d {
                converged = true;
                break;
            }
        }
    }
    let boundaries = midpoints(support, &levels);
    let final_distortion = distortion(stats, &boundaries, &levels);
    history.push(final_distortion);
    let codebook = Codebook::from_tables(boundaries, levels, Designer::LloydMax)
        .map_err(|e| Error::NumericalFailure(format!("Lloyd–Max produced an invalid codebook: {e}")))?;
    Ok(LloydMaxDesign {
        codebook,
        distortion: final_distortion,
        history,
        iterations,
        converged,
    })
}
