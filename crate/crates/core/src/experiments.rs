//! Seeded end-to-end runs, rate–distortion sweeps and the interval
//! distribution check.
//!
//! Realization `i` of a run with master seed `s` uses seed `s + i`. Codebooks
//! are designed on a separate training pool whose seeds start at
//! `s + TRAIN_SEED_OFFSET`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Density, Histogram, HistogramAccumulator};
use crate::error::{Error, Result};
use crate::intervals::{distribution_divergence, induced_interval_pdf};
use crate::numfmt::sig;
use crate::quant::{
    design_lloyd_max, design_uniform, Codebook, Compander, CompanderSpec, LloydMaxOptions, TrainingSet,
};
use crate::recon::{measurements_from_sequence, nmse_db, reconstruct_nus, reconstruct_tem, ReconstructionConfig};
use crate::signal::{generate_realization, AmplitudeLaw, BandlimitedProcess};
use crate::tem::{encode_samples, interval_bounds, FiringSequence, TemParams, MAX_ENCODER_STEP};
use crate::waveform::{Interval, Waveform};

/// Seed offset separating the training pool from evaluation realizations.
pub const TRAIN_SEED_OFFSET: u64 = 1_000_000;

/// Header of the rate–distortion CSV.
pub const SWEEP_CSV_HEADER: &str = "branch,bits,total_bits,nmse_db,nmse_stderr,n,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeQuantizer {
    Uniform,
    Compander,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeQuantizer {
    Uniform,
    LloydMax,
}

/// Where non-uniform codebooks get their statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodebookSource {
    /// Intervals: the induced density of the pooled amplitude histogram.
    /// Amplitudes: the pooled amplitude histogram.
    TheoreticalDensity,
    /// Intervals: the histogram of pooled intervals. Amplitudes: the pooled
    /// samples taken at the firing instants.
    EmpiricalPool,
}

/// How quantized intervals are turned back into instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalCoding {
    /// The encoder quantizes `t_{n+1} − t̂_n`, the gap from the last
    /// reconstructed instant, so timing errors do not accumulate.
    Tracking,
    /// The encoder quantizes `T_n` directly; the decoder's sum drifts.
    OpenLoop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub omega0: f64,
    pub support: [f64; 2],
    pub c: f64,
    pub b: f64,
    pub kappa: f64,
    pub delta: f64,
    pub gamma: f64,
    pub bits: Vec<u32>,
    pub n_realizations: usize,
    pub seed: u64,
    pub grid_step: f64,
    pub n_bins: usize,
    pub edge_trim: f64,
    pub tem_quantizer: TimeQuantizer,
    pub nus_time_quantizer: TimeQuantizer,
    pub nus_amplitude_quantizer: AmplitudeQuantizer,
    pub codebook_source: CodebookSource,
    pub n_train: usize,
    pub amplitude_law: AmplitudeLaw,
    pub interval_coding: IntervalCoding,
    pub output_grid_step: f64,
    pub regularization: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            omega0: 2.0 * std::f64::consts::PI * 50.0,
            support: [-0.45, 0.45],
            c: 1.0,
            b: 1.2,
            kappa: 1.0,
            delta: 0.0015,
            gamma: 0.1,
            bits: (3..=12).collect(),
            n_realizations: 100,
            seed: 1,
            grid_step: 1e-6,
            n_bins: 64,
            edge_trim: 0.1,
            tem_quantizer: TimeQuantizer::Compander,
            nus_time_quantizer: TimeQuantizer::Compander,
            nus_amplitude_quantizer: AmplitudeQuantizer::LloydMax,
            codebook_source: CodebookSource::EmpiricalPool,
            n_train: 20,
            amplitude_law: AmplitudeLaw::GaussianCoefficients,
            interval_coding: IntervalCoding::Tracking,
            output_grid_step: 1e-4,
            regularization: 1e-8,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses flat TOML; missing keys take their defaults, unknown keys fail.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega0", self.omega0),
            ("c", self.c),
            ("kappa", self.kappa),
            ("delta", self.delta),
            ("grid_step", self.grid_step),
            ("output_grid_step", self.output_grid_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.support[0] < self.support[1]) || !self.support.iter().all(|v| v.is_finite()) {
            return Err(config_err(format!(
                "support must be an increasing pair, got {:?}",
                self.support
            )));
        }
        if !(self.b > self.c) {
            return Err(config_err(format!(
                "bias b={} must exceed the amplitude bound c={}",
                self.b, self.c
            )));
        }
        let t_max = self.kappa * self.delta / (self.b - self.c);
        let nyquist = std::f64::consts::PI / self.omega0;
        if !(t_max < nyquist) {
            return Err(config_err(format!(
                "largest interval κΔ/(b−c) = {t_max:.6e} s is not below the Nyquist period {nyquist:.6e} s"
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(config_err(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if self.bits.is_empty() {
            return Err(config_err("bits list is empty"));
        }
        if let Some(b) = self.bits.iter().find(|b| **b == 0 || **b > crate::quant::MAX_BITS) {
            return Err(config_err(format!(
                "bits must be in 1..={}, got {b}",
                crate::quant::MAX_BITS
            )));
        }
        if self.n_realizations == 0 || self.n_train == 0 {
            return Err(config_err("n_realizations and n_train must be positive"));
        }
        if self.grid_step > MAX_ENCODER_STEP {
            return Err(config_err(format!(
                "grid_step must be at most {MAX_ENCODER_STEP}, got {}",
                self.grid_step
            )));
        }
        if self.n_bins < 2 {
            return Err(config_err("n_bins must be at least 2"));
        }
        if !(0.0..0.5).contains(&self.edge_trim) {
            return Err(config_err(format!(
                "edge_trim must be in [0, 0.5), got {}",
                self.edge_trim
            )));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(config_err("regularization must be non-negative"));
        }
        Ok(())
    }

    pub fn support_interval(&self) -> Interval {
        Interval {
            start: self.support[0],
            end: self.support[1],
        }
    }

    pub fn tem_params(&self) -> Result<TemParams> {
        TemParams::new(self.b, self.kappa, self.delta)
    }

    pub fn reconstruction(&self) -> ReconstructionConfig {
        ReconstructionConfig {
            omega0: self.omega0,
            regularization: self.regularization,
            output_grid_step: self.output_grid_step,
            edge_trim_fraction: self.edge_trim,
        }
    }

    /// `[κΔ/(b+c), κΔ/(b−c)]`.
    pub fn interval_range(&self) -> Result<Interval> {
        let (lo, hi) = interval_bounds(&self.tem_params()?, self.c)?;
        Interval::new(lo, hi)
    }

    /// Seed of evaluation realization `index`.
    pub fn realization_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    pub fn training_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(TRAIN_SEED_OFFSET + index as u64)
    }

    pub fn realization(&self, seed: u64) -> Result<BandlimitedProcess> {
        generate_realization(seed, self.omega0, self.support_interval(), self.amplitude_law, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    TemUq,
    TemNuq,
    NusUq,
    NusNuq,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::TemUq, Branch::TemNuq, Branch::NusUq, Branch::NusNuq];

    pub fn tag(self) -> &'static str {
        match self {
            Branch::TemUq => "tem-uq",
            Branch::TemNuq => "tem-nuq",
            Branch::NusUq => "nus-uq",
            Branch::NusNuq => "nus-nuq",
        }
    }

    pub fn is_nus(self) -> bool {
        matches!(self, Branch::NusUq | Branch::NusNuq)
    }

    /// Bits sent per event: `B` for a time encoding, `2B` for amplitude–time pairs.
    pub fn total_bits(self, bits: u32) -> u32 {
        if self.is_nus() {
            2 * bits
        } else {
            bits
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL.into_iter().find(|b| b.tag() == s).ok_or_else(|| {
            Error::invalid(format!(
                "unknown branch {s:?}; expected tem-uq, tem-nuq, nus-uq or nus-nuq"
            ))
        })
    }
}

/// Quantizes the intervals of `sequence` and returns the decoded sequence.
/// The first instant is kept exact.
pub fn quantize_firing_sequence(
    sequence: &FiringSequence,
    codebook: &Codebook,
    coding: IntervalCoding,
) -> FiringSequence {
    let intervals = match coding {
        IntervalCoding::OpenLoop => sequence.intervals.iter().map(|t| codebook.quantize(*t).1).collect(),
        IntervalCoding::Tracking => {
            let instants = sequence.instants();
            let mut decoded = sequence.first_instant;
            let mut out = Vec::with_capacity(sequence.len());
            for t in &instants[1..] {
                let q = codebook.quantize(t - decoded).1;
                decoded += q;
                out.push(q);
            }
            out
        }
    };
    FiringSequence {
        first_instant: sequence.first_instant,
        intervals,
    }
}

/// One encoded realization with everything the branches need.
#[derive(Debug, Clone)]
pub struct EncodedRealization {
    pub seed: u64,
    pub process: BandlimitedProcess,
    pub sequence: FiringSequence,
    /// Signal values at the firing instants.
    pub event_amplitudes: Vec<f64>,
    /// Ground truth on the output grid.
    pub truth: Waveform,
}

/// Statistics pooled over the training realizations.
#[derive(Debug, Clone)]
pub struct TrainingPool {
    pub intervals: Vec<f64>,
    pub event_amplitudes: Vec<f64>,
    pub amplitude_histogram: Histogram,
}

/// Codebooks used by one branch at one resolution.
#[derive(Debug, Clone)]
pub struct BranchCodebooks {
    pub time: Codebook,
    pub amplitude: Option<Codebook>,
}

/// Configuration plus the trained statistics shared by every run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: ExperimentConfig,
    params: TemParams,
    pool: TrainingPool,
    compander: Arc<Compander>,
}

impl Pipeline {
    /// Encodes the training pool and builds the interval compander.
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let pool = train(config)?;
        let compander = build_compander(config, &pool, config.gamma)?;
        Ok(Pipeline {
            config: config.clone(),
            params: config.tem_params()?,
            pool,
            compander,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn pool(&self) -> &TrainingPool {
        &self.pool
    }

    pub fn compander(&self) -> &Arc<Compander> {
        &self.compander
    }

    /// Same pool, compander rebuilt for another `γ`.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut config = self.config.clone();
        config.gamma = gamma;
        config.validate()?;
        Ok(Pipeline {
            compander: build_compander(&config, &self.pool, gamma)?,
            config,
            params: self.params,
            pool: self.pool.clone(),
        })
    }

    fn time_codebook(&self, kind: TimeQuantizer, bits: u32) -> Result<Codebook> {
        match kind {
            TimeQuantizer::Uniform => design_uniform(self.config.interval_range()?, bits),
            TimeQuantizer::Compander => self.compander.codebook(bits),
        }
    }

    fn amplitude_codebook(&self, kind: AmplitudeQuantizer, bits: u32) -> Result<Codebook> {
        let c = self.config.c;
        match kind {
            AmplitudeQuantizer::Uniform => design_uniform(Interval::new(-c, c)?, bits),
            AmplitudeQuantizer::LloydMax => {
                let options = LloydMaxOptions::default();
                let design = match self.config.codebook_source {
                    CodebookSource::EmpiricalPool => {
                        design_lloyd_max(TrainingSet::Samples(&self.pool.event_amplitudes), bits, options)?
                    }
                    CodebookSource::TheoreticalDensity => {
                        let d = Density::from_histogram(&self.pool.amplitude_histogram);
                        design_lloyd_max(TrainingSet::Density(&d), bits, options)?
                    }
                };
                Ok(design.codebook)
            }
        }
    }

    pub fn codebooks(&self, branch: Branch, bits: u32) -> Result<BranchCodebooks> {
        let cfg = &self.config;
        let (time, amplitude) = match branch {
            Branch::TemUq => (self.time_codebook(TimeQuantizer::Uniform, bits)?, None),
            Branch::TemNuq => (self.time_codebook(cfg.tem_quantizer, bits)?, None),
            Branch::NusUq => (
                self.time_codebook(TimeQuantizer::Uniform, bits)?,
                Some(self.amplitude_codebook(AmplitudeQuantizer::Uniform, bits)?),
            ),
            Branch::NusNuq => (
                self.time_codebook(cfg.nus_time_quantizer, bits)?,
                Some(self.amplitude_codebook(cfg.nus_amplitude_quantizer, bits)?),
            ),
        };
        Ok(BranchCodebooks { time, amplitude })
    }

    /// Generates and encodes evaluation realization `seed`.
    pub fn encode(&self, seed: u64) -> Result<EncodedRealization> {
        let cfg = &self.config;
        let process = cfg.realization(seed)?;
        let samples = process.evaluate_grid(cfg.grid_step)?;
        let sequence = encode_samples(&samples, &self.params, cfg.c)?;
        drop(samples);
        let event_amplitudes = sequence.instants().iter().map(|t| process.evaluate(*t)).collect();
        let truth = process.evaluate_grid(cfg.output_grid_step)?;
        Ok(EncodedRealization {
            seed,
            process,
            sequence,
            event_amplitudes,
            truth,
        })
    }

    /// Reconstruction from the exact firing sequence.
    pub fn reconstruct_unquantized(&self, enc: &EncodedRealization) -> Result<Waveform> {
        let meas = measurements_from_sequence(&enc.sequence, &self.params)?;
        reconstruct_tem(&meas, &self.config.reconstruction(), self.config.support_interval())
    }

    /// Quantizes, decodes and reconstructs one branch.
    pub fn reconstruct(&self, enc: &EncodedRealization, branch: Branch, books: &BranchCodebooks) -> Result<Waveform> {
        let cfg = &self.config;
        let decoded = quantize_firing_sequence(&enc.sequence, &books.time, cfg.interval_coding);
        let recon = cfg.reconstruction();
        if branch.is_nus() {
            let amp_book = books
                .amplitude
                .as_ref()
                .ok_or_else(|| Error::invalid("NUS branch needs an amplitude codebook"))?;
            let (_, amplitudes) = amp_book.quantize_sequence(&enc.event_amplitudes);
            reconstruct_nus(&decoded.instants(), &amplitudes, &recon, cfg.support_interval())
        } else {
            let meas = measurements_from_sequence(&decoded, &self.params)?;
            reconstruct_tem(&meas, &recon, cfg.support_interval())
        }
    }

    pub fn nmse(&self, enc: &EncodedRealization, estimate: &Waveform) -> Result<f64> {
        nmse_db(&enc.truth, estimate, self.config.edge_trim)
    }

    /// NMSE of one branch on one realization.
    pub fn run(&self, branch: Branch, bits: u32, seed: u64) -> Result<f64> {
        let context = format!("{branch} bits={bits} seed={seed}");
        let run = || -> Result<f64> {
            let books = self.codebooks(branch, bits)?;
            let enc = self.encode(seed)?;
            let est = self.reconstruct(&enc, branch, &books)?;
            self.nmse(&enc, &est)
        };
        run().map_err(|e| e.in_stage(context))
    }

    /// NMSE of the unquantized time-encoding round trip.
    pub fn run_unquantized(&self, seed: u64) -> Result<f64> {
        let run = || -> Result<f64> {
            let enc = self.encode(seed)?;
            let est = self.reconstruct_unquantized(&enc)?;
            self.nmse(&enc, &est)
        };
        run().map_err(|e| e.in_stage(format!("unquantized seed={seed}")))
    }

    /// Full factorial over branches and the configured bits.
    pub fn sweep(&self) -> Result<Vec<RateDistortionRecord>> {
        let cfg = &self.config;
        let mut books = Vec::new();
        for branch in Branch::ALL {
            for &bits in &cfg.bits {
                let b = self
                    .codebooks(branch, bits)
                    .map_err(|e| e.in_stage(format!("{branch} bits={bits} codebook")))?;
                books.push((branch, bits, b));
            }
        }
        let per_realization: Vec<Vec<f64>> = (0..cfg.n_realizations)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.realization_seed(i);
                let enc = self
                    .encode(seed)
                    .map_err(|e| e.in_stage(format!("encode seed={seed}")))?;
                books
                    .iter()
                    .map(|(branch, bits, b)| {
                        self.reconstruct(&enc, *branch, b)
                            .and_then(|est| self.nmse(&enc, &est))
                            .map_err(|e| e.in_stage(format!("{branch} bits={bits} seed={seed}")))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut records: Vec<RateDistortionRecord> = books
            .iter()
            .enumerate()
            .map(|(j, (branch, bits, _))| {
                let values: Vec<f64> = per_realization.iter().map(|r| r[j]).collect();
                let (mean, stderr) = mean_and_stderr(&values);
                RateDistortionRecord {
                    branch: *branch,
                    bits: *bits,
                    total_bits: branch.total_bits(*bits),
                    nmse_db: mean,
                    nmse_stderr: stderr,
                    n: values.len(),
                    seed: cfg.seed,
                }
            })
            .collect();
        records.sort_by_key(|r| (r.branch, r.bits));
        Ok(records)
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn train(config: &ExperimentConfig) -> Result<TrainingPool> {
    let params = config.tem_params()?;
    let c = config.c;
    let parts: Vec<(Vec<f64>, Vec<f64>, HistogramAccumulator)> = (0..config.n_train)
        .into_par_iter()
        .map(|i| {
            let seed = config.training_seed(i);
            let run = || -> Result<_> {
                let process = config.realization(seed)?;
                let samples = process.evaluate_grid(config.grid_step)?;
                let seq = encode_samples(&samples, &params, c)?;
                let mut acc = HistogramAccumulator::new(Interval::new(-c, c)?, config.n_bins)?;
                acc.extend(samples.into_values());
                let amps = seq.instants().iter().map(|t| process.evaluate(*t)).collect();
                Ok((seq.intervals, amps, acc))
            };
            run().map_err(|e: Error| e.in_stage(format!("training seed={seed}")))
        })
        .collect::<Result<_>>()?;
    let mut intervals = Vec::new();
    let mut event_amplitudes = Vec::new();
    let mut acc = HistogramAccumulator::new(Interval::new(-c, c)?, config.n_bins)?;
    for (t, a, h) in parts {
        intervals.extend(t);
        event_amplitudes.extend(a);
        acc.merge(&h);
    }
    Ok(TrainingPool {
        intervals,
        event_amplitudes,
        amplitude_histogram: acc.finish()?,
    })
}

fn build_compander(config: &ExperimentConfig, pool: &TrainingPool, gamma: f64) -> Result<Arc<Compander>> {
    let params = config.tem_params()?;
    let density = match config.codebook_source {
        CodebookSource::EmpiricalPool => {
            let h = Histogram::from_samples(&pool.intervals, config.interval_range()?, config.n_bins)?;
            Density::from_histogram(&h)
        }
        CodebookSource::TheoreticalDensity => {
            let pf = Density::from_histogram(&pool.amplitude_histogram);
            induced_interval_pdf(&pf, &params, config.c)?
        }
    };
    Ok(Arc::new(Compander::new(&CompanderSpec::new(gamma, density)?)?))
}

/// NMSE of one end-to-end run, training included.
pub fn run_pipeline(config: &ExperimentConfig, branch: Branch, bits: u32, seed: u64) -> Result<f64> {
    Pipeline::prepare(config)?.run(branch, bits, seed)
}

/// Mean NMSE per branch and resolution over the configured realizations.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<RateDistortionRecord>> {
    Pipeline::prepare(config)?.sweep()
}

/// Result of sweeping the compander exponent.
#[derive(Debug, Clone)]
pub struct GammaSweep {
    /// `(γ, records)` for each candidate.
    pub runs: Vec<(f64, Vec<RateDistortionRecord>)>,
    /// Candidate with the lowest time-encoding NUQ error averaged over bits.
    pub best_gamma: f64,
}

/// Default candidates for [`run_gamma_sweep`].
pub const GAMMA_CANDIDATES: [f64; 4] = [0.05, 0.1, 0.2, 0.5];

pub fn run_gamma_sweep(config: &ExperimentConfig, gammas: &[f64]) -> Result<GammaSweep> {
    if gammas.is_empty() {
        return Err(Error::invalid("no gamma candidates"));
    }
    let base = Pipeline::prepare(config)?;
    let mut runs = Vec::with_capacity(gammas.len());
    for &g in gammas {
        runs.push((g, base.with_gamma(g)?.sweep()?));
    }
    let score = |records: &[RateDistortionRecord]| {
        let v: Vec<f64> = records
            .iter()
            .filter(|r| r.branch == Branch::TemNuq)
            .map(|r| r.nmse_db)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let best_gamma = runs
        .iter()
        .min_by(|a, b| score(&a.1).total_cmp(&score(&b.1)))
        .map(|r| r.0)
        .expect("at least one candidate");
    Ok(GammaSweep { runs, best_gamma })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDistortionRecord {
    pub branch: Branch,
    pub bits: u32,
    pub total_bits: u32,
    pub nmse_db: f64,
    pub nmse_stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl RateDistortionRecord {
    /// The record as it reads back from CSV.
    pub fn rounded(&self) -> Self {
        RateDistortionRecord {
            nmse_db: crate::numfmt::round_sig(self.nmse_db, 6),
            nmse_stderr: crate::numfmt::round_sig(self.nmse_stderr, 6),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(format!(
                "unknown format {other:?}; expected csv or json"
            ))),
        }
    }
}

pub fn write_records<W: Write>(
    records: &[RateDistortionRecord],
    format: OutputFormat,
    mut out: W,
) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "{SWEEP_CSV_HEADER}")?;
            for r in records {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.branch,
                    r.bits,
                    r.total_bits,
                    sig(r.nmse_db, 6),
                    sig(r.nmse_stderr, 6),
                    r.n,
                    r.seed
                )?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, records)?;
            writeln!(out)?;
        }
    }
    out.flush()
}

/// Writes `records` to `path`.
pub fn emit(records: &[RateDistortionRecord], path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(records, format, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Reads records written by [`write_records`] in CSV form.
pub fn parse_records_csv<R: Read>(input: R) -> Result<Vec<RateDistortionRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::invalid(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != SWEEP_CSV_HEADER {
        return Err(Error::invalid(format!("unexpected header {:?}", header.join(","))));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::invalid(e.to_string())))
        .collect()
}

/// Empirical interval histogram against the induced density.
#[derive(Debug, Clone)]
pub struct DistributionReport {
    pub total_variation: f64,
    pub histogram: Histogram,
    pub density: Density,
    /// Mass of the induced density; 1 up to discretization.
    pub certificate: f64,
    pub amplitude_histogram: Histogram,
    /// Total variation against the induced density of the amplitude
    /// histogram weighted by the firing rate `(f + b)/κΔ`.
    pub rate_weighted_total_variation: f64,
    pub n_intervals: u64,
}

impl DistributionReport {
    pub fn write_histogram_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.histogram.write_csv(out)
    }

    pub fn write_density_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.density.write_csv(out, "interval_s")
    }
}

/// Pools `n_realizations` encodings and compares the interval histogram with
/// the density induced by the pooled amplitude histogram.
pub fn run_distribution_check(config: &ExperimentConfig) -> Result<DistributionReport> {
    config.validate()?;
    let params = config.tem_params()?;
    let c = config.c;
    let amp_range = Interval::new(-c, c)?;
    let t_range = config.interval_range()?;
    let parts: Vec<(HistogramAccumulator, Vec<f64>, HistogramAccumulator)> = (0..config.n_realizations)
        .into_par_iter()
        .map(|i| {
            let seed = config.realization_seed(i);
            let run = || -> Result<_> {
                let process = config.realization(seed)?;
                let samples = process.evaluate_grid(config.grid_step)?;
                let seq = encode_samples(&samples, &params, c)?;
                let mut amps = HistogramAccumulator::new(amp_range, config.n_bins)?;
                amps.extend(samples.values().iter().copied());
                let mut rate = vec![0.0; config.n_bins];
                let tmp = Histogram::from_samples(&[0.0], amp_range, config.n_bins)?;
                for v in samples.values() {
                    rate[tmp.bin_of(*v)] += v + params.bias;
                }
                let mut ts = HistogramAccumulator::new(t_range, config.n_bins)?;
                ts.extend(seq.intervals.iter().copied());
                Ok((amps, rate, ts))
            };
            run().map_err(|e: Error| e.in_stage(format!("distribution seed={seed}")))
        })
        .collect::<Result<_>>()?;
    let mut amps = HistogramAccumulator::new(amp_range, config.n_bins)?;
    let mut ts = HistogramAccumulator::new(t_range, config.n_bins)?;
    let mut rate = vec![0.0; config.n_bins];
    for (a, r, t) in &parts {
        amps.merge(a);
        ts.merge(t);
        rate.iter_mut().zip(r).for_each(|(x, y)| *x += y);
    }
    let amplitude_histogram = amps.finish()?;
    let histogram = ts.finish()?;
    let density = induced_interval_pdf(&Density::from_histogram(&amplitude_histogram), &params, c)?;
    let total_variation = distribution_divergence(&histogram, &density)?;
    let weighted = Histogram::from_weights(
        amplitude_histogram.edges().to_vec(),
        rate,
        amplitude_histogram.n_samples(),
    )?;
    let weighted_density = induced_interval_pdf(&Density::from_histogram(&weighted), &params, c)?;
    let rate_weighted_total_variation = distribution_divergence(&histogram, &weighted_density)?;
    Ok(DistributionReport {
        total_variation,
        certificate: density.mass(),
        n_intervals: histogram.n_samples(),
        histogram,
        density,
        amplitude_histogram,
        rate_weighted_total_variation,
    })
}

/// Per-branch NMSE values keyed by bits, for callers that want the raw
/// curve rather than records.
pub fn curves(records: &[RateDistortionRecord]) -> BTreeMap<Branch, Vec<(u32, f64)>> {
    let mut out: BTreeMap<Branch, Vec<(u32, f64)>> = BTreeMap::new();
    for r in records {
        out.entry(r.branch).or_default().push((r.bits, r.nmse_db));
    }
    for v in out.values_mut() {
        v.sort_by_key(|p| p.0);
    }
    out
}

/// Smallest bits value whose mean NMSE is at or below `threshold_db`.
pub fn first_crossing(records: &[RateDistortionRecord], branch: Branch, threshold_db: f64) -> Option<u32> {
    curves(records)
        .get(&branch)?
        .iter()
        .find(|(_, v)| *v <= threshold_db)
        .map(|(b, _)| *b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n_realizations: 2,
            n_train: 4,
            bits: vec![4, 8],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let r = c.interval_range().unwrap();
        assert!((r.start - 0.0015 / 2.2).abs() < 1e-18);
        assert!((r.end - 0.0075).abs() < 1e-16);
    }

    #[test]
    fn config_parsing() {
        let c = ExperimentConfig::from_toml_str("seed = 7\nbits = [4, 5]\ngamma = 0.2\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.bits, vec![4, 5]);
        assert_eq!(c.b, 1.2);
        let unknown = ExperimentConfig::from_toml_str("sed = 7\n");
        assert!(matches!(unknown, Err(Error::Config(_))));
        let weak_bias = ExperimentConfig::from_toml_str("b = 0.9\n");
        assert!(matches!(weak_bias, Err(Error::Config(_))));
        // κΔ/(b−c) = 0.015 > π/Ω0 = 0.01
        let slow = ExperimentConfig::from_toml_str("delta = 0.003\n");
        assert!(matches!(slow, Err(Error::Config(_))));
        let enums = ExperimentConfig::from_toml_str(
            "tem_quantizer = \"uniform\"\nnus_amplitude_quantizer = \"lloyd-max\"\ncodebook_source = \"theoretical-density\"\ninterval_coding = \"open-loop\"\n",
        )
        .unwrap();
        assert_eq!(enums.tem_quantizer, TimeQuantizer::Uniform);
        assert_eq!(enums.interval_coding, IntervalCoding::OpenLoop);
        assert!(
            ExperimentConfig::from_file("/nonexistent/config.toml")
                .unwrap_err()
                .exit_code()
                == 4
        );
    }

    #[test]
    fn branch_tags_and_bit_accounting() {
        for b in Branch::ALL {
            assert_eq!(b.tag().parse::<Branch>().unwrap(), b);
            assert_eq!(b.total_bits(5), if b.is_nus() { 10 } else { 5 });
        }
        assert!("tem".parse::<Branch>().is_err());
    }

    #[test]
    fn tracking_decoder_stays_within_half_a_cell() {
        let seq = FiringSequence {
            first_instant: 0.0,
            intervals: vec![0.0011, 0.0023, 0.0012, 0.0047, 0.0031],
        };
        let cb = design_uniform(Interval::new(0.0015 / 2.2, 0.0075).unwrap(), 4).unwrap();
        let half = 0.5 * (0.0075 - 0.0015 / 2.2) / 16.0;
        let tracked = quantize_firing_sequence(&seq, &cb, IntervalCoding::Tracking);
        for (a, b) in tracked.instants().iter().zip(seq.instants()) {
            assert!((a - b).abs() <= half + 1e-15);
        }
        let open = quantize_firing_sequence(&seq, &cb, IntervalCoding::OpenLoop);
        for (q, t) in open.intervals.iter().zip(&seq.intervals) {
            assert!((q - t).abs() <= half + 1e-15);
        }
    }

    #[test]
    fn empty_and_single_record_csv() {
        let mut out = Vec::new();
        write_records(&[], OutputFormat::Csv, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{SWEEP_CSV_HEADER}\n"));
        let rec = RateDistortionRecord {
            branch: Branch::NusNuq,
            bits: 4,
            total_bits: 8,
            nmse_db: -23.951234567,
            nmse_stderr: 0.123456789,
            n: 100,
            seed: 1,
        };
        let mut out = Vec::new();
        write_records(std::slice::from_ref(&rec), OutputFormat::Csv, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "nus-nuq,4,8,-23.9512,0.123457,100,1");
        let back = parse_records_csv(text.as_bytes()).unwrap();
        assert_eq!(back, vec![rec.rounded()]);
    }

    #[test]
    fn small_sweep_is_deterministic_and_sorted() {
        let cfg = small();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        for w in a.windows(2) {
            assert!((w[0].branch, w[0].bits) < (w[1].branch, w[1].bits));
        }
        for r in &a {
            assert_eq!(r.total_bits, r.branch.total_bits(r.bits));
            assert_eq!(r.n, 2);
        }
    }

    #[test]
    fn single_pipeline_run_matches_the_sweep_entry() {
        let cfg = ExperimentConfig {
            n_realizations: 1,
            bits: vec![6],
            ..small()
        };
        let records = run_sweep(&cfg).unwrap();
        let direct = run_pipeline(&cfg, Branch::TemNuq, 6, cfg.realization_seed(0)).unwrap();
        let rec = records.iter().find(|r| r.branch == Branch::TemNuq).unwrap();
        assert_eq!(rec.nmse_db, direct);
    }
}
