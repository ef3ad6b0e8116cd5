//! Closed time intervals and uniformly gridded waveforms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt;

/// A closed interval `[start, end]` with `start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(Error::invalid(format!(
                "interval endpoints must be finite, got [{start}, {end}]"
            )));
        }
        if !(start < end) {
            return Err(Error::invalid(format!("degenerate interval [{start}, {end}]")));
        }
        Ok(Interval { start, end })
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, x: f64) -> bool {
        self.start <= x && x <= self.end
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    /// Number of points of a grid with spacing `step` anchored at `start`
    /// that fall inside the interval.
    pub fn grid_len(&self, step: f64) -> Result<usize> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("grid step must be positive, got {step}")));
        }
        if step > self.len() {
            return Err(Error::invalid(format!(
                "grid step {step} exceeds the interval length {}",
                self.len()
            )));
        }
        let cells = (self.len() / step * (1.0 + 1e-12)).floor() as usize;
        Ok(cells + 1)
    }
}

/// Samples `values[i] = f(start + i * step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl Waveform {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !start.is_finite() {
            return Err(Error::invalid("waveform needs a finite start and a positive step"));
        }
        Ok(Waveform { start, step, values })
    }

    /// Samples `f` on the grid with spacing `step` covering `interval`.
    pub fn sample(interval: Interval, step: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = interval.grid_len(step)?;
        let values = (0..n).map(|i| f(interval.start + i as f64 * step)).collect();
        Ok(Waveform {
            start: interval.start,
            step,
            values,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.time(i), v))
    }

    pub fn peak_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Whether two waveforms live on the same grid.
    pub fn same_grid(&self, other: &Waveform) -> bool {
        self.len() == other.len()
            && (self.start - other.start).abs() <= 1e-12 * self.step
            && (self.step - other.step).abs() <= 1e-12 * self.step
    }

    /// Two-column CSV `time_s,amplitude`, six significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_s,amplitude")?;
        for (t, v) in self.iter() {
            writeln!(out, "{},{}", numfmt::sig(t, 6), numfmt::sig(v, 6))?;
        }
        out.flush()
    }
}
