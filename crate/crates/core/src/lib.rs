//! Quantized time encoding of bandlimited signals.
//!
//! The pipeline runs [`signal`] → [`tem`] → [`quant`] → [`recon`]:
//! draw a bounded bandlimited realization, encode it with an
//! integrate-and-fire machine, quantize the firing intervals (and, for the
//! non-uniform sampling baseline, the amplitudes), and reconstruct.
//! [`intervals`] predicts the interval distribution from the amplitude
//! distribution, and [`experiments`] runs seeded sweeps over all of it.
//!
//! ```
//! use temq::experiments::{Branch, ExperimentConfig, Pipeline};
//!
//! let cfg = ExperimentConfig { n_train: 2, ..Default::default() };
//! let pipeline = Pipeline::prepare(&cfg)?;
//! let nmse = pipeline.run(Branch::TemNuq, 8, 3)?;
//! assert!(nmse < -40.0);
//! # Ok::<(), temq::Error>(())
//! ```

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod experiments;
pub mod intervals;
pub mod numfmt;
pub mod quant;
pub mod recon;
pub mod signal;
pub mod tem;
pub mod waveform;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/signals.md")]
    struct Signals;
    #[doc = include_str!("../../../book/src/encoding.md")]
    struct Encoding;
    #[doc = include_str!("../../../book/src/intervals.md")]
    struct Intervals;
    #[doc = include_str!("../../../book/src/quantizers.md")]
    struct Quantizers;
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    struct Reconstruction;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
