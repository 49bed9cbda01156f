//! Wavelet-leader multifractal analysis of one-dimensional time series.
//!
//! The analysis chain runs from a [`TimeSeries`] through a Daubechies
//! discrete wavelet transform ([`dwt`]), wavelet leaders ([`leaders`]),
//! structure functions, scaling exponents, log-cumulants and the Legendre
//! singularity spectrum ([`wlmfa`]). Around it sit block-bootstrap
//! confidence intervals ([`bootstrap`]), shuffle and IAAFT surrogate
//! ensembles ([`surrogate`]), MFDFA as an independent cross-check
//! ([`mfdfa`]), classical diagnostics ([`diagnostics`]) and synthetic
//! signals with known exponents ([`synth`]). [`pipeline`] wires everything
//! into a reproducible JSON report.

pub mod bootstrap;
pub mod diagnostics;
pub mod dwt;
pub mod error;
pub mod ingest;
pub mod leaders;
pub mod mfdfa;
pub mod pipeline;
pub mod regression;
pub mod spectral;
pub mod surrogate;
pub mod synth;
pub mod wlmfa;

pub use error::{Error, Result};
pub use ingest::{Source, SummaryStats, TimeSeries};
