//! Numerical kernels shared by the sensor pipelines.

mod butterworth;
mod lomb;
mod median;
mod spline;

pub use butterworth::{butterworth_filter, Butterworth, FilterKind, FilterSpec, Sos};
pub use lomb::{lomb_scargle, lomb_scargle_default, PsdEstimate, LS_F_HI, LS_F_LO, LS_N_FREQS};
pub use median::median_filter;
pub use spline::{spline_resample, QuadraticSpline};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("signal too short: need at least {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("invalid filter settings: {0}")]
    InvalidSpec(String),
    #[error("empty signal")]
    EmptySignal,
    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("sample times must be finite and strictly increasing")]
    InvalidTimes,
}
