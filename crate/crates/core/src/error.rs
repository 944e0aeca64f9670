use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SounderError> = std::result::Result<T, E>;

/// Coarse category of a failure, used to pick CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Simulation,
    Analysis,
    Io,
}

#[derive(Debug, Error)]
pub enum SounderError {
    #[error("LFSR state is all zeros")]
    DegenerateState,

    #[error("invalid LFSR specification: {0}")]
    InvalidLfsr(String),

    #[error("feedback taps {taps:?} are not primitive for order {order}: period {period}, expected {expected}")]
    NonPrimitive {
        order: u32,
        taps: Vec<u32>,
        period: u64,
        expected: u64,
    },

    #[error("{samples_per_chip} samples per chip aliases the chip waveform (need at least 2)")]
    Aliasing { samples_per_chip: usize },

    #[error("trigger shift of {samples} samples is not a whole number of samples")]
    TriggerQuantization { samples: f64 },

    #[error("filter cutoff {cutoff} Hz outside (0, {nyquist}) Hz")]
    CutoffOutOfRange { cutoff: f64, nyquist: f64 },

    #[error("path delay of {delay_samples} samples is beyond the unambiguous range of {period_samples} samples")]
    DelayAmbiguity {
        delay_samples: usize,
        period_samples: usize,
    },

    #[error("TX and RX chip rates are equal; slide factor is undefined")]
    ZeroOffset,

    #[error("invalid correlator configuration: {0}")]
    InvalidCorrelator(String),

    #[error("input too short: need {needed} samples, got {got}")]
    InsufficientInput { needed: usize, got: usize },

    #[error("power delay profiles have mismatched delay axes")]
    MismatchedAxes,

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no detectable signal")]
    NoSignal,

    #[error("sweep step of {0} deg does not divide 360")]
    InvalidStep(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("result bundle has no {0}")]
    AbsentProduct(String),

    #[error("operation cancelled")]
    Cancelled,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<SounderError>,
    },
}

impl SounderError {
    pub fn class(&self) -> ErrorClass {
        use SounderError::*;
        match self {
            InvalidLfsr(_)
            | NonPrimitive { .. }
            | Aliasing { .. }
            | TriggerQuantization { .. }
            | CutoffOutOfRange { .. }
            | ZeroOffset
            | InvalidCorrelator(_)
            | InvalidStep(_)
            | InvalidParameter(_)
            | Config { .. } => ErrorClass::Config,
            DegenerateState | DelayAmbiguity { .. } | InsufficientInput { .. } | Cancelled => ErrorClass::Simulation,
            MismatchedAxes | IllConditioned(_) | InsufficientData(_) | NoSignal | AbsentProduct(_) => {
                ErrorClass::Analysis
            }
            Io { .. } | Csv(_) | Json(_) => ErrorClass::Io,
            Context { source, .. } => source.class(),
        }
    }

    /// Wraps the error with location context (RX id, angle, file, ...).
    pub fn context(self, context: impl Into<String>) -> Self {
        SounderError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SounderError::Io {
            path: path.into(),
            source,
        }
    }
}
