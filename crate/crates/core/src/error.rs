use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operands are defined on different time grids")]
    GridMismatch,

    #[error(
        "waveform truncated beyond tolerance: {lost:.3e} of the intensity lies outside the grid"
    )]
    WaveformTruncated { lost: f64 },

    #[error("photon count {0} exceeds the two-photon truncation")]
    TooManyPhotons(u8),

    #[error("photon wavepackets partially overlap ({offset_ns} ns apart); only full overlap or full separation is modelled")]
    PartialOverlap { offset_ns: f64 },

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("fit did not converge: {0}")]
    FitFailed(String),

    #[error("bad timestamp file: {0}")]
    Format(String),

    #[error("timestamp record {position} is out of order")]
    OutOfOrder { position: u64 },

    #[error("config `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Checks that `value` is a probability.
pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{value} is not in [0, 1]")))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("{value} must be positive and finite"),
        ))
    }
}
