use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no potential well between {lo:.6e} m and {hi:.6e} m")]
    NoWell { lo: f64, hi: f64 },

    #[error(
        "infeasible voltage solution{}: achieved omega = {omega_achieved:.6e} rad/s, z_min = {z_min:.6e} m ({reason})",
        step.map(|s| format!(" at time step {s}")).unwrap_or_default()
    )]
    Infeasible {
        step: Option<usize>,
        omega_achieved: f64,
        z_min: f64,
        reason: String,
    },

    #[error("integration failed at t = {t:.6e} s: {reason}")]
    Integration { t: f64, reason: String },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// Attaches a waveform time index to an infeasibility error.
    pub fn at_step(self, index: usize) -> Self {
        match self {
            Error::Infeasible {
                omega_achieved,
                z_min,
                reason,
                ..
            } => Error::Infeasible {
                step: Some(index),
                omega_achieved,
                z_min,
                reason,
            },
            other => other,
        }
    }
}
