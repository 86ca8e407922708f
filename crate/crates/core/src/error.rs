use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("angle {angle_deg}° outside [-90°, 90°]")]
    AngleOutOfRange { angle_deg: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The user channel matrix is (numerically) rank deficient, so the
    /// null-space projector is not well defined.
    #[error("channel matrix is ill-conditioned: cond(HH^H) = {condition:.3e} (limit {limit:.1e})")]
    Singular { condition: f64, limit: f64 },

    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e}")]
    NotHermitian { asymmetry: f64 },

    #[error("{0}")]
    Domain(String),

    #[error("oracle evaluation failed: {0}")]
    Oracle(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
        if index < len {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { what, index, len })
        }
    }
}
