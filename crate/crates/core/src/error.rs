use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PatError>;

#[derive(Debug, Error)]
pub enum PatError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error(
        "time of flight {tof_s:.6e} s for sensor {sensor} and pixel {pixel} lies outside the record [0, {t_max_s:.6e}] s"
    )]
    TofOutOfWindow {
        sensor: usize,
        pixel: usize,
        tof_s: f64,
        t_max_s: f64,
    },

    #[error("sensor {sensor} coincides with the center of pixel {pixel}")]
    ZeroDistance { sensor: usize, pixel: usize },

    #[error("sensor array is already perturbed; perturb the nominal array instead")]
    AlreadyPerturbed,

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no DFT frequency falls inside the band [{f_lo:.6e}, {f_hi:.6e}] Hz")]
    EmptyBand { f_lo: f64, f_hi: f64 },

    #[error("explicit matrix needs {needed} bytes but the cap is {cap} bytes")]
    MemoryCap { needed: u64, cap: u64 },

    #[error("power iteration did not converge in {iterations} iterations (last relative change {last_change:.3e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trial failed at X = {x_percent}%, trial {trial}, method {method}: {source}")]
    Trial {
        x_percent: f64,
        trial: usize,
        method: String,
        #[source]
        source: Box<PatError>,
    },
}

impl PatError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PatError::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PatError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        PatError::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for failures caused by bad input files or arguments rather than
    /// by the numerics.
    pub fn is_usage(&self) -> bool {
        match self {
            PatError::InvalidParameter(_)
            | PatError::DimensionMismatch { .. }
            | PatError::Parse { .. }
            | PatError::Io { .. } => true,
            PatError::Trial { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
