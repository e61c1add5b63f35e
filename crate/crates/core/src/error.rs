use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("initial data violates {condition}: {detail}")]
    Assumption { condition: &'static str, detail: String },

    #[error("net charge {total:.3e} exceeds neutrality tolerance {tol:.3e}")]
    Neutrality { total: f64, tol: f64 },

    #[error("{axis} stencil violated: displacement {cells:.3} cells exceeds {limit} (speed {speed:.4e}, dt {dt:.4e})")]
    Stencil {
        axis: &'static str,
        cells: f64,
        limit: usize,
        speed: f64,
        dt: f64,
    },

    #[error("non-finite {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("momentum support {q:.4} reached 90% of the momentum box {pmax:.4} at t = {t:.4}")]
    SupportOverflow { q: f64, pmax: f64, t: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("history too short: {0}")]
    HistoryTooShort(String),

    #[error("rate fit: {0}")]
    Fit(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
