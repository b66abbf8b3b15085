use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("steady state did not converge after {iterations} iterations (last relative change {residual:.3e}); the bare detuning may be in a multistable regime")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("effective susceptibility diverges at {omega:.6e} rad/s (|bracket| = {modulus:.3e})")]
    DivergentSusceptibility { omega: f64, modulus: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("too few segments: {kept} kept, at least {required} required")]
    TooFewSegments { kept: usize, required: usize },

    #[error("singular cross-spectral matrix at {frequency_hz:.1} Hz (relative determinant {relative_det:.3e})")]
    SingularCrossMatrix { frequency_hz: f64, relative_det: f64 },

    #[error("degenerate denominator at index {index}")]
    DegenerateDenominator { index: usize },

    #[error("calibration band {lo_hz:.0}-{hi_hz:.0} Hz is not covered by the spectrum grid")]
    InsufficientBand { lo_hz: f64, hi_hz: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate fit target: {0}")]
    DegenerateTarget(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("fit did not converge within {evaluations} model evaluations")]
    FitNonConvergence { evaluations: usize },
}

impl Error {
    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }


    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
