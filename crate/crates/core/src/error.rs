//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::scf::NonConvergence;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("densities live on different lattices ({left} vs {right})")]
    LatticeMismatch { left: String, right: String },

    #[error("operator dimension {found} does not match basis dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver failed on a {dimension}x{dimension} operator: {detail}")]
    Eigensolver { dimension: usize, detail: String },

    #[error("self-consistent iteration did not converge: {0}")]
    NotConverged(Box<NonConvergence>),

    #[error("target charge {target} outside attainable charge window [{q_min}, {q_max}]")]
    OutsideChargeWindow { target: f64, q_min: f64, q_max: f64 },

    #[error("Landau pole exceeded: alpha_ph * B = {kappa} >= 1")]
    LandauPole { kappa: f64 },

    #[error("quadrature did not converge on [{a}, {b}]: estimated error {error:e} after {evaluations} evaluations")]
    Quadrature {
        a: f64,
        b: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("finite-difference extrapolation unstable: {0}")]
    Extrapolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("refused: {0} (pass --force to override)")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Stable short identifier used in structured error reports and FFI codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::LatticeMismatch { .. } => "lattice_mismatch",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Eigensolver { .. } => "eigensolver",
            Error::NotConverged(_) => "not_converged",
            Error::OutsideChargeWindow { .. } => "outside_charge_window",
            Error::LandauPole { .. } => "landau_pole",
            Error::Quadrature { .. } => "quadrature",
            Error::Extrapolation(_) => "extrapolation",
            Error::Config(_) => "config",
            Error::Refused(_) => "refused",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
