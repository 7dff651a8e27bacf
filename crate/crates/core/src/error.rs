use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid lattice configuration: {0}")]
    Config(String),

    #[error("state length {got} does not match lattice size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("wavenumber index {k} outside [0, {max}]")]
    Wavenumber { k: i64, max: usize },

    #[error("blow-up detected at t = {t}: |u| = {modulus:e}")]
    BlowUpDetected { t: f64, modulus: f64 },

    #[error("adaptive step underflow at t = {t} (dt = {dt:e})")]
    StepFailure { t: f64, dt: f64 },

    #[error("need at least three samples, got {0}")]
    NeedThreeSamples(usize),

    #[error("trajectory spans {available} time units, window needs {window}")]
    WindowTooShort { window: f64, available: f64 },

    #[error("trajectories sampled on different grids: {0}")]
    GridMismatch(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
