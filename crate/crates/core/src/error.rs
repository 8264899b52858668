use alloc::string::String;

/// Errors reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported manifold: {0}")]
    UnsupportedManifold(String),
    #[error("invalid phase point: {0}")]
    InvalidPhasePoint(String),
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite symbol value at t = {t}")]
    NonFiniteSymbol { t: f64 },
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("bump radii must satisfy 0 <= r_in < r_out (got {r_in}, {r_out})")]
    BadRadii { r_in: f64, r_out: f64 },
    #[error("bad time grid: {0}")]
    BadGrid(String),
    #[error("no critical time found below {t_hi}")]
    NotFound { t_hi: f64 },
    #[error("pair is not controllable (Kalman rank {rank} < {n})")]
    NotControllable { rank: usize, n: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("bad block sizes: {0}")]
    BadBlocks(String),
    #[error("time step {dt} too large for {modes} modes")]
    Unstable { dt: f64, modes: usize },
    #[error("energy blow-up at t = {t}")]
    Instability { t: f64 },
    #[error("cutoff {modes} too small for frequency {k}")]
    CutoffTooSmall { modes: usize, k: usize },
    #[error("denominator {value:e} too small")]
    DegenerateDenominator { value: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
