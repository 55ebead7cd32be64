//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not Hermitian (max |M - M†| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("degenerate clock: need at least 2 clock states, got {dim}")]
    DegenerateClock { dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range (valid: 0..{len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("conditional state at clock index {index} has zero norm")]
    ZeroNormConditional { index: usize },

    #[error("clock index {index} has no neighbours on a {len}-state grid (need 1..={})", len.saturating_sub(2))]
    Boundary { index: usize, len: usize },

    #[error("unsupported system: {0}")]
    UnsupportedSystem(String),

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("(q = {q}, E = {energy}) outside the action domain; allowed q in ({lower}, {upper})")]
    ActionDomain {
        q: f64,
        energy: f64,
        lower: f64,
        upper: f64,
    },

    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),

    #[error("clock branches {first} and {second} overlap (normalized overlap {overlap:.3e})")]
    NonOrthogonalClock {
        first: usize,
        second: usize,
        overlap: f64,
    },

    #[error("density has empty support")]
    EmptySupport,

    #[error("branch label {label} not present (have {len} branches)")]
    InvalidLabel { label: usize, len: usize },

    #[error("state violates constraint: residual {residual:.3e} exceeds {tol:.3e}")]
    ConstraintViolated { residual: f64, tol: f64 },

    #[error("constraint operators {first} and {second} do not commute (‖[A,B]‖ = {norm:.3e})")]
    NonCommuting {
        first: usize,
        second: usize,
        norm: f64,
    },

    #[error("empty constraint surface: {0}")]
    EmptyConstraintSurface(String),

    #[error("unknown system or generator id `{0}`")]
    UnknownId(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:.3e})")]
    NotConverged { sweeps: usize, off: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
