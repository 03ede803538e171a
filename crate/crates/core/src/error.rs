//! Error taxonomy shared by every module.
//!
//! Numerical failures carry enough context to be serialized into run
//! reports: a blow-up names the time stamp and step size, a stability
//! refusal names the admissible step size.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Sample too small for the requested kernel order.
    #[error("arity error: {0}")]
    Arity(String),

    /// Two grid-based objects do not live on the same grid.
    #[error("grid mismatch: {0}")]
    Grid(String),

    /// A non-finite value appeared where a finite one is required.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An empty or degenerate domain was supplied.
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// The requested exact computation exceeds the enumeration budget.
    #[error("complexity refusal: {0}")]
    ComplexityRefusal(String),

    /// Histogram grid does not cover enough of the sample mass.
    #[error("coverage error: escaped mass fraction {escaped:.3e} exceeds {allowed:.3e}")]
    Coverage { escaped: f64, allowed: f64 },

    /// A trajectory left the finite range.
    #[error("blow-up at t={t:.6} with dt={dt:.3e}; retry with a smaller dt")]
    BlowUp { dt: f64, t: f64 },

    /// Explicit grid step rejected by its stability bound.
    #[error("stability error: dt={dt:.3e} exceeds admissible dt={admissible:.3e}")]
    Stability { dt: f64, admissible: f64 },

    /// Picard iteration failed to contract.
    #[error("no contraction after {iterations} iterations (last residual {residual:.3e}, ratio {ratio:.3})")]
    NoContraction {
        iterations: usize,
        residual: f64,
        ratio: f64,
    },

    /// Decay fit asked for on nonpositive data or a too-short window.
    #[error("domain error: {0}")]
    Domain(String),

    /// Configuration file could not be interpreted.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure while emitting artifacts.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
