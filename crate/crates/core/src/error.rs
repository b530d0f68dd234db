use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("unsupported dimension {got}: expected {min}..={max}")]
    UnsupportedDimension { got: usize, min: usize, max: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ambiguous angle unwrapping at step {index}: angular change {delta:.4} rad is not below pi/2")]
    AmbiguousUnwrap { index: usize, delta: f64 },

    #[error(
        "equilibrium sampler acceptance rate {rate:.3e} below floor {floor:.3e} \
         ({accepted} of {attempts} launches hit the target)"
    )]
    LowAcceptance {
        rate: f64,
        floor: f64,
        accepted: u64,
        attempts: u64,
    },

    #[error(
        "direction grid needs {requested} points but the budget is {budget}; \
         use a coarser resolution rule (larger epsilon)"
    )]
    GridTooLarge { requested: usize, budget: usize },

    #[error("step budget of {budget} exceeded (last modulus {last_modulus:.6})")]
    StepBudgetExceeded { budget: usize, last_modulus: f64 },

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("estimate {index} is zero, log-ratio undefined; increase n_reps")]
    ZeroEstimate { index: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Fails with `InvalidParameter` unless `cond` holds.
pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(name, reason))
    }
}
