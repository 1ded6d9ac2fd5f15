//! Error type shared by all solver stages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument failed.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exact integer quantity left the representable range.
    #[error("overflow: {0}")]
    Overflow(String),

    /// The mollification scale is too small for the grid spacing.
    #[error(
        "mollifier under-resolved: l(eps) = {l_eps:.6e} < 2*dx = {min_l:.6e}; \
         refine the grid before shrinking eps"
    )]
    UnderResolved { l_eps: f64, min_l: f64 },

    /// A chaos index refers to coordinates outside the sampled dimension.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Requested combination is outside the supported problem class.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A solver stage failed for one chaos coefficient.
    #[error("coefficient {gamma}: {source}")]
    Coefficient {
        gamma: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
