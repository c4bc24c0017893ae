use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested operation needs data the instance does not carry.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The S-fullness witness is not positive on the sampled set.
    #[error("S-fullness witness invalid: sampled minimum {min:.3e} on slot {slot}")]
    WitnessInvalid { slot: usize, min: f64 },

    /// No pair of consecutive moment-matrix degrees with equal numeric rank.
    #[error("no stable rank found up to degree {max_degree} (ranks {ranks:?}); raise the relaxation order")]
    NoFlatRank { max_degree: usize, ranks: Vec<usize> },

    /// Atom extraction hit an ill-conditioned basis or complex spectrum.
    #[error("atom extraction unstable (condition estimate {condition:.3e})")]
    ExtractionUnstable { condition: f64 },

    /// The grid reference LP has no feasible point.
    #[error("reference LP infeasible: {0}")]
    Infeasible(String),

    /// The conic solver did not produce a usable solution.
    #[error("solver failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
