use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),

    #[error("probability out of range: {0}")]
    ProbabilityOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration length {found} does not match edge count {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("operation requires a box lattice (hypercubic or triangular)")]
    NotABox,

    #[error("vertex set must be non-empty")]
    EmptySet,

    #[error("graph has {edges} edges, enumeration limit is {limit}")]
    TooManyEdges { edges: usize, limit: usize },

    #[error("bisection did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("degenerate placement: {0}")]
    DegeneratePlacement(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid cycle: {0}")]
    InvalidCycle(String),

    #[error("invalid reflector: {0}")]
    InvalidReflector(String),
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange(p))
    }
}
