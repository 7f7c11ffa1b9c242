use thiserror::Error;

use crate::varset::VarSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("factor {factor} out of range for a {m}-way table")]
    FactorOutOfRange { factor: usize, m: usize },

    #[error("invalid cell: {0}")]
    InvalidCell(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid model specification: {0}")]
    InvalidModel(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{0} is not a partial edge of the hypergraph")]
    NotPartialEdge(VarSet),

    #[error("hypergraph is not acyclic")]
    Cyclic,

    #[error("{m} factors exceeds the limit of {limit} for exhaustive search")]
    TooManyFactors { m: usize, limit: usize },

    #[error("model is disconnected; connected components are {0:?}")]
    Disconnected(Vec<VarSet>),

    #[error("hierarchical closure is undefined on a support with structural zeros")]
    MaskedClosure,

    #[error("split model condition violated for cliques {clique} and {other}: {reason}")]
    SplitCondition {
        clique: VarSet,
        other: VarSet,
        reason: String,
    },

    #[error("models are not nested: {0}")]
    NotNested(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("fit did not converge after {iterations} iterations (max residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("maximum likelihood estimate does not exist: step halving stalled with residual {residual:.3e}")]
    MleNonexistent { residual: f64 },

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("move {index} violates A z = 0 (max |Az| = {residual})")]
    InvalidMove { index: usize, residual: i64 },

    #[error("Markov basis incomplete: {0}")]
    BasisIncomplete(String),

    #[error("no Markov basis available for component(s) {0:?}; import one from a basis file")]
    MissingComponentBasis(Vec<VarSet>),

    #[error("basis is a lattice basis, not certified as a Markov basis")]
    UncertifiedBasis,

    #[error("enumeration cap {cap} exceeded")]
    CapExceeded { cap: usize },

    #[error("invalid chain configuration: {0}")]
    InvalidChain(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
    Basis,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotConverged { .. }
            | Error::MleNonexistent { .. }
            | Error::Overflow(_)
            | Error::Internal(_)
            | Error::Cyclic => ErrorKind::Numerical,
            Error::InvalidMove { .. }
            | Error::BasisIncomplete(_)
            | Error::MissingComponentBasis(_)
            | Error::UncertifiedBasis => ErrorKind::Basis,
            _ => ErrorKind::Input,
        }
    }
}
