use thiserror::Error;

use crate::space::SpaceKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("space kind mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: SpaceKind, found: SpaceKind },

    #[error("index {0} is negative but the space is unilateral")]
    NegativeIndex(i64),

    #[error("element shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("operator is not invertible: {0}")]
    NotInvertible(String),

    #[error("invalid weight sequence: {0}")]
    InvalidWeights(String),

    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),

    #[error("subspace has no basis vectors")]
    EmptySubspace,

    #[error("subspace is trivial (empty or the whole space)")]
    TrivialSubspace,

    #[error("{0} is not a member of the subspace")]
    NotInSubspace(String),

    #[error("invalid iterate sequence: {0}")]
    InvalidIterates(String),

    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("support of orbit point at step {step} has {len} entries, over the cap of {cap}")]
    SupportCap { step: usize, len: usize, cap: usize },

    #[error("operators do not commute: residual {residual:e} exceeds {tol:e}")]
    CommutationFailed { residual: f64, tol: f64 },

    #[error("dense sets are not in product form")]
    NotProductForm,

    #[error("construction failed verification at n = {n}: {detail}")]
    ConstructionFailed { n: u64, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
