use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report, from protobuf decoding to solver
/// invocation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed protobuf: {0}")]
    MalformedProtobuf(String),

    #[error("unsupported operator {op:?} (node {node:?})")]
    UnsupportedOperator { op: String, node: String },

    #[error("unsupported dtype {dtype} for tensor {tensor:?}")]
    UnsupportedDtype { tensor: String, dtype: i32 },

    #[error("non-finite weight: {0}")]
    NonFiniteWeight(String),

    #[error("value of {0:?} has no exact binary floating-point form")]
    UnrepresentableWeight(String),

    #[error("unsupported opset version {0} (accepted: 9 to 13)")]
    UnsupportedOpset(i64),

    #[error("unsupported attribute on node {node:?}: {detail}")]
    UnsupportedAttribute { node: String, detail: String },

    #[error("shape mismatch at {node:?}: expected {expected}, got {actual}")]
    ShapeMismatch {
        node: String,
        expected: String,
        actual: String,
    },

    #[error("unknown tensor {0:?}")]
    UnknownTensor(String),

    #[error("tensor {0:?} is produced more than once")]
    DuplicateTensor(String),

    #[error("graph contains a cycle through node {0:?}")]
    CycleDetected(String),

    #[error("pooling window of node {node:?} is empty")]
    EmptyWindow { node: String },

    #[error("internal naming collision on {0:?}")]
    InternalNamingCollision(String),

    #[error("unsupported logic {0:?} (expected QF_NRA, QF_LRA or QF_LIRA)")]
    UnsupportedLogic(String),

    #[error("nonlinear term {term} cannot be emitted under {logic}")]
    LogicMismatch { logic: String, term: String },

    #[error("variable {0:?} is not declared")]
    MissingVariable(String),

    #[error("unsupported norm {0:?} (expected linf or l1)")]
    UnsupportedNorm(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("solver executable not found: {}", .0.display())]
    SolverNotFound(PathBuf),

    #[error("solver timed out after {0:?}")]
    Timeout(Duration),

    #[error("solver exited with status {code:?}: {stderr}")]
    NonzeroExit { code: Option<i32>, stderr: String },

    #[error("unparseable model near {0:?}")]
    UnparseableModel(String),

    #[error("model is missing a value for {0:?}")]
    IncompleteModel(String),

    #[error("value {value} of {var:?} lies outside the pixel domain")]
    DomainViolation { var: String, value: String },

    #[error("encoding bug: {0}")]
    EncodingBug(String),

    #[error("grid of {pixels} pixels needs 2^{pixels} renders, above the cap of 2^{cap_bits}")]
    GridTooLarge { pixels: usize, cap_bits: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
