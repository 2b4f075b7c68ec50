use thiserror::Error;

pub type Result<T> = std::result::Result<T, AutodiffError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape {shape:?} holds {expected} elements but {actual} values were supplied")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: expected a rank-{expected} tensor, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },

    #[error("{op}: index {index} out of range for extent {extent}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        extent: usize,
    },

    #[error("masked softmax: row {row} is fully masked")]
    FullyMaskedRow { row: usize },

    #[error("backward requires a scalar output, got shape {shape:?}")]
    NonScalarOutput { shape: Vec<usize> },

    #[error("node {node} does not belong to this graph (graph has {len} nodes)")]
    UnknownNode { node: usize, len: usize },

    #[error("graph grew from {recorded} to {current} nodes after backward; gradients are stale")]
    GraphMutated { recorded: usize, current: usize },

    #[error("cross entropy: no non-padding target positions")]
    EmptyTargets,

    #[error("finite difference: non-finite function value at coordinate {coordinate}")]
    NonFiniteValue { coordinate: usize },

    #[error("finite difference: step must be positive and finite, got {step}")]
    InvalidStep { step: f64 },
}
