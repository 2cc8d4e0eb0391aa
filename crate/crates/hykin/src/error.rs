//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Result`]. Shape and domain errors
//! carry enough context (operation name, offending shapes or values) to be
//! actionable without a debugger; higher-level variants wrap file-format and
//! training failures.

use thiserror::Error;

/// Unified error type for tensor, geometry, and harness operations.
#[derive(Error, Debug)]
pub enum Error {
    /// Two operands had incompatible shapes.
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A single shape was invalid for the requested operation.
    #[error("{op}: invalid shape {shape:?} ({msg})")]
    InvalidShape {
        op: &'static str,
        shape: Vec<usize>,
        msg: String,
    },

    /// An input value fell outside the operation's domain beyond what the
    /// epsilon guards absorb.
    #[error("{op}: domain violation (offending value {value})")]
    Domain { op: &'static str, value: f64 },

    /// An operation produced NaN or infinity.
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },

    /// Softmax over a lane whose mask excludes every entry. The index
    /// identifies the lane (multi-index with the softmax axis removed).
    #[error("softmax: fully masked lane at {lane:?}")]
    FullyMaskedLane { lane: Vec<usize> },

    /// Operands recorded on different gradient tapes were combined.
    #[error("{op}: operands belong to different gradient tapes")]
    TapeMismatch { op: &'static str },

    /// `backward` was called on a non-scalar tensor.
    #[error("backward: expected a scalar, got shape {shape:?}")]
    NonScalarBackward { shape: Vec<usize> },

    /// A gradient was requested from a tensor with no tape attached.
    #[error("{op}: tensor is not attached to a gradient tape")]
    NoTape { op: &'static str },

    /// Manifold points from balls with different curvature were combined.
    #[error("{op}: points lie on different balls (curvature {lhs} vs {rhs})")]
    BallMismatch {
        op: &'static str,
        lhs: f64,
        rhs: f64,
    },

    /// An operation received an empty collection.
    #[error("{op}: empty input")]
    Empty { op: &'static str },

    /// Configuration file or flag error.
    #[error("config: {0}")]
    Config(String),

    /// Checkpoint container was malformed or inconsistent.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// Dataset file was malformed or inconsistent.
    #[error("dataset: {0}")]
    Dataset(String),

    /// Training aborted on a non-finite loss; diagnostics were dumped.
    #[error("non-finite loss at epoch {epoch} step {step}; diagnostics in {dump}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        dump: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
