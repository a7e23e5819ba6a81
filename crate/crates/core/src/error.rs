use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has no entries")]
    Empty,

    #[error("entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("column {col} sum deviates from 1 by {deviation:e}")]
    ColumnSumViolation { col: usize, deviation: f64 },

    #[error("node {node} has an empty in-neighborhood")]
    IsolatedNode { node: usize },

    #[error("combination matrix is not primitive")]
    NonPrimitive,

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("agent {agent}: step-size root equation has no real roots (delta above the admissible bound)")]
    NoRealRoots { agent: usize },

    #[error("agent {agent}: convergence rate {rate} outside (0, 1]")]
    RateOutOfRange { agent: usize, rate: f64 },

    #[error("agent {agent}: chi = {chi} is not below 1")]
    ChiNotContractive { agent: usize, chi: f64 },

    #[error("global identifiability fails for hypothesis {hypothesis} (beta_net = {value})")]
    ZeroBetaNet { hypothesis: usize, value: f64 },

    #[error("drift events overlap at t = {time} for {field}")]
    OverlappingDrift { time: u64, field: &'static str },

    #[error("drift events are not sorted by time (t = {time} after t = {previous})")]
    UnsortedDrift { time: u64, previous: u64 },

    #[error("feature record at row {row}: time {time} precedes {previous}")]
    NonMonotoneTime { row: usize, time: u64, previous: u64 },

    #[error("unknown label {label} at row {row}")]
    UnknownLabel { row: usize, label: usize },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    /// Variant name, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::Empty => "Empty",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::ColumnSumViolation { .. } => "ColumnSumViolation",
            Error::IsolatedNode { .. } => "IsolatedNode",
            Error::NonPrimitive => "NonPrimitive",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::NoRealRoots { .. } => "NoRealRoots",
            Error::RateOutOfRange { .. } => "RateOutOfRange",
            Error::ChiNotContractive { .. } => "ChiNotContractive",
            Error::ZeroBetaNet { .. } => "ZeroBetaNet",
            Error::OverlappingDrift { .. } => "OverlappingDrift",
            Error::UnsortedDrift { .. } => "UnsortedDrift",
            Error::NonMonotoneTime { .. } => "NonMonotoneTime",
            Error::UnknownLabel { .. } => "UnknownLabel",
            Error::Invalid(_) => "Invalid",
        }
    }
}
