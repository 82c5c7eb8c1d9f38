//! Crate-wide error type.
//!
//! Every fallible operation in this library returns [`CoreError`]. The
//! variants are grouped so that a front end can map them onto coarse
//! failure classes (bad input data, invalid rate configuration, physics
//! validation failure, numerically refused inversion, scheme mismatch)
//! without string matching.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    // ---- structural / input errors ----
    #[error("matrix dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("failed to parse input: {0}")]
    Parse(String),

    #[error("ragged matrix rows: row {row} has {got} entries, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    // ---- state validation ----
    #[error("matrix is not Hermitian: max |m - m†| deviation {max_dev:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { max_dev: f64, tol: f64 },

    #[error("invalid density matrix: {reason}")]
    InvalidDensity { reason: String },

    // ---- rate configuration ----
    #[error("missing decoherence rate for index pair ({j},{k})")]
    MissingRate { j: usize, k: usize },

    #[error("decoherence rate for pair ({j},{k}) must be positive, got {value} (zero is allowed only for pairs flagged frozen)")]
    NonPositiveRate { j: usize, k: usize, value: f64 },

    #[error("invalid rate pair key {key:?}: {reason}")]
    BadRateKey { key: String, reason: String },

    #[error("duplicate rate key {key:?} in rates file")]
    DuplicateRateKey { key: String },

    // ---- channel validation ----
    #[error("channel validation failed: D(t) has negative eigenvalue {min_eig:.6e} at t = {t}")]
    ChannelNotPositive { t: f64, min_eig: f64 },

    #[error("time sample must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("noise standard deviation must be non-negative, got {0}")]
    NegativeSigma(f64),

    // ---- reconstruction refusals ----
    #[error("coincident decoherence rates: pair {pair_a:?} and pair {pair_b:?} differ by {diff:.3e}, within tolerance {tol:.3e}; the coefficient system is singular")]
    CoincidentRates {
        pair_a: String,
        pair_b: String,
        diff: f64,
        tol: f64,
    },

    #[error("coefficient matrix too ill-conditioned to invert: cond = {cond:.3e} exceeds limit {limit:.1e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("linear system is numerically singular: {0}")]
    SingularSystem(String),

    // ---- scheme / record mismatches ----
    #[error("time grid has {got} instants but the scheme requires {expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error("measurement record does not match the scheme: {0}")]
    SchemeMismatch(String),

    #[error("measurement record is missing entry for observable {label:?} at t = {time}")]
    MissingEntry { label: String, time: f64 },

    #[error("expected {expected} static diagonal values, got {got}")]
    StaticCountMismatch { expected: usize, got: usize },

    // ---- misc contract violations ----
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("trace {trace:.6} deviates from 1 by more than 0.1; this signals a pipeline bug, not noise")]
    TraceOutOfRange { trace: f64 },

    #[error("invalid Bell mixture probabilities: {0}")]
    InvalidProbabilities(String),
}
