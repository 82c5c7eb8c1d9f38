//! Simulation and reconstruction of N-level quantum states under pure
//! dephasing.
//!
//! A phase-damping channel multiplies a density matrix entrywise by a
//! time-dependent matrix with unit diagonal and decaying off-diagonal
//! entries: populations stay put while each coherence decays at its own
//! rate. Because that evolution is linear and diagonal in the entrywise
//! sense, time series of a few carefully chosen observables contain
//! enough information to invert the dynamics and recover the full initial
//! state.
//!
//! The crate is organized along that pipeline:
//!
//! - [`mat`]: dense complex matrices, density-matrix validation, random
//!   state generation, distances.
//! - [`ggm`]: generalized Gell-Mann bases and Bloch-vector conversion.
//! - [`channel`]: the dephasing multiplier D(t), its validity scan, and
//!   its decomposition into per-pair basis matrices with exponential
//!   weights.
//! - [`measure`]: the four measurement schemes, expectation-value series,
//!   noise injection, CSV/JSON formats.
//! - [`recon`]: coefficient matrices with conditioning metadata, refusal
//!   thresholds, per-scheme reconstruction, Bell-mixture recovery, and
//!   the opt-in positivity repair.
//!
//! Everything is deterministic under explicit seeds, and all validation
//! tolerances are documented constants rather than hidden magic.

pub mod channel;
pub mod error;
pub mod ggm;
pub mod mat;
pub mod measure;
mod numeric;
pub mod recon;

pub use error::{CoreError, Result};
