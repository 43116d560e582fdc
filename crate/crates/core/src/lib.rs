//! Epidemic Learning: decentralized SGD where every round each node pushes
//! its model to `s` freshly sampled peers and averages what it receives.
//!
//! * [`topology`] samples the per-round communication graphs.
//! * [`protocol`] is the per-node local step and aggregation.
//! * [`mixing`] holds the contraction factors, rate terms and the Monte
//!   Carlo and spectral tools that check them.
//! * [`problems`] provides objectives with known constants.
//! * [`simulator`] runs the synchronous round loop and records metrics.

pub mod error;
pub mod mixing;
pub mod problems;
pub mod protocol;
pub mod rng;
pub mod simulator;
pub mod topology;

pub use error::{Error, Result};
