//! Optimal power control and effective secrecy throughput regions for the
//! fading broadcast channel with confidential messages under statistical QoS
//! (buffer-decay) constraints.
//!
//! The transmitter sends a common message to both receivers and a
//! confidential message to the main receiver only. For each weight vector
//! `(lambda0, lambda1)` the crate finds the power policy maximizing
//! `lambda0 C0 + lambda1 C1`, where `C0`, `C1` are effective throughputs, and
//! sweeps the weights to trace the boundary of the throughput region.
//!
//! Module map:
//! - [`model`]: QoS configuration, fading states and grids.
//! - [`rates`]: per-state rates and ergodic averages.
//! - [`effcap`]: effective throughput and the normalization functionals.
//! - [`kkt`]: per-state optimal power split for fixed multipliers.
//! - [`kink`]: per-state split on the common-rate kink.
//! - [`outer`]: multiplier resolution and master case selection.
//! - [`region`]: boundary sweep and region-level checks.
//! - [`oracle`]: brute-force verifier for small explicit grids.

pub mod effcap;
pub mod error;
pub mod kink;
pub mod kkt;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod outer;
pub mod rates;
pub mod region;
mod quadrature;

pub use error::{Error, Result};
