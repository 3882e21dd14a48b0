//! Serve-the-longest-queue (SLQ) multiclass queues with finite, equal buffers.
//!
//! This crate holds everything that does not touch the filesystem:
//!
//! * [`model`]: first/second-order data, per-`n` scalings and the SLQ rule.
//! * [`arrivals`]: the deterministic periodic arrival pattern plus Poisson
//!   and renewal sources.
//! * [`hw_sim`]: the `n`-server Halfin–Whitt system.
//! * [`conv_sim`]: the single-server system in conventional heavy traffic.
//! * [`scaling`]: diffusion scaling and state-space-collapse diagnostics.
//! * [`limits`]: the drift, reflection maps and Euler schemes for the limit
//!   processes.
//! * [`stats`]: two-sample Kolmogorov–Smirnov and summary statistics.
//!
//! All randomness flows through [`rng::Randomness`], so every simulation is a
//! pure function of its inputs and seed.

#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod arrivals;
pub mod conv_sim;
pub mod distribution;
mod error;
pub mod hw_sim;
pub mod limits;
pub mod model;
pub mod path;
pub mod rng;
pub mod scaling;
pub mod stats;

pub use error::{Error, Result};
