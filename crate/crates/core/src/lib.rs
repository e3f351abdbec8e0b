//! Linear fiber dispersion on sampled complex envelopes, and a dispersion
//! compensator realized as a truncated Neumann series of two-branch
//! sub-systems (a standard fiber branch minus an attenuated, strongly
//! dispersive fiber branch).
//!
//! The crate is organized bottom-up:
//!
//! - [`signal`]: grids, envelopes, spectra, transfer functions, test pulses
//!   and pulse-width metrics.
//! - [`fiber`]: propagation-constant series, D/β₂ conversion and the
//!   dispersion transfer function.
//! - [`iterative`]: the generic error operator `E = I − μH`, partial
//!   Neumann sums and the feedback realization.
//! - [`compensator`]: the sub-system response, the K-stage cascade and the
//!   length-matching rule for the dispersive branch.
//! - [`convergence`]: the stability condition and the length/bandwidth
//!   trade-off region.
//!
//! All quantities are SI internally (s, m, rad/s, s²/m). Conventional units
//! (ps/nm/km, ps²/km, km) appear only in the explicitly named constructors
//! and conversion helpers.

pub mod compensator;
pub mod convergence;
mod error;
pub mod fiber;
pub mod iterative;
pub mod signal;

pub use error::{Error, Result};
