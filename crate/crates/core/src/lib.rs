//! Randomized-benchmarking simulator for a single spin-1/2 ensemble driven
//! by shaped microwave pulses.
//!
//! Units: time in µs, angular frequency in rad/µs, frequencies reported to
//! users in MHz.

pub mod bloch;
pub mod dynamics;
pub mod error;
pub mod incoherent;
pub mod io;
pub mod lineshape;
pub mod pulse;
pub mod quantum;
pub mod rb;
pub mod selection;
pub mod seed;

pub use error::{Error, Result};
