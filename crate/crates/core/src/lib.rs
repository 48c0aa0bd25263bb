//! Quantum-trajectory simulation of error-corrected sensing in which
//! spontaneous emission from a sensing qubit is corrected using the
//! classical record of detected quanta.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod estimate;
pub mod hilbert;
pub mod noise;
pub mod oracle;
pub mod protocol;

pub use error::{Error, Result};
