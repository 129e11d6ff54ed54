//! Transfer-matrix simulator for electromagnetically induced transparency,
//! slow light and pulse storage in a periodic array of three-level
//! superconducting artificial atoms coupled to a transmission line.

// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dispersion;
pub mod error;
pub mod numerics;
pub mod output;
pub mod params;
pub mod scattering;
pub mod spectra;
pub mod storage;

pub use error::{Error, Result};
