//! Chernoff-information figure of merit for repetitive QND readout of binary
//! observables.

// negated comparisons also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chernoff;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod error_model;
pub mod hmm;
pub mod minimize;
pub mod quadrature;
pub mod rng;
mod serde_float;
pub mod special;

#[cfg(test)]
pub(crate) mod testutil;

pub use distributions::{Density, Outcome, OutcomePair, Sign, Support};
pub use error::{ReadoutError, Result};
