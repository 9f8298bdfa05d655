//! RMSProp and RMSProp with momentum, with their explicit l1-norm convergence
//! bound and pathwise checks of the supporting inequalities on synthetic
//! L-smooth stochastic problems.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod report;
pub mod rng;
pub mod theory;
pub mod verify;
pub mod vecops;

pub use error::{Error, Result};
