//! Discrimination of N symmetric qubit states with a fixed rate of
//! inconclusive outcomes.
//!
//! The pipeline separates the input states by a probabilistic two-outcome
//! map, measures the success branch with the minimum-error POVM and declares
//! the failure branch inconclusive. Modules follow that pipeline: [`states`],
//! [`separation`], [`strategy`], the optical realization in [`optics`], device
//! imperfections in [`imperfections`], experiment simulation in [`sim`] and a
//! brute-force cross-check in [`oracle`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod imperfections;
pub mod io;
pub mod linalg;
pub mod optics;
pub mod oracle;
pub mod separation;
pub mod sim;
pub mod states;
pub mod strategy;

pub use error::{FrioError, Result};
