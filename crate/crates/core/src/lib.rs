//! Port-Hamiltonian differential-algebraic systems.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dirac;
pub mod discretize;
pub mod energy;
pub mod error;
pub mod integrate;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod system;
pub mod verify;

pub use error::{PhsError, Result};
