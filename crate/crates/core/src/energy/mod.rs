//! Hamiltonians and passive resistive relations.

mod hamiltonian;
mod resistive;

pub use hamiltonian::{
    discrete_gradient, ham_eval, ham_grad, BuiltinTag, GeneralHamiltonian, Hamiltonian, QuadraticHamiltonian,
};
pub use resistive::{resistive_check, resistive_residual, ResistiveRelation, ResistiveReport};
