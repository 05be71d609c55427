//! Toolkit for certifying high-dimensional multipartite entanglement and
//! nonlocality of qutrit GHZ states.
//!
//! The crate covers exact state and measurement algebra ([`qudit`],
//! [`states`], [`measurement`]), the two-basis fidelity witness
//! ([`witness`]), Bell functionals with exact local bounds ([`bell`]),
//! dimension-restricted see-saw lower bounds ([`seesaw`]), finite-count
//! statistics ([`stats`]) and a post-selected simulation of the
//! path-identity source ([`optics`]).

pub mod bell;
pub mod error;
pub mod measurement;
pub mod optics;
pub mod qudit;
pub mod random;
pub mod seesaw;
pub mod states;
pub mod stats;
pub mod witness;

pub use error::{Error, Result};
pub use qudit::{
    fidelity_with_pure, partial_trace, principal_eigenpair, tensor_product, DensityMatrix, DimProfile, Operator,
    StateVector, Tensor, C64,
};
