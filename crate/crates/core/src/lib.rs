//! Numerical checks of correlation decay, the detectability lemma and the
//! Chebyshev approximate ground-space projector for frustration-free spin
//! Hamiltonians, with the XXZ kink chain as an exactly solvable reference.

pub mod agsp;
pub mod cli;
pub mod correlation;
pub mod detectability;
pub mod error;
pub mod linalg;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{LinearMap, StateVector, C64};
pub use model::{ChainLength, HamiltonianSpec, InteractionGraph, TermSpec};
pub use spectral::GroundSpaceBasis;
