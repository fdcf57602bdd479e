//! Parametric Hamiltonian models `H(dx) = E + dx * B`, their local density of
//! states, fidelity / survival-probability decay, and the regime analysis that
//! compares a correlated perturbation against its sign-randomized partner.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod oracle;
pub mod registry;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{LevelSequence, ModelMeta, ParametricModel, PerturbationMatrix};
pub use spectral::{LdosDistribution, SpectralDecomposition};
