//! Preparations and the amplitudes `m(t; dx)`, `c(t; dx)`, `c(t; wpk)` plus
//! the effective-LDOS decomposition of the fidelity amplitude.

mod effective;
mod evolve;
mod expm;
mod wavepacket;

pub use effective::{effective_ldos, effective_ldos_with, SpectralAmplitudeSet, PRUNE_FLOOR};
pub use evolve::{
    averaged_eigenstate_fidelity, evolve, evolve_with, linear_time_grid, survival, survival_with,
    validate_time_grid, Averaging, CurveLabel, DecayCurve, Preparation, Propagator,
};
pub use expm::{oracle_fidelity, oracle_propagate, propagate_state, ORACLE_MAX_DIMENSION};
pub use wavepacket::{
    make_wavepacket, make_wavepacket_with_support, PhaseMode, Wavepacket, MIN_WAVEPACKET_SUPPORT,
};
