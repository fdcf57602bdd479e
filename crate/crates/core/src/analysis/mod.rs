//! Decay-law fits, perturbation-strength sweeps, regime borders and the
//! factorization statistics of the spectral amplitudes.

mod borders;
mod factorization;
mod fit;
mod sweep;

pub use borders::{
    analytic_border, dx_c_k_exponent, dx_c_k_scaling_ratio, estimate_borders, power_law_width,
    scaling_exponent, BorderEstimates, BorderMethod, Parameterization, MIN_SCALING_POINTS,
};
pub use factorization::{
    factorization_diagnostic, BinStat, Binning, FactorizationReport, FactorizationSample,
    MIN_REALIZATIONS, ZERO_TOLERANCE_SE,
};
pub use fit::{
    fit_decay, fit_decay_with, linear_regression, FitFamily, FitResult, WindowPolicy,
    MIN_WINDOW_POINTS,
};
pub use sweep::{
    adaptive_fit, spread_references, sweep, sweep_pair, PointFlag, SweepConfig, SweepPoint,
    SweepPreparation, SweepResult, TimePolicy,
};
