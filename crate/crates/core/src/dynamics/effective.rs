use num_complex::Complex64;

use super::Wavepacket;
use crate::error::{Error, Result};
use crate::model::ParametricModel;
use crate::spectral::{diagonalize, SpectralDecomposition};

/// Pairs with `|f|` below this are dropped once the sum rule has been checked.
pub const PRUNE_FLOOR: f64 = 1e-14;
const SUM_RULE_TOLERANCE: f64 = 1e-10;

/// Spectral components of the fidelity amplitude:
/// `m(t) = sum_k f_k exp(+i omega_k t)` with `omega = E_n(x) - E_m(x0)` and
/// `f = <psi|n(x)> <n(x)|m(x0)> <m(x0)|psi>`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralAmplitudeSet {
    pub frequencies: Vec<f64>,
    pub weights: Vec<Complex64>,
    /// Complex sum of all weights before pruning.
    pub sum: Complex64,
    /// Sum of `|f|^2`; the long-time average of `M(t)` for a nondegenerate set.
    pub sum_abs_sqr: f64,
}

impl SpectralAmplitudeSet {
    pub fn amplitude(&self, t: f64) -> Complex64 {
        self.frequencies
            .iter()
            .zip(&self.weights)
            .map(|(w, f)| f * Complex64::from_polar(1.0, w * t))
            .sum()
    }

    pub fn sum_abs(&self) -> f64 {
        self.weights.iter().map(|f| f.norm()).sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn effective_ldos(
    model: &ParametricModel,
    dx: f64,
    wp: &Wavepacket,
) -> Result<SpectralAmplitudeSet> {
    let decomp = diagonalize(model, dx)?;
    effective_ldos_with(model, &decomp, wp)
}

pub fn effective_ldos_with(
    model: &ParametricModel,
    decomp: &SpectralDecomposition,
    wp: &Wavepacket,
) -> Result<SpectralAmplitudeSet> {
    let n = model.dim();
    if wp.amplitudes.len() != n {
        return Err(Error::invalid("wavepacket dimension does not match model"));
    }
    if (wp.norm_sqr() - 1.0).abs() > 1e-10 {
        return Err(Error::invalid("wavepacket is not normalized"));
    }
    let u = &decomp.transform;
    let a = &wp.amplitudes;
    let e0 = model.levels().energies();
    let mut frequencies = Vec::new();
    let mut weights = Vec::new();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sum_abs_sqr = 0.0;
    for j in 0..n {
        let proj: Complex64 = (0..n).map(|i| a[i] * u[(i, j)]).sum();
        let lead = proj.conj();
        for m in 0..n {
            let f = lead * u[(m, j)] * a[m];
            sum += f;
            sum_abs_sqr += f.norm_sqr();
            if f.norm() >= PRUNE_FLOOR {
                frequencies.push(decomp.eigenvalues[j] - e0[m]);
                weights.push(f);
            }
        }
    }
    if (sum - Complex64::new(1.0, 0.0)).norm() > SUM_RULE_TOLERANCE {
        return Err(Error::invalid(format!("sum rule violated: sum f = {sum}")));
    }
    Ok(SpectralAmplitudeSet {
        frequencies,
        weights,
        sum,
        sum_abs_sqr,
    })
}
