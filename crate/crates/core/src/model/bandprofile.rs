use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Semiclassical bandprofile of the perturbation matrix:
/// `<|B_nm|^2> = (delta / 2 pi hbar) * C(omega)` with the power spectrum
/// `C(omega) = c_norm * k^(3+g) / max(|omega|, omega_min)^g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandProfile {
    pub k: f64,
    pub g: f64,
    pub hbar: f64,
    pub delta: f64,
    pub c_norm: f64,
    pub omega_min: f64,
}

impl BandProfile {
    pub fn new(k: f64, g: f64, hbar: f64, delta: f64, c_norm: f64, omega_min: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::invalid(format!("g must lie in [0, 1], got {g}")));
        }
        for (name, v) in [
            ("k", k),
            ("hbar", hbar),
            ("delta", delta),
            ("c_norm", c_norm),
            ("omega_min", omega_min),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            k,
            g,
            hbar,
            delta,
            c_norm,
            omega_min,
        })
    }

    /// Same as [`BandProfile::new`] with the nearest-level cutoff `omega_min = delta / hbar`.
    pub fn with_level_cutoff(k: f64, g: f64, hbar: f64, delta: f64, c_norm: f64) -> Result<Self> {
        Self::new(k, g, hbar, delta, c_norm, delta / hbar)
    }

    /// Classical power spectrum at frequency `omega`.
    pub fn power_spectrum(&self, omega: f64) -> f64 {
        let w = omega.abs().max(self.omega_min);
        self.c_norm * self.k.powf(3.0 + self.g) / w.powf(self.g)
    }

    /// Variance of a matrix element coupling levels separated by `hbar * omega`.
    pub fn variance(&self, omega: f64) -> f64 {
        self.delta / (2.0 * PI * self.hbar) * self.power_spectrum(omega)
    }

    /// Variance for an energy separation rather than a frequency.
    pub fn variance_at_energy(&self, energy_gap: f64) -> f64 {
        self.variance(energy_gap / self.hbar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_for_g_zero() {
        let p = BandProfile::with_level_cutoff(3.0, 0.0, 1.0, 0.5, 2.0).unwrap();
        let expect = 0.5 / (2.0 * PI) * 2.0 * 27.0;
        for w in [0.0, 0.3, 1.0, 17.0, -4.0] {
            assert!((p.variance(w) - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn inverse_frequency_law_for_g_one() {
        let p = BandProfile::new(10.0, 1.0, 1.0, 1.0, 1.0, 0.25).unwrap();
        let r = p.variance(0.5) / p.variance(0.25);
        assert!((r - 0.5).abs() < 1e-14);
        // below the cutoff the profile is flat
        assert_eq!(p.variance(0.1), p.variance(0.25));
        assert_eq!(p.variance(-0.7), p.variance(0.7));
    }

    #[test]
    fn wavenumber_scaling() {
        let a = BandProfile::with_level_cutoff(5.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        let b = BandProfile::with_level_cutoff(10.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        let r = b.variance(3.0) / a.variance(3.0);
        assert!((r - 2f64.powf(3.5)).abs() < 1e-12 * r);
    }

    #[test]
    fn rejects_g_outside_unit_interval() {
        assert!(BandProfile::with_level_cutoff(1.0, 1.5, 1.0, 1.0, 1.0).is_err());
        assert!(BandProfile::with_level_cutoff(1.0, -0.1, 1.0, 1.0, 1.0).is_err());
        assert!(BandProfile::with_level_cutoff(0.0, 0.5, 1.0, 1.0, 1.0).is_err());
    }
}
