use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the spectrum excluded at each end when picking reference states.
pub const EDGE_GUARD_FRACTION: f64 = 0.1;

/// Ordered unperturbed energies `E_n` with their mean level spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSequence {
    energies: Vec<f64>,
    mean_spacing: f64,
}

impl LevelSequence {
    /// Validates an externally supplied spectrum against a declared spacing.
    pub fn new(energies: Vec<f64>, mean_spacing: f64) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::invalid(format!(
                "level sequence needs at least 2 energies, got {}",
                energies.len()
            )));
        }
        if !(mean_spacing > 0.0 && mean_spacing.is_finite()) {
            return Err(Error::invalid(format!(
                "mean spacing must be positive, got {mean_spacing}"
            )));
        }
        if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::invalid(format!("energy {i} is not finite")));
        }
        if let Some(i) = energies.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::invalid(format!(
                "energies must be nondecreasing (index {} > index {})",
                i,
                i + 1
            )));
        }
        let central = central_spacing(&energies);
        if (central - mean_spacing).abs() > 0.1 * mean_spacing {
            return Err(Error::invalid(format!(
                "central mean spacing {central} deviates from declared {mean_spacing} by more than 10%"
            )));
        }
        Ok(Self {
            energies,
            mean_spacing,
        })
    }

    /// Builds a sequence whose spacing is measured from the central half.
    pub fn from_energies(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::invalid("level sequence needs at least 2 energies"));
        }
        let spacing = central_spacing(&energies);
        Self::new(energies, spacing)
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn mean_spacing(&self) -> f64 {
        self.mean_spacing
    }

    /// Indices outside the outer 10% at both ends.
    pub fn central_range(&self) -> Range<usize> {
        central_range(self.len())
    }

    /// Energy interval spanned by the central index range.
    pub fn central_energy_window(&self) -> (f64, f64) {
        let r = self.central_range();
        (self.energies[r.start], self.energies[r.end - 1])
    }
}

pub(crate) fn central_range(n: usize) -> Range<usize> {
    let guard = (EDGE_GUARD_FRACTION * n as f64).floor() as usize;
    guard..n - guard
}

fn central_spacing(energies: &[f64]) -> f64 {
    let n = energies.len();
    let lo = n / 4;
    let hi = (3 * n / 4).max(lo + 1).min(n - 1);
    (energies[hi] - energies[lo]) / (hi - lo) as f64
}

/// Picket-fence spectrum `e_base + n * spacing`, optionally jittered by
/// `jitter * spacing * u_n` with `u_n` uniform in (-1/2, 1/2).
pub fn build_levels(
    n: usize,
    spacing: f64,
    e_base: f64,
    jitter: f64,
    seed: u64,
) -> Result<LevelSequence> {
    if n < 2 {
        return Err(Error::invalid(format!("need n >= 2 levels, got {n}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!(
            "level spacing must be positive, got {spacing}"
        )));
    }
    if !(0.0..1.0).contains(&jitter) {
        return Err(Error::invalid(format!(
            "jitter must lie in [0, 1), got {jitter}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut energies: Vec<f64> = (0..n)
        .map(|i| {
            let base = e_base + i as f64 * spacing;
            if jitter == 0.0 {
                base
            } else {
                base + jitter * spacing * (rng.gen::<f64>() - 0.5)
            }
        })
        .collect();
    energies.sort_by(f64::total_cmp);
    LevelSequence::new(energies, spacing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picket_fence() {
        let l = build_levels(3, 1.0, 0.0, 0.0, 0).unwrap();
        assert_eq!(l.energies(), &[0.0, 1.0, 2.0]);
        let l = build_levels(2, 0.5, 10.0, 0.0, 0).unwrap();
        assert_eq!(l.energies(), &[10.0, 10.5]);
    }

    #[test]
    fn jittered_spacing_is_preserved_on_average() {
        let l = build_levels(1000, 1.0, 0.0, 0.3, 7).unwrap();
        let e = l.energies();
        let mean = (e[999] - e[0]) / 999.0;
        assert!((mean - 1.0).abs() < 0.02, "mean spacing {mean}");
        assert!(e.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_levels(1, 1.0, 0.0, 0.0, 0).is_err());
        assert!(build_levels(4, 0.0, 0.0, 0.0, 0).is_err());
        assert!(build_levels(4, -1.0, 0.0, 0.0, 0).is_err());
        assert!(build_levels(4, 1.0, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn validates_ingested_energies() {
        assert!(LevelSequence::new(vec![0.0, 2.0, 1.0], 1.0).is_err());
        assert!(LevelSequence::new(vec![0.0, 1.0, 2.0, 3.0], 2.0).is_err());
        let l = LevelSequence::from_energies(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(l.mean_spacing(), 1.0);
    }

    #[test]
    fn central_range_excludes_edges() {
        assert_eq!(central_range(2), 0..2);
        assert_eq!(central_range(100), 10..90);
        assert_eq!(central_range(1000), 100..900);
    }
}
