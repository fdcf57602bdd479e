use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LevelSequence;

/// Fewest levels with weight above [`SUPPORT_WEIGHT`] a wavepacket may cover.
pub const MIN_WAVEPACKET_SUPPORT: usize = 8;
const SUPPORT_WEIGHT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    RealPositive,
    RandomSign,
    #[default]
    RandomPhase,
}

/// Normalized preparation expanded in the unperturbed eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct Wavepacket {
    pub amplitudes: Vec<Complex64>,
    pub mean_energy: f64,
    pub energy_width: f64,
}

impl Wavepacket {
    /// Normalizes arbitrary amplitudes and computes the energy moments.
    pub fn from_amplitudes(levels: &LevelSequence, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != levels.len() {
            return Err(Error::invalid(format!(
                "{} amplitudes for {} levels",
                amplitudes.len(),
                levels.len()
            )));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("wavepacket amplitudes have zero norm"));
        }
        let amplitudes: Vec<Complex64> = amplitudes.into_iter().map(|a| a / norm).collect();
        let e = levels.energies();
        let mean: f64 = amplitudes
            .iter()
            .zip(e)
            .map(|(a, e)| a.norm_sqr() * e)
            .sum();
        let var: f64 = amplitudes
            .iter()
            .zip(e)
            .map(|(a, e)| a.norm_sqr() * (e - mean) * (e - mean))
            .sum();
        Ok(Self {
            amplitudes,
            mean_energy: mean,
            energy_width: var.sqrt(),
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn support(&self) -> usize {
        self.amplitudes
            .iter()
            .filter(|a| a.norm_sqr() > SUPPORT_WEIGHT)
            .count()
    }
}

/// Gaussian energy envelope `|a_n| ~ exp(-(E_n - E0)^2 / (4 sigma^2))` with the
/// requested phase structure.
pub fn make_wavepacket(
    levels: &LevelSequence,
    e0_target: f64,
    sigma: f64,
    phase: PhaseMode,
    seed: u64,
) -> Result<Wavepacket> {
    make_wavepacket_with_support(
        levels,
        e0_target,
        sigma,
        phase,
        seed,
        MIN_WAVEPACKET_SUPPORT,
    )
}

/// [`make_wavepacket`] with an explicit minimum support (use 1 to allow the
/// stationary-state limit).
pub fn make_wavepacket_with_support(
    levels: &LevelSequence,
    e0_target: f64,
    sigma: f64,
    phase: PhaseMode,
    seed: u64,
    min_support: usize,
) -> Result<Wavepacket> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "energy width must be positive, got {sigma}"
        )));
    }
    let (lo, hi) = levels.central_energy_window();
    if !(lo..=hi).contains(&e0_target) {
        return Err(Error::invalid(format!(
            "wavepacket center {e0_target} outside the central window [{lo}, {hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amplitudes: Vec<Complex64> = levels
        .energies()
        .iter()
        .map(|e| {
            let x = (e - e0_target) / sigma;
            let magnitude = (-0.25 * x * x).exp();
            let phase_factor = match phase {
                PhaseMode::RealPositive => Complex64::new(1.0, 0.0),
                PhaseMode::RandomSign => {
                    if rng.gen::<bool>() {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(-1.0, 0.0)
                    }
                }
                PhaseMode::RandomPhase => Complex64::from_polar(1.0, TAU * rng.gen::<f64>()),
            };
            phase_factor * magnitude
        })
        .collect();
    let wp = Wavepacket::from_amplitudes(levels, amplitudes)?;
    let support = wp.support();
    if support < min_support {
        return Err(Error::TooNarrow {
            support,
            required: min_support,
        });
    }
    Ok(wp)
}
