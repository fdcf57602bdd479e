use serde::{Deserialize, Serialize};

use super::{diagonalize, SpectralDecomposition};
use crate::dynamics::Wavepacket;
use crate::error::{Error, Result};
use crate::model::ParametricModel;

/// Averaged LDOS needs at least this many reference states.
pub const MIN_AVERAGED_REFERENCES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LdosKind {
    Eigenstate { dx: f64, reference: usize },
    Wavepacket,
    PerturbedWavepacket { dx: f64 },
    Averaged { dx: f64, references: usize },
}

/// Discrete weights over energy offsets `omega = E - center`.
#[derive(Clone, Debug, PartialEq)]
pub struct LdosDistribution {
    pub offsets: Vec<f64>,
    pub weights: Vec<f64>,
    pub center: f64,
    pub kind: LdosKind,
}

impl LdosDistribution {
    pub fn total(&self) -> f64 {
        neumaier_sum(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        neumaier_sum(self.offsets.iter().zip(&self.weights).map(|(o, w)| o * w)) / self.total()
    }

    /// Second central moment.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        neumaier_sum(
            self.offsets
                .iter()
                .zip(&self.weights)
                .map(|(o, w)| w * (o - mean) * (o - mean)),
        ) / self.total()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Clone, Debug)]
pub enum LdosMode {
    Eigenstate { dx: f64, reference: usize },
    Wavepacket(Wavepacket),
    Averaged { dx: f64, references: Vec<usize> },
}

/// Builds the requested LDOS, diagonalizing `H(dx)` when needed.
pub fn ldos(model: &ParametricModel, mode: &LdosMode) -> Result<LdosDistribution> {
    match mode {
        LdosMode::Eigenstate { dx, reference } => {
            check_reference(model, *reference)?;
            eigenstate_ldos(model, &diagonalize(model, *dx)?, *reference)
        }
        LdosMode::Wavepacket(wp) => wavepacket_ldos(model, wp),
        LdosMode::Averaged { dx, references } => {
            if references.len() < MIN_AVERAGED_REFERENCES {
                return Err(Error::invalid(format!(
                    "averaged LDOS needs at least {MIN_AVERAGED_REFERENCES} references, got {}",
                    references.len()
                )));
            }
            for &r in references {
                check_reference(model, r)?;
            }
            averaged_ldos(model, &diagonalize(model, *dx)?, references)
        }
    }
}

fn check_reference(model: &ParametricModel, reference: usize) -> Result<()> {
    let r = model.levels().central_range();
    if r.contains(&reference) {
        Ok(())
    } else {
        Err(Error::EdgeEffect {
            index: reference,
            lo: r.start,
            hi: r.end,
        })
    }
}

/// `rho(omega; dx) = sum_j |<j(dx)|E_ref>|^2 delta(omega - (E_j(dx) - E_ref))`.
pub fn eigenstate_ldos(
    model: &ParametricModel,
    decomp: &SpectralDecomposition,
    reference: usize,
) -> Result<LdosDistribution> {
    check_reference(model, reference)?;
    let e0 = model.levels().energies()[reference];
    let weights: Vec<f64> = (0..decomp.dim())
        .map(|j| {
            let u = decomp.overlap(reference, j);
            u * u
        })
        .collect();
    let offsets = decomp.eigenvalues.iter().map(|e| e - e0).collect();
    Ok(LdosDistribution {
        offsets,
        weights,
        center: e0,
        kind: LdosKind::Eigenstate {
            dx: decomp.dx,
            reference,
        },
    })
}

/// Weights `|<n|psi>|^2` over the unperturbed levels, offsets measured from
/// the wavepacket mean energy.
pub fn wavepacket_ldos(model: &ParametricModel, wp: &Wavepacket) -> Result<LdosDistribution> {
    if wp.amplitudes.len() != model.dim() {
        return Err(Error::invalid(format!(
            "wavepacket has {} amplitudes, model has {} levels",
            wp.amplitudes.len(),
            model.dim()
        )));
    }
    let e0 = wp.mean_energy;
    Ok(LdosDistribution {
        offsets: model.levels().energies().iter().map(|e| e - e0).collect(),
        weights: wp.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
        center: e0,
        kind: LdosKind::Wavepacket,
    })
}

/// Weights `|<j(dx)|psi>|^2` over the eigenstates of `H(dx)`, offsets
/// measured from the wavepacket mean energy.
pub fn perturbed_wavepacket_ldos(
    model: &ParametricModel,
    decomp: &SpectralDecomposition,
    wp: &Wavepacket,
) -> Result<LdosDistribution> {
    let n = model.dim();
    if wp.amplitudes.len() != n || decomp.dim() != n {
        return Err(Error::invalid(
            "wavepacket, decomposition and model dimensions differ",
        ));
    }
    let u = &decomp.transform;
    let weights = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| wp.amplitudes[i] * u[(i, j)])
                .sum::<num_complex::Complex64>()
                .norm_sqr()
        })
        .collect();
    Ok(LdosDistribution {
        offsets: decomp
            .eigenvalues
            .iter()
            .map(|e| e - wp.mean_energy)
            .collect(),
        weights,
        center: wp.mean_energy,
        kind: LdosKind::PerturbedWavepacket { dx: decomp.dx },
    })
}

/// Per-reference LDOS aligned on each reference energy and accumulated on a
/// shared grid of bin width `delta / 2`, then renormalized.
pub fn averaged_ldos(
    model: &ParametricModel,
    decomp: &SpectralDecomposition,
    references: &[usize],
) -> Result<LdosDistribution> {
    if references.is_empty() {
        return Err(Error::invalid("averaged LDOS needs at least one reference"));
    }
    let bin = 0.5 * model.levels().mean_spacing();
    let singles = references
        .iter()
        .map(|&r| eigenstate_ldos(model, decomp, r))
        .collect::<Result<Vec<_>>>()?;
    let index = |o: f64| (o / bin).round() as i64;
    let lo = singles
        .iter()
        .flat_map(|d| d.offsets.iter())
        .map(|&o| index(o))
        .min()
        .unwrap_or(0);
    let hi = singles
        .iter()
        .flat_map(|d| d.offsets.iter())
        .map(|&o| index(o))
        .max()
        .unwrap_or(0);
    let mut acc = vec![0.0f64; (hi - lo + 1) as usize];
    for d in &singles {
        for (&o, &w) in d.offsets.iter().zip(&d.weights) {
            acc[(index(o) - lo) as usize] += w;
        }
    }
    let total: f64 = acc.iter().sum();
    let weights = acc.into_iter().map(|w| w / total).collect();
    let offsets = (lo..=hi).map(|i| i as f64 * bin).collect();
    let center = singles.iter().map(|d| d.center).sum::<f64>() / singles.len() as f64;
    Ok(LdosDistribution {
        offsets,
        weights,
        center,
        kind: LdosKind::Averaged {
            dx: decomp.dx,
            references: references.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::tests::two_level;
    use crate::spectral::{core_width, participation_ratio};

    #[test]
    fn two_level_rotation_weights() {
        let m = two_level();
        let d = ldos(
            &m,
            &LdosMode::Eigenstate {
                dx: 0.5,
                reference: 0,
            },
        )
        .unwrap();
        // tan(2 theta) = 2 * 0.5 / (0 - 1)
        let theta = 0.5 * (-1.0f64).atan();
        let lower = theta.cos().powi(2);
        assert!((d.weights[0] - lower).abs() < 1e-12);
        assert!((d.weights[0] - 0.8536).abs() < 1e-4);
        assert!((d.weights[1] - 0.1464).abs() < 1e-4);
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!((participation_ratio(&d) - 1.3333).abs() < 1e-3);
    }

    #[test]
    fn zero_dx_is_a_point_mass() {
        let m = two_level();
        let d = ldos(
            &m,
            &LdosMode::Eigenstate {
                dx: 0.0,
                reference: 1,
            },
        )
        .unwrap();
        assert_eq!(d.weights, vec![0.0, 1.0]);
        assert_eq!(d.offsets[1], 0.0);
        assert!(core_width(&d).unwrap().degenerate);
    }

    #[test]
    fn edge_references_are_rejected() {
        use crate::model::{
            assemble, build_levels, sample_perturbation, BandProfile, ModelMeta, SampleOptions,
        };
        let levels = build_levels(40, 1.0, 0.0, 0.0, 0).unwrap();
        let p = BandProfile::with_level_cutoff(1.0, 0.0, 1.0, 1.0, 0.1).unwrap();
        let b = sample_perturbation(&levels, &p, SampleOptions::default(), 1).unwrap();
        let meta = ModelMeta {
            hbar: 1.0,
            k: 1.0,
            g: 0.0,
            delta: 1.0,
            gamma_cl: 1.0,
        };
        let m = assemble(levels, b, meta).unwrap();
        assert!(matches!(
            ldos(
                &m,
                &LdosMode::Eigenstate {
                    dx: 0.1,
                    reference: 2
                }
            ),
            Err(Error::EdgeEffect {
                index: 2,
                lo: 4,
                hi: 36
            })
        ));
        assert!(ldos(
            &m,
            &LdosMode::Eigenstate {
                dx: 0.1,
                reference: 36
            }
        )
        .is_err());
        assert!(ldos(
            &m,
            &LdosMode::Averaged {
                dx: 0.1,
                references: (10..15).collect()
            }
        )
        .is_err());
        let avg = ldos(
            &m,
            &LdosMode::Averaged {
                dx: 0.3,
                references: (10..30).collect(),
            },
        )
        .unwrap();
        assert!((avg.total() - 1.0).abs() < 1e-12);
        assert!(avg.weights.iter().all(|&w| w >= 0.0));
        assert!(avg
            .offsets
            .windows(2)
            .all(|w| (w[1] - w[0] - 0.5).abs() < 1e-12));
    }
}
