//! Parametric Hamiltonian families `H(dx) = E + dx * B`.

mod bandprofile;
mod io;
mod levels;
mod perturbation;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use bandprofile::BandProfile;
pub use io::{export_model, ingest_model, sidecar_path, IngestReport, ModelFormat, ModelSidecar};
pub(crate) use io::{render_model, write_atomic};
pub use levels::{build_levels, LevelSequence, EDGE_GUARD_FRACTION};
pub use perturbation::{
    sample_perturbation, transform_perturbation, DiagPolicy, PerturbationMatrix, Provenance,
    SampleOptions, Transform, DEFAULT_DIMENSION_CAP,
};

use crate::error::{Error, Result};

/// Physical metadata carried alongside a model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub hbar: f64,
    pub k: f64,
    pub g: f64,
    /// Mean level spacing.
    pub delta: f64,
    /// Classical (Lyapunov / ballistic) decay rate.
    pub gamma_cl: f64,
}

impl ModelMeta {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("k", self.k),
            ("delta", self.delta),
            ("gamma_cl", self.gamma_cl),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.g) {
            return Err(Error::invalid(format!(
                "g must lie in [0, 1], got {}",
                self.g
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricModel {
    levels: LevelSequence,
    b: PerturbationMatrix,
    meta: ModelMeta,
}

/// Combines levels, perturbation and metadata into a model.
pub fn assemble(
    levels: LevelSequence,
    b: PerturbationMatrix,
    meta: ModelMeta,
) -> Result<ParametricModel> {
    meta.validate()?;
    if levels.len() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} levels vs {}x{} perturbation",
            levels.len(),
            b.dim(),
            b.dim()
        )));
    }
    let (s, d) = (levels.mean_spacing(), meta.delta);
    if (s - d).abs() > 1e-9 * s.max(d) {
        return Err(Error::invalid(format!(
            "metadata delta {d} does not match level spacing {s}"
        )));
    }
    Ok(ParametricModel { levels, b, meta })
}

impl ParametricModel {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &LevelSequence {
        &self.levels
    }

    pub fn perturbation(&self) -> &PerturbationMatrix {
        &self.b
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    /// Returns a copy with the perturbation replaced (same levels and metadata).
    pub fn with_perturbation(&self, b: PerturbationMatrix) -> Result<Self> {
        assemble(self.levels.clone(), b, self.meta)
    }

    /// Dense `E + dx * B`.
    pub fn hamiltonian(&self, dx: f64) -> DMatrix<f64> {
        let mut h = self.b.entries() * dx;
        for (i, e) in self.levels.energies().iter().enumerate() {
            h[(i, i)] += e;
        }
        h
    }

    /// SHA-256 over the bit patterns of energies, entries and metadata.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.dim() as u64).to_le_bytes());
        for e in self.levels.energies() {
            hasher.update(e.to_bits().to_le_bytes());
        }
        for v in self.b.entries().iter() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        let m = &self.meta;
        for v in [m.hbar, m.k, m.g, m.delta, m.gamma_cl] {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn meta() -> ModelMeta {
        ModelMeta {
            hbar: 1.0,
            k: 10.0,
            g: 0.0,
            delta: 1.0,
            gamma_cl: 5.0,
        }
    }

    fn small() -> ParametricModel {
        let levels = build_levels(6, 1.0, 0.0, 0.0, 0).unwrap();
        let profile = BandProfile::with_level_cutoff(10.0, 0.0, 1.0, 1.0, 1e-3).unwrap();
        let b = sample_perturbation(&levels, &profile, SampleOptions::default(), 4).unwrap();
        assemble(levels, b, meta()).unwrap()
    }

    #[test]
    fn zero_perturbation_gives_diagonal() {
        let m = small();
        let h = m.hamiltonian(0.0);
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j {
                    m.levels().energies()[i]
                } else {
                    0.0
                };
                assert_eq!(h[(i, j)], expect);
            }
        }
    }

    #[test]
    fn hamiltonian_is_linear_in_dx() {
        let m = small();
        let dx = 0.37;
        let diff = m.hamiltonian(2.0 * dx) - m.hamiltonian(dx);
        let b = m.perturbation().entries();
        for i in 0..6 {
            for j in 0..6 {
                if i == j {
                    // E cancels only up to one rounding of the diagonal sum
                    let scale = m.levels().energies()[i].abs() + (2.0 * dx * b[(i, i)]).abs();
                    assert!((diff[(i, j)] - dx * b[(i, j)]).abs() <= 4.0 * f64::EPSILON * scale);
                } else {
                    assert_eq!(diff[(i, j)], dx * b[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_metadata_and_dimensions() {
        let m = small();
        let bad = ModelMeta {
            gamma_cl: 0.0,
            ..meta()
        };
        assert!(assemble(m.levels().clone(), m.perturbation().clone(), bad).is_err());
        let bad = ModelMeta {
            gamma_cl: -1.0,
            ..meta()
        };
        assert!(assemble(m.levels().clone(), m.perturbation().clone(), bad).is_err());
        let levels = build_levels(5, 1.0, 0.0, 0.0, 0).unwrap();
        assert!(assemble(levels, m.perturbation().clone(), meta()).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = small();
        let b =
            transform_perturbation(a.perturbation(), Transform::SignRandomize { seed: 1 }).unwrap();
        let b = a.with_perturbation(b).unwrap();
        assert_eq!(a.content_hash(), small().content_hash());
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
