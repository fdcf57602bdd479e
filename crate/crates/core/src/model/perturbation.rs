use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BandProfile, LevelSequence};
use crate::error::{Error, Result};

/// Dense eigensolves beyond this size are rejected unless the cap is raised.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// How a perturbation matrix came to be, in application order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic { seed: u64 },
    Cutoff { bandwidth: f64 },
    SignRandomized { seed: u64 },
    Ingested { source: String },
}

/// Treatment of the diagonal `B_nn`, which the bandprofile does not fix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagPolicy {
    /// Gaussian with the profile variance at `omega_min`.
    #[default]
    Gaussian,
    Zeros,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Transform {
    GaussianCutoff { bandwidth: f64 },
    SignRandomize { seed: u64 },
    Both { bandwidth: f64, seed: u64 },
}

/// Real symmetric perturbation `B` (energy per unit dx).
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationMatrix {
    entries: DMatrix<f64>,
    provenance: Vec<Provenance>,
}

impl PerturbationMatrix {
    /// Wraps a matrix that must already be exactly symmetric and finite.
    pub fn new(entries: DMatrix<f64>, provenance: Vec<Provenance>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::invalid(format!(
                "perturbation matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in i..n {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if !a.is_finite() {
                    return Err(Error::invalid(format!("entry ({i},{j}) is not finite")));
                }
                if a.to_bits() != b.to_bits() {
                    return Err(Error::invalid(format!("entry ({i},{j}) breaks symmetry")));
                }
            }
        }
        Ok(Self {
            entries,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.entries[(n, m)]
    }

    /// `sum_{m != n} |B_nm|^2` for row `n`.
    pub fn off_diagonal_row_norm2(&self, n: usize) -> f64 {
        self.entries
            .row(n)
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != n)
            .map(|(_, v)| v * v)
            .sum()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.provenance
            .iter()
            .filter_map(|p| match p {
                Provenance::Synthetic { seed } | Provenance::SignRandomized { seed } => Some(*seed),
                _ => None,
            })
            .collect()
    }
}

/// Options for [`sample_perturbation`].
#[derive(Clone, Copy, Debug)]
pub struct SampleOptions {
    pub diag: DiagPolicy,
    pub dimension_cap: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            diag: DiagPolicy::Gaussian,
            dimension_cap: DEFAULT_DIMENSION_CAP,
        }
    }
}

/// Draws `B_nm ~ Normal(0, variance((E_n - E_m) / hbar))` for `n < m` and
/// mirrors it. The upper triangle is filled row by row from one ChaCha
/// stream, so a seed fixes the matrix bit for bit.
pub fn sample_perturbation(
    levels: &LevelSequence,
    profile: &BandProfile,
    options: SampleOptions,
    seed: u64,
) -> Result<PerturbationMatrix> {
    let n = levels.len();
    if n > options.dimension_cap {
        return Err(Error::ResourceLimit {
            dimension: n,
            cap: options.dimension_cap,
        });
    }
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    if !rel(levels.mean_spacing(), profile.delta) {
        return Err(Error::invalid(format!(
            "levels spacing {} does not match profile delta {}",
            levels.mean_spacing(),
            profile.delta
        )));
    }
    let e = levels.energies();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let sigma = profile.variance_at_energy(e[i] - e[j]).sqrt();
            let v = sigma * std_normal.sample(&mut rng);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    if options.diag == DiagPolicy::Gaussian {
        let sigma = profile.variance(profile.omega_min).sqrt();
        for i in 0..n {
            b[(i, i)] = sigma * std_normal.sample(&mut rng);
        }
    }
    PerturbationMatrix::new(b, vec![Provenance::Synthetic { seed }])
}

/// Applies a Gaussian band cutoff, a sign randomization, or both (cutoff first).
pub fn transform_perturbation(b: &PerturbationMatrix, op: Transform) -> Result<PerturbationMatrix> {
    match op {
        Transform::GaussianCutoff { bandwidth } => gaussian_cutoff(b, bandwidth),
        Transform::SignRandomize { seed } => Ok(sign_randomize(b, seed)),
        Transform::Both { bandwidth, seed } => {
            Ok(sign_randomize(&gaussian_cutoff(b, bandwidth)?, seed))
        }
    }
}

fn gaussian_cutoff(b: &PerturbationMatrix, bandwidth: f64) -> Result<PerturbationMatrix> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!(
            "cutoff bandwidth must be positive, got {bandwidth}"
        )));
    }
    let n = b.dim();
    let mut out = b.entries.clone();
    let two_w2 = 2.0 * bandwidth * bandwidth;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (j - i) as f64;
            let v = (-(d * d) / two_w2).exp() * out[(i, j)];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    let mut provenance = b.provenance.clone();
    provenance.push(Provenance::Cutoff { bandwidth });
    Ok(PerturbationMatrix {
        entries: out,
        provenance,
    })
}

fn sign_randomize(b: &PerturbationMatrix, seed: u64) -> PerturbationMatrix {
    let n = b.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = b.entries.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<bool>() {
                let v = -out[(i, j)];
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    }
    let mut provenance = b.provenance.clone();
    provenance.push(Provenance::SignRandomized { seed });
    PerturbationMatrix {
        entries: out,
        provenance,
    }
}
