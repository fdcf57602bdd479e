//! Brute-force cross-checks for small systems. The LDOS check finds
//! eigenvalues by inertia-counting bisection and eigenvectors by inverse
//! iteration on plain row-major arrays; the propagation check uses the dense
//! matrix exponential. Neither touches the eigensolver used elsewhere.

use num_complex::Complex64;

use crate::dynamics::{
    evolve, oracle_fidelity, oracle_propagate, survival, Preparation, ORACLE_MAX_DIMENSION,
};
use crate::error::{Error, Result};
use crate::model::ParametricModel;
use crate::spectral::{diagonalize, eigenstate_ldos};

pub const ORACLE_LDOS_MAX_DIMENSION: usize = 12;
pub const ORACLE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleCheck {
    pub pass: bool,
    pub max_deviation: f64,
}

impl OracleCheck {
    fn from_deviation(max_deviation: f64) -> Self {
        Self {
            pass: max_deviation < ORACLE_TOLERANCE,
            max_deviation,
        }
    }
}

type Dense = Vec<Vec<f64>>;

/// Number of eigenvalues of `h` below `sigma`: negative pivots of the
/// `LDL^T` factorization of `h - sigma` (Sylvester's law of inertia).
fn count_below(h: &Dense, sigma: f64, tiny: f64) -> usize {
    let n = h.len();
    let mut a: Dense = h.clone();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= sigma;
    }
    let mut negatives = 0;
    for k in 0..n {
        let mut pivot = a[k][k];
        if pivot.abs() < tiny {
            pivot = -tiny;
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let l = a[i][k] / pivot;
            for j in k + 1..n {
                a[i][j] -= l * a[k][j];
            }
        }
    }
    negatives
}

fn gershgorin(h: &Dense) -> (f64, f64) {
    h.iter()
        .enumerate()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (i, row)| {
            let r: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.abs())
                .sum();
            (lo.min(row[i] - r), hi.max(row[i] + r))
        })
}

/// All eigenvalues, ascending, by bisection on the inertia count.
fn bisection_eigenvalues(h: &Dense) -> Vec<f64> {
    let (lo, hi) = gershgorin(h);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let (lo, hi) = (lo - 1e-6 * scale, hi + 1e-6 * scale);
    let tiny = 1e-300;
    (0..h.len())
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if count_below(h, mid, tiny) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; zero
/// pivots are nudged so a singular shift still yields the null direction.
fn solve(mut a: Dense, mut b: Vec<f64>, tiny: f64) -> Vec<f64> {
    let n = a.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        if a[k][k].abs() < tiny {
            a[k][k] = tiny;
        }
        for i in k + 1..n {
            let l = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= l * a[k][j];
            }
            b[i] -= l * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Eigenvectors by inverse iteration, orthogonalized within clusters of
/// nearly equal eigenvalues.
fn inverse_iteration(h: &Dense, eigenvalues: &[f64]) -> Vec<Vec<f64>> {
    let n = h.len();
    let scale = h
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let tiny = 1e-14 * scale;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        let mut shifted = h.clone();
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] -= lambda;
        }
        // deterministic start with components in every direction
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + ((i * 7 + k * 13) % 11) as f64 / 11.0)
            .collect();
        normalize(&mut v);
        for _ in 0..4 {
            v = solve(shifted.clone(), v, tiny);
            for (u, &mu) in vectors.iter().zip(eigenvalues) {
                if (mu - lambda).abs() < 1e-8 * scale {
                    let d: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
                }
            }
            normalize(&mut v);
        }
        vectors.push(v);
    }
    vectors
}

/// Recomputes the eigenstate LDOS of `reference` independently and compares
/// offsets and weights against the spectral module.
pub fn verify_ldos_small(
    model: &ParametricModel,
    dx: f64,
    reference: usize,
) -> Result<OracleCheck> {
    let n = model.dim();
    if n > ORACLE_LDOS_MAX_DIMENSION {
        return Err(Error::OracleScope {
            dimension: n,
            limit: ORACLE_LDOS_MAX_DIMENSION,
        });
    }
    let spectral = eigenstate_ldos(model, &diagonalize(model, dx)?, reference)?;
    let hm = model.hamiltonian(dx);
    let h: Dense = (0..n)
        .map(|i| (0..n).map(|j| hm[(i, j)]).collect())
        .collect();
    let eigenvalues = bisection_eigenvalues(&h);
    let vectors = inverse_iteration(&h, &eigenvalues);
    let e0 = model.levels().energies()[reference];
    let deviation = (0..n)
        .map(|j| {
            let offset = eigenvalues[j] - e0;
            let weight = vectors[j][reference].powi(2);
            (offset - spectral.offsets[j])
                .abs()
                .max((weight - spectral.weights[j]).abs())
        })
        .fold(0.0, f64::max);
    Ok(OracleCheck::from_deviation(deviation))
}

fn initial_state(model: &ParametricModel, prep: &Preparation) -> Result<Vec<Complex64>> {
    let n = model.dim();
    match prep {
        Preparation::Eigenstate(r) if *r < n => {
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            v[*r] = Complex64::new(1.0, 0.0);
            Ok(v)
        }
        Preparation::Eigenstate(r) => {
            Err(Error::invalid(format!("eigenstate index {r} out of range")))
        }
        Preparation::Wavepacket(wp) => Ok(wp.amplitudes.clone()),
    }
}

/// Max deviation of the spectral fidelity and survival amplitudes from the
/// matrix-exponential propagation over `times`.
pub fn verify_fidelity_small(
    model: &ParametricModel,
    dx: f64,
    prep: &Preparation,
    times: &[f64],
) -> Result<OracleCheck> {
    let n = model.dim();
    if n > ORACLE_MAX_DIMENSION {
        return Err(Error::OracleScope {
            dimension: n,
            limit: ORACLE_MAX_DIMENSION,
        });
    }
    let state = initial_state(model, prep)?;
    let m = evolve(model, dx, prep, times)?;
    let c = survival(model, dx, prep, times)?;
    let mut deviation = 0.0f64;
    for (i, &t) in times.iter().enumerate() {
        deviation = deviation
            .max((oracle_fidelity(model, dx, &state, t)? - m.amplitudes[i]).norm())
            .max((oracle_propagate(model, dx, &state, t)? - c.amplitudes[i]).norm());
    }
    Ok(OracleCheck::from_deviation(deviation))
}
