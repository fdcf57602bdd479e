//! Brute-force propagation by a dense matrix exponential (Taylor series with
//! scaling and squaring). Shares nothing with the eigensolver path and serves
//! as an independent reference for small systems.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ParametricModel;

pub const ORACLE_MAX_DIMENSION: usize = 64;
/// `|t| * ||H||_1` beyond this is refused.
const MAX_PHASE: f64 = 1e6;
const AGREEMENT: f64 = 1e-12;
/// Successive scalings differing by more than this are reported as failure.
const DIVERGENCE: f64 = 1e-10;

type CMatrix = DMatrix<Complex64>;

fn norm1(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` with `2^squarings` scaling and a Taylor series run to convergence.
fn expm_scaled(a: &CMatrix, squarings: u32) -> CMatrix {
    let n = a.nrows();
    let scaled = a / Complex64::new(2f64.powi(squarings as i32), 0.0);
    let mut sum = CMatrix::identity(n, n);
    let mut term = CMatrix::identity(n, n);
    for k in 1..=60 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        sum += &term;
        if norm1(&term) <= 1e-18 * norm1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(-i h t) psi`, refined by adding squarings until two successive
/// scalings agree.
pub fn propagate_state(h: &DMatrix<f64>, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    if n > ORACLE_MAX_DIMENSION {
        return Err(Error::OracleScope {
            dimension: n,
            limit: ORACLE_MAX_DIMENSION,
        });
    }
    if psi.len() != n || !h.is_square() {
        return Err(Error::invalid("state and matrix dimensions differ"));
    }
    // a scalar shift only changes the global phase and keeps the norm small
    let shift = h.diagonal().mean();
    let a: CMatrix = DMatrix::from_fn(n, n, |i, j| {
        let v = if i == j { h[(i, j)] - shift } else { h[(i, j)] };
        Complex64::new(0.0, -v * t)
    });
    let size = norm1(&a);
    if !(size <= MAX_PHASE) {
        return Err(Error::invalid(format!(
            "|t| * ||H|| = {size} is out of range"
        )));
    }
    let v = nalgebra::DVector::from_column_slice(psi);
    let mut s = if size > 0.5 {
        (size / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let mut current = &expm_scaled(&a, s) * &v;
    let mut diff = f64::INFINITY;
    for _ in 0..8 {
        s += 1;
        let finer = &expm_scaled(&a, s) * &v;
        diff = (&finer - &current)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        current = finer;
        if diff <= AGREEMENT {
            break;
        }
    }
    if diff > DIVERGENCE {
        return Err(Error::OracleDivergence {
            t,
            difference: diff,
        });
    }
    let phase = Complex64::from_polar(1.0, -shift * t);
    Ok(current.iter().map(|z| z * phase).collect())
}

/// Survival amplitude `<psi| exp(-i H(dx) t) |psi>` by brute force.
pub fn oracle_propagate(
    model: &ParametricModel,
    dx: f64,
    state: &[Complex64],
    t: f64,
) -> Result<Complex64> {
    let h = model.hamiltonian(dx);
    let out = propagate_state(&h, state, t)?;
    Ok(inner(state, &out))
}

/// Fidelity amplitude `<psi| exp(+iHt) exp(-iH0 t) |psi>` by brute force.
pub fn oracle_fidelity(
    model: &ParametricModel,
    dx: f64,
    state: &[Complex64],
    t: f64,
) -> Result<Complex64> {
    let h0 = model.hamiltonian(0.0);
    let h = model.hamiltonian(dx);
    let back = propagate_state(&h0, state, t)?;
    let forward = propagate_state(&h, &back, -t)?;
    Ok(inner(state, &forward))
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_phase() {
        let (e, b, dx, t) = (0.7, -0.3, 0.25, 3.1);
        let h = DMatrix::from_element(1, 1, e + dx * b);
        let out = propagate_state(&h, &[Complex64::new(1.0, 0.0)], t).unwrap();
        let expect = Complex64::from_polar(1.0, -(e + dx * b) * t);
        assert!((out[0] - expect).norm() < 1e-14);
        assert!((out[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = DMatrix::from_fn(4, 4, |i, j| (i + j) as f64);
        let psi = vec![Complex64::new(0.5, 0.0); 4];
        let out = propagate_state(&h, &psi, 0.0).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn two_level_rabi() {
        // H = [[0, v], [v, 0]]: <0|exp(-iHt)|0> = cos(v t)
        let v = 0.8;
        let h = DMatrix::from_row_slice(2, 2, &[0.0, v, v, 0.0]);
        let psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        for t in [0.3, 2.0, 17.5, 140.0] {
            let out = propagate_state(&h, &psi, t).unwrap();
            assert!(
                (out[0] - Complex64::new((v * t).cos(), 0.0)).norm() < 1e-11,
                "t={t}"
            );
            assert!(
                (out[1] - Complex64::new(0.0, -(v * t).sin())).norm() < 1e-11,
                "t={t}"
            );
        }
    }

    #[test]
    fn scope_is_enforced() {
        let h = DMatrix::<f64>::identity(65, 65);
        let psi = vec![Complex64::new(0.0, 0.0); 65];
        assert!(matches!(
            propagate_state(&h, &psi, 1.0),
            Err(Error::OracleScope { .. })
        ));
    }
}
