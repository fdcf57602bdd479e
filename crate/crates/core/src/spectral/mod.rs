//! Exact diagonalization of `H(dx)`, LDOS construction and width measures.

mod ldos;
mod width;

use nalgebra::DMatrix;

pub use ldos::{
    averaged_ldos, eigenstate_ldos, ldos, perturbed_wavepacket_ldos, wavepacket_ldos,
    LdosDistribution, LdosKind, LdosMode, MIN_AVERAGED_REFERENCES,
};
pub use width::{core_width, participation_ratio, weighted_quantile, CoreWidth, CORE_FRACTION};

use crate::error::{Error, Result};
use crate::model::ParametricModel;

/// Eigenvalues (ascending) and eigenvectors of `H(dx)`; column `j` of
/// `transform` is eigenvector `j` in the unperturbed basis.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub dx: f64,
    pub eigenvalues: Vec<f64>,
    pub transform: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Overlap `<n | j(dx)>` between unperturbed state `n` and eigenstate `j`.
    pub fn overlap(&self, n: usize, j: usize) -> f64 {
        self.transform[(n, j)]
    }

    /// `max |U^T U - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let utu = self.transform.tr_mul(&self.transform);
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((utu[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `max_j ||H v_j - lambda_j v_j||_inf / ||H||_inf`.
    pub fn relative_residual(&self, h: &DMatrix<f64>) -> f64 {
        let norm = (0..h.nrows())
            .map(|i| h.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let hv = h * &self.transform;
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            let lambda = self.eigenvalues[j];
            for i in 0..self.dim() {
                worst = worst.max((hv[(i, j)] - lambda * self.transform[(i, j)]).abs());
            }
        }
        worst / norm
    }
}

/// Dense symmetric eigensolve of `H(dx)`.
pub fn diagonalize(model: &ParametricModel, dx: f64) -> Result<SpectralDecomposition> {
    let n = model.dim();
    if !dx.is_finite() {
        return Err(Error::invalid(format!("dx must be finite, got {dx}")));
    }
    let h = model.hamiltonian(dx);
    let fail = || Error::NumericFailure { dx, dimension: n };
    let (eigenvalues, transform) = symmetric_eigen(&h).ok_or_else(fail)?;
    Ok(SpectralDecomposition {
        dx,
        eigenvalues,
        transform,
    })
}

fn symmetric_eigen(h: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)]);
    let evd = a.selfadjoint_eigendecomposition(faer::Side::Lower);
    let s = evd.s().column_vector();
    let u = evd.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.read(a).total_cmp(&s.read(b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&j| s.read(j)).collect();
    let transform = DMatrix::from_fn(n, n, |i, j| u.read(i, order[j]));
    if eigenvalues
        .iter()
        .chain(transform.iter())
        .all(|v| v.is_finite())
    {
        Some((eigenvalues, transform))
    } else {
        None
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{assemble, LevelSequence, ModelMeta, PerturbationMatrix};

    pub(crate) fn two_level() -> ParametricModel {
        let levels = LevelSequence::new(vec![0.0, 1.0], 1.0).unwrap();
        let b =
            PerturbationMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), vec![])
                .unwrap();
        let meta = ModelMeta {
            hbar: 1.0,
            k: 1.0,
            g: 0.0,
            delta: 1.0,
            gamma_cl: 1.0,
        };
        assemble(levels, b, meta).unwrap()
    }

    #[test]
    fn two_level_closed_form() {
        let d = diagonalize(&two_level(), 0.5).unwrap();
        let s = 0.5f64.sqrt();
        assert!((d.eigenvalues[0] - (0.5 - s)).abs() < 1e-14);
        assert!((d.eigenvalues[1] - (0.5 + s)).abs() < 1e-14);
        assert!(d.orthogonality_defect() < 1e-14);
    }

    #[test]
    fn zero_dx_is_identity_up_to_sign() {
        let d = diagonalize(&two_level(), 0.0).unwrap();
        assert_eq!(d.eigenvalues, vec![0.0, 1.0]);
        assert_eq!(d.transform[(0, 0)].abs(), 1.0);
        assert_eq!(d.transform[(1, 1)].abs(), 1.0);
        assert_eq!(d.transform[(0, 1)], 0.0);
    }

    #[test]
    fn rejects_non_finite_dx() {
        assert!(diagonalize(&two_level(), f64::NAN).is_err());
    }
}
