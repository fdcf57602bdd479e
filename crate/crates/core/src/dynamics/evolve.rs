use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Wavepacket;
use crate::error::{Error, Result};
use crate::model::ParametricModel;
use crate::spectral::{diagonalize, SpectralDecomposition};

#[derive(Clone, Debug)]
pub enum Preparation {
    /// Unperturbed eigenstate `|E_n>` by level index.
    Eigenstate(usize),
    Wavepacket(Wavepacket),
}

/// How per-reference curves are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// `<|m(t)|^2>`; the amplitude column holds `<m(t)>`.
    #[default]
    Probability,
    /// `|<m(t)>|^2`.
    Amplitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveLabel {
    Fidelity {
        dx: f64,
    },
    SurvivalEigenstate {
        dx: f64,
    },
    SurvivalWavepacket {
        dx: f64,
    },
    AveragedFidelity {
        dx: f64,
        references: usize,
        averaging: Averaging,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    pub probabilities: Vec<f64>,
    pub label: CurveLabel,
}

impl DecayCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn validate_time_grid(times: &[f64]) -> Result<()> {
    match times.first() {
        None => return Err(Error::invalid("time grid is empty")),
        Some(&t0) if t0 != 0.0 => {
            return Err(Error::invalid(format!(
                "time grid must start at 0, starts at {t0}"
            )))
        }
        _ => {}
    }
    if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(format!(
            "time grid must be strictly increasing (index {})",
            i + 1
        )));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("time grid has non-finite entries"));
    }
    Ok(())
}

/// `n` evenly spaced times on `[0, t_max]`.
pub fn linear_time_grid(t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

/// Spectral-representation evaluator of the fidelity amplitude
/// `m(t) = <psi| exp(+iHt) exp(-iH0 t) |psi>` and of the survival amplitude
/// `c(t) = <psi| exp(-iHt) |psi>` for one preparation and one decomposition.
/// Exact at any (also negative) time up to eigensolver accuracy.
pub struct Propagator<'a> {
    decomp: &'a SpectralDecomposition,
    energies: &'a [f64],
    initial: Vec<Complex64>,
    /// `<j(dx)|psi>`
    projections: Vec<Complex64>,
    /// Phase reference subtracted from every energy.
    center: f64,
    eigenstate: Option<usize>,
}

impl<'a> Propagator<'a> {
    pub fn new(
        model: &'a ParametricModel,
        decomp: &'a SpectralDecomposition,
        prep: &Preparation,
    ) -> Result<Self> {
        let n = model.dim();
        if decomp.dim() != n {
            return Err(Error::invalid(
                "decomposition does not match model dimension",
            ));
        }
        let energies = model.levels().energies();
        let (initial, eigenstate, center) = match prep {
            Preparation::Eigenstate(r) => {
                if *r >= n {
                    return Err(Error::invalid(format!("eigenstate index {r} out of range")));
                }
                let mut v = vec![Complex64::new(0.0, 0.0); n];
                v[*r] = Complex64::new(1.0, 0.0);
                (v, Some(*r), energies[*r])
            }
            Preparation::Wavepacket(wp) => {
                if wp.amplitudes.len() != n {
                    return Err(Error::invalid("wavepacket dimension does not match model"));
                }
                (wp.amplitudes.clone(), None, wp.mean_energy)
            }
        };
        let u = &decomp.transform;
        let projections = (0..n)
            .map(|j| (0..n).map(|i| initial[i] * u[(i, j)]).sum())
            .collect();
        Ok(Self {
            decomp,
            energies,
            initial,
            projections,
            center,
            eigenstate,
        })
    }

    pub fn fidelity_amplitude(&self, t: f64) -> Complex64 {
        let lambda = &self.decomp.eigenvalues;
        if let Some(r) = self.eigenstate {
            // both exponentials act on |E_r>; only E_r's own phase survives from H0
            return (0..lambda.len())
                .map(|j| {
                    let u = self.decomp.overlap(r, j);
                    Complex64::from_polar(u * u, (lambda[j] - self.center) * t)
                })
                .sum();
        }
        let u = &self.decomp.transform;
        let n = lambda.len();
        let evolved0: Vec<Complex64> = (0..n)
            .map(|i| {
                self.initial[i] * Complex64::from_polar(1.0, -(self.energies[i] - self.center) * t)
            })
            .collect();
        let mut m = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let mut proj = Complex64::new(0.0, 0.0);
            for i in 0..n {
                proj += evolved0[i] * u[(i, j)];
            }
            m += self.projections[j].conj()
                * Complex64::from_polar(1.0, (lambda[j] - self.center) * t)
                * proj;
        }
        // the center phases cancel between the two exponentials
        m
    }

    pub fn survival_amplitude(&self, t: f64) -> Complex64 {
        let lambda = &self.decomp.eigenvalues;
        let phase_ref = Complex64::from_polar(1.0, -self.center * t);
        let c: Complex64 = (0..lambda.len())
            .map(|j| {
                Complex64::from_polar(
                    self.projections[j].norm_sqr(),
                    -(lambda[j] - self.center) * t,
                )
            })
            .sum();
        c * phase_ref
    }
}

fn curve(times: &[f64], amplitudes: Vec<Complex64>, label: CurveLabel) -> DecayCurve {
    let probabilities = amplitudes.iter().map(|a| a.norm_sqr()).collect();
    DecayCurve {
        times: times.to_vec(),
        amplitudes,
        probabilities,
        label,
    }
}

/// Fidelity curve `M(t; dx)` for a preparation.
pub fn evolve(
    model: &ParametricModel,
    dx: f64,
    prep: &Preparation,
    times: &[f64],
) -> Result<DecayCurve> {
    validate_time_grid(times)?;
    let decomp = diagonalize(model, dx)?;
    evolve_with(model, &decomp, prep, times)
}

/// [`evolve`] reusing an existing decomposition.
pub fn evolve_with(
    model: &ParametricModel,
    decomp: &SpectralDecomposition,
    prep: &Preparation,
    times: &[f64],
) -> Result<DecayCurve> {
    validate_time_grid(times)?;
    let p = Propagator::new(model, decomp, prep)?;
    let amps = times.iter().map(|&t| p.fidelity_amplitude(t)).collect();
    Ok(curve(times, amps, CurveLabel::Fidelity { dx: decomp.dx }))
}

/// Survival curve: `P(t; dx)` for an eigenstate, `P(t; wpk)` for a wavepacket.
pub fn survival(
    model: &ParametricModel,
    dx: f64,
    prep: &Preparation,
    times: &[f64],
) -> Result<DecayCurve> {
    validate_time_grid(times)?;
    let decomp = diagonalize(model, dx)?;
    survival_with(model, &decomp, prep, times)
}

pub fn survival_with(
    model: &ParametricModel,
    decomp: &SpectralDecomposition,
    prep: &Preparation,
    times: &[f64],
) -> Result<DecayCurve> {
    validate_time_grid(times)?;
    let p = Propagator::new(model, decomp, prep)?;
    let amps = times.iter().map(|&t| p.survival_amplitude(t)).collect();
    let label = match prep {
        Preparation::Eigenstate(_) => CurveLabel::SurvivalEigenstate { dx: decomp.dx },
        Preparation::Wavepacket(_) => CurveLabel::SurvivalWavepacket { dx: decomp.dx },
    };
    Ok(curve(times, amps, label))
}

/// Fidelity of unperturbed eigenstates averaged over reference indices.
pub fn averaged_eigenstate_fidelity(
    model: &ParametricModel,
    decomp: &SpectralDecomposition,
    references: &[usize],
    times: &[f64],
    averaging: Averaging,
) -> Result<DecayCurve> {
    validate_time_grid(times)?;
    if references.is_empty() {
        return Err(Error::invalid("no reference states to average"));
    }
    let k = references.len() as f64;
    let mut amp = vec![Complex64::new(0.0, 0.0); times.len()];
    let mut prob = vec![0.0; times.len()];
    for &r in references {
        let p = Propagator::new(model, decomp, &Preparation::Eigenstate(r))?;
        for (i, &t) in times.iter().enumerate() {
            let m = p.fidelity_amplitude(t);
            amp[i] += m / k;
            prob[i] += m.norm_sqr() / k;
        }
    }
    if averaging == Averaging::Amplitude {
        prob = amp.iter().map(|a| a.norm_sqr()).collect();
    }
    Ok(DecayCurve {
        times: times.to_vec(),
        amplitudes: amp,
        probabilities: prob,
        label: CurveLabel::AveragedFidelity {
            dx: decomp.dx,
            references: references.len(),
            averaging,
        },
    })
}
