use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::SpectralAmplitudeSet;
use crate::error::{Error, Result};
use crate::spectral::LdosDistribution;

pub const MIN_REALIZATIONS: usize = 10;
/// Standard errors within which a binned mean counts as zero.
pub const ZERO_TOLERANCE_SE: f64 = 3.0;

/// Frequency bins of width `width` centered on `i * width`, `|i| <= half_bins`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub width: f64,
    pub half_bins: usize,
    /// Level spacing used to turn the product of binned masses into a
    /// prediction for the binned `|f|^2`.
    pub delta: f64,
}

impl Binning {
    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid(
                "bin width and level spacing must be positive",
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        2 * self.half_bins + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self, bin: usize) -> f64 {
        (bin as f64 - self.half_bins as f64) * self.width
    }

    fn index(&self, omega: f64) -> Option<usize> {
        let i = (omega / self.width).round();
        (i.abs() <= self.half_bins as f64).then_some((i + self.half_bins as f64) as usize)
    }
}

/// One ensemble realization.
pub struct FactorizationSample<'a> {
    pub amplitudes: &'a SpectralAmplitudeSet,
    /// Wavepacket weights over the unperturbed levels.
    pub ldos_wpk: &'a LdosDistribution,
    /// Wavepacket weights over the eigenstates of `H(dx)`, same center. When
    /// given, the prediction uses its cross-correlation with `ldos_wpk`
    /// instead of the autocorrelation of `ldos_wpk`.
    pub ldos_wpk_dx: Option<&'a LdosDistribution>,
    /// Eigenstate (or averaged) LDOS at the perturbation strength of `amplitudes`.
    pub ldos_dx: &'a LdosDistribution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub omega: f64,
    pub mean_re: f64,
    pub mean_im: f64,
    pub se_re: f64,
    pub se_im: f64,
    /// Ensemble mean of the binned `sum |f|^2`.
    pub mean_abs_sqr: f64,
    pub prediction: f64,
    /// `mean_abs_sqr / prediction`; `None` when the prediction vanishes.
    pub ratio: Option<f64>,
    /// Both mean components within [`ZERO_TOLERANCE_SE`] standard errors of 0.
    pub mean_consistent_with_zero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub bins: Vec<BinStat>,
    pub realizations: usize,
    /// Every realization puts all of `f` into a single bin.
    pub degenerate: bool,
}

impl FactorizationReport {
    /// Bins whose center lies within `radius` of zero.
    pub fn central(&self, radius: f64) -> impl Iterator<Item = &BinStat> {
        self.bins.iter().filter(move |b| b.omega.abs() <= radius)
    }
}

fn support(dist: &LdosDistribution) -> Vec<(f64, f64)> {
    dist.offsets
        .iter()
        .zip(&dist.weights)
        .filter(|&(_, &w)| w > 1e-14)
        .map(|(&o, &w)| (o, w))
        .collect()
}

/// Binned mass of `sum_{n,m} u_n v_m delta(omega - (x_n - y_m))`; with
/// `u = v` this is the autocorrelation.
fn correlation_mass(u: &LdosDistribution, v: &LdosDistribution, binning: &Binning) -> Vec<f64> {
    let (su, sv) = (support(u), support(v));
    let mut out = vec![0.0; binning.len()];
    for &(on, wn) in &su {
        for &(om, wm) in &sv {
            if let Some(b) = binning.index(on - om) {
                out[b] += wn * wm;
            }
        }
    }
    out
}

fn binned_mass(dist: &LdosDistribution, binning: &Binning) -> Vec<f64> {
    let mut out = vec![0.0; binning.len()];
    for (&o, &w) in dist.offsets.iter().zip(&dist.weights) {
        if let Some(b) = binning.index(o) {
            out[b] += w;
        }
    }
    out
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Ensemble statistics of the binned spectral amplitudes `F_b = sum_{omega in b} f`
/// (mean and standard error) and of the binned `sum_{omega in b} |f|^2`, the
/// latter against the product prediction `R_b * L_b * delta / width` where
/// `R_b` is the binned autocorrelation of the wavepacket weights and `L_b` the
/// binned LDOS.
pub fn factorization_diagnostic(
    samples: &[FactorizationSample<'_>],
    binning: &Binning,
) -> Result<FactorizationReport> {
    binning.validate()?;
    if samples.len() < MIN_REALIZATIONS {
        return Err(Error::InsufficientStatistics {
            have: samples.len(),
            need: MIN_REALIZATIONS,
        });
    }
    let nb = binning.len();
    let k = samples.len();
    let mut re = vec![vec![0.0; k]; nb];
    let mut im = vec![vec![0.0; k]; nb];
    let mut abs_sqr = vec![0.0; nb];
    let mut prediction = vec![0.0; nb];
    let mut degenerate = true;
    for (s, sample) in samples.iter().enumerate() {
        let mut binned = vec![Complex64::new(0.0, 0.0); nb];
        let mut binned_sq = vec![0.0; nb];
        let mut touched = std::collections::BTreeSet::new();
        for (&w, &f) in sample
            .amplitudes
            .frequencies
            .iter()
            .zip(&sample.amplitudes.weights)
        {
            if let Some(b) = binning.index(w) {
                binned[b] += f;
                binned_sq[b] += f.norm_sqr();
                touched.insert(b);
            } else {
                touched.insert(usize::MAX);
            }
        }
        degenerate &= touched.len() <= 1;
        let r = correlation_mass(
            sample.ldos_wpk_dx.unwrap_or(sample.ldos_wpk),
            sample.ldos_wpk,
            binning,
        );
        let l = binned_mass(sample.ldos_dx, binning);
        for b in 0..nb {
            re[b][s] = binned[b].re;
            im[b][s] = binned[b].im;
            abs_sqr[b] += binned_sq[b] / k as f64;
            prediction[b] += r[b] * l[b] * binning.delta / binning.width / k as f64;
        }
    }
    let bins = (0..nb)
        .map(|b| {
            let (mean_re, se_re) = mean_and_se(&re[b]);
            let (mean_im, se_im) = mean_and_se(&im[b]);
            let within = |m: f64, se: f64| m.abs() <= ZERO_TOLERANCE_SE * se;
            BinStat {
                omega: binning.center(b),
                mean_re,
                mean_im,
                se_re,
                se_im,
                mean_abs_sqr: abs_sqr[b],
                prediction: prediction[b],
                ratio: (prediction[b] > 0.0).then(|| abs_sqr[b] / prediction[b]),
                mean_consistent_with_zero: within(mean_re, se_re) && within(mean_im, se_im),
            }
        })
        .collect();
    Ok(FactorizationReport {
        bins,
        realizations: k,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{effective_ldos_with, make_wavepacket, PhaseMode};
    use crate::model::{
        assemble, build_levels, sample_perturbation, BandProfile, ModelMeta, SampleOptions,
    };
    use crate::spectral::{diagonalize, eigenstate_ldos, wavepacket_ldos, LdosKind};

    fn binning() -> Binning {
        Binning {
            width: 2.0,
            half_bins: 5,
            delta: 1.0,
        }
    }

    #[test]
    fn bin_indexing() {
        let b = binning();
        assert_eq!(b.len(), 11);
        assert_eq!(b.index(0.4), Some(5));
        assert_eq!(b.index(-2.2), Some(4));
        assert_eq!(b.index(11.5), None);
        assert_eq!(b.center(0), -10.0);
    }

    #[test]
    fn autocorrelation_of_two_points() {
        let d = LdosDistribution {
            offsets: vec![-1.0, 1.0],
            weights: vec![0.5, 0.5],
            center: 0.0,
            kind: LdosKind::Wavepacket,
        };
        let r = correlation_mass(&d, &d, &binning());
        assert_eq!(r[5], 0.5);
        assert_eq!(r[4], 0.25);
        assert_eq!(r[6], 0.25);
    }

    #[test]
    fn zero_dx_is_degenerate_and_few_samples_rejected() {
        let levels = build_levels(40, 1.0, 0.0, 0.0, 0).unwrap();
        let p = BandProfile::with_level_cutoff(1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let b = sample_perturbation(&levels, &p, SampleOptions::default(), 1).unwrap();
        let meta = ModelMeta {
            hbar: 1.0,
            k: 1.0,
            g: 0.0,
            delta: 1.0,
            gamma_cl: 10.0,
        };
        let model = assemble(levels, b, meta).unwrap();
        let decomp = diagonalize(&model, 0.0).unwrap();
        let ldos_dx = eigenstate_ldos(&model, &decomp, 20).unwrap();
        let mut sets = Vec::new();
        let mut wps = Vec::new();
        for seed in 0..MIN_REALIZATIONS as u64 {
            let wp =
                make_wavepacket(model.levels(), 20.0, 3.0, PhaseMode::RandomPhase, seed).unwrap();
            sets.push(effective_ldos_with(&model, &decomp, &wp).unwrap());
            wps.push(wavepacket_ldos(&model, &wp).unwrap());
        }
        let samples: Vec<_> = sets
            .iter()
            .zip(&wps)
            .map(|(a, w)| FactorizationSample {
                amplitudes: a,
                ldos_wpk: w,
                ldos_wpk_dx: None,
                ldos_dx: &ldos_dx,
            })
            .collect();
        let report = factorization_diagnostic(&samples, &binning()).unwrap();
        assert!(report.degenerate);
        assert!((report.bins[5].mean_re - 1.0).abs() < 1e-10);
        assert!(matches!(
            factorization_diagnostic(&samples[..3], &binning()),
            Err(Error::InsufficientStatistics { have: 3, need: 10 })
        ));
    }
}
