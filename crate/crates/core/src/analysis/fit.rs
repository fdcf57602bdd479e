use serde::{Deserialize, Serialize};

use crate::dynamics::DecayCurve;
use crate::error::{Error, Result};
use crate::registry::{decay_laws, DecayLaw};

pub const MIN_WINDOW_POINTS: usize = 16;
const LOG_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFamily {
    Exponential,
    Gaussian,
}

impl FitFamily {
    pub fn name(self) -> &'static str {
        match self {
            FitFamily::Exponential => "exponential",
            FitFamily::Gaussian => "gaussian",
        }
    }
}

/// Descent window `[upper -> max(floor, plateau_factor * plateau)]` and the
/// saturation floor subtracted before taking logs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPolicy {
    pub upper: f64,
    pub floor: f64,
    pub plateau_factor: f64,
    pub plateau: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            upper: 0.9,
            floor: 0.1,
            plateau_factor: 3.0,
            plateau: 0.0,
        }
    }
}

impl WindowPolicy {
    pub fn with_plateau(plateau: f64) -> Self {
        Self {
            plateau,
            ..Self::default()
        }
    }

    pub fn lower(&self) -> f64 {
        self.floor.max(self.plateau_factor * self.plateau)
    }

    /// Index range of the descent window, or `None` when the curve never
    /// enters it.
    pub fn select(&self, probabilities: &[f64]) -> Option<std::ops::Range<usize>> {
        let lower = self.lower();
        if lower >= self.upper {
            return None;
        }
        let start = probabilities.iter().position(|&p| p <= self.upper)?;
        let end = probabilities[start..]
            .iter()
            .position(|&p| p < lower)
            .map_or(probabilities.len(), |i| start + i);
        Some(start..end)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: FitFamily,
    /// Exponential: gamma. Gaussian: 1 / tau.
    pub rate: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub rms_log_residual: f64,
    pub plateau: f64,
    /// The curve never decayed into the window; `rate` is 0.
    pub no_decay: bool,
}

impl FitResult {
    fn no_decay(family: FitFamily, plateau: f64) -> Self {
        Self {
            family,
            rate: 0.0,
            intercept: 0.0,
            window: (0.0, 0.0),
            points: 0,
            rms_log_residual: 0.0,
            plateau,
            no_decay: true,
        }
    }

    /// Gaussian width `tau`; infinite for a zero rate.
    pub fn tau(&self) -> f64 {
        1.0 / self.rate
    }
}

/// Least-squares fit of `ln(M - plateau)` over the descent window.
pub fn fit_decay(
    curve: &DecayCurve,
    family: FitFamily,
    policy: &WindowPolicy,
) -> Result<FitResult> {
    let laws = decay_laws();
    fit_decay_with(curve, laws.get(family.name())?, policy)
}

pub fn fit_decay_with(
    curve: &DecayCurve,
    law: &dyn DecayLaw,
    policy: &WindowPolicy,
) -> Result<FitResult> {
    fit_samples(&curve.times, &curve.probabilities, law, policy)
}

pub(crate) fn fit_samples(
    times: &[f64],
    probabilities: &[f64],
    law: &dyn DecayLaw,
    policy: &WindowPolicy,
) -> Result<FitResult> {
    let Some(range) = policy.select(probabilities) else {
        return Ok(FitResult::no_decay(law.family(), policy.plateau));
    };
    if range.len() < MIN_WINDOW_POINTS {
        return Err(Error::InsufficientWindow(format!(
            "{} points in the descent window, need {MIN_WINDOW_POINTS}",
            range.len()
        )));
    }
    let xs: Vec<f64> = times[range.clone()]
        .iter()
        .map(|&t| law.regressor(t))
        .collect();
    let ys: Vec<f64> = probabilities[range.clone()]
        .iter()
        .map(|&p| (p - policy.plateau).max(LOG_GUARD).ln())
        .collect();
    let (slope, intercept) = linear_regression(&xs, &ys);
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(FitResult {
        family: law.family(),
        rate: law.rate_from_slope(slope),
        intercept,
        window: (times[range.start], times[range.end - 1]),
        points: range.len(),
        rms_log_residual: rms,
        plateau: policy.plateau,
        no_decay: false,
    })
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
