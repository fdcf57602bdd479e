use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::fit::linear_regression;
use super::sweep::{PointFlag, SweepResult};
use crate::error::{Error, Result};
use crate::model::ModelMeta;

/// Minimum number of in-window points for a scaling exponent.
pub const MIN_SCALING_POINTS: usize = 4;

/// Length scale that turns `k * dx` into the dimensionless perturbation
/// entering `Gamma = hbar * gamma_cl * (k * dx / scale)^(2 / (1 + g))`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// `scale = 1`: the border sits at `k * dx = 1`.
    #[default]
    Reduced,
    /// `scale = 2 pi`: the border sits at one wavelength, `dx = 2 pi / k`.
    HardWall,
}

impl Parameterization {
    pub fn scale(self) -> f64 {
        match self {
            Parameterization::Reduced => 1.0,
            Parameterization::HardWall => TAU,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderMethod {
    /// Log-log interpolation between the two grid points bracketing the level.
    LogLogInterpolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorderEstimates {
    /// `Gamma(dx_c) = Delta`; `None` when the sweep does not bracket it.
    pub dx_c: Option<f64>,
    /// `Gamma(dx_nu) = hbar * gamma_cl`.
    pub dx_nu: Option<f64>,
    /// Fidelity border: where `hbar * gamma / Gamma` falls through 1/2.
    pub dx_nud: Option<f64>,
    /// Closed-form `dx_nu` from the power law.
    pub analytic_dx_nu: f64,
    pub parameterization: Parameterization,
    pub method: BorderMethod,
}

/// Log-log slope of `Gamma` against `dx` over points with `lo < Gamma < hi`.
pub fn scaling_exponent(sweep: &SweepResult, window: (f64, f64)) -> Result<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = sweep
        .points
        .iter()
        .filter(|p| {
            p.flag != PointFlag::Gap && p.dx > 0.0 && p.width > window.0 && p.width < window.1
        })
        .map(|p| (p.dx.ln(), p.width.ln()))
        .unzip();
    if xs.len() < MIN_SCALING_POINTS {
        return Err(Error::InsufficientWindow(format!(
            "{} sweep points with Gamma in ({}, {}), need {MIN_SCALING_POINTS}",
            xs.len(),
            window.0,
            window.1
        )));
    }
    Ok(linear_regression(&xs, &ys).0)
}

/// First upward crossing of `level` by `ys(xs)`, interpolated in log-log.
fn crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    xs.windows(2).zip(ys.windows(2)).find_map(|(x, y)| {
        if !(x[0] > 0.0 && y[0] > 0.0 && y[1] > 0.0) {
            return None;
        }
        if y[0] == level {
            return Some(x[0]);
        }
        if y[0] < level && y[1] >= level {
            let (lx0, lx1) = (x[0].ln(), x[1].ln());
            let (ly0, ly1) = (y[0].ln(), y[1].ln());
            let s = (level.ln() - ly0) / (ly1 - ly0);
            Some((lx0 + s * (lx1 - lx0)).exp())
        } else {
            None
        }
    })
}

pub fn estimate_borders(
    sweep: &SweepResult,
    meta: &ModelMeta,
    parameterization: Parameterization,
) -> Result<BorderEstimates> {
    meta.validate()?;
    let valid: Vec<_> = sweep
        .points
        .iter()
        .filter(|p| p.flag != PointFlag::Gap)
        .collect();
    let dx: Vec<f64> = valid.iter().map(|p| p.dx).collect();
    let width: Vec<f64> = valid.iter().map(|p| p.width).collect();
    let dx_c = crossing(&dx, &width, meta.delta);
    let dx_nu = crossing(&dx, &width, meta.hbar * meta.gamma_cl);

    // fidelity border: the rate ratio must drop from >= 1/2 to < 1/2
    let decaying: Vec<_> = valid
        .iter()
        .filter(|p| p.flag == PointFlag::Ok && p.width > meta.delta)
        .collect();
    let ratio_dx: Vec<f64> = decaying.iter().map(|p| p.dx).collect();
    let inverse_ratio: Vec<f64> = decaying
        .iter()
        .map(|p| p.width / (meta.hbar * p.gamma.max(f64::MIN_POSITIVE)))
        .collect();
    let dx_nud = crossing(&ratio_dx, &inverse_ratio, 2.0);

    let analytic_dx_nu = analytic_border(meta, parameterization)?;
    Ok(BorderEstimates {
        dx_c,
        dx_nu,
        dx_nud,
        analytic_dx_nu,
        parameterization,
        method: BorderMethod::LogLogInterpolation,
    })
}

/// `Gamma(dx)` of the strong-chaos power law.
pub fn power_law_width(meta: &ModelMeta, parameterization: Parameterization, dx: f64) -> f64 {
    let x = meta.k * dx / parameterization.scale();
    meta.hbar * meta.gamma_cl * x.powf(2.0 / (1.0 + meta.g))
}

/// Solves `power_law_width(dx) = hbar * gamma_cl` by bisection in `ln dx`.
pub fn analytic_border(meta: &ModelMeta, parameterization: Parameterization) -> Result<f64> {
    meta.validate()?;
    let target = (meta.hbar * meta.gamma_cl).ln();
    let f = |ln_dx: f64| power_law_width(meta, parameterization, ln_dx.exp()).ln() - target;
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::invalid("border not bracketed by the solver range"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Exponent of `dx_c ~ k^p` for a `d`-dimensional system.
pub fn dx_c_k_exponent(g: f64, d: f64) -> f64 {
    -((1.0 - g) + (1.0 + g) * d) / 2.0
}

/// Ratio of observed to predicted `dx_c(k2) / dx_c(k1)`; 1 when the data follow
/// the k-scaling.
pub fn dx_c_k_scaling_ratio(dx_c1: f64, k1: f64, dx_c2: f64, k2: f64, g: f64, d: f64) -> f64 {
    (dx_c2 / dx_c1) / (k2 / k1).powf(dx_c_k_exponent(g, d))
}
