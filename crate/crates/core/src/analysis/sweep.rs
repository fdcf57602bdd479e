use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_samples, FitFamily, FitResult, WindowPolicy, MIN_WINDOW_POINTS};
use crate::dynamics::{
    averaged_eigenstate_fidelity, evolve_with, linear_time_grid, make_wavepacket, Averaging,
    DecayCurve, PhaseMode, Preparation, Wavepacket,
};
use crate::error::{Error, Result};
use crate::model::{ParametricModel, Provenance};
use crate::registry::decay_laws;
use crate::spectral::{
    averaged_ldos, core_width, diagonalize, eigenstate_ldos, participation_ratio,
    SpectralDecomposition, MIN_AVERAGED_REFERENCES,
};

/// Adaptive time grid: start at `horizon * hbar / Gamma`, extend by 4x until
/// the curve leaves the descent window (capped at `cap_heisenberg` Heisenberg
/// times `2 pi hbar / Delta`), and zoom in when the window is too sparse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimePolicy {
    pub points: usize,
    pub horizon: f64,
    pub cap_heisenberg: f64,
}

impl Default for TimePolicy {
    fn default() -> Self {
        Self {
            points: 512,
            horizon: 8.0,
            cap_heisenberg: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepPreparation {
    /// Fidelity of unperturbed eigenstates averaged over the references.
    Eigenstates { averaging: Averaging },
    /// Fidelity of one wavepacket centered on the middle of the spectrum
    /// (or at `center` when given).
    Wavepacket {
        sigma: f64,
        phase: PhaseMode,
        seed: u64,
        #[serde(default)]
        center: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dx_grid: Vec<f64>,
    /// Number of reference states, evenly spread over the central levels.
    pub references: usize,
    pub preparation: SweepPreparation,
    pub family: FitFamily,
    #[serde(default)]
    pub time: TimePolicy,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dx_grid.is_empty() {
            return Err(Error::invalid("dx grid is empty"));
        }
        if self.dx_grid.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::invalid(
                "dx grid entries must be finite and nonnegative",
            ));
        }
        if self.dx_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("dx grid must be strictly ascending"));
        }
        if self.references < MIN_AVERAGED_REFERENCES {
            return Err(Error::invalid(format!(
                "sweep needs at least {MIN_AVERAGED_REFERENCES} references, got {}",
                self.references
            )));
        }
        if self.time.points < 2 * MIN_WINDOW_POINTS
            || !(self.time.horizon > 0.0)
            || !(self.time.cap_heisenberg > 0.0)
        {
            return Err(Error::invalid(
                "time policy needs >= 32 points and positive horizon and cap",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    Ok,
    NoDecay,
    /// The point failed numerically; its values are zero.
    Gap,
}

impl PointFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointFlag::Ok => "ok",
            PointFlag::NoDecay => "no_decay",
            PointFlag::Gap => "gap",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub dx: f64,
    /// Fitted rate `gamma` (exponential) or `1 / tau` (gaussian).
    pub gamma: f64,
    pub gamma_residual: f64,
    /// Core width of the reference-averaged LDOS.
    pub width: f64,
    /// Mean single-reference participation ratio.
    pub participation: f64,
    pub flag: PointFlag,
    #[serde(default)]
    pub message: Option<String>,
}

impl SweepPoint {
    fn gap(dx: f64, err: &Error) -> Self {
        Self {
            dx,
            gamma: 0.0,
            gamma_residual: 0.0,
            width: 0.0,
            participation: 0.0,
            flag: PointFlag::Gap,
            message: Some(err.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub label: String,
    pub model_hash: String,
    pub provenance: Vec<Provenance>,
    pub family: FitFamily,
    pub references: Vec<usize>,
    pub points: Vec<SweepPoint>,
    pub seeds: Vec<u64>,
}

impl SweepResult {
    pub fn dx(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.dx).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.width).collect()
    }
}

/// `count` level indices evenly spread over the central levels.
pub fn spread_references(model: &ParametricModel, count: usize) -> Result<Vec<usize>> {
    let r = model.levels().central_range();
    let span = r.len();
    if count == 0 || count > span {
        return Err(Error::invalid(format!(
            "cannot pick {count} references from {span} central levels"
        )));
    }
    Ok((0..count)
        .map(|i| r.start + ((2 * i + 1) * span) / (2 * count))
        .collect())
}

/// Evaluates `Gamma` and the fitted decay rate at every `dx`. Points are
/// independent and evaluated in parallel; results keep grid order.
pub fn sweep(model: &ParametricModel, label: &str, config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let references = spread_references(model, config.references)?;
    let wavepacket = match &config.preparation {
        SweepPreparation::Eigenstates { .. } => None,
        SweepPreparation::Wavepacket {
            sigma,
            phase,
            seed,
            center,
        } => {
            let e = model.levels().energies();
            let mid = center.unwrap_or(0.5 * (e[0] + e[e.len() - 1]));
            Some(make_wavepacket(model.levels(), mid, *sigma, *phase, *seed)?)
        }
    };
    let points = config
        .dx_grid
        .par_iter()
        .map(|&dx| {
            sweep_point(model, dx, &references, wavepacket.as_ref(), config)
                .unwrap_or_else(|e| SweepPoint::gap(dx, &e))
        })
        .collect::<Vec<_>>();
    let mut seeds = model.perturbation().seeds();
    if let SweepPreparation::Wavepacket { seed, .. } = &config.preparation {
        seeds.push(*seed);
    }
    Ok(SweepResult {
        label: label.to_string(),
        model_hash: model.content_hash(),
        provenance: model.perturbation().provenance().to_vec(),
        family: config.family,
        references,
        points,
        seeds,
    })
}

/// Sweeps a model and its sign-randomized partner on the same grid.
pub fn sweep_pair(
    correlated: (&ParametricModel, &str),
    randomized: (&ParametricModel, &str),
    config: &SweepConfig,
) -> Result<(SweepResult, SweepResult)> {
    if correlated.0.dim() != randomized.0.dim() {
        return Err(Error::invalid("sweep partners differ in dimension"));
    }
    Ok((
        sweep(correlated.0, correlated.1, config)?,
        sweep(randomized.0, randomized.1, config)?,
    ))
}

fn sweep_point(
    model: &ParametricModel,
    dx: f64,
    references: &[usize],
    wavepacket: Option<&Wavepacket>,
    config: &SweepConfig,
) -> Result<SweepPoint> {
    let decomp = diagonalize(model, dx)?;
    let averaged = averaged_ldos(model, &decomp, references)?;
    let width = core_width(&averaged)?;
    let singles = references
        .iter()
        .map(|&r| eigenstate_ldos(model, &decomp, r))
        .collect::<Result<Vec<_>>>()?;
    let k = singles.len() as f64;
    let participation = singles.iter().map(participation_ratio).sum::<f64>() / k;
    let mean_ipr = singles
        .iter()
        .map(|d| 1.0 / participation_ratio(d))
        .sum::<f64>()
        / k;

    let mut point = SweepPoint {
        dx,
        gamma: 0.0,
        gamma_residual: 0.0,
        width: width.width,
        participation,
        flag: PointFlag::NoDecay,
        message: None,
    };
    if width.degenerate || width.width == 0.0 {
        return Ok(point);
    }
    let (plateau, eval): (f64, Box<dyn Fn(&[f64]) -> Result<DecayCurve> + '_>) =
        match (&config.preparation, wavepacket) {
            (SweepPreparation::Eigenstates { averaging }, _) => {
                let averaging = *averaging;
                let plateau = match averaging {
                    Averaging::Probability => mean_ipr,
                    Averaging::Amplitude => mean_ipr / k,
                };
                let decomp = &decomp;
                (
                    plateau,
                    Box::new(move |t: &[f64]| {
                        averaged_eigenstate_fidelity(model, decomp, references, t, averaging)
                    }),
                )
            }
            (SweepPreparation::Wavepacket { .. }, Some(wp)) => {
                let plateau = wavepacket_plateau(&decomp, wp);
                let decomp = &decomp;
                let prep = Preparation::Wavepacket(wp.clone());
                (
                    plateau,
                    Box::new(move |t: &[f64]| evolve_with(model, decomp, &prep, t)),
                )
            }
            (SweepPreparation::Wavepacket { .. }, None) => {
                unreachable!("wavepacket built before the sweep")
            }
        };
    let meta = model.meta();
    let t_initial = config.time.horizon * meta.hbar / width.width;
    let t_cap = config.time.cap_heisenberg * std::f64::consts::TAU * meta.hbar / meta.delta;
    let fit = adaptive_fit(
        &*eval,
        config.family,
        &WindowPolicy::with_plateau(plateau),
        t_initial,
        t_cap,
        config.time.points,
    )?;
    point.gamma = fit.rate;
    point.gamma_residual = fit.rms_log_residual;
    point.flag = if fit.no_decay {
        PointFlag::NoDecay
    } else {
        PointFlag::Ok
    };
    Ok(point)
}

/// Long-time average of `M(t)` for a wavepacket:
/// `sum_j |<j|psi>|^2 sum_m |<j|m>|^2 |a_m|^2`.
fn wavepacket_plateau(decomp: &SpectralDecomposition, wp: &Wavepacket) -> f64 {
    let n = decomp.dim();
    let u = &decomp.transform;
    let a = &wp.amplitudes;
    (0..n)
        .map(|j| {
            let p: Complex64 = (0..n).map(|i| a[i] * u[(i, j)]).sum();
            let spread: f64 = (0..n).map(|m| u[(m, j)].powi(2) * a[m].norm_sqr()).sum();
            p.norm_sqr() * spread
        })
        .sum()
}

const MAX_GRID_PASSES: usize = 10;

/// Fits a curve produced by `eval` on a grid chosen adaptively so the descent
/// window is both reached and resolved by at least the minimum point count.
pub fn adaptive_fit(
    eval: &dyn Fn(&[f64]) -> Result<DecayCurve>,
    family: FitFamily,
    policy: &WindowPolicy,
    t_initial: f64,
    t_cap: f64,
    points: usize,
) -> Result<FitResult> {
    let laws = decay_laws();
    let law = laws.get(family.name())?;
    let mut t_max = t_initial.min(t_cap);
    let mut last_err = None;
    for _ in 0..MAX_GRID_PASSES {
        let times = linear_time_grid(t_max, points);
        let curve = eval(&times)?;
        let p = &curve.probabilities;
        match policy.select(p) {
            None if t_max < t_cap => t_max = (4.0 * t_max).min(t_cap),
            None => return fit_samples(&curve.times, p, law, policy),
            Some(r) if r.end == p.len() && t_max < t_cap => t_max = (4.0 * t_max).min(t_cap),
            Some(r) if r.len() < MIN_WINDOW_POINTS => {
                let end = curve.times[r.end.min(p.len() - 1)];
                let zoomed = 1.5 * end;
                if zoomed >= t_max {
                    return fit_samples(&curve.times, p, law, policy);
                }
                t_max = zoomed;
                last_err = Some(r.len());
            }
            Some(_) => return fit_samples(&curve.times, p, law, policy),
        }
    }
    Err(Error::InsufficientWindow(format!(
        "no adequate time grid after {MAX_GRID_PASSES} passes (last window {} points)",
        last_err.unwrap_or(0)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::CurveLabel;
    use crate::model::{
        assemble, build_levels, sample_perturbation, BandProfile, ModelMeta, SampleOptions,
    };

    fn model(n: usize, seed: u64) -> ParametricModel {
        let levels = build_levels(n, 1.0, 0.0, 0.0, 0).unwrap();
        let p = BandProfile::with_level_cutoff(1.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let b = sample_perturbation(&levels, &p, SampleOptions::default(), seed).unwrap();
        let meta = ModelMeta {
            hbar: 1.0,
            k: 1.0,
            g: 0.0,
            delta: 1.0,
            gamma_cl: 40.0,
        };
        assemble(levels, b, meta).unwrap()
    }

    fn config(grid: Vec<f64>) -> SweepConfig {
        SweepConfig {
            dx_grid: grid,
            references: 10,
            preparation: SweepPreparation::Eigenstates {
                averaging: Averaging::Probability,
            },
            family: FitFamily::Exponential,
            time: TimePolicy::default(),
        }
    }

    #[test]
    fn references_are_central_and_distinct() {
        let m = model(100, 1);
        let r = spread_references(&m, 10).unwrap();
        assert_eq!(r.len(), 10);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        assert!(r.iter().all(|i| (10..90).contains(i)));
        assert!(spread_references(&m, 81).is_err());
    }

    #[test]
    fn zero_dx_point_has_no_decay() {
        let m = model(60, 2);
        let s = sweep(&m, "lbh", &config(vec![0.0, 0.5])).unwrap();
        let p0 = &s.points[0];
        assert_eq!(p0.flag, PointFlag::NoDecay);
        assert_eq!((p0.gamma, p0.width, p0.participation), (0.0, 0.0, 1.0));
        assert!(s.points[1].width > 0.0);
    }

    #[test]
    fn deterministic_and_validated() {
        let m = model(60, 3);
        let c = config(vec![0.3, 0.6]);
        assert_eq!(sweep(&m, "x", &c).unwrap(), sweep(&m, "x", &c).unwrap());
        assert!(sweep(&m, "x", &config(vec![0.6, 0.3])).is_err());
        assert!(sweep(&m, "x", &config(vec![-0.1])).is_err());
        let mut few = config(vec![0.3]);
        few.references = 3;
        assert!(few.validate().is_err());
    }

    #[test]
    fn adaptive_grid_resolves_fast_decay() {
        let rate = 50.0;
        let eval = |t: &[f64]| -> Result<DecayCurve> {
            let p: Vec<f64> = t.iter().map(|t| (-rate * t).exp()).collect();
            Ok(DecayCurve {
                times: t.to_vec(),
                amplitudes: p.iter().map(|&x| Complex64::new(x.sqrt(), 0.0)).collect(),
                probabilities: p,
                label: CurveLabel::Fidelity { dx: 1.0 },
            })
        };
        // initial horizon 100x too long: the window starts out sparse
        let fit = adaptive_fit(
            &eval,
            FitFamily::Exponential,
            &WindowPolicy::default(),
            10.0,
            100.0,
            64,
        )
        .unwrap();
        assert!((fit.rate - rate).abs() < 1e-6 * rate);
        assert!(fit.points >= MIN_WINDOW_POINTS);
        // initial horizon too short: the grid is extended
        let fit = adaptive_fit(
            &eval,
            FitFamily::Exponential,
            &WindowPolicy::default(),
            1e-3,
            100.0,
            64,
        )
        .unwrap();
        assert!((fit.rate - rate).abs() < 1e-6 * rate);
    }
}
