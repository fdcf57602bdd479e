use super::LdosDistribution;
use crate::error::{Error, Result};

/// Probability mass of the central region whose width defines Gamma.
pub const CORE_FRACTION: f64 = 0.7;

/// Weights at or below this value do not count as support and are skipped by
/// the quantile staircase (eigensolver noise around a point mass would
/// otherwise open a spurious gap).
const SUPPORT_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoreWidth {
    pub width: f64,
    /// Set when the distribution has a single support point.
    pub degenerate: bool,
}

/// Quantile of the weight distribution over offsets, linearly interpolated
/// between consecutive points of the cumulative staircase.
pub fn weighted_quantile(dist: &LdosDistribution, p: f64) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = dist
        .offsets
        .iter()
        .zip(&dist.weights)
        .filter(|&(_, &w)| w > SUPPORT_FLOOR)
        .map(|(&o, &w)| (o, w))
        .collect();
    if pts.is_empty() {
        return None;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let target = p.clamp(0.0, 1.0) * total;
    let mut cum_prev = 0.0;
    for (k, &(omega, w)) in pts.iter().enumerate() {
        let cum = cum_prev + w;
        if cum >= target {
            if k == 0 {
                return Some(omega);
            }
            let omega_prev = pts[k - 1].0;
            let t = (target - cum_prev) / w;
            return Some(omega_prev + t * (omega - omega_prev));
        }
        cum_prev = cum;
    }
    Some(pts[pts.len() - 1].0)
}

/// Width of the central region holding 70% of the weight:
/// `q(0.85) - q(0.15)`.
pub fn core_width(dist: &LdosDistribution) -> Result<CoreWidth> {
    let support = dist.weights.iter().filter(|&&w| w > SUPPORT_FLOOR).count();
    match support {
        0 => Err(Error::DegenerateDistribution(
            "distribution has no support".into(),
        )),
        1 => Ok(CoreWidth {
            width: 0.0,
            degenerate: true,
        }),
        _ => {
            let tail = 0.5 * (1.0 - CORE_FRACTION);
            let lo = weighted_quantile(dist, tail).expect("nonempty support");
            let hi = weighted_quantile(dist, 1.0 - tail).expect("nonempty support");
            Ok(CoreWidth {
                width: (hi - lo).max(0.0),
                degenerate: false,
            })
        }
    }
}

/// Effective number of components, `(sum w)^2 / sum w^2`.
pub fn participation_ratio(dist: &LdosDistribution) -> f64 {
    let total: f64 = dist.weights.iter().sum();
    let sq: f64 = dist.weights.iter().map(|w| w * w).sum();
    total * total / sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::LdosKind;

    fn dist(offsets: Vec<f64>, weights: Vec<f64>) -> LdosDistribution {
        LdosDistribution {
            offsets,
            weights,
            center: 0.0,
            kind: LdosKind::Wavepacket,
        }
    }

    #[test]
    fn point_mass_is_degenerate() {
        let d = dist(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]);
        let w = core_width(&d).unwrap();
        assert_eq!(w.width, 0.0);
        assert!(w.degenerate);
        assert_eq!(participation_ratio(&d), 1.0);
        assert!(core_width(&dist(vec![0.0], vec![0.0])).is_err());
    }

    #[test]
    fn uniform_eleven_points() {
        let offsets: Vec<f64> = (-5..=5).map(f64::from).collect();
        let d = dist(offsets, vec![1.0 / 11.0; 11]);
        let w = core_width(&d).unwrap();
        // continuous staircase interpolation gives 0.7 * 11 = 7.7
        assert!((w.width - 7.7).abs() < 1e-12, "{}", w.width);
        assert!((w.width - 7.0).abs() <= 1.0);
        assert!(!w.degenerate);
    }

    #[test]
    fn participation_of_uniform_and_two_level() {
        let d = dist((0..10).map(f64::from).collect(), vec![0.1; 10]);
        assert!((participation_ratio(&d) - 10.0).abs() < 1e-12);
        let c2 = 0.5 + 0.5 / 2f64.sqrt();
        let d = dist(vec![0.0, 1.0], vec![c2, 1.0 - c2]);
        let expect = 1.0 / (c2 * c2 + (1.0 - c2) * (1.0 - c2));
        assert!((participation_ratio(&d) - expect).abs() < 1e-12);
        assert!((expect - 1.3333).abs() < 1e-3);
    }

    #[test]
    fn width_scales_with_offsets() {
        let offsets: Vec<f64> = (0..40)
            .map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64 * 0.1)
            .collect();
        let weights: Vec<f64> = (0..40).map(|i| 1.0 + (i % 7) as f64).collect();
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let base = core_width(&dist(offsets.clone(), weights.clone()))
            .unwrap()
            .width;
        for c in [0.5, 2.0, 8.0] {
            let scaled = core_width(&dist(
                offsets.iter().map(|o| o * c).collect(),
                weights.clone(),
            ))
            .unwrap()
            .width;
            assert_eq!(scaled, base * c);
        }
        let scaled = core_width(&dist(offsets.iter().map(|o| o * 1.7).collect(), weights))
            .unwrap()
            .width;
        assert!((scaled - 1.7 * base).abs() < 1e-12 * base);
    }
}
