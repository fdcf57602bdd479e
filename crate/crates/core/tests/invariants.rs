use num_complex::Complex64;
use proptest::prelude::*;

use pidecay::dynamics::{
    effective_ldos, evolve, linear_time_grid, make_wavepacket, survival, PhaseMode, Preparation,
};
use pidecay::model::{
    assemble, build_levels, export_model, ingest_model, sample_perturbation,
    transform_perturbation, BandProfile, ModelFormat, ModelMeta, SampleOptions, Transform,
};
use pidecay::spectral::{
    core_width, diagonalize, eigenstate_ldos, participation_ratio, wavepacket_ldos,
};
use pidecay::ParametricModel;

fn model(n: usize, g: f64, cutoff: Option<f64>, seed: u64) -> ParametricModel {
    let levels = build_levels(n, 1.0, 0.0, 0.0, seed).unwrap();
    let profile = BandProfile::with_level_cutoff(1.0, g, 1.0, 1.0, std::f64::consts::TAU).unwrap();
    let mut b = sample_perturbation(&levels, &profile, SampleOptions::default(), seed).unwrap();
    if let Some(bandwidth) = cutoff {
        b = transform_perturbation(&b, Transform::GaussianCutoff { bandwidth }).unwrap();
    }
    let meta = ModelMeta {
        hbar: 1.0,
        k: 1.0,
        g,
        delta: 1.0,
        gamma_cl: 20.0,
    };
    assemble(levels, b, meta).unwrap()
}

fn packet(m: &ParametricModel, sigma: f64, seed: u64) -> pidecay::dynamics::Wavepacket {
    let e = m.levels().energies();
    let center = 0.5 * (e[0] + e[e.len() - 1]);
    make_wavepacket(m.levels(), center, sigma, PhaseMode::RandomPhase, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampled_matrix_is_exactly_symmetric(n in 2usize..40, g in 0.0f64..1.0, seed in any::<u64>()) {
        let m = model(n, g, Some(5.0), seed);
        let b = m.perturbation().entries();
        prop_assert_eq!(b, &b.transpose());
    }

    #[test]
    fn sign_randomization_keeps_magnitudes(n in 2usize..40, seed in any::<u64>(), flip in any::<u64>()) {
        let m = model(n, 0.5, None, seed);
        let r = transform_perturbation(m.perturbation(), Transform::SignRandomize { seed: flip }).unwrap();
        prop_assert_eq!(m.perturbation().entries().abs(), r.entries().abs());
        prop_assert_eq!(r.entries(), &r.entries().transpose());
    }

    #[test]
    fn decay_curves_are_unitary(n in 8usize..28, dx in 0.0f64..3.0, seed in any::<u64>()) {
        let m = model(n, 0.0, Some(6.0), seed);
        let times = linear_time_grid(20.0, 61);
        let wp = make_wavepacket(m.levels(), 0.5 * (n as f64 - 1.0), 3.0, PhaseMode::RandomPhase, seed).unwrap();
        for prep in [Preparation::Eigenstate(n / 2), Preparation::Wavepacket(wp)] {
            for curve in [evolve(&m, dx, &prep, &times).unwrap(), survival(&m, dx, &prep, &times).unwrap()] {
                prop_assert!((curve.probabilities[0] - 1.0).abs() < 1e-12);
                for p in &curve.probabilities {
                    prop_assert!(*p <= 1.0 + 1e-10 && *p >= 0.0);
                }
            }
        }
    }

    #[test]
    fn eigenstate_fidelity_equals_survival(n in 4usize..28, dx in 0.0f64..3.0, seed in any::<u64>(), pick in 0.0f64..1.0) {
        let m = model(n, 1.0, None, seed);
        let r = ((n - 1) as f64 * pick) as usize;
        let times = linear_time_grid(15.0, 51);
        let f = evolve(&m, dx, &Preparation::Eigenstate(r), &times).unwrap();
        let s = survival(&m, dx, &Preparation::Eigenstate(r), &times).unwrap();
        for (a, b) in f.probabilities.iter().zip(&s.probabilities) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn real_state_survival_is_time_reversal_symmetric(n in 4usize..24, dx in 0.1f64..2.0, seed in any::<u64>()) {
        let m = model(n, 0.0, None, seed);
        let decomp = diagonalize(&m, dx).unwrap();
        let d = eigenstate_ldos(&m, &decomp, n / 2).unwrap();
        // real eigenvectors: c(-t) = conj c(t), so P is even in t
        let c = |t: f64| -> Complex64 { d.offsets.iter().zip(&d.weights).map(|(w, p)| p * Complex64::from_polar(1.0, -w * t)).sum() };
        for t in [0.3, 1.7, 5.0] {
            prop_assert!((c(-t) - c(t).conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn eigenstate_survival_is_fourier_transform_of_ldos(n in 4usize..28, dx in 0.05f64..3.0, seed in any::<u64>()) {
        let m = model(n, 0.5, Some(8.0), seed);
        let r = n / 3;
        let times = linear_time_grid(12.0, 41);
        let decomp = diagonalize(&m, dx).unwrap();
        let d = eigenstate_ldos(&m, &decomp, r).unwrap();
        let s = survival(&m, dx, &Preparation::Eigenstate(r), &times).unwrap();
        for (t, p) in times.iter().zip(&s.probabilities) {
            let c: Complex64 = d.offsets.iter().zip(&d.weights).map(|(w, q)| q * Complex64::from_polar(1.0, -w * t)).sum();
            prop_assert!((c.norm_sqr() - p).abs() < 1e-9);
        }
    }

    #[test]
    fn ldos_normalized_and_second_moment_exact(n in 3usize..30, dx in 0.0f64..2.0, seed in any::<u64>()) {
        let m = model(n, 0.0, Some(4.0), seed);
        let r = n / 2;
        let decomp = diagonalize(&m, dx).unwrap();
        let d = eigenstate_ldos(&m, &decomp, r).unwrap();
        let total: f64 = d.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        let mean: f64 = d.offsets.iter().zip(&d.weights).map(|(w, p)| w * p).sum();
        let var: f64 = d.offsets.iter().zip(&d.weights).map(|(w, p)| (w - mean).powi(2) * p).sum();
        let expected = dx * dx * m.perturbation().off_diagonal_row_norm2(r);
        prop_assert!((var - expected).abs() <= 1e-8 * expected + 1e-12);
    }

    #[test]
    fn core_width_scales_with_energy_units(n in 12usize..30, dx in 0.3f64..2.0, seed in any::<u64>()) {
        let m = model(n, 0.0, None, seed);
        let decomp = diagonalize(&m, dx).unwrap();
        let mut d = eigenstate_ldos(&m, &decomp, n / 2).unwrap();
        let w = core_width(&d).unwrap().width;
        let pr = participation_ratio(&d);
        d.offsets.iter_mut().for_each(|o| *o *= 3.0);
        prop_assert!((core_width(&d).unwrap().width - 3.0 * w).abs() < 1e-9 * w.max(1.0));
        prop_assert!((participation_ratio(&d) - pr).abs() < 1e-12);
    }

    #[test]
    fn effective_ldos_sum_rule_and_fourier_consistency(n in 16usize..32, dx in 0.0f64..2.0, seed in any::<u64>()) {
        let m = model(n, 0.0, Some(6.0), seed);
        let wp = packet(&m, 3.0, seed);
        let f = effective_ldos(&m, dx, &wp).unwrap();
        prop_assert!((f.sum - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        let times = linear_time_grid(25.0, 51);
        let curve = evolve(&m, dx, &Preparation::Wavepacket(wp), &times).unwrap();
        for (t, a) in times.iter().zip(&curve.amplitudes) {
            prop_assert!((f.amplitude(*t) - a).norm() < 1e-9);
        }
    }
}

#[test]
fn amplitude_mass_tracks_square_root_of_participation() {
    for seed in 0..5 {
        let m = model(400, 1.0, Some(10.0), 40 + seed);
        let dx = 2.0;
        let wp = packet(&m, 5.0, 90 + seed);
        let f = effective_ldos(&m, dx, &wp).unwrap();
        let decomp = diagonalize(&m, dx).unwrap();
        let d = eigenstate_ldos(&m, &decomp, 200).unwrap();
        let ratio = f.sum_abs() / participation_ratio(&d).sqrt();
        assert!(
            (1.0 / 3.0..=3.0).contains(&ratio),
            "seed {seed}: ratio {ratio}"
        );
    }
}

#[test]
fn wavepacket_ldos_matches_requested_moments() {
    let m = model(200, 0.0, None, 3);
    for sigma in [3.0, 5.0, 8.0] {
        let wp = make_wavepacket(m.levels(), 100.0, sigma, PhaseMode::RandomSign, 5).unwrap();
        let d = wavepacket_ldos(&m, &wp).unwrap();
        let mean: f64 = d
            .offsets
            .iter()
            .zip(&d.weights)
            .map(|(o, w)| (o + d.center) * w)
            .sum();
        let var: f64 = d
            .offsets
            .iter()
            .zip(&d.weights)
            .map(|(o, w)| (o + d.center - mean).powi(2) * w)
            .sum();
        assert!((mean - 100.0).abs() < 0.1, "mean {mean}");
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.1, "variance {var}");
    }
}

#[test]
fn export_ingest_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let m = model(30, 0.5, Some(4.0), 17);
    let path = dir.path().join("model.txt");
    export_model(&m, &path).unwrap();
    let (back, report) = ingest_model(&path, ModelFormat::Text).unwrap();
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    assert_eq!(back.levels().energies(), m.levels().energies());
    assert_eq!(back.perturbation().entries(), m.perturbation().entries());
    assert_eq!(back.content_hash(), m.content_hash());
}

#[test]
fn thousand_level_band_profile_is_reproduced() {
    // element variance 1/|n - m| for g = 1; check the empirical variance per diagonal band
    let m = model(1000, 1.0, None, 21);
    let b = m.perturbation().entries();
    for d in [1usize, 4, 16, 64] {
        let vals: Vec<f64> = (0..1000 - d).map(|i| b[(i, i + d)]).collect();
        let var = vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64;
        let expected = 1.0 / d as f64;
        let se = expected * (2.0 / vals.len() as f64).sqrt();
        assert!(
            (var - expected).abs() < 4.0 * se,
            "band {d}: {var} vs {expected}"
        );
    }
}
