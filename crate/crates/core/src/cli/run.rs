use std::path::{Path, PathBuf};

use log::info;
use serde_json::json;

use super::config::{ExperimentConfig, ModelKind, PreparationSpec, Seeds, SyntheticPhysics};
use super::output::{
    decay_csv, factorization_csv, ldos_csv, sha256_hex, sweep_csv, Manifest, ModelRecord, Staging,
};
use super::Command;
use crate::analysis::{
    estimate_borders, factorization_diagnostic, spread_references, sweep, Binning,
    FactorizationSample, SweepConfig, SweepPreparation, SweepResult,
};
use crate::dynamics::{
    averaged_eigenstate_fidelity, effective_ldos_with, evolve_with, linear_time_grid,
    make_wavepacket, Preparation, Wavepacket,
};
use crate::error::{Error, Result};
use crate::model::{
    assemble, build_levels, ingest_model, render_model, sample_perturbation, sidecar_path,
    transform_perturbation, BandProfile, ModelFormat, ModelMeta, ParametricModel, SampleOptions,
    Transform,
};
use crate::registry::{model_families, FamilyParams};
use crate::spectral::{
    averaged_ldos, core_width, diagonalize, ldos, participation_ratio, perturbed_wavepacket_ldos,
    wavepacket_ldos, LdosMode,
};

pub const OUTPUT_DIR_ENV: &str = "PIDECAY_OUTPUT_DIR";

/// Models built from a configuration: the selected family and, when it has
/// one, its sign-randomized partner.
pub struct Models {
    pub model: ParametricModel,
    pub label: String,
    pub partner: Option<(ParametricModel, String)>,
    pub physics: serde_json::Value,
}

pub fn build_models(cfg: &ExperimentConfig, seeds: &Seeds) -> Result<Models> {
    let (base, cutoff, physics) = match cfg.model.kind {
        ModelKind::Synthetic => {
            let p = cfg.model.synthetic_physics()?;
            (
                synthetic_base(&p, seeds)?,
                p.cutoff_bandwidth_levels.unwrap_or(f64::INFINITY),
                serde_json::to_value(p)?,
            )
        }
        ModelKind::Ingest => {
            let path = cfg.model.path.as_ref().expect("validated");
            let (model, report) = ingest_model(path, ModelFormat::Text)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            let cutoff = cfg.model.cutoff_bandwidth_levels.unwrap_or(f64::INFINITY);
            let physics = json!({
                "source": path.display().to_string(),
                "levels_count": model.dim(),
                "meta": model.meta(),
                "cutoff_bandwidth_levels": cfg.model.cutoff_bandwidth_levels,
                "max_relative_asymmetry": report.max_relative_asymmetry,
                "ingest_warnings": report.warnings,
            });
            (model, cutoff, physics)
        }
    };
    let families = model_families();
    let family = families.get(&cfg.model.family)?;
    let params = FamilyParams {
        cutoff_bandwidth: cutoff,
        randomize_seed: seeds.randomize,
    };
    let model = family.build(&base, &params)?;
    let partner = match family.randomized_partner() {
        Some(name) => Some((families.get(name)?.build(&base, &params)?, name.to_string())),
        None => None,
    };
    Ok(Models {
        model,
        label: family.name().to_string(),
        partner,
        physics,
    })
}

fn synthetic_base(p: &SyntheticPhysics, seeds: &Seeds) -> Result<ParametricModel> {
    let levels = build_levels(
        p.levels_count,
        p.delta_energy,
        0.0,
        p.level_jitter_spacing,
        seeds.levels,
    )?;
    let profile = BandProfile::new(
        p.wavenumber_k,
        p.g_exponent,
        p.hbar,
        p.delta_energy,
        p.c_norm,
        p.omega_min_rate,
    )?;
    let options = SampleOptions {
        diag: p.diagonal,
        ..SampleOptions::default()
    };
    let b = sample_perturbation(&levels, &profile, options, seeds.perturbation)?;
    let meta = ModelMeta {
        hbar: p.hbar,
        k: p.wavenumber_k,
        g: p.g_exponent,
        delta: p.delta_energy,
        gamma_cl: p.gamma_cl_rate,
    };
    assemble(levels, b, meta)
}

fn make_packet(
    model: &ParametricModel,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Option<Wavepacket>> {
    match &cfg.run.preparation {
        PreparationSpec::Wavepacket {
            sigma_energy,
            phase,
            center_energy,
        } => {
            let e = model.levels().energies();
            let center = center_energy.unwrap_or(0.5 * (e[0] + e[e.len() - 1]));
            Ok(Some(make_wavepacket(
                model.levels(),
                center,
                *sigma_energy,
                *phase,
                seed,
            )?))
        }
        _ => Ok(None),
    }
}

fn preparation_descriptor(cfg: &ExperimentConfig, seeds: &Seeds) -> String {
    match &cfg.run.preparation {
        PreparationSpec::Eigenstate { reference } => format!("eigenstate reference={reference}"),
        PreparationSpec::Eigenstates { averaging } => {
            format!(
                "eigenstates references={} averaging={averaging:?}",
                cfg.run.references
            )
        }
        PreparationSpec::Wavepacket {
            sigma_energy,
            phase,
            center_energy,
        } => format!(
            "wavepacket sigma={sigma_energy} phase={phase:?} center={} seed={}",
            center_energy.map_or("mid".to_string(), |c| c.to_string()),
            seeds.wavepacket
        ),
    }
}

fn sweep_config(cfg: &ExperimentConfig, seeds: &Seeds) -> Result<SweepConfig> {
    let preparation = match &cfg.run.preparation {
        PreparationSpec::Eigenstate { .. } => {
            return Err(Error::Config(
                "sweeps need run.preparation kind \"eigenstates\" or \"wavepacket\"".into(),
            ))
        }
        PreparationSpec::Eigenstates { averaging } => SweepPreparation::Eigenstates {
            averaging: *averaging,
        },
        PreparationSpec::Wavepacket {
            sigma_energy,
            phase,
            center_energy,
        } => SweepPreparation::Wavepacket {
            sigma: *sigma_energy,
            phase: *phase,
            seed: seeds.wavepacket,
            center: *center_energy,
        },
    };
    Ok(SweepConfig {
        dx_grid: cfg.run.dx_grid.values(),
        references: cfg.run.references,
        preparation,
        family: cfg.run.fit_family,
        time: cfg.run.sweep_time,
    })
}

fn run_build(models: &Models, staging: &mut Staging) -> Result<()> {
    let name = format!("model_{}.txt", models.label);
    let (text, sidecar) = render_model(&models.model)?;
    staging.add(
        sidecar_path(Path::new(&name)).display().to_string(),
        sidecar,
    );
    staging.add(name, text);
    Ok(())
}

fn run_ldos(
    models: &Models,
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    staging: &mut Staging,
) -> Result<()> {
    let model = &models.model;
    if let Some(wp) = make_packet(model, cfg, seeds.wavepacket)? {
        let d = wavepacket_ldos(model, &wp)?;
        let header = vec![
            preparation_descriptor(cfg, seeds),
            format!("participation = {}", participation_ratio(&d)),
        ];
        staging.add("ldos_wavepacket.csv", ldos_csv(&d, &header));
        return Ok(());
    }
    for (i, dx) in cfg.run.dx_grid.values().into_iter().enumerate() {
        let mode = match &cfg.run.preparation {
            PreparationSpec::Eigenstate { reference } => LdosMode::Eigenstate {
                dx,
                reference: *reference,
            },
            _ => LdosMode::Averaged {
                dx,
                references: spread_references(model, cfg.run.references)?,
            },
        };
        let d = ldos(model, &mode)?;
        let header = vec![
            format!("dx = {dx}"),
            preparation_descriptor(cfg, seeds),
            format!("Gamma = {}", core_width(&d)?.width),
            format!("participation = {}", participation_ratio(&d)),
        ];
        staging.add(format!("ldos_{i:02}.csv"), ldos_csv(&d, &header));
    }
    Ok(())
}

fn run_decay(
    models: &Models,
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    staging: &mut Staging,
) -> Result<()> {
    let model = &models.model;
    let t_max = cfg
        .run
        .t_max_time
        .ok_or_else(|| Error::Config("run.t_max_time is required for decay".into()))?;
    let times = linear_time_grid(t_max, cfg.run.time_points);
    let packet = make_packet(model, cfg, seeds.wavepacket)?;
    for (i, dx) in cfg.run.dx_grid.values().into_iter().enumerate() {
        let decomp = diagonalize(model, dx)?;
        let curve = match (&cfg.run.preparation, &packet) {
            (PreparationSpec::Eigenstate { reference }, _) => {
                evolve_with(model, &decomp, &Preparation::Eigenstate(*reference), &times)?
            }
            (PreparationSpec::Eigenstates { averaging }, _) => {
                let refs = spread_references(model, cfg.run.references)?;
                averaged_eigenstate_fidelity(model, &decomp, &refs, &times, *averaging)?
            }
            (PreparationSpec::Wavepacket { .. }, Some(wp)) => {
                evolve_with(model, &decomp, &Preparation::Wavepacket(wp.clone()), &times)?
            }
            (PreparationSpec::Wavepacket { .. }, None) => unreachable!("packet built above"),
        };
        let header = vec![
            format!("dx = {dx}"),
            format!("model = {}", models.label),
            preparation_descriptor(cfg, seeds),
            format!("seeds = {seeds:?}"),
        ];
        info!(
            "decay dx = {dx}: M(t_max) = {}",
            curve.probabilities.last().copied().unwrap_or(f64::NAN)
        );
        staging.add(format!("decay_{i:02}.csv"), decay_csv(&curve, &header));
    }
    Ok(())
}

fn sweep_and_borders(
    models: &Models,
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    staging: &mut Staging,
    with_partner: bool,
) -> Result<Vec<SweepResult>> {
    let sc = sweep_config(cfg, seeds)?;
    let mut results = vec![sweep(&models.model, &models.label, &sc)?];
    if with_partner {
        if let Some((partner, label)) = &models.partner {
            results.push(sweep(partner, label, &sc)?);
        }
    }
    let mut borders = serde_json::Map::new();
    for r in &results {
        staging.add(format!("sweep_{}.csv", r.label), sweep_csv(r));
        let b = estimate_borders(r, models.model.meta(), cfg.model.parameterization)?;
        borders.insert(r.label.clone(), serde_json::to_value(b)?);
    }
    staging.add(
        "borders.json",
        serde_json::to_string_pretty(&borders)? + "\n",
    );
    Ok(results)
}

fn run_diagnostic(
    models: &Models,
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    staging: &mut Staging,
) -> Result<()> {
    let base = &models.model;
    if !matches!(cfg.run.preparation, PreparationSpec::Wavepacket { .. }) {
        return Err(Error::Config(
            "diagnostic needs run.preparation kind \"wavepacket\"".into(),
        ));
    }
    let delta = base.meta().delta;
    let binning = Binning {
        width: cfg.run.bin_width_energy.unwrap_or(2.0 * delta),
        half_bins: cfg.run.half_bins,
        delta,
    };
    let references = spread_references(base, cfg.run.references)?;
    for (i, dx) in cfg.run.dx_grid.values().into_iter().enumerate() {
        let mut sets = Vec::with_capacity(cfg.run.realizations);
        for r in 0..cfg.run.realizations as u64 {
            let b = transform_perturbation(
                base.perturbation(),
                Transform::SignRandomize {
                    seed: seeds.randomize.wrapping_add(r + 1),
                },
            )?;
            let model = base.with_perturbation(b)?;
            let wp =
                make_packet(&model, cfg, seeds.wavepacket.wrapping_add(r))?.expect("checked above");
            let decomp = diagonalize(&model, dx)?;
            let amplitudes = effective_ldos_with(&model, &decomp, &wp)?;
            let ldos_wpk = wavepacket_ldos(&model, &wp)?;
            let ldos_wpk_dx = perturbed_wavepacket_ldos(&model, &decomp, &wp)?;
            let ldos_dx = averaged_ldos(&model, &decomp, &references)?;
            sets.push((amplitudes, ldos_wpk, ldos_wpk_dx, ldos_dx));
        }
        let samples: Vec<_> = sets
            .iter()
            .map(|(a, w, p, l)| FactorizationSample {
                amplitudes: a,
                ldos_wpk: w,
                ldos_wpk_dx: Some(p),
                ldos_dx: l,
            })
            .collect();
        let report = factorization_diagnostic(&samples, &binning)?;
        let header = vec![format!("dx = {dx}"), preparation_descriptor(cfg, seeds)];
        staging.add(
            format!("factorization_{i:02}.csv"),
            factorization_csv(&report, &header),
        );
    }
    Ok(())
}

/// Resolves seeds, runs `command`, and commits the artifacts plus manifest to
/// `output` (or the configured directory). Nothing is written on failure.
pub fn execute(
    cfg: &ExperimentConfig,
    command: Command,
    output: Option<&Path>,
) -> Result<(PathBuf, Manifest)> {
    cfg.validate()?;
    cfg.check_paths()?;
    let seeds = cfg.seeds.resolve();
    let mut resolved = cfg.clone();
    resolved.seeds = seeds.into();
    let models = build_models(&resolved, &seeds)?;
    let mut staging = Staging::default();
    match command {
        Command::Build => run_build(&models, &mut staging)?,
        Command::Ldos => run_ldos(&models, &resolved, &seeds, &mut staging)?,
        Command::Decay => run_decay(&models, &resolved, &seeds, &mut staging)?,
        Command::Sweep => {
            sweep_and_borders(&models, &resolved, &seeds, &mut staging, true)?;
        }
        Command::Borders => {
            sweep_and_borders(&models, &resolved, &seeds, &mut staging, false)?;
        }
        Command::Diagnostic => run_diagnostic(&models, &resolved, &seeds, &mut staging)?,
    }
    let mut records = vec![ModelRecord {
        label: models.label.clone(),
        hash: models.model.content_hash(),
        provenance: models.model.perturbation().provenance().to_vec(),
    }];
    if let Some((p, label)) = &models.partner {
        records.push(ModelRecord {
            label: label.clone(),
            hash: p.content_hash(),
            provenance: p.perturbation().provenance().to_vec(),
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        config_hash: sha256_hex(serde_json::to_string(&resolved)?.as_bytes()),
        resolved_config: resolved,
        seeds,
        physics: models.physics,
        models: records,
        artifacts: staging.records(),
    };
    let dir = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output.directory.clone());
    info!(
        "writing {} artifacts to {}",
        staging.names().len(),
        dir.display()
    );
    staging.commit(&dir, &manifest)?;
    Ok((dir, manifest))
}

/// Reruns the command recorded in a manifest with its resolved configuration.
pub fn replay(manifest_path: &Path, output: Option<&Path>) -> Result<(PathBuf, Manifest)> {
    let m = Manifest::load(manifest_path)?;
    execute(&m.resolved_config, m.command, output)
}
