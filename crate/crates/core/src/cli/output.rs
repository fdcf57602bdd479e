//! Artifact rendering (CSV / JSON) and the staged, atomic run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Seeds};
use super::Command;
use crate::analysis::{FactorizationReport, SweepResult};
use crate::dynamics::DecayCurve;
use crate::error::Result;
use crate::model::{write_atomic, Provenance};
use crate::spectral::LdosDistribution;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn comments(out: &mut String, lines: &[String]) {
    for l in lines {
        let _ = writeln!(out, "# {l}");
    }
}

pub fn decay_csv(curve: &DecayCurve, header: &[String]) -> String {
    let mut out = String::new();
    comments(&mut out, header);
    out.push_str("t,re_amp,im_amp,prob\n");
    for ((t, a), p) in curve
        .times
        .iter()
        .zip(&curve.amplitudes)
        .zip(&curve.probabilities)
    {
        let _ = writeln!(out, "{t},{},{},{p}", a.re, a.im);
    }
    out
}

pub fn ldos_csv(dist: &LdosDistribution, header: &[String]) -> String {
    let mut out = String::new();
    comments(&mut out, header);
    out.push_str("omega,weight\n");
    for (o, w) in dist.offsets.iter().zip(&dist.weights) {
        let _ = writeln!(out, "{o},{w}");
    }
    out
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    comments(
        &mut out,
        &[
            format!("model = {}", result.label),
            format!("model_hash = {}", result.model_hash),
            format!("fit_family = {}", result.family.name()),
            format!("references = {}", result.references.len()),
            format!("seeds = {:?}", result.seeds),
        ],
    );
    out.push_str("dx,gamma,gamma_residual,Gamma,participation,flag\n");
    for p in &result.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.dx,
            p.gamma,
            p.gamma_residual,
            p.width,
            p.participation,
            p.flag.as_str()
        );
    }
    out
}

pub fn factorization_csv(report: &FactorizationReport, header: &[String]) -> String {
    let mut out = String::new();
    comments(&mut out, header);
    let _ = writeln!(out, "# realizations = {}", report.realizations);
    let _ = writeln!(out, "# degenerate = {}", report.degenerate);
    out.push_str("omega,mean_re,mean_im,se_re,se_im,mean_abs_sqr,prediction,ratio,mean_zero\n");
    for b in &report.bins {
        let ratio = b.ratio.map_or_else(String::new, |r| r.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            b.omega,
            b.mean_re,
            b.mean_im,
            b.se_re,
            b.se_im,
            b.mean_abs_sqr,
            b.prediction,
            ratio,
            b.mean_consistent_with_zero
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub label: String,
    pub hash: String,
    pub provenance: Vec<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to rerun a command bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// SHA-256 of the resolved configuration serialized as JSON.
    pub config_hash: String,
    pub resolved_config: ExperimentConfig,
    pub seeds: Seeds,
    /// Every physics value used, including defaults and ingested metadata.
    pub physics: serde_json::Value,
    pub models: Vec<ModelRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Artifacts held in memory until the run succeeds, then written atomically.
#[derive(Default)]
pub struct Staging {
    files: Vec<(String, Vec<u8>)>,
}

impl Staging {
    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn records(&self) -> Vec<ArtifactRecord> {
        self.files
            .iter()
            .map(|(name, bytes)| ArtifactRecord {
                name: name.clone(),
                sha256: sha256_hex(bytes),
            })
            .collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    /// Writes every artifact, then the manifest last.
    pub fn commit(self, dir: &Path, manifest: &Manifest) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            write_atomic(&path, bytes)?;
            written.push(path);
        }
        let path = dir.join(MANIFEST_NAME);
        write_atomic(
            &path,
            (serde_json::to_string_pretty(manifest)? + "\n").as_bytes(),
        )?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::CurveLabel;
    use num_complex::Complex64;

    #[test]
    fn decay_csv_layout() {
        let c = DecayCurve {
            times: vec![0.0, 0.5],
            amplitudes: vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, -0.25)],
            probabilities: vec![1.0, 0.3125],
            label: CurveLabel::Fidelity { dx: 0.1 },
        };
        let s = decay_csv(&c, &["dx = 0.1".into()]);
        assert_eq!(
            s,
            "# dx = 0.1\nt,re_amp,im_amp,prob\n0,1,0,1\n0.5,0.5,-0.25,0.3125\n"
        );
    }

    #[test]
    fn staging_writes_manifest_last() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Staging::default();
        s.add("a.csv", "x\n");
        assert_eq!(s.records()[0].sha256, sha256_hex(b"x\n"));
        let cfg = ExperimentConfig::from_toml(
            "[model]\nkind = \"ingest\"\nfamily = \"lbh\"\npath = \"m.txt\"\n[run]\ndx_grid = [0.1]\npreparation = { kind = \"eigenstate\", reference = 3 }\n[output]\ndirectory = \"o\"\n",
        )
        .unwrap();
        let m = Manifest {
            tool: "t".into(),
            version: "0".into(),
            command: Command::Build,
            config_hash: String::new(),
            resolved_config: cfg,
            seeds: Seeds {
                levels: 1,
                perturbation: 2,
                randomize: 3,
                wavepacket: 4,
            },
            physics: serde_json::Value::Null,
            models: vec![],
            artifacts: s.records(),
        };
        let written = s.commit(dir.path(), &m).unwrap();
        assert_eq!(written.last().unwrap().file_name().unwrap(), MANIFEST_NAME);
        assert_eq!(Manifest::load(&dir.path().join(MANIFEST_NAME)).unwrap(), m);
    }
}
