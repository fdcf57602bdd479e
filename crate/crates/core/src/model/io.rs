//! Text model files: a `# n=.. hbar=.. k=.. g=.. delta=.. gamma_cl=..` header,
//! then `E <index> <energy>` and `B <row> <col> <value>` lines. The B block may
//! list the upper triangle only; its dimension is one plus the largest index.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{assemble, LevelSequence, ModelMeta, ParametricModel, PerturbationMatrix, Provenance};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFormat {
    #[default]
    Text,
}

/// JSON metadata written next to a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub n: usize,
    pub hbar: f64,
    pub k: f64,
    pub g: f64,
    pub delta: f64,
    pub gamma_cl: f64,
    pub seeds: Vec<u64>,
    pub provenance: Vec<Provenance>,
}

/// Non-fatal findings from [`ingest_model`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestReport {
    pub warnings: Vec<String>,
    /// Largest `|B_nm - B_mn| / max(|B_nm|, |B_mn|)` over pairs given both ways.
    pub max_relative_asymmetry: f64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the model file and its JSON sidecar.
pub fn export_model(model: &ParametricModel, path: &Path) -> Result<()> {
    let (text, sidecar) = render_model(model)?;
    write_atomic(path, text.as_bytes())?;
    write_atomic(&sidecar_path(path), sidecar.as_bytes())
}

/// Model file text and sidecar JSON.
pub(crate) fn render_model(model: &ParametricModel) -> Result<(String, String)> {
    let m = model.meta();
    let n = model.dim();
    let mut out = String::with_capacity(32 * n * (n + 1) / 2 + 128);
    out.push_str(&format!(
        "# n={} hbar={} k={} g={} delta={} gamma_cl={}\n",
        n, m.hbar, m.k, m.g, m.delta, m.gamma_cl
    ));
    for (i, e) in model.levels().energies().iter().enumerate() {
        out.push_str(&format!("E {i} {e}\n"));
    }
    let b = model.perturbation().entries();
    for i in 0..n {
        for j in i..n {
            out.push_str(&format!("B {i} {j} {}\n", b[(i, j)]));
        }
    }
    let sidecar = ModelSidecar {
        n,
        hbar: m.hbar,
        k: m.k,
        g: m.g,
        delta: m.delta,
        gamma_cl: m.gamma_cl,
        seeds: model.perturbation().seeds(),
        provenance: model.perturbation().provenance().to_vec(),
    };
    Ok((out, serde_json::to_string_pretty(&sidecar)? + "\n"))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a model file. Pairs supplied in both triangles that disagree are
/// replaced by their mean, with a warning.
pub fn ingest_model(path: &Path, format: ModelFormat) -> Result<(ParametricModel, IngestReport)> {
    let ModelFormat::Text = format;
    let text = fs::read_to_string(path)?;
    let source = path.display().to_string();
    let (mut model, report) = parse_model(&text, &source)?;

    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let meta: ModelSidecar = serde_json::from_str(&fs::read_to_string(&sidecar)?)?;
        let m = model.meta();
        if meta.n != model.dim()
            || [meta.hbar, meta.k, meta.g, meta.delta, meta.gamma_cl]
                != [m.hbar, m.k, m.g, m.delta, m.gamma_cl]
        {
            return Err(Error::ingest(1, "header disagrees with JSON sidecar"));
        }
        let mut provenance = meta.provenance;
        provenance.push(Provenance::Ingested { source });
        let b = PerturbationMatrix::new(model.perturbation().entries().clone(), provenance)?;
        model = model.with_perturbation(b)?;
    }
    Ok((model, report))
}

pub(crate) fn parse_model(text: &str, source: &str) -> Result<(ParametricModel, IngestReport)> {
    let mut header: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut energies: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut entries: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for token in rest.split_whitespace() {
                if let Some((key, value)) = token.split_once('=') {
                    let v: f64 = value.parse().map_err(|_| {
                        Error::ingest(line_no, format!("bad header value '{token}'"))
                    })?;
                    header.insert(key.to_string(), (v, line_no));
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let index = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::ingest(line_no, format!("bad index '{s}'")))
        };
        let value = |s: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::ingest(line_no, format!("bad number '{s}'")))?;
            if !v.is_finite() {
                return Err(Error::ingest(line_no, format!("non-finite value '{s}'")));
            }
            Ok(v)
        };
        match fields.as_slice() {
            ["E", i, e] => {
                let i = index(i)?;
                if energies.insert(i, (value(e)?, line_no)).is_some() {
                    return Err(Error::ingest(
                        line_no,
                        format!("duplicate energy index {i}"),
                    ));
                }
            }
            ["B", r, c, v] => {
                let (r, c) = (index(r)?, index(c)?);
                if entries.insert((r, c), (value(v)?, line_no)).is_some() {
                    return Err(Error::ingest(line_no, format!("duplicate entry ({r},{c})")));
                }
            }
            _ => {
                return Err(Error::ingest(
                    line_no,
                    format!("unrecognized line '{line}'"),
                ))
            }
        }
    }

    let get = |key: &str| -> Result<f64> {
        header
            .get(key)
            .map(|&(v, _)| v)
            .ok_or_else(|| Error::ingest(1, format!("header is missing '{key}'")))
    };
    let n_raw = get("n")?;
    if n_raw < 2.0 || n_raw.fract() != 0.0 {
        return Err(Error::ingest(header["n"].1, format!("invalid n={n_raw}")));
    }
    let n = n_raw as usize;
    let meta = ModelMeta {
        hbar: get("hbar")?,
        k: get("k")?,
        g: get("g")?,
        delta: get("delta")?,
        gamma_cl: get("gamma_cl")?,
    };
    meta.validate()
        .map_err(|e| Error::ingest(1, e.to_string()))?;

    if energies.len() != n {
        return Err(Error::ingest(
            last_line,
            format!(
                "dimension mismatch: header n={n} but {} energies",
                energies.len()
            ),
        ));
    }
    let mut e = Vec::with_capacity(n);
    for (expect, (&i, &(v, line))) in energies.iter().enumerate() {
        if i != expect {
            return Err(Error::ingest(
                line,
                format!("energy index {i} out of sequence (expected {expect})"),
            ));
        }
        e.push(v);
    }

    let dim = entries
        .keys()
        .map(|&(r, c)| r.max(c) + 1)
        .max()
        .unwrap_or(0);
    if dim != n {
        let line = entries
            .iter()
            .find(|(&(r, c), _)| r.max(c) + 1 == dim)
            .map(|(_, &(_, l))| l)
            .unwrap_or(last_line);
        return Err(Error::ingest(
            line,
            format!("dimension mismatch: {n} levels but {dim}x{dim} matrix"),
        ));
    }

    let mut report = IngestReport::default();
    let mut b = DMatrix::<f64>::zeros(n, n);
    let mut symmetrized = 0usize;
    for (&(r, c), &(v, _)) in &entries {
        if r > c && entries.contains_key(&(c, r)) {
            continue;
        }
        let value = match entries.get(&(c, r)) {
            Some(&(w, _)) if r != c && w.to_bits() != v.to_bits() => {
                let rel = (v - w).abs() / v.abs().max(w.abs());
                report.max_relative_asymmetry = report.max_relative_asymmetry.max(rel);
                symmetrized += 1;
                0.5 * (v + w)
            }
            _ => v,
        };
        b[(r, c)] = value;
        b[(c, r)] = value;
    }
    if symmetrized > 0 {
        report.warnings.push(format!(
            "symmetrized {symmetrized} asymmetric pairs (max relative asymmetry {:e})",
            report.max_relative_asymmetry
        ));
        log::warn!("{source}: {}", report.warnings.last().unwrap());
    }

    let levels =
        LevelSequence::new(e, meta.delta).map_err(|err| Error::ingest(1, err.to_string()))?;
    let b = PerturbationMatrix::new(
        b,
        vec![Provenance::Ingested {
            source: source.to_string(),
        }],
    )?;
    let model = assemble(levels, b, meta).map_err(|err| Error::ingest(1, err.to_string()))?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "# n=3 hbar=1 k=10 g=0 delta=1 gamma_cl=5\n";

    #[test]
    fn parses_upper_triangle() {
        let text = format!("{HEADER}E 0 0\nE 1 1\nE 2 2\nB 0 1 0.5\nB 1 2 -0.25\nB 2 2 0.1\n");
        let (m, report) = parse_model(&text, "mem").unwrap();
        assert!(report.warnings.is_empty());
        let b = m.perturbation();
        assert_eq!(b.get(1, 0), 0.5);
        assert_eq!(b.get(2, 1), -0.25);
        assert_eq!(b.get(0, 2), 0.0);
        assert_eq!(b.get(2, 2), 0.1);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let text = format!("{HEADER}E 0 0\nE 1 1\nE 2 2\nB 0 0 1\nB 0 1 0.5\nB 1 1 1\n");
        match parse_model(&text, "mem") {
            Err(Error::Ingest { message, .. }) => {
                assert!(message.contains("dimension mismatch"), "{message}")
            }
            other => panic!("expected ingest error, got {other:?}"),
        }
        let text = format!("{HEADER}E 0 0\nE 1 1\nB 0 1 0.5\nB 2 2 1\n");
        assert!(matches!(
            parse_model(&text, "mem"),
            Err(Error::Ingest { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = format!("{HEADER}E 0 0\nE 1 x\n");
        match parse_model(&text, "mem") {
            Err(Error::Ingest { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected ingest error, got {other:?}"),
        }
        let text = format!("{HEADER}E 0 0\nE 1 1\nE 2 2\nQ 1 2\n");
        assert!(matches!(
            parse_model(&text, "mem"),
            Err(Error::Ingest { line: 5, .. })
        ));
        assert!(parse_model("E 0 0\nE 1 1\nB 1 1 0\n", "mem").is_err());
    }

    #[test]
    fn slightly_asymmetric_input_is_symmetrized() {
        let a = 0.75;
        let b = a * (1.0 + 1e-12);
        let text = format!("{HEADER}E 0 0\nE 1 1\nE 2 2\nB 0 1 {a}\nB 1 0 {b}\nB 2 2 0\n");
        let (m, report) = parse_model(&text, "mem").unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert!((report.max_relative_asymmetry - 1e-12).abs() < 1e-13);
        let p = m.perturbation();
        assert_eq!(p.get(0, 1).to_bits(), p.get(1, 0).to_bits());
        assert_eq!(p.get(0, 1), 0.5 * (a + b));
    }
}
