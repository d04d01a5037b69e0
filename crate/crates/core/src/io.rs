//! Run artifacts: field and embedding documents, CSV tables and manifests.
//!
//! Floats in JSON use the shortest representation that reads back exactly;
//! CSV floats use 17 significant digits. Both are locale independent and
//! every writer emits rows in a fixed order with `\n` line endings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fourier::{FieldDoc, FourierField, Parity};
use crate::kam::{ConvergenceReport, TorusEmbedding};
use crate::lienard::{ReferenceOrbit, SectionImage, StabilityReport};

/// Creates parent directories and writes `bytes`.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let inner = e.inner();
        Error::Parse {
            context: format!("{context} (line {}, column {}, field `{}`)", inner.line(), inner.column(), e.path()),
            message: inner.to_string(),
        }
    })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types always serialize");
    s.push('\n');
    s
}

pub fn load_field(path: &Path) -> Result<FourierField> {
    let doc: FieldDoc = parse_json(&read_file(path)?, &path.display().to_string())?;
    FourierField::from_doc(&doc)
}

pub fn save_field(path: &Path, field: &FourierField) -> Result<()> {
    write_file(path, to_json_pretty(&field.to_doc()).as_bytes())
}

/// Serialized [`TorusEmbedding`]: grid samples plus both interpolants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingDoc {
    pub omega: Vec<f64>,
    pub n: usize,
    pub time: bool,
    pub grid_x: Vec<f64>,
    pub grid_y: Vec<f64>,
    pub x: FieldDoc,
    pub y: FieldDoc,
}

impl EmbeddingDoc {
    pub fn from_embedding(e: &TorusEmbedding) -> Self {
        Self {
            omega: e.omega.clone(),
            n: e.n,
            time: e.time(),
            grid_x: e.grid_x.clone(),
            grid_y: e.grid_y.clone(),
            x: e.x_interp.to_doc(),
            y: e.y_interp.to_doc(),
        }
    }

    /// Rebuilds the embedding; `X` must be odd, `Y` even and the grids complete.
    pub fn to_embedding(&self) -> Result<TorusEmbedding> {
        let d = self.omega.len();
        if d == 0 {
            return Err(Error::Validation("embedding has an empty frequency".into()));
        }
        if self.x.parity != Parity::Odd || self.y.parity != Parity::Even {
            return Err(Error::Validation(format!(
                "embedding needs an odd X and an even Y, found {:?} and {:?}",
                self.x.parity, self.y.parity
            )));
        }
        let x = FourierField::from_doc(&self.x)?;
        let y = FourierField::from_doc(&self.y)?;
        for (name, f) in [("x", &x), ("y", &y)] {
            if f.d() != d || f.m() != d || f.time() != self.time {
                return Err(Error::Validation(format!(
                    "{name} interpolant has d = {}, m = {}, time = {}; expected d = m = {d}, time = {}",
                    f.d(),
                    f.m(),
                    f.time(),
                    self.time
                )));
            }
        }
        let npts = self.n.pow((d + self.time as usize) as u32);
        if self.grid_x.len() != d * npts || self.grid_y.len() != d * npts {
            return Err(Error::Validation(format!(
                "grids hold {} and {} values, expected {}",
                self.grid_x.len(),
                self.grid_y.len(),
                d * npts
            )));
        }
        Ok(TorusEmbedding {
            omega: self.omega.clone(),
            n: self.n,
            grid_x: self.grid_x.clone(),
            grid_y: self.grid_y.clone(),
            x_interp: x,
            y_interp: y,
        })
    }
}

pub fn embedding_json(e: &TorusEmbedding) -> String {
    to_json_pretty(&EmbeddingDoc::from_embedding(e))
}

pub fn save_embedding(path: &Path, e: &TorusEmbedding) -> Result<()> {
    write_file(path, embedding_json(e).as_bytes())
}

pub fn load_embedding(path: &Path) -> Result<TorusEmbedding> {
    let doc: EmbeddingDoc = parse_json(&read_file(path)?, &path.display().to_string())?;
    doc.to_embedding()
}

/// A CSV float: 17 significant digits in exponent form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with a fixed header; an empty row set gives a header-only table.
pub fn csv_table<I>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory cannot fail");
    for row in rows {
        w.write_record(&row).expect("writing to memory cannot fail");
    }
    w.into_inner().expect("writing to memory cannot fail")
}

pub const CONVERGENCE_HEADER: [&str; 6] = ["m", "sup_f", "sup_g", "min_divisor", "inversion_iters", "invariance_residual"];

/// One row per Newton step.
pub fn convergence_csv(report: &ConvergenceReport) -> Vec<u8> {
    csv_table(
        &CONVERGENCE_HEADER,
        report.rows.iter().map(|r| {
            vec![
                r.m.to_string(),
                fmt_f64(r.sup_f),
                fmt_f64(r.sup_g),
                fmt_f64(r.min_divisor),
                r.inversion_iters.to_string(),
                fmt_f64(r.invariance_residual),
            ]
        }),
    )
}

pub const STABILITY_HEADER: [&str; 10] = [
    "level",
    "theta",
    "x0",
    "y0",
    "max_abs_sum",
    "raw_ratio",
    "level_ratio",
    "energy_drift",
    "control_energy_drift",
    "failure",
];

/// One row per initial condition, with the drift of its unperturbed control.
pub fn stability_csv(report: &StabilityReport) -> Vec<u8> {
    csv_table(
        &STABILITY_HEADER,
        report.orbits.iter().enumerate().map(|(i, r)| {
            let control = report.control.get(i).map_or(f64::NAN, |c| c.energy_drift);
            vec![
                fmt_f64(r.level),
                fmt_f64(r.theta),
                fmt_f64(r.x0),
                fmt_f64(r.y0),
                fmt_f64(r.max_abs_sum),
                fmt_f64(r.raw_ratio),
                fmt_f64(r.level_ratio),
                fmt_f64(r.energy_drift),
                fmt_f64(control),
                r.failure.clone().unwrap_or_default(),
            ]
        }),
    )
}

/// `(orbit, iteration, θ, λ, escaped)` rows of section orbits.
pub fn section_csv(orbits: &[Vec<SectionImage>]) -> Vec<u8> {
    csv_table(
        &["orbit", "iteration", "theta", "lambda", "escaped"],
        orbits.iter().enumerate().flat_map(|(i, o)| {
            o.iter().enumerate().map(move |(j, p)| {
                vec![i.to_string(), j.to_string(), fmt_f64(p.theta), fmt_f64(p.lambda), p.escaped.to_string()]
            })
        }),
    )
}

/// `(t, x, x')` samples of the reference orbit over one period.
pub fn orbit_csv(orbit: &ReferenceOrbit, samples: usize) -> Vec<u8> {
    let samples = samples.max(1);
    csv_table(
        &["t", "x", "xdot"],
        (0..=samples).map(|i| {
            let t = orbit.t0 * i as f64 / samples as f64;
            let (x, y) = orbit.eval(t);
            vec![fmt_f64(t), fmt_f64(x), fmt_f64(y)]
        }),
    )
}

/// `(s, sup_error)` rows.
pub fn smoothing_csv(widths: &[f64], errors: &[f64]) -> Vec<u8> {
    csv_table(
        &["s", "sup_error"],
        widths.iter().zip(errors).map(|(s, e)| vec![fmt_f64(*s), fmt_f64(*e)]),
    )
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Digest and size of one output file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub sha256: String,
    pub bytes: u64,
}

/// Wall-clock cost of a run. Informational only: it is the one field that
/// differs between otherwise identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub wall_seconds: f64,
}

/// Everything needed to reproduce a run and to check its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub name: String,
    pub command: String,
    pub version: String,
    /// Config document after overrides.
    pub config: Value,
    pub seed: u64,
    pub threads: usize,
    pub timing: Timing,
    /// Output files in the run directory, by name.
    pub files: BTreeMap<String, FileDigest>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn new(name: &str, command: &str, config: Value, seed: u64, threads: usize) -> Self {
        Self {
            name: name.to_string(),
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed,
            threads,
            timing: Timing { wall_seconds: 0.0 },
            files: BTreeMap::new(),
        }
    }

    /// Writes `bytes` to `dir/name` and records its digest.
    pub fn add_file(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        write_file(&dir.join(name), bytes)?;
        self.files.insert(
            name.to_string(),
            FileDigest {
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join(MANIFEST_FILE), to_json_pretty(self).as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        parse_json(&read_file(&path)?, &path.display().to_string())
    }

    /// Recomputes the digest of every listed file.
    pub fn check_digests(&self, dir: &Path) -> Result<Vec<DigestCheck>> {
        self.files
            .iter()
            .map(|(name, want)| {
                let path = dir.join(name);
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                let got = sha256_hex(&bytes);
                Ok(DigestCheck {
                    file: name.clone(),
                    matches: got == want.sha256,
                    expected: want.sha256.clone(),
                    actual: got,
                })
            })
            .collect()
    }
}

/// Outcome of one digest comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestCheck {
    pub file: String,
    pub expected: String,
    pub actual: String,
    pub matches: bool,
}
