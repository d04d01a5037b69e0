//! Run configurations. Every document is parsed strictly: unknown keys are
//! rejected with the path of the offending field.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diophantine::{certify, certify_rotation, make_frequency, Frequency, FrequencyChoice};
use crate::error::{Error, Result};
use crate::fourier::{FieldShape, FourierField, Parity, TorusIndex};
use crate::io::load_field;
use crate::kam::{
    make_schedule, run_kam_flow, run_kam_map, verify_flow_invariance, verify_map_invariance, InvarianceReport, KamRun,
    KamSettings, KickDriftKick, PerturbedFlow, PerturbedTwistMap, Schedule, TorusEmbedding, TwistMap,
};
use crate::lienard::{Forcing, LienardProblem, PoincareSettings, StabilitySettings};
use crate::smoothing::Kernel;

/// Which KAM problem a run solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Flow,
    Map,
}

/// Source of the perturbation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    /// Flow: `f = ε cos(<1, x> + t)`, `g = ε s_0 sin(<1, x> + t)`.
    /// Map: the kick-drift-kick map with kick `ε`.
    Standard,
    /// Field documents for `f` and `g`; relative paths are taken from the
    /// directory of the config file.
    Coefficients { f: PathBuf, g: PathBuf },
}

fn default_k_max() -> usize {
    200
}

/// Configuration of `kam run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KamConfig {
    pub mode: Mode,
    pub d: usize,
    pub mu: f64,
    pub eps0: f64,
    #[serde(rename = "M")]
    pub m_steps: usize,
    /// Stop once the perturbation majorant falls below this.
    pub tol: f64,
    pub omega_kind: FrequencyChoice,
    pub perturbation: Perturbation,
    /// Range of the Diophantine certificate.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Smoothness exponent; `2d + 1 + mu` when absent.
    #[serde(default)]
    pub ell: Option<f64>,
    #[serde(default)]
    pub kernel: Kernel,
    /// Loop settings; `tol` above takes precedence over `settings.tol`.
    #[serde(default)]
    pub settings: KamSettings,
}

/// Everything a KAM run produced, with the inputs it derived.
#[derive(Debug)]
pub struct KamOutcome {
    pub frequency: Frequency,
    pub schedule: Schedule,
    /// Perturbation fields, when the perturbation has a field form.
    pub fields: Option<(FourierField, FourierField)>,
    pub run: KamRun,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl KamConfig {
    pub fn schedule(&self) -> Result<Schedule> {
        make_schedule(self.d, self.mu, self.eps0, self.m_steps, self.ell)
    }

    /// The certified frequency: `ω` for flows, the rotation `2π ω` for maps.
    pub fn frequency(&self, schedule: &Schedule) -> Result<Frequency> {
        let w = make_frequency(self.d, &self.omega_kind)?;
        match self.mode {
            Mode::Flow => certify(&w, schedule.tau, self.k_max),
            Mode::Map => {
                let omega: Vec<f64> = w.iter().map(|v| TAU * v).collect();
                certify_rotation(&omega, schedule.tau, self.k_max)
            }
        }
    }

    /// `(f, g)` as fields; `None` for the built-in map, which has no field form.
    /// `base` resolves relative coefficient paths.
    pub fn perturbation_fields(&self, schedule: &Schedule, base: &Path) -> Result<Option<(FourierField, FourierField)>> {
        match (&self.perturbation, self.mode) {
            (Perturbation::Standard, Mode::Flow) => standard_flow_perturbation(self.d, self.eps0, schedule.s[0]).map(Some),
            (Perturbation::Standard, Mode::Map) => Ok(None),
            (Perturbation::Coefficients { f, g }, _) => {
                Ok(Some((load_field(&resolve(base, f))?, load_field(&resolve(base, g))?)))
            }
        }
    }

    fn twist_map(&self, omega: &[f64], fields: Option<&(FourierField, FourierField)>) -> Box<dyn TwistMap> {
        match fields {
            Some((f, g)) => Box::new(PerturbedTwistMap {
                omega: omega.to_vec(),
                f: f.clone(),
                g: g.clone(),
            }),
            None => Box::new(KickDriftKick {
                omega: omega.to_vec(),
                eps: self.eps0,
            }),
        }
    }

    /// Builds the schedule, certifies the frequency and runs the Newton loop.
    pub fn run(&self, base: &Path) -> Result<KamOutcome> {
        let schedule = self.schedule()?;
        let frequency = self.frequency(&schedule)?;
        let fields = self.perturbation_fields(&schedule, base)?;
        let mut settings = self.settings.clone();
        settings.tol = self.tol;
        let run = match (self.mode, &fields) {
            (Mode::Flow, Some((f, g))) => run_kam_flow(f, g, &frequency, &schedule, &self.kernel, &settings)?,
            (Mode::Flow, None) => unreachable!("flow perturbations always have a field form"),
            (Mode::Map, _) => {
                let map = self.twist_map(&frequency.omega, fields.as_ref());
                run_kam_map(map.as_ref(), &frequency, &schedule, &self.kernel, &settings)?
            }
        };
        Ok(KamOutcome {
            frequency,
            schedule,
            fields,
            run,
        })
    }

    /// Recomputes the invariance residual of a stored embedding with the
    /// run's verification settings.
    pub fn verify_embedding(
        &self,
        embedding: &TorusEmbedding,
        fields: Option<&(FourierField, FourierField)>,
    ) -> Result<InvarianceReport> {
        let s = &self.settings;
        match (self.mode, fields) {
            (Mode::Flow, Some((f, g))) => {
                let system = PerturbedFlow {
                    omega: embedding.omega.clone(),
                    f: f.clone(),
                    g: g.clone(),
                };
                verify_flow_invariance(
                    |theta, t| Ok(embedding.eval(theta, t)),
                    &system,
                    s.verify_samples,
                    s.verify_t0,
                    s.verify_dt,
                    s.verify_tol,
                )
            }
            (Mode::Flow, None) => Err(Error::Parameter("flow verification needs the perturbation fields".into())),
            (Mode::Map, fields) => {
                let map = self.twist_map(&embedding.omega, fields);
                verify_map_invariance(
                    |theta| Ok(embedding.eval(theta, 0.0)),
                    map.as_ref(),
                    &embedding.omega,
                    s.verify_samples,
                )
            }
        }
    }
}

/// `f = ε cos(<1, x> + t)` in every component and `g = ε s0 sin(<1, x> + t)`.
pub fn standard_flow_perturbation(d: usize, eps: f64, s0: f64) -> Result<(FourierField, FourierField)> {
    let shape = FieldShape::new(d, d, d + 1, 0, 0.0, true);
    let idx = TorusIndex::new(vec![1; d], 1);
    let alpha = vec![0; d];
    let mut f = FourierField::zeros(shape);
    let mut g = FourierField::zeros(shape);
    for c in 0..d {
        f.add_real_mode(c, &idx, &alpha, eps, 0.0)?;
        g.add_real_mode(c, &idx, &alpha, 0.0, eps * s0)?;
    }
    Ok((f.with_parity(Parity::Even), g.with_parity(Parity::Odd)))
}

fn default_orbit_tol() -> f64 {
    1e-13
}

/// Output of `lienard orbit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitOutput {
    /// Samples of the reference orbit over one period.
    pub samples: usize,
}

impl Default for OrbitOutput {
    fn default() -> Self {
        Self { samples: 256 }
    }
}

/// Section iterates written by `lienard poincare`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectionConfig {
    pub integrator: PoincareSettings,
    /// Start actions as multiples of `λ_*`.
    pub lambda_factors: Vec<f64>,
    /// Start angles per action, equally spaced.
    pub phases: usize,
    pub iterations: usize,
}

impl Default for SectionConfig {
    fn default() -> Self {
        Self {
            integrator: PoincareSettings::default(),
            lambda_factors: vec![1.5, 2.0, 4.0],
            phases: 8,
            iterations: 20,
        }
    }
}

/// Configuration of the `lienard` subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LienardConfig {
    pub n: u32,
    #[serde(default)]
    pub f: Forcing,
    #[serde(default)]
    pub g: Forcing,
    /// Declared growth exponents; `n - 1` and `2n - 1` when absent.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
    /// `ρ_*`; found by the plateau test when absent.
    #[serde(default)]
    pub rho_star: Option<f64>,
    #[serde(default = "default_orbit_tol")]
    pub orbit_tol: f64,
    #[serde(default)]
    pub orbit: OrbitOutput,
    #[serde(default)]
    pub poincare: SectionConfig,
    #[serde(default)]
    pub stability: StabilitySettings,
}

impl LienardConfig {
    pub fn problem(&self) -> Result<LienardProblem> {
        let mut p = LienardProblem::new(self.n, self.f.clone(), self.g.clone())?;
        if let Some(v) = self.p {
            p.p = v;
        }
        if let Some(v) = self.q {
            p.q = v;
        }
        Ok(p)
    }
}

/// Applies `key.path=value` overrides to a JSON document. Values are read as
/// JSON and fall back to plain strings.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("override `{o}` is not of the form key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut cur = &mut *doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = cur
                .as_object_mut()
                .ok_or_else(|| Error::Parameter(format!("override `{key}`: `{part}` is not inside an object")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value);
                break;
            }
            cur = obj
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

/// Parses a document strictly, reporting the path of the failing field.
pub fn from_value<T: DeserializeOwned>(doc: Value, context: &str) -> Result<T> {
    serde_path_to_error::deserialize(doc).map_err(|e| Error::Parameter(format!("{context}: field `{}`: {}", e.path(), e.inner())))
}

/// Reads a JSON config file, applies overrides and parses it. Returns the
/// parsed config together with the document it came from.
pub fn load_config<T: DeserializeOwned>(path: &Path, overrides: &[String]) -> Result<(T, Value)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: format!("{} (line {}, column {})", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    apply_overrides(&mut doc, overrides)?;
    let cfg = from_value(doc.clone(), &path.display().to_string())?;
    Ok((cfg, doc))
}
