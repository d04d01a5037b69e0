use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::action_angle::TransformedSystem;
use super::problem::LienardProblem;
use crate::error::Result;
use crate::integrate::composition_gammas;

/// Parameters of the boundedness experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySettings {
    pub t_max: f64,
    /// Initial levels: `|y|` of the start curve where it crosses `x = 0`.
    pub levels: Vec<f64>,
    /// Start angles per level, equally spaced.
    pub phases: usize,
    /// Order of the composed drift-kick-drift splitting.
    pub order: usize,
    /// Steps per revolution of the unperturbed rotation at the start level.
    pub steps_per_revolution: usize,
    /// Orbits whose level ratio exceeds this are flagged.
    pub threshold: f64,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self {
            t_max: 1e4,
            levels: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            phases: 4,
            order: 8,
            steps_per_revolution: 128,
            threshold: 3.0,
        }
    }
}

/// One long integration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub level: f64,
    pub theta: f64,
    pub x0: f64,
    pub y0: f64,
    /// `max_t |x| + |x'|`.
    pub max_abs_sum: f64,
    /// `max_t (|x| + |x'|) / (|x(0)| + |x'(0)|)`.
    pub raw_ratio: f64,
    /// `L(max_t h) / L(h(0))` with `L(h)` the largest `|x| + |y|` on the
    /// unperturbed energy curve `h`; equals 1 when the energy is conserved.
    pub level_ratio: f64,
    /// `max_t |h(t) - h(0)| / h(0)`.
    pub energy_drift: f64,
    pub failure: Option<String>,
}

/// Outcome of the experiment and of its unperturbed control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub orbits: Vec<OrbitRecord>,
    pub control: Vec<OrbitRecord>,
    pub max_level_ratio: f64,
    pub max_control_energy_drift: f64,
    /// Every orbit finished with a level ratio at most the threshold.
    pub bounded: bool,
    pub warnings: Vec<String>,
}

/// `L(h)`: `max (|x| + |y|)` over the curve of energy `h`.
fn level_size(sys: &TransformedSystem, h: f64) -> f64 {
    let o = &sys.orbit;
    let s = (2.0 * h).powf(0.5 / o.beta);
    o.max_weighted_sum(s.powf(o.alpha), s.powf(o.beta))
}

fn run_orbit(
    sys: &TransformedSystem,
    problem: &LienardProblem,
    level: f64,
    theta: f64,
    gammas: &[f64],
    settings: &StabilitySettings,
) -> OrbitRecord {
    let o = &sys.orbit;
    // (cρ)^β y0(0) = level with y0(0) = 1
    let rho = level.powf(1.0 / o.beta) / o.c;
    let (x, y) = sys.psi(theta, rho);
    let lambda = sys.lambda_of_rho(rho);
    let per_unit = (lambda / TAU * settings.steps_per_revolution as f64).ceil().max(16.0);
    let steps = (settings.t_max * per_unit).ceil() as usize;
    let h = settings.t_max / steps as f64;
    let h0 = problem.energy(x, y);
    let start_sum = x.abs() + y.abs();
    let (mut zx, mut zy) = (x, y);
    let mut max_abs_sum = start_sum;
    let mut max_energy = h0;
    let mut drift: f64 = 0.0;
    let mut failure = None;
    for i in 0..steps {
        problem.split_step(&mut zx, &mut zy, i as f64 * h, h, gammas);
        if !zx.is_finite() || !zy.is_finite() {
            failure = Some(format!("t = {:.6}: solution is not finite", i as f64 * h));
            break;
        }
        let e = problem.energy(zx, zy);
        max_energy = max_energy.max(e);
        drift = drift.max((e - h0).abs() / h0);
        max_abs_sum = max_abs_sum.max(zx.abs() + zy.abs());
    }
    OrbitRecord {
        level,
        theta,
        x0: x,
        y0: y,
        max_abs_sum,
        raw_ratio: max_abs_sum / start_sum,
        level_ratio: level_size(sys, max_energy) / level_size(sys, h0),
        energy_drift: drift,
        failure,
    }
}

/// Integrates the plane system from `levels × phases` start points to
/// `t_max`, and the same start points with `f = g = 0` as a control.
pub fn lagrange_stability_experiment(sys: &TransformedSystem, settings: &StabilitySettings) -> Result<StabilityReport> {
    let mut warnings = sys.problem.validate().warnings;
    let starts: Vec<(f64, f64)> = settings
        .levels
        .iter()
        .flat_map(|&l| (0..settings.phases).map(move |j| (l, TAU * j as f64 / settings.phases as f64)))
        .collect();
    let gammas = composition_gammas(settings.order)?;
    let control_problem = LienardProblem::unperturbed(sys.problem.n)?;
    let orbits: Vec<OrbitRecord> = starts
        .par_iter()
        .map(|&(l, th)| run_orbit(sys, &sys.problem, l, th, &gammas, settings))
        .collect();
    let control: Vec<OrbitRecord> = starts
        .par_iter()
        .map(|&(l, th)| run_orbit(sys, &control_problem, l, th, &gammas, settings))
        .collect();
    let max_level_ratio = orbits.iter().map(|r| r.level_ratio).fold(0.0, f64::max);
    let max_control_energy_drift = control.iter().map(|r| r.energy_drift).fold(0.0, f64::max);
    for r in orbits.iter().chain(&control) {
        if let Some(f) = &r.failure {
            warnings.push(format!("orbit at level {} phase {:.4} failed: {f}", r.level, r.theta));
        }
    }
    let bounded = orbits
        .iter()
        .all(|r| r.failure.is_none() && r.level_ratio <= settings.threshold);
    Ok(StabilityReport {
        orbits,
        control,
        max_level_ratio,
        max_control_energy_drift,
        bounded,
        warnings,
    })
}
