use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::action_angle::TransformedSystem;
use super::problem::PlaneSystem;
use crate::error::{Error, Result};
use crate::integrate::{composition_gammas, ImplicitMidpoint};

/// Step control of the period map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoincareSettings {
    /// Order of the composed implicit midpoint rule.
    pub order: usize,
    /// Steps per revolution of the unperturbed rotation at the start point.
    pub steps_per_revolution: usize,
    pub min_steps: usize,
}

impl Default for PoincareSettings {
    fn default() -> Self {
        Self {
            order: 8,
            steps_per_revolution: 512,
            min_steps: 64,
        }
    }
}

/// Image of one section point under the period map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionImage {
    /// Lifted angle: the start angle plus the full rotation over one period.
    pub theta: f64,
    pub lambda: f64,
    /// The orbit dropped below `λ_* / 2` during the period.
    pub escaped: bool,
}

/// `P(θ, λ)`: integrates the plane system over `t ∈ [0, 1]` from
/// `ψ(θ, ρ(λ))` with a symmetric scheme and reads the end point back in
/// `(θ, λ)`. The angle is lifted by counting passes through `θ = 0`.
pub fn poincare_map(sys: &TransformedSystem, theta: f64, lambda: f64, settings: &PoincareSettings) -> Result<SectionImage> {
    let lambda_star = sys.lambda_of_rho(sys.rho_star);
    if !(lambda >= lambda_star) {
        return Err(Error::Domain(format!("lambda = {lambda} lies below lambda_* = {lambda_star}")));
    }
    flow_period(sys, theta, lambda, step_count(lambda, settings), settings)
}

fn step_count(lambda: f64, settings: &PoincareSettings) -> usize {
    settings
        .min_steps
        .max((lambda / TAU * settings.steps_per_revolution as f64).ceil() as usize)
}

fn flow_period(sys: &TransformedSystem, theta: f64, lambda: f64, steps: usize, settings: &PoincareSettings) -> Result<SectionImage> {
    let lambda_star = sys.lambda_of_rho(sys.rho_star);
    let plane = PlaneSystem { problem: &sys.problem };
    let (x, y) = sys.psi(theta, sys.rho_of_lambda(lambda));
    let h = 1.0 / steps as f64;
    let im = ImplicitMidpoint::default();
    let gammas = composition_gammas(settings.order)?;
    let mut z = [x, y];
    let mut wraps: i64 = 0;
    let mut escaped = false;
    let rho_floor = sys.rho_of_lambda(0.5 * lambda_star);
    let h_floor = 0.5 * (sys.orbit.c * rho_floor).powf(2.0 * sys.orbit.beta);
    for i in 0..steps {
        let prev = z;
        im.composed_step(&plane, &mut z, i as f64 * h, h, &gammas)?;
        if !z[0].is_finite() || !z[1].is_finite() {
            return Err(Error::StepFailure {
                step: i,
                reason: "period map integration diverged".into(),
            });
        }
        // θ = 0 is the ray {x = 0, y > 0}; θ grows as x grows there
        if prev[0] < 0.0 && z[0] >= 0.0 && z[1] > 0.0 {
            wraps += 1;
        } else if prev[0] >= 0.0 && z[0] < 0.0 && z[1] > 0.0 {
            wraps -= 1;
        }
        if sys.problem.energy(z[0], z[1]) < h_floor {
            escaped = true;
        }
    }
    let (theta_end, rho_end) = sys.psi_inverse(z[0], z[1])?;
    let start = theta.rem_euclid(TAU);
    Ok(SectionImage {
        theta: theta + (theta_end - start) + TAU * wraps as f64,
        lambda: sys.lambda_of_rho(rho_end),
        escaped,
    })
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Reversibility residual at one point: `P(G(P(z)))` against `G(z)` with
/// `G(θ, λ) = (-θ, λ)`; the angle part is taken mod 2π and the action part
/// relative to `λ`. Only `(θ, λ)` itself must lie above `λ_*`. Both periods
/// use the same step, since the discrete map is reversible only at fixed `h`.
pub fn reversibility_residual(sys: &TransformedSystem, theta: f64, lambda: f64, settings: &PoincareSettings) -> Result<f64> {
    let p1 = poincare_map(sys, theta, lambda, settings)?;
    let p2 = flow_period(sys, -p1.theta, p1.lambda, step_count(lambda, settings), settings)?;
    Ok(wrap(p2.theta + theta).abs().max((p2.lambda - lambda).abs() / lambda))
}

/// Sup of [`reversibility_residual`] over a grid of angles and actions.
pub fn reversibility_sup(sys: &TransformedSystem, thetas: &[f64], lambdas: &[f64], settings: &PoincareSettings) -> Result<f64> {
    let pts: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| thetas.iter().map(move |&t| (t, l))).collect();
    let res: Vec<f64> = pts
        .into_par_iter()
        .map(|(t, l)| reversibility_residual(sys, t, l, settings))
        .collect::<Result<_>>()?;
    Ok(res.into_iter().fold(0.0, f64::max))
}

/// `iterations` successive images of `(θ, λ)`; stops early on escape.
pub fn section_orbit(
    sys: &TransformedSystem,
    theta: f64,
    lambda: f64,
    iterations: usize,
    settings: &PoincareSettings,
) -> Result<Vec<SectionImage>> {
    let mut out = Vec::with_capacity(iterations + 1);
    let mut cur = SectionImage {
        theta,
        lambda,
        escaped: false,
    };
    out.push(cur.clone());
    for _ in 0..iterations {
        cur = poincare_map(sys, cur.theta, cur.lambda, settings)?;
        let stop = cur.escaped;
        out.push(cur.clone());
        if stop {
            break;
        }
    }
    Ok(out)
}
