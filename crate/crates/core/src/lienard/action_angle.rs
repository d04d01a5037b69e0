use std::f64::consts::TAU;

use super::orbit::ReferenceOrbit;
use super::problem::LienardProblem;
use crate::error::{Error, Result};

/// The Liénard equation in the action-angle variables of the unperturbed
/// oscillator: `x = (cρ)^α x0(θ T0 / 2π)`, `y = (cρ)^β y0(θ T0 / 2π)`, giving
/// `ρ' = F1(θ, ρ, t)`, `θ' = c0 ρ^{2β-1} + F2(θ, ρ, t)`. Angles have period 2π.
#[derive(Clone, Debug)]
pub struct TransformedSystem {
    pub problem: LienardProblem,
    pub orbit: ReferenceOrbit,
    /// Evaluators reject `ρ < ρ_*`.
    pub rho_star: f64,
}

impl TransformedSystem {
    pub fn new(problem: LienardProblem, orbit: ReferenceOrbit, rho_star: f64) -> Result<Self> {
        if problem.n != orbit.n {
            return Err(Error::Parameter(format!(
                "problem has n = {} but the reference orbit has n = {}",
                problem.n, orbit.n
            )));
        }
        if !(rho_star > 0.0) {
            return Err(Error::Parameter(format!("rho_* must be positive, got {rho_star}")));
        }
        Ok(Self {
            problem,
            orbit,
            rho_star,
        })
    }

    fn check(&self, rho: f64) -> Result<()> {
        if !(rho >= self.rho_star) {
            return Err(Error::Domain(format!("rho = {rho} lies below rho_* = {}", self.rho_star)));
        }
        Ok(())
    }

    fn reference(&self, theta: f64) -> (f64, f64) {
        self.orbit.eval(theta * self.orbit.t0 / TAU)
    }

    /// `ψ(θ, ρ) = (x, y)`; defined for every `ρ > 0`.
    pub fn psi(&self, theta: f64, rho: f64) -> (f64, f64) {
        let o = &self.orbit;
        let (x0, y0) = self.reference(theta);
        let s = o.c * rho;
        (s.powf(o.alpha) * x0, s.powf(o.beta) * y0)
    }

    /// `ψ^{-1}(x, y) = (θ, ρ)` with `θ ∈ [0, 2π)`. The energy fixes `ρ`; the
    /// phase comes from the nearest sample refined by Newton's method.
    pub fn psi_inverse(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let o = &self.orbit;
        let h = self.problem.energy(x, y);
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("({x}, {y}) has no action-angle coordinates")));
        }
        // h = (cρ)^{2β} / 2 on the scaled reference orbit
        let s = (2.0 * h).powf(0.5 / o.beta);
        let rho = s / o.c;
        let a = x / s.powf(o.alpha);
        let b = y / s.powf(o.beta);
        let samples = o.x_samples.len();
        let best = (0..samples)
            .min_by(|&i, &j| {
                let di = (o.x_samples[i] - a).powi(2) + (o.y_samples[i] - b).powi(2);
                let dj = (o.x_samples[j] - a).powi(2) + (o.y_samples[j] - b).powi(2);
                di.total_cmp(&dj)
            })
            .unwrap_or(0);
        let mut tau = best as f64 * o.t0 / samples as f64;
        let m = 2 * o.n as i32 + 1;
        for _ in 0..20 {
            let (x0, y0) = o.eval(tau);
            let (dx, dy) = (y0, -x0.powi(m));
            let step = ((a - x0) * dx + (b - y0) * dy) / (dx * dx + dy * dy);
            tau += step;
            if step.abs() <= 1e-15 * o.t0 {
                break;
            }
        }
        let theta = (TAU * tau / o.t0).rem_euclid(TAU);
        Ok((theta, rho))
    }

    /// `c0 ρ^{2β - 1}`.
    pub fn twist(&self, rho: f64) -> f64 {
        self.orbit.c0 * rho.powf(2.0 * self.orbit.beta - 1.0)
    }

    /// `F1 = -(1/2π)(cρ T0 y0² f(X, t) + (cρ)^α y0 T0 g(X, t))`, `X = (cρ)^α x0`.
    pub fn f1(&self, theta: f64, rho: f64, t: f64) -> Result<f64> {
        self.check(rho)?;
        Ok(self.f1_unchecked(theta, rho, t))
    }

    /// `F2 = cα x0 y0 f(X, t) + c^α α ρ^{α-1} x0 g(X, t)`.
    pub fn f2(&self, theta: f64, rho: f64, t: f64) -> Result<f64> {
        self.check(rho)?;
        Ok(self.f2_unchecked(theta, rho, t))
    }

    pub(crate) fn f1_unchecked(&self, theta: f64, rho: f64, t: f64) -> f64 {
        let o = &self.orbit;
        let (x0, y0) = self.reference(theta);
        let sa = (o.c * rho).powf(o.alpha);
        let big_x = sa * x0;
        let f = self.problem.f.eval(big_x, t);
        let g = self.problem.g.eval(big_x, t);
        -(o.c * rho * o.t0 * y0 * y0 * f + sa * y0 * o.t0 * g) / TAU
    }

    pub(crate) fn f2_unchecked(&self, theta: f64, rho: f64, t: f64) -> f64 {
        let o = &self.orbit;
        let (x0, y0) = self.reference(theta);
        let sa = (o.c * rho).powf(o.alpha);
        let big_x = sa * x0;
        let f = self.problem.f.eval(big_x, t);
        let g = self.problem.g.eval(big_x, t);
        o.c * o.alpha * x0 * y0 * f + o.c.powf(o.alpha) * o.alpha * rho.powf(o.alpha - 1.0) * x0 * g
    }

    /// `(θ', ρ')`.
    pub fn rhs(&self, theta: f64, rho: f64, t: f64) -> Result<(f64, f64)> {
        self.check(rho)?;
        Ok((
            self.twist(rho) + self.f2_unchecked(theta, rho, t),
            self.f1_unchecked(theta, rho, t),
        ))
    }

    /// `λ = c0 ρ^{2β-1}`, the unperturbed angular speed.
    pub fn lambda_of_rho(&self, rho: f64) -> f64 {
        self.twist(rho)
    }

    pub fn rho_of_lambda(&self, lambda: f64) -> f64 {
        (lambda / self.orbit.c0).powf(1.0 / (2.0 * self.orbit.beta - 1.0))
    }
}
