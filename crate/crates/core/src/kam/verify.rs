use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::map::TwistMap;
use crate::error::Result;
use crate::fourier::FourierField;
use crate::integrate::{ImplicitMidpoint, OdeSystem};

/// `dx/dt = ω + y + f(x, y, t)`, `dy/dt = g(x, y, t)`.
#[derive(Clone, Debug)]
pub struct PerturbedFlow {
    pub omega: Vec<f64>,
    pub f: FourierField,
    pub g: FourierField,
}

impl OdeSystem for PerturbedFlow {
    fn dim(&self) -> usize {
        2 * self.omega.len()
    }

    fn rhs(&self, t: f64, z: &[f64], out: &mut [f64]) {
        let d = self.omega.len();
        let (x, y) = z.split_at(d);
        let fv = self.f.eval_unchecked(x, y, t);
        let gv = self.g.eval_unchecked(x, y, t);
        for j in 0..d {
            out[j] = self.omega[j] + y[j] + fv[j];
            out[d + j] = gv[j];
        }
    }
}

/// Outcome of an invariance check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    /// Sup over samples of the Euclidean distance, angles reduced mod 2π.
    pub residual: f64,
    /// Estimated error of the reference integration (flow case).
    pub integrator_error: f64,
    pub samples: usize,
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn distance(x0: &[f64], y0: &[f64], x1: &[f64], y1: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..x0.len() {
        acc += wrap(x0[j] - x1[j]).powi(2) + (y0[j] - y1[j]).powi(2);
    }
    acc.sqrt()
}

/// Sample angles from a shifted Kronecker sequence, away from grid points.
pub fn sample_angles(d: usize, count: usize) -> Vec<Vec<f64>> {
    let irr: Vec<f64> = (0..d).map(|j| ((j + 2) as f64).sqrt().fract()).collect();
    (0..count)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if d == 1 {
                        TAU * (i as f64 + 0.37) / count as f64
                    } else {
                        TAU * ((i as f64 + 0.5) * irr[j]).fract()
                    }
                })
                .collect()
        })
        .collect()
}

/// Integrates over `[t0, t0 + dt]` with the eighth order composition of the
/// implicit midpoint rule, doubling the step count until two successive
/// results agree to `tol`. Returns the final state and the last difference.
pub fn integrate_to_tolerance<S: OdeSystem>(sys: &S, z0: &[f64], t0: f64, dt: f64, tol: f64) -> Result<(Vec<f64>, f64)> {
    let im = ImplicitMidpoint::default();
    let run = |steps: usize| -> Result<Vec<f64>> {
        let mut z = z0.to_vec();
        im.integrate(sys, &mut z, t0, dt / steps as f64, steps, 8)?;
        Ok(z)
    };
    let mut steps = 2;
    let mut prev = run(steps)?;
    loop {
        steps *= 2;
        let next = run(steps)?;
        let diff = prev.iter().zip(&next).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        if diff <= tol || steps >= 1024 {
            return Ok((next, diff));
        }
        prev = next;
    }
}

/// Flow case: `|φ_{Δt}(K(θ, t0)) - K(θ + ω Δt, t0 + Δt)|` over `samples` angles.
pub fn verify_flow_invariance<K>(
    embedding: K,
    system: &PerturbedFlow,
    samples: usize,
    t0: f64,
    dt: f64,
    tol: f64,
) -> Result<InvarianceReport>
where
    K: Fn(&[f64], f64) -> Result<(Vec<f64>, Vec<f64>)> + Sync,
{
    let d = system.omega.len();
    let rows: Vec<(f64, f64)> = sample_angles(d, samples)
        .into_par_iter()
        .map(|theta| {
            let (x, y) = embedding(&theta, t0)?;
            let z0: Vec<f64> = x.iter().chain(&y).copied().collect();
            let (z1, err) = integrate_to_tolerance(system, &z0, t0, dt, tol)?;
            let shifted: Vec<f64> = theta.iter().zip(&system.omega).map(|(a, w)| a + w * dt).collect();
            let (xe, ye) = embedding(&shifted, t0 + dt)?;
            Ok((distance(&z1[..d], &z1[d..], &xe, &ye), err))
        })
        .collect::<Result<_>>()?;
    Ok(InvarianceReport {
        residual: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        integrator_error: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        samples,
    })
}

/// Map case: `|A(K(θ)) - K(θ + ω)|` over `samples` angles.
pub fn verify_map_invariance<K, A>(embedding: K, map: &A, omega: &[f64], samples: usize) -> Result<InvarianceReport>
where
    K: Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>)> + Sync,
    A: TwistMap + ?Sized,
{
    let d = omega.len();
    let res: Vec<f64> = sample_angles(d, samples)
        .into_par_iter()
        .map(|theta| {
            let (x, y) = embedding(&theta)?;
            let (x1, y1) = map.apply(&x, &y);
            let shifted: Vec<f64> = theta.iter().zip(omega).map(|(a, w)| a + w).collect();
            let (xe, ye) = embedding(&shifted)?;
            Ok(distance(&x1, &y1, &xe, &ye))
        })
        .collect::<Result<_>>()?;
    Ok(InvarianceReport {
        residual: res.iter().copied().fold(0.0, f64::max),
        integrator_error: 0.0,
        samples,
    })
}

/// Weighted Birkhoff average of the lifted angle increments along an orbit,
/// with the `exp(-1 / (s (1 - s)))` bump weight.
pub fn rotation_number<A: TwistMap + ?Sized>(map: &A, x0: &[f64], y0: &[f64], iterations: usize) -> Vec<f64> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut acc = vec![0.0; d];
    let mut wsum = 0.0;
    for i in 0..iterations {
        let s = (i as f64 + 0.5) / iterations as f64;
        let w = (-1.0 / (s * (1.0 - s))).exp();
        let (x1, y1) = map.apply(&x, &y);
        for j in 0..d {
            acc[j] += w * (x1[j] - x[j]);
        }
        wsum += w;
        // keep angles bounded; increments are taken before reduction
        x = x1.iter().map(|v| v.rem_euclid(TAU)).collect();
        y = y1;
    }
    acc.iter().map(|a| a / wsum).collect()
}
