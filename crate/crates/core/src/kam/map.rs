use rayon::prelude::*;

use super::embedding::TorusEmbedding;
use super::report::{contraction_order, ConvergenceReport, RunStatus, StepRecord};
use super::schedule::Schedule;
use super::step::{probe_points, StepDiagnostics};
use super::transform::{NearIdentityTransform, TransformChain};
use super::verify::{rotation_number, sample_angles, verify_map_invariance};
use super::{KamRun, KamSettings};
use crate::diophantine::{Frequency, FrequencyKind};
use crate::error::{Error, Result};
use crate::fourier::{fit_field, FieldShape, FourierField, Parity};
use crate::homological::solve_map;
use crate::smoothing::Kernel;

/// A map of `T^d × R^d` with lifted angles.
pub trait TwistMap: Sync {
    fn d(&self) -> usize;
    fn apply(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// `x1 = x + ω + y + f(x, y)`, `y1 = y + g(x, y)` with time-independent `f`, `g`.
#[derive(Clone, Debug)]
pub struct PerturbedTwistMap {
    pub omega: Vec<f64>,
    pub f: FourierField,
    pub g: FourierField,
}

impl TwistMap for PerturbedTwistMap {
    fn d(&self) -> usize {
        self.omega.len()
    }

    fn apply(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let fv = self.f.eval_unchecked(x, y, 0.0);
        let gv = self.g.eval_unchecked(x, y, 0.0);
        let d = self.d();
        (
            (0..d).map(|j| x[j] + self.omega[j] + y[j] + fv[j]).collect(),
            (0..d).map(|j| y[j] + gv[j]).collect(),
        )
    }
}

/// Kick-drift-kick twist map, reversible under `(x, y) -> (-x, y)`:
/// `y' = y + (ε/2) sin x`, `x1 = x + ω + y'`, `y1 = y' + (ε/2) sin x1`,
/// applied componentwise.
#[derive(Clone, Debug, PartialEq)]
pub struct KickDriftKick {
    pub omega: Vec<f64>,
    pub eps: f64,
}

impl TwistMap for KickDriftKick {
    fn d(&self) -> usize {
        self.omega.len()
    }

    fn apply(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = 0.5 * self.eps;
        let mut x1 = Vec::with_capacity(x.len());
        let mut y1 = Vec::with_capacity(x.len());
        for j in 0..x.len() {
            let yh = y[j] + h * x[j].sin();
            let xn = x[j] + self.omega[j] + yh;
            x1.push(xn);
            y1.push(yh + h * xn.sin());
        }
        (x1, y1)
    }
}

/// `max |A(G(A(z))) - G(z)|` over probe points with `|y| <= radius`, where
/// `G(x, y) = (-x, y)`. Zero for a map reversible under `G`.
pub fn reversibility_defect<A: TwistMap + ?Sized>(map: &A, samples: usize, radius: f64) -> f64 {
    let d = map.d();
    probe_points(d, false, samples, radius)
        .into_par_iter()
        .map(|(x, y, _)| {
            let (x1, y1) = map.apply(&x, &y);
            let gx: Vec<f64> = x1.iter().map(|v| -v).collect();
            let (x2, y2) = map.apply(&gx, &y1);
            (0..d)
                .map(|j| (x2[j] + x[j]).abs().max((y2[j] - y[j]).abs()))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// `(f, g)` of the map seen through the chain: `A_m = Φ^{-1} ∘ A ∘ Φ`, fitted on
/// the step-`m` domain. Also returns the largest inversion count.
fn conjugated_perturbation<A: TwistMap + ?Sized>(
    map: &A,
    chain: &TransformChain,
    omega: &[f64],
    cutoff: usize,
    q_y: usize,
    radius: f64,
    step: usize,
) -> Result<(FourierField, FourierField, usize)> {
    let d = omega.len();
    let iters = std::sync::atomic::AtomicUsize::new(0);
    let shape = FieldShape::new(d, 2 * d, cutoff, q_y, radius, false);
    let fitted = fit_field(shape, 3 * cutoff + 1, 0.5 * radius, |xi, eta, _t, out| {
        let (x, y, it) = chain.pull(xi, eta, 0.0).map_err(|e| relabel(e, step))?;
        iters.fetch_max(it, std::sync::atomic::Ordering::Relaxed);
        let (x1, y1) = map.apply(&x, &y);
        let (xi1, eta1) = chain.push(&x1, &y1, 0.0);
        for j in 0..d {
            out[j] = xi1[j] - xi[j] - omega[j] - eta[j];
            out[d + j] = eta1[j] - eta[j];
        }
        Ok(())
    })?;
    let f = stack_range(&fitted, 0, d)?;
    let g = stack_range(&fitted, d, d)?;
    Ok((f, g, iters.into_inner()))
}

fn relabel(e: Error, step: usize) -> Error {
    match e {
        Error::StepFailure { reason, .. } => Error::StepFailure { step, reason },
        other => other,
    }
}

fn stack_range(field: &FourierField, lo: usize, len: usize) -> Result<FourierField> {
    let parts: Vec<FourierField> = (lo..lo + len).map(|c| field.component(c)).collect::<Result<_>>()?;
    FourierField::stack(&parts)
}

/// Fits the inverse `(U, V)` of `(u, v)` on the step-`m` domain.
fn fit_inverse(uv: &FourierField, m: usize, cutoff: usize, q_y: usize, radius: f64) -> Result<(NearIdentityTransform, f64)> {
    let d = uv.d();
    let placeholder = NearIdentityTransform {
        m,
        uv: uv.clone(),
        inverse: FourierField::zeros(uv.shape()),
    };
    let shape = FieldShape::new(d, 2 * d, cutoff, q_y, radius, false);
    let inv = fit_field(shape, 3 * cutoff + 1, 0.5 * radius, |xi, eta, _t, out| {
        let (x, y, _) = placeholder.invert(xi, eta, 0.0).map_err(|e| relabel(e, m))?;
        // x = ξ - u(x, y) at the fixed point; reading U off u avoids cancellation
        let w = uv.eval_unchecked(&x, &y, 0.0);
        for (o, v) in out.iter_mut().zip(&w) {
            *o = -v;
        }
        Ok(())
    })?;
    let big_u = stack_range(&inv, 0, d)?;
    let big_v = stack_range(&inv, d, d)?;
    let defect = big_u.parity_defect(Parity::Odd).max(big_v.parity_defect(Parity::Even));
    let transform = NearIdentityTransform {
        m,
        uv: uv.clone(),
        inverse: FourierField::stack(&[big_u.project_parity(Parity::Odd), big_v.project_parity(Parity::Even)])?,
    };
    Ok((transform, defect))
}

fn map_embedding(chain: &TransformChain, omega: &[f64], n: usize) -> Result<TorusEmbedding> {
    let zero = vec![0.0; omega.len()];
    TorusEmbedding::sample(omega, false, n, |theta, _| {
        let (x, y, _) = chain.pull(theta, &zero, 0.0)?;
        Ok((x, y))
    })
}

/// Newton iteration for an invariant torus of rotation `ω` (radians) of a
/// reversible twist map `x1 = x + ω + y + O(ε)`. Each step refits the map
/// conjugated by the current chain, solves the difference equations and
/// appends the change of variables.
pub fn run_kam_map<A: TwistMap + ?Sized>(
    map: &A,
    freq: &Frequency,
    schedule: &Schedule,
    kernel: &Kernel,
    settings: &KamSettings,
) -> Result<KamRun> {
    let d = freq.d();
    if freq.kind != FrequencyKind::Map {
        return Err(Error::Parameter("the map runner needs a rotation certificate".into()));
    }
    if map.d() != d || schedule.d != d {
        return Err(Error::Shape(format!("map, frequency and schedule disagree on d ({}, {d}, {})", map.d(), schedule.d)));
    }
    let mut warnings = Vec::new();
    let defect = reversibility_defect(map, 64, schedule.radius(0));
    if defect > 1e-10 {
        warnings.push(format!("map is not reversible under (x, y) -> (-x, y): defect {defect:.3e}"));
    }
    let q_y = settings.q_y;
    let omega = freq.omega.clone();
    let mut chain = TransformChain::new();
    let mut rows = Vec::new();
    let mut sizes = Vec::new();
    let mut status = RunStatus::MaxSteps;

    for m in 0..schedule.m_steps {
        let cutoff = schedule.cutoff(m, kernel);
        let r_m = schedule.radius(m);
        let (f, g, iters) = match conjugated_perturbation(map, &chain, &omega, cutoff, q_y, r_m, m) {
            Ok(v) => v,
            Err(e @ Error::StepFailure { .. }) => {
                status = failed(&e, m);
                break;
            }
            Err(e) => return Err(e),
        };
        // torus error: the action-independent part of the perturbation
        let size = f.majorant(0.0, 0.0) + g.majorant(0.0, 0.0);
        sizes.push(size);
        if size < settings.tol {
            status = RunStatus::Converged;
            break;
        }
        if sizes.len() >= 2 && size < 1e-12 && size >= sizes[sizes.len() - 2] {
            status = RunStatus::RoundingFloor;
            break;
        }
        let dropped_mean = g.with_q_y(0).mean().iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
        // the action-dependent part of a reversible map has no parity of its own;
        // the step only corrects the torus part, so the transform depends on x alone
        let f0 = f.with_q_y(0);
        let g0 = g.with_q_y(0).without_mean();
        let sol = solve_map(&f0, &g0, freq)?;
        // the torus of a reversible map has an odd angle and even action deformation;
        // one linearized step is symmetric only to first order, so it is projected
        let sym_defect = sol.u.parity_defect(Parity::Odd).max(sol.v.parity_defect(Parity::Even));
        let u = sol.u.project_parity(Parity::Odd);
        let v = sol.v.project_parity(Parity::Even);
        let uv = FourierField::stack(&[u, v])?.with_radius(r_m);
        let (transform, parity_defect_inverse) = match fit_inverse(&uv, m, cutoff, 0, r_m) {
            Ok(t) => t,
            Err(e @ Error::StepFailure { .. }) => {
                status = failed(&e, m);
                break;
            }
            Err(e) => return Err(e),
        };
        let mut composition_residual: f64 = 0.0;
        for (x, y, _) in probe_points(d, false, 64, 0.5 * r_m) {
            let (xi, eta) = transform.forward(&x, &y, 0.0);
            let back = transform.inverse.eval_unchecked(&xi, &eta, 0.0);
            for j in 0..d {
                composition_residual = composition_residual
                    .max((xi[j] + back[j] - x[j]).abs())
                    .max((eta[j] + back[d + j] - y[j]).abs());
            }
        }
        chain.push_step(transform);
        let invariance_residual = if settings.per_step_verify {
            let zero = vec![0.0; d];
            verify_map_invariance(
                |theta| {
                    let (x, y, _) = chain.pull(theta, &zero, 0.0)?;
                    Ok((x, y))
                },
                map,
                &omega,
                settings.verify_samples,
            )?
            .residual
        } else {
            f64::NAN
        };
        let sup_f = f.majorant(0.0, r_m);
        let sup_g = g.majorant(0.0, r_m);
        rows.push(StepRecord {
            m,
            sup_f,
            sup_g,
            min_divisor: sol.min_divisor,
            inversion_iters: iters,
            invariance_residual,
            diagnostics: StepDiagnostics {
                m,
                cutoff,
                sup_f,
                sup_g,
                min_divisor: sol.min_divisor,
                residual_u: sol.residual_u,
                residual_v: sol.residual_v,
                inversion_iters: iters,
                nesting_ratio: 0.0,
                composition_residual,
                parity_defect_f: sym_defect,
                parity_defect_g: sym_defect,
                parity_defect_inverse,
                sup_f_next: f64::NAN,
                sup_g_next: f64::NAN,
            },
            dropped_mean,
        });
    }
    if matches!(status, RunStatus::MaxSteps) {
        // size left after the last step
        let m = schedule.m_steps;
        if let Ok((f, g, _)) = conjugated_perturbation(map, &chain, &omega, schedule.cutoff(m, kernel), q_y, schedule.radius(m), m) {
            let size = f.majorant(0.0, 0.0) + g.majorant(0.0, 0.0);
            sizes.push(size);
            if size < settings.tol {
                status = RunStatus::Converged;
            }
        }
    }

    let embedding = map_embedding(&chain, &omega, settings.embedding_n)?;
    let final_invariance = verify_map_invariance(
        |theta| Ok(embedding.eval(theta, 0.0)),
        map,
        &omega,
        settings.verify_samples,
    )?;
    let start = embedding.eval(&sample_angles(d, 1)[0], 0.0);
    let rho = rotation_number(map, &start.0, &start.1, settings.rotation_iterations);
    let max_action = embedding.max_action();
    if max_action > schedule.radius(0) {
        warnings.push(format!("torus leaves the step-0 action domain: max |y| = {max_action:.3e}"));
    }
    let report = ConvergenceReport {
        mode: "map".into(),
        contraction_order: contraction_order(&sizes),
        rows,
        status,
        warnings,
        sizes,
        final_invariance,
        rotation_number: Some(rho),
        max_action,
    };
    Ok(KamRun {
        embedding,
        report,
        chain,
    })
}

pub(crate) fn failed(e: &Error, m: usize) -> RunStatus {
    match e {
        Error::StepFailure { step, reason } => RunStatus::Failed {
            step: *step,
            reason: reason.clone(),
        },
        other => RunStatus::Failed {
            step: m,
            reason: other.to_string(),
        },
    }
}
