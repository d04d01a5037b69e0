use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use super::transform::NearIdentityTransform;
use crate::diophantine::Frequency;
use crate::error::{Error, Result};
use crate::fourier::{fit_field, FieldShape, FourierField, Parity};
use crate::homological::solve_flow;
use crate::smoothing::Kernel;

/// Parity defect above which a Newton step is rejected as structurally broken.
pub const PARITY_REJECT: f64 = 1e-8;

/// Measurements taken during one Newton step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub m: usize,
    pub cutoff: usize,
    /// Majorants of the carried perturbation entering the step.
    pub sup_f: f64,
    pub sup_g: f64,
    pub min_divisor: f64,
    pub residual_u: f64,
    pub residual_v: f64,
    /// Largest fixed-point iteration count met while inverting the transform.
    pub inversion_iters: usize,
    /// `max |y| / r_m` over the sampling points after inversion.
    pub nesting_ratio: f64,
    /// Off-grid residual of `u(x, y, t) + U(x + u, y + v, t)` and its `v` analogue.
    pub composition_residual: f64,
    /// Coefficient parity defects of the fitted outputs before projection.
    pub parity_defect_f: f64,
    pub parity_defect_g: f64,
    pub parity_defect_inverse: f64,
    pub sup_f_next: f64,
    pub sup_g_next: f64,
}

/// Result of one Newton step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub transform: NearIdentityTransform,
    pub f_next: FourierField,
    pub g_next: FourierField,
    pub diagnostics: StepDiagnostics,
}

fn fetch_max_f64(cell: &AtomicU64, v: f64) {
    // nonnegative floats order like their bit patterns
    cell.fetch_max(v.to_bits(), Ordering::Relaxed);
}

/// Points `(x, y, t)` for off-grid checks, from a Kronecker sequence.
pub(crate) fn probe_points(d: usize, time: bool, count: usize, radius: f64) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let irr: Vec<f64> = (0..2 * d + 1).map(|i| ((i + 2) as f64).sqrt().fract() + 0.1).collect();
    let tau = std::f64::consts::TAU;
    (1..=count)
        .map(|i| {
            let i = i as f64;
            let x = (0..d).map(|j| tau * (i * irr[j]).fract()).collect();
            let y = (0..d).map(|j| radius * (2.0 * (i * irr[d + j]).fract() - 1.0) / (d as f64).sqrt()).collect();
            let t = if time { tau * (i * irr[2 * d]).fract() } else { 0.0 };
            (x, y, t)
        })
        .collect()
}

/// One step of the flow iteration: solves the homological equations for the
/// carried perturbation `(f, g)`, inverts the transform pointwise and fits the
/// transformed perturbation and the inverse transform on the next domain.
pub fn newton_step(
    f: &FourierField,
    g: &FourierField,
    freq: &Frequency,
    schedule: &Schedule,
    kernel: &Kernel,
    m: usize,
) -> Result<StepOutput> {
    let d = f.d();
    if f.m() != d || g.m() != d || g.d() != d {
        return Err(Error::Shape(format!("f and g must be d-vector fields on T^{d}")));
    }
    let r_m = schedule.radius(m);
    let r_next = schedule.radius(m + 1);
    let sol = solve_flow(f, g, freq)?;
    let uv = FourierField::stack(&[sol.u.clone(), sol.v.clone()])?.with_radius(r_m);
    let fg = FourierField::stack(&[f.clone(), g.clone()])?;
    let placeholder = NearIdentityTransform {
        m,
        uv: uv.clone(),
        inverse: FourierField::zeros(uv.shape()),
    };

    let cutoff = schedule.cutoff(m + 1, kernel);
    let q_y = f.q_y().max(g.q_y());
    let shape = FieldShape::new(d, 4 * d, cutoff, q_y, r_next, true);
    let iters = AtomicUsize::new(0);
    let nesting = AtomicU64::new(0f64.to_bits());
    let fitted = fit_field(shape, 3 * cutoff + 1, 0.5 * r_next, |xi, eta, t, out| {
        let (x, y, it) = placeholder.invert(xi, eta, t).map_err(|e| match e {
            Error::StepFailure { reason, .. } => Error::StepFailure { step: m, reason },
            other => other,
        })?;
        iters.fetch_max(it, Ordering::Relaxed);
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        fetch_max_f64(&nesting, ny / r_m);
        let jet = uv.jet_unchecked(&x, &y, t);
        let val = fg.eval_unchecked(&x, &y, t);
        for c in 0..2 * d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += jet.dy[c * d + j] * val[d + j];
                acc += jet.dx[c * d + j] * val[j];
                acc += jet.dx[c * d + j] * y[j];
            }
            out[c] = acc;
        }
        // x = ξ - u(x, y, t) at the fixed point; reading U off u avoids cancellation
        let w = uv.eval_unchecked(&x, &y, t);
        for j in 0..2 * d {
            out[2 * d + j] = -w[j];
        }
        Ok(())
    })?;

    let pick = |lo: usize| -> Result<FourierField> {
        let parts: Vec<FourierField> = (lo..lo + d).map(|c| fitted.component(c)).collect::<Result<_>>()?;
        FourierField::stack(&parts)
    };
    let f_raw = pick(0)?;
    let g_raw = pick(d)?;
    let big_u = pick(2 * d)?;
    let big_v = pick(3 * d)?;
    let parity_defect_f = f_raw.parity_defect(Parity::Even);
    let parity_defect_g = g_raw.parity_defect(Parity::Odd);
    let parity_defect_inverse = big_u.parity_defect(Parity::Odd).max(big_v.parity_defect(Parity::Even));
    let worst = parity_defect_f.max(parity_defect_g).max(parity_defect_inverse);
    if worst > PARITY_REJECT {
        return Err(Error::StepFailure {
            step: m,
            reason: format!("reversibility lost in the transformed perturbation (parity defect {worst:.3e})"),
        });
    }
    let f_next = f_raw.project_parity(Parity::Even);
    let g_next = g_raw.project_parity(Parity::Odd);
    let inverse = FourierField::stack(&[big_u.project_parity(Parity::Odd), big_v.project_parity(Parity::Even)])?;
    let transform = NearIdentityTransform { m, uv, inverse };

    let mut composition_residual: f64 = 0.0;
    for (x, y, t) in probe_points(d, true, 64, 0.5 * r_next) {
        let (xi, eta) = transform.forward(&x, &y, t);
        let back = transform.inverse.eval_unchecked(&xi, &eta, t);
        for j in 0..d {
            composition_residual = composition_residual
                .max((xi[j] + back[j] - x[j]).abs())
                .max((eta[j] + back[d + j] - y[j]).abs());
        }
    }

    let diagnostics = StepDiagnostics {
        m,
        cutoff: f.cutoff(),
        sup_f: f.majorant(0.0, r_m),
        sup_g: g.majorant(0.0, r_m),
        min_divisor: sol.min_divisor,
        residual_u: sol.residual_u,
        residual_v: sol.residual_v,
        inversion_iters: iters.load(Ordering::Relaxed),
        nesting_ratio: f64::from_bits(nesting.load(Ordering::Relaxed)),
        composition_residual,
        parity_defect_f,
        parity_defect_g,
        parity_defect_inverse,
        sup_f_next: f_next.majorant(0.0, r_next),
        sup_g_next: g_next.majorant(0.0, r_next),
    };
    Ok(StepOutput {
        transform,
        f_next,
        g_next,
        diagnostics,
    })
}
