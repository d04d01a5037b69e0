use super::embedding::TorusEmbedding;
use super::map::failed;
use super::report::{contraction_order, ConvergenceReport, RunStatus, StepRecord};
use super::schedule::Schedule;
use super::step::newton_step;
use super::transform::TransformChain;
use super::verify::{verify_flow_invariance, PerturbedFlow};
use super::{KamRun, KamSettings};
use crate::diophantine::{Frequency, FrequencyKind};
use crate::error::{Error, Result};
use crate::fourier::{fit_field, FieldShape, FourierField, Parity};
use crate::homological::STRUCTURE_TOL;
use crate::smoothing::{decompose, Kernel};

/// `x1, y1` of a flow embedding from the chain: `(θ, t) -> Φ(θ, 0, t)`.
fn chain_point(chain: &TransformChain, theta: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let zero = vec![0.0; theta.len()];
    let (x, y, _) = chain.pull(theta, &zero, t)?;
    Ok((x, y))
}

/// Fresh decomposition pieces `(f_m, g_m)`, given in original coordinates,
/// pushed through the chain and fitted on the step-`m` domain.
fn push_piece(
    chain: &TransformChain,
    f: &FourierField,
    g: &FourierField,
    cutoff: usize,
    q_y: usize,
    radius: f64,
) -> Result<(FourierField, FourierField)> {
    let d = f.d();
    if chain.is_empty() {
        return Ok((
            f.with_cutoff(cutoff).with_q_y(q_y).with_radius(radius),
            g.with_cutoff(cutoff).with_q_y(q_y).with_radius(radius),
        ));
    }
    let fg = FourierField::stack(&[f.clone(), g.clone()])?;
    let shape = FieldShape::new(d, 2 * d, cutoff, q_y, radius, true);
    let fitted = fit_field(shape, 3 * cutoff + 1, 0.5 * radius, |xi, eta, t, out| {
        let w = chain.pushforward(xi, eta, t, |x, y| fg.eval_unchecked(x, y, t))?;
        out.copy_from_slice(&w);
        Ok(())
    })?;
    let pick = |lo: usize| -> Result<FourierField> {
        let parts: Vec<FourierField> = (lo..lo + d).map(|c| fitted.component(c)).collect::<Result<_>>()?;
        FourierField::stack(&parts)
    };
    Ok((pick(0)?.project_parity(Parity::Even), pick(d)?.project_parity(Parity::Odd)))
}

/// Newton iteration for the invariant torus of
/// `dx/dt = ω + y + f(x, y, t)`, `dy/dt = g(x, y, t)` with `f` even and `g`
/// odd under `(x, y, t) -> (-x, y, -t)`. The inputs are split into smoothed
/// pieces; piece `m` joins the carried perturbation at step `m`.
pub fn run_kam_flow(
    f: &FourierField,
    g: &FourierField,
    freq: &Frequency,
    schedule: &Schedule,
    kernel: &Kernel,
    settings: &KamSettings,
) -> Result<KamRun> {
    let d = freq.d();
    if freq.kind != FrequencyKind::Flow {
        return Err(Error::Parameter("the flow runner needs a flow certificate".into()));
    }
    if f.d() != d || g.d() != d || f.m() != d || g.m() != d || schedule.d != d {
        return Err(Error::Shape(format!("f, g, frequency and schedule must all have d = {d}")));
    }
    let f = f.with_time();
    let g = g.with_time();
    for (field, parity, name) in [(&f, Parity::Even, "f"), (&g, Parity::Odd, "g")] {
        let defect = field.parity_defect(parity);
        if defect > STRUCTURE_TOL {
            return Err(Error::Structure(format!(
                "{name} violates the reversibility condition (relative defect {defect:.3e})"
            )));
        }
    }
    let f = f.project_parity(Parity::Even);
    let g = g.project_parity(Parity::Odd);
    let q_y = f.q_y().max(g.q_y()).max(settings.q_y);
    let f = f.with_q_y(q_y);
    let g = g.with_q_y(q_y);

    let widths = &schedule.s;
    let dec_f = decompose(&f, widths, kernel)?;
    let dec_g = decompose(&g, widths, kernel)?;
    let mut warnings = Vec::new();
    // smoothness of g shows up as the decay |g_v| <= C eps_v s_v^d
    let implied: Vec<f64> = dec_g
        .majorants
        .iter()
        .enumerate()
        .map(|(nu, &mj)| mj / (schedule.eps[nu] * schedule.s[nu].powi(d as i32)))
        .collect();
    if let Some(&c0) = implied.iter().find(|c| **c > 0.0) {
        if let Some((nu, c)) = implied.iter().enumerate().find(|(_, c)| **c > 10.0 * c0) {
            warnings.push(format!(
                "piece {nu} of g decays slower than eps_v s_v^d (implied constant {c:.3e} against {c0:.3e})"
            ));
        }
    }

    let mut chain = TransformChain::new();
    let mut rows = Vec::new();
    let mut sizes = Vec::new();
    let mut status = RunStatus::MaxSteps;
    let mut carried: Option<(FourierField, FourierField)> = None;
    let system = PerturbedFlow {
        omega: freq.omega.clone(),
        f: f.clone(),
        g: g.clone(),
    };

    for m in 0..=schedule.m_steps {
        let cutoff = schedule.cutoff(m, kernel);
        let r_m = schedule.radius(m);
        let fresh_f = &dec_f.pieces[m];
        let fresh_g = &dec_g.pieces[m];
        let mut cur = match carried.take() {
            Some((cf, cg)) => (cf, cg),
            None => {
                let shape = FieldShape::new(d, d, cutoff, q_y, r_m, true);
                (
                    FourierField::zeros(shape).with_parity(Parity::Even),
                    FourierField::zeros(shape).with_parity(Parity::Odd),
                )
            }
        };
        if !(fresh_f.is_zero() && fresh_g.is_zero()) {
            match push_piece(&chain, fresh_f, fresh_g, cutoff, q_y, r_m) {
                Ok((pf, pg)) => {
                    cur = (cur.0.add(&pf)?, cur.1.add(&pg)?);
                }
                Err(e @ Error::StepFailure { .. }) => {
                    status = failed(&e, m);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let (cf, cg) = cur;
        let size = cf.majorant(0.0, r_m) + cg.majorant(0.0, r_m);
        sizes.push(size);
        if size < settings.tol {
            status = RunStatus::Converged;
            break;
        }
        if m == schedule.m_steps {
            break;
        }
        if sizes.len() >= 2 && size < 1e-12 && size >= sizes[sizes.len() - 2] {
            status = RunStatus::RoundingFloor;
            break;
        }
        let out = match newton_step(&cf, &cg, freq, schedule, kernel, m) {
            Ok(o) => o,
            Err(e @ Error::StepFailure { .. }) => {
                status = failed(&e, m);
                break;
            }
            Err(e) => return Err(e),
        };
        chain.push_step(out.transform);
        let invariance_residual = if settings.per_step_verify {
            verify_flow_invariance(
                |theta, t| chain_point(&chain, theta, t),
                &system,
                settings.verify_samples,
                settings.verify_t0,
                settings.verify_dt,
                settings.verify_tol,
            )?
            .residual
        } else {
            f64::NAN
        };
        let diag = out.diagnostics;
        rows.push(StepRecord {
            m,
            sup_f: diag.sup_f,
            sup_g: diag.sup_g,
            min_divisor: diag.min_divisor,
            inversion_iters: diag.inversion_iters,
            invariance_residual,
            diagnostics: diag,
            dropped_mean: 0.0,
        });
        carried = Some((out.f_next, out.g_next));
    }

    let embedding = TorusEmbedding::sample(&freq.omega, true, settings.embedding_n, |theta, t| {
        chain_point(&chain, theta, t)
    })?;
    let final_invariance = verify_flow_invariance(
        |theta, t| Ok(embedding.eval(theta, t)),
        &system,
        settings.verify_samples,
        settings.verify_t0,
        settings.verify_dt,
        settings.verify_tol,
    )?;
    let max_action = embedding.max_action();
    if max_action > schedule.radius(0) {
        warnings.push(format!("torus leaves the step-0 action domain: max |y| = {max_action:.3e}"));
    }
    let report = ConvergenceReport {
        mode: "flow".into(),
        contraction_order: contraction_order(&sizes),
        rows,
        status,
        warnings,
        sizes,
        final_invariance,
        rotation_number: None,
        max_action,
    };
    Ok(KamRun {
        embedding,
        report,
        chain,
    })
}
