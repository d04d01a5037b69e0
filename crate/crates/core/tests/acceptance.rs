//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

mod common;

use std::f64::consts::TAU;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use revkam::config::{load_config, KamConfig, LienardConfig};
use revkam::diophantine::{certify, certify_rotation, default_tau, make_frequency, russmann_sum, FrequencyChoice};
use revkam::fourier::{action_samples, FieldShape, Parity};
use revkam::homological::{solve_flow, solve_map};
use revkam::io::{convergence_csv, embedding_json, orbit_csv, sha256_hex, smoothing_csv, stability_csv, to_json_pretty};
use revkam::lienard::{
    compute_reference_orbit, lagrange_stability_experiment, reversibility_sup, PoincareSettings, StabilitySettings,
    TransformedSystem,
};
use revkam::smoothing::{loglog_slope, smoothing_errors, synthetic_input, Kernel};
use revkam::synthetic::random_field;
use revkam::Result;

use common::{chain_rule_residual, compare_dense, repo_file};

type Check = Result<(bool, String)>;

fn golden() -> Vec<f64> {
    make_frequency(1, &FrequencyChoice::Golden).unwrap()
}

fn lienard_demo() -> Result<(LienardConfig, TransformedSystem)> {
    let (cfg, _): (LienardConfig, _) = load_config(&repo_file("configs/lienard_demo.json"), &[])?;
    let orbit = compute_reference_orbit(cfg.n, cfg.orbit_tol)?;
    let sys = TransformedSystem::new(cfg.problem()?, orbit, cfg.rho_star.unwrap_or(1024.0))?;
    Ok((cfg, sys))
}

/// d = 1, N = 8, q_y = 2: Fourier solvers against dense collocation.
fn ac1() -> Check {
    let ys = [-0.4, 0.1, 0.6];
    let mut out = Vec::new();
    let mut ok = true;
    let mut solve_time = Duration::ZERO;
    for time in [true, false] {
        let shape = FieldShape::new(1, 1, 8, 2, 1.0, time);
        let f = random_field(shape, Parity::Even, 1.0, 0.25, 101)?;
        let g = random_field(shape, Parity::Odd, 1.0, 0.25, 102)?.without_mean();
        let freq = if time {
            certify(&golden(), default_tau(1), 200)?
        } else {
            certify_rotation(&[TAU * golden()[0]], default_tau(1), 200)?
        };
        let t = Instant::now();
        let sol = if time { solve_flow(&f, &g, &freq)? } else { solve_map(&f, &g, &freq)? };
        solve_time += t.elapsed();
        let c = compare_dense(&f, &g, &sol, &freq, &ys);
        ok &= c.rel_diff <= 1e-10 && c.residual <= 1e-13;
        out.push(format!(
            "{}: rel diff {:.2e}, residual {:.2e}",
            if time { "flow" } else { "map" },
            c.rel_diff,
            c.residual
        ));
    }
    ok &= solve_time < Duration::from_secs(1);
    Ok((ok, format!("{}; solve time {:.3} s", out.join("; "), solve_time.as_secs_f64())))
}

/// 100 random flow cases: grid residual and parity of the solution.
fn ac2() -> Check {
    let mut worst_res: f64 = 0.0;
    let mut worst_par: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..100u64 {
        let d = 1 + (case % 2) as usize;
        let cutoff = if d == 1 { 8 } else { 5 };
        let shape = FieldShape::new(d, d, cutoff, 2, 1.0, true);
        let amp = rng.gen_range(1e-4..1.0);
        let decay = rng.gen_range(0.1..1.0);
        let f = random_field(shape, Parity::Even, amp, decay, 1000 + 2 * case)?;
        let g = random_field(shape, Parity::Odd, amp, decay, 1001 + 2 * case)?.without_mean();
        let freq = certify(&make_frequency(d, &FrequencyChoice::SqrtPrime)?, default_tau(d), 60)?;
        let sol = solve_flow(&f, &g, &freq)?;
        let ys = action_samples(d, 0.5);
        let n = if d == 1 { 2 * cutoff + 3 } else { 7 };
        worst_par = worst_par
            .max(sol.u.parity_grid_residual(Parity::Odd, n, &ys))
            .max(sol.v.parity_grid_residual(Parity::Even, n, &ys));
        // ω·∂_x v + ∂_t v = -g and ω·∂_x u + ∂_t u = v - f at random points
        let lie = |w: &revkam::fourier::FourierField| -> Result<revkam::fourier::FourierField> {
            let mut acc = w.differentiate_t();
            for (j, om) in freq.omega.iter().enumerate() {
                acc = acc.add(&w.differentiate_x(j)?.scale(*om))?;
            }
            Ok(acc)
        };
        let (lv, lu) = (lie(&sol.v)?, lie(&sol.u)?);
        let (mut res, mut scale) = (0.0f64, 0.0f64);
        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..TAU)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let t = rng.gen_range(0.0..TAU);
            let e = |fld: &revkam::fourier::FourierField| fld.evaluate(&x, &y, t);
            let (gv, fv, vv, lvv, luv) = (e(&g)?, e(&f)?, e(&sol.v)?, e(&lv)?, e(&lu)?);
            for c in 0..d {
                res = res.max((lvv[c] + gv[c]).abs()).max((luv[c] - vv[c] + fv[c]).abs());
                scale = scale.max(gv[c].abs()).max(fv[c].abs());
            }
        }
        worst_res = worst_res.max(res / scale);
    }
    Ok((
        worst_res <= 1e-10 && worst_par <= 1e-10,
        format!("worst grid residual {worst_res:.2e}, worst parity defect {worst_par:.2e}"),
    ))
}

/// Growth exponent of the Rüssmann sum for the golden mean, τ = 1.01.
fn ac3() -> Check {
    let tau = 1.01;
    let freq = certify(&golden(), tau, 1024)?;
    let ns: Vec<f64> = (4..=10).map(|p| (1usize << p) as f64).collect();
    let sums = ns.iter().map(|&n| russmann_sum(&freq, n as usize)).collect::<Result<Vec<_>>>()?;
    let slope = loglog_slope(&ns, &sums);
    Ok((
        (0.0..=2.0 * tau + 0.2).contains(&slope),
        format!("fitted exponent {slope:.4} (bound {:.2})", 2.0 * tau + 0.2),
    ))
}

/// Jackson rate `sup |S_s F - F| ~ s^ℓ`.
fn ac4() -> Check {
    let widths: Vec<f64> = (0..9).map(|i| 0.1 * 0.1f64.powf(i as f64 / 8.0)).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for ell in [2.5, 3.1, 4.0] {
        let errors = smoothing_errors(&synthetic_input(ell, 2048), &widths, &Kernel::default())?;
        let slope = loglog_slope(&widths, &errors);
        ok &= (slope - ell).abs() <= 0.25 * ell;
        parts.push(format!("ℓ = {ell}: {slope:.3}"));
    }
    Ok((ok, parts.join(", ")))
}

/// Flow Newton-KAM, d = 1, μ = 0.1, golden ω, ε = 1e-4.
fn ac5() -> Check {
    let path = repo_file("configs/flow_demo.json");
    let (cfg, _): (KamConfig, _) = load_config(&path, &[])?;
    let out = cfg.run(path.parent().unwrap_or(Path::new(".")))?;
    let r = &out.run.report;
    let order = r.contraction_order.unwrap_or(0.0);
    let need = 1.0 + out.schedule.mu_tilde / 2.0;
    let ok = r.rows.len() >= 5
        && r.is_monotone()
        && order >= need
        && r.final_invariance.residual <= 1e-8
        && cfg.settings.verify_tol <= 1e-12;
    Ok((
        ok,
        format!(
            "{} steps, monotone {}, order {order:.4} (need {need:.4}), invariance {:.2e} at integrator tol {:.0e}",
            r.rows.len(),
            r.is_monotone(),
            r.final_invariance.residual,
            cfg.settings.verify_tol
        ),
    ))
}

/// Map Newton-KAM, ε = 1e-4.
fn ac6() -> Check {
    let path = repo_file("configs/map_demo.json");
    let (cfg, _): (KamConfig, _) = load_config(&path, &[])?;
    let out = cfg.run(path.parent().unwrap_or(Path::new(".")))?;
    let r = &out.run.report;
    let omega = out.frequency.omega[0];
    let rot_err = r.rotation_number.as_ref().map_or(f64::INFINITY, |v| (v[0] - omega).abs());
    Ok((
        r.final_invariance.residual <= 1e-8 && rot_err <= 1e-8,
        format!("invariance {:.2e}, rotation number error {rot_err:.2e}", r.final_invariance.residual),
    ))
}

/// Reference orbit energy, symmetry and periodicity.
fn ac7() -> Check {
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let p = compute_reference_orbit(n, 1e-13)?.properties();
        worst = worst.max(p.energy).max(p.symmetry).max(p.periodicity);
    }
    Ok((worst <= 1e-10, format!("worst property residual {worst:.2e} over n = 1, 2, 3")))
}

/// Plane system against `Dψ` times the transformed vector field.
fn ac8() -> Check {
    let (_, sys) = lienard_demo()?;
    let r = chain_rule_residual(&sys, 1000, 8);
    Ok((r <= 1e-8, format!("relative chain-rule residual {r:.2e} on 1000 points")))
}

/// Reversibility of the period map, boundedness and the unperturbed control.
fn ac9() -> Check {
    let (_, sys) = lienard_demo()?;
    let ls = sys.lambda_of_rho(sys.rho_star);
    let thetas: Vec<f64> = (0..8).map(|i| TAU * i as f64 / 8.0).collect();
    let lambdas: Vec<f64> = [1.5, 2.0, 4.0].iter().map(|m| m * ls).collect();
    let rev = reversibility_sup(&sys, &thetas, &lambdas, &PoincareSettings::default())?;
    let settings = StabilitySettings::default();
    let report = lagrange_stability_experiment(&sys, &settings)?;
    let failures = report.orbits.iter().chain(&report.control).filter(|o| o.failure.is_some()).count();
    let ok = rev <= 1e-9
        && settings.t_max >= 1e4
        && report.orbits.len() >= 20
        && failures == 0
        && report.max_level_ratio <= 1.5
        && report.max_control_energy_drift <= 1e-6;
    Ok((
        ok,
        format!(
            "reversibility {rev:.2e}; {} orbits to T = {:.0e}, max level ratio {:.4}, control drift {:.2e}, failures {failures}",
            report.orbits.len(),
            settings.t_max,
            report.max_level_ratio,
            report.max_control_energy_drift
        ),
    ))
}

/// Every artifact writer, run twice on different thread counts.
fn artifacts() -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let shape = FieldShape::new(2, 2, 5, 2, 0.0, true);
    let f = random_field(shape, Parity::Even, 1e-3, 0.5, 7)?;
    let g = random_field(shape, Parity::Odd, 1e-3, 0.5, 8)?.without_mean();
    let freq = certify(&make_frequency(2, &FrequencyChoice::SqrtPrime)?, default_tau(2), 60)?;
    let sol = solve_flow(&f, &g, &freq)?;
    out.push(("u.json".into(), sha256_hex(to_json_pretty(&sol.u.to_doc()).as_bytes())));
    out.push(("v.json".into(), sha256_hex(to_json_pretty(&sol.v.to_doc()).as_bytes())));

    let path = repo_file("configs/map_demo.json");
    let (cfg, _): (KamConfig, _) = load_config(&path, &[])?;
    let run = cfg.run(Path::new("."))?;
    out.push(("embedding.json".into(), sha256_hex(embedding_json(&run.run.embedding).as_bytes())));
    out.push(("convergence.csv".into(), sha256_hex(&convergence_csv(&run.run.report))));

    let widths = [0.1, 0.05, 0.02];
    let errors = smoothing_errors(&synthetic_input(3.1, 512), &widths, &Kernel::default())?;
    out.push(("smoothing.csv".into(), sha256_hex(&smoothing_csv(&widths, &errors))));

    let (_, sys) = lienard_demo()?;
    out.push(("orbit.csv".into(), sha256_hex(&orbit_csv(&sys.orbit, 128))));
    let short = StabilitySettings {
        t_max: 20.0,
        ..StabilitySettings::default()
    };
    let report = lagrange_stability_experiment(&sys, &short)?;
    out.push(("stability.csv".into(), sha256_hex(&stability_csv(&report))));
    Ok(out)
}

fn ac10() -> Check {
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool");
    let a = pool(1).install(artifacts)?;
    let b = pool(3).install(artifacts)?;
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    Ok((
        differing.is_empty() && a.len() == b.len(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical across runs with 1 and 3 threads", a.len())
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    ))
}

fn main() {
    let criteria: [(&str, &str, u64, fn() -> Check); 10] = [
        ("AC1", "homological solvers vs dense collocation", 1, ac1),
        ("AC2", "parity suite", 30, ac2),
        ("AC3", "Rüssmann sum growth", 10, ac3),
        ("AC4", "Jackson smoothing rate", 30, ac4),
        ("AC5", "flow Newton-KAM", 300, ac5),
        ("AC6", "map Newton-KAM", 300, ac6),
        ("AC7", "reference orbit properties", 10, ac7),
        ("AC8", "action-angle chain rule", 30, ac8),
        ("AC9", "period map reversibility and boundedness", 600, ac9),
        ("AC10", "determinism", 600, ac10),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let t = Instant::now();
        let result = check();
        let secs = t.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok((ok, detail)) => (ok && secs < budget as f64, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} {id} {name}: {detail} [{secs:.2} s, budget {budget} s]",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
