use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use revkam::config::{from_value, load_config, KamConfig, LienardConfig};
use revkam::diophantine::{certify, certify_rotation, default_tau, make_frequency, FrequencyChoice};
use revkam::fourier::{FieldShape, Parity};
use revkam::homological::{solve_flow, solve_map};
use revkam::io::{
    convergence_csv, embedding_json, load_embedding, load_field, orbit_csv, section_csv, smoothing_csv, stability_csv,
    to_json_pretty, RunManifest,
};
use revkam::kam::RunStatus;
use revkam::lienard::{
    compute_reference_orbit, default_rho_star, lagrange_stability_experiment, reversibility_sup, section_orbit,
    TransformedSystem,
};
use revkam::smoothing::{loglog_slope, smoothing_errors, synthetic_input, Kernel};
use revkam::synthetic::random_field;

use crate::{Cli, Command, DiophArgs, Failure, Global, HomsolveArgs, KamCommand, LienardCommand, OmegaKind, Outcome};
use crate::{SmoothArgs, SolveMode, VerifyArgs};

type CmdResult = Result<Outcome, Failure>;

pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Dioph(_) => "dioph",
        Command::SmoothTest(_) => "smooth-test",
        Command::Homsolve(_) => "homsolve",
        Command::Kam(KamCommand::Run) => "kam run",
        Command::Lienard(LienardCommand::Orbit) => "lienard orbit",
        Command::Lienard(LienardCommand::Poincare) => "lienard poincare",
        Command::Lienard(LienardCommand::Stability) => "lienard stability",
        Command::Verify(_) => "verify",
    }
}

pub fn dispatch(cli: &Cli) -> CmdResult {
    let g = &cli.global;
    let name = command_name(&cli.command);
    match &cli.command {
        Command::Dioph(a) => dioph(g, a),
        Command::SmoothTest(a) => smooth_test(g, a, name),
        Command::Homsolve(a) => homsolve(g, a, name),
        Command::Kam(KamCommand::Run) => kam_run(g, name),
        Command::Lienard(sub) => lienard(g, sub, name),
        Command::Verify(a) => verify(g, a),
    }
}

fn choice(k: OmegaKind) -> FrequencyChoice {
    match k {
        OmegaKind::Golden => FrequencyChoice::Golden,
        OmegaKind::SqrtPrime => FrequencyChoice::SqrtPrime,
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

/// Output directory with its manifest; the manifest is written last.
struct RunDir {
    dir: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl RunDir {
    fn new(g: &Global, dir: PathBuf, command: &str, config: Value) -> Self {
        let name = dir.file_name().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
        let threads = rayon::current_num_threads();
        Self {
            manifest: RunManifest::new(&name, command, config, g.seed, threads),
            dir,
            start: Instant::now(),
        }
    }

    fn add(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        Ok(self.manifest.add_file(&self.dir, name, bytes)?)
    }

    fn finish(mut self) -> Result<PathBuf, Failure> {
        self.manifest.timing.wall_seconds = self.start.elapsed().as_secs_f64();
        self.manifest.save(&self.dir)?;
        Ok(self.dir)
    }
}

fn dioph(g: &Global, a: &DiophArgs) -> CmdResult {
    let omega = if a.omega.is_empty() {
        make_frequency(a.d, &choice(a.omega_kind))?
    } else {
        a.omega.clone()
    };
    let tau = a.tau.unwrap_or_else(|| default_tau(omega.len()));
    let cert = if a.map {
        let rot: Vec<f64> = omega.iter().map(|v| TAU * v).collect();
        certify_rotation(&rot, tau, a.k_max)?
    } else {
        certify(&omega, tau, a.k_max)?
    };
    let text = to_json_pretty(&cert);
    if let Some(dir) = &g.out {
        let mut run = RunDir::new(g, dir.clone(), "dioph", json!({ "omega": omega, "tau": tau, "K_max": a.k_max, "map": a.map }));
        run.add("certificate.json", text.as_bytes())?;
        run.finish()?;
    }
    Ok(Outcome {
        stdout: Some(text),
        summary: serde_json::to_value(&cert).expect("certificate serializes"),
        code: 0,
    })
}

fn smooth_test(g: &Global, a: &SmoothArgs, name: &str) -> CmdResult {
    if a.widths < 2 || !(a.s_min > 0.0 && a.s_min < a.s_max && a.s_max <= 1.0) {
        return Err(Failure::new(2, "need at least 2 widths with 0 < s_min < s_max <= 1"));
    }
    let ratio = (a.s_min / a.s_max).powf(1.0 / (a.widths - 1) as f64);
    let widths: Vec<f64> = (0..a.widths).map(|i| a.s_max * ratio.powi(i as i32)).collect();
    let input = synthetic_input(a.ell, a.n_max);
    let errors = smoothing_errors(&input, &widths, &Kernel::default())?;
    let slope = loglog_slope(&widths, &errors);
    let csv = smoothing_csv(&widths, &errors);
    if let Some(dir) = &g.out {
        let cfg = json!({ "ell": a.ell, "n_max": a.n_max, "s_max": a.s_max, "s_min": a.s_min, "widths": a.widths });
        let mut run = RunDir::new(g, dir.clone(), name, cfg);
        run.add("smoothing.csv", &csv)?;
        run.finish()?;
    }
    if g.verbose > 0 {
        eprintln!("fitted decay exponent {slope:.4} for ell = {}", a.ell);
    }
    Ok(Outcome {
        stdout: Some(String::from_utf8(csv).expect("csv is utf-8")),
        summary: json!({ "ell": a.ell, "fitted_exponent": slope, "widths": widths, "sup_error": errors }),
        code: 0,
    })
}

fn homsolve(g: &Global, a: &HomsolveArgs, name: &str) -> CmdResult {
    let time = a.mode == SolveMode::Flow;
    let (f, gf) = match (&a.f, &a.g) {
        (Some(fp), Some(gp)) => (load_field(fp)?, load_field(gp)?),
        _ if a.random => {
            let shape = FieldShape::new(a.d, a.d, a.cutoff, a.q_y, 0.0, time);
            let f = random_field(shape, Parity::Even, a.amp, a.decay, g.seed)?;
            let gf = random_field(shape, Parity::Odd, a.amp, a.decay, g.seed.wrapping_add(1))?.without_mean();
            (f, gf)
        }
        _ => return Err(Failure::new(2, "homsolve needs --f and --g, or --random")),
    };
    let d = f.d();
    let w = make_frequency(d, &choice(a.omega_kind))?;
    let tau = a.tau.unwrap_or_else(|| default_tau(d));
    let sol = match a.mode {
        SolveMode::Flow => solve_flow(&f, &gf, &certify(&w, tau, a.k_max)?)?,
        SolveMode::Map => {
            let rot: Vec<f64> = w.iter().map(|v| TAU * v).collect();
            solve_map(&f, &gf, &certify_rotation(&rot, tau, a.k_max)?)?
        }
    };
    let report = sol.report();
    let text = to_json_pretty(&report);
    if let Some(dir) = &g.out {
        let cfg = json!({
            "f": a.f, "g": a.g, "random": a.random, "mode": format!("{:?}", a.mode).to_lowercase(),
            "omega_kind": format!("{:?}", a.omega_kind).to_lowercase(), "d": a.d, "cutoff": a.cutoff,
            "q_y": a.q_y, "amp": a.amp, "decay": a.decay, "tau": tau, "K_max": a.k_max,
        });
        let mut run = RunDir::new(g, dir.clone(), name, cfg);
        if a.random {
            run.add("f.json", to_json_pretty(&f.to_doc()).as_bytes())?;
            run.add("g.json", to_json_pretty(&gf.to_doc()).as_bytes())?;
        }
        run.add("u.json", to_json_pretty(&sol.u.to_doc()).as_bytes())?;
        run.add("v.json", to_json_pretty(&sol.v.to_doc()).as_bytes())?;
        run.add("residual.json", text.as_bytes())?;
        run.finish()?;
    }
    Ok(Outcome {
        stdout: Some(text),
        summary: serde_json::to_value(&report).expect("report serializes"),
        code: 0,
    })
}

fn config_path(g: &Global, command: &str) -> Result<PathBuf, Failure> {
    g.config
        .clone()
        .ok_or_else(|| Failure::new(2, format!("{command} needs --config <FILE>")))
}

fn default_out(g: &Global, config: &Path, suffix: &str) -> PathBuf {
    g.out.clone().unwrap_or_else(|| {
        let stem = config.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from("runs").join(format!("{stem}{suffix}"))
    })
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn kam_run(g: &Global, name: &str) -> CmdResult {
    let path = config_path(g, name)?;
    let (cfg, doc): (KamConfig, Value) = load_config(&path, &g.overrides)?;
    let outcome = cfg.run(&base_dir(&path))?;
    let report = &outcome.run.report;
    warn_all(&report.warnings);
    if g.verbose > 0 {
        for r in &report.rows {
            eprintln!(
                "step {:>2}: sup f {:.3e}, sup g {:.3e}, min divisor {:.3e}, invariance {:.3e}",
                r.m, r.sup_f, r.sup_g, r.min_divisor, r.invariance_residual
            );
        }
    }
    let mut run = RunDir::new(g, default_out(g, &path, ""), name, doc);
    run.add("embedding.json", embedding_json(&outcome.run.embedding).as_bytes())?;
    run.add("convergence.csv", &convergence_csv(report))?;
    let full = json!({ "frequency": outcome.frequency, "schedule": outcome.schedule, "report": report });
    run.add("report.json", to_json_pretty(&full).as_bytes())?;
    if let Some((f, gf)) = &outcome.fields {
        run.add("perturbation_f.json", to_json_pretty(&f.to_doc()).as_bytes())?;
        run.add("perturbation_g.json", to_json_pretty(&gf.to_doc()).as_bytes())?;
    }
    let dir = run.finish()?;
    let code = match &report.status {
        RunStatus::Failed { .. } => 3,
        _ => 0,
    };
    let summary = json!({
        "out": dir,
        "status": report.status,
        "steps": report.rows.len(),
        "monotone": report.is_monotone(),
        "contraction_order": report.contraction_order,
        "final_invariance": report.final_invariance,
        "rotation_number": report.rotation_number,
        "warnings": report.warnings,
    });
    let text = format!(
        "status: {:?}\nsteps: {}\nfinal invariance residual: {:.3e}\noutput: {}\n",
        report.status,
        report.rows.len(),
        report.final_invariance.residual,
        dir.display()
    );
    Ok(Outcome {
        stdout: Some(text),
        summary,
        code,
    })
}

fn lienard(g: &Global, sub: &LienardCommand, name: &str) -> CmdResult {
    let path = config_path(g, name)?;
    let (cfg, doc): (LienardConfig, Value) = load_config(&path, &g.overrides)?;
    let problem = cfg.problem()?;
    let structure = problem.validate();
    warn_all(&structure.warnings);
    let orbit = compute_reference_orbit(cfg.n, cfg.orbit_tol)?;
    let suffix = match sub {
        LienardCommand::Orbit => "-orbit",
        LienardCommand::Poincare => "-poincare",
        LienardCommand::Stability => "-stability",
    };
    let mut run = RunDir::new(g, default_out(g, &path, suffix), name, doc);
    let (summary, code) = match sub {
        LienardCommand::Orbit => {
            let props = orbit.properties();
            run.add("orbit.csv", &orbit_csv(&orbit, cfg.orbit.samples))?;
            run.add("orbit.json", to_json_pretty(&orbit).as_bytes())?;
            let s = json!({
                "T0": orbit.t0, "alpha": orbit.alpha, "beta": orbit.beta, "c": orbit.c, "c0": orbit.c0,
                "properties": props, "structure": structure,
            });
            (s, 0)
        }
        LienardCommand::Poincare | LienardCommand::Stability => {
            let rho_star = match cfg.rho_star {
                Some(r) => r,
                None => default_rho_star(&TransformedSystem::new(problem.clone(), orbit.clone(), 1.0)?),
            };
            let sys = TransformedSystem::new(problem, orbit, rho_star)?;
            let lambda_star = sys.lambda_of_rho(rho_star);
            if matches!(sub, LienardCommand::Poincare) {
                let sc = &cfg.poincare;
                let thetas: Vec<f64> = (0..sc.phases).map(|j| TAU * j as f64 / sc.phases as f64).collect();
                let lambdas: Vec<f64> = sc.lambda_factors.iter().map(|f| f * lambda_star).collect();
                let starts: Vec<(f64, f64)> =
                    lambdas.iter().flat_map(|&l| thetas.iter().map(move |&t| (t, l))).collect();
                let orbits = starts
                    .par_iter()
                    .map(|&(t, l)| section_orbit(&sys, t, l, sc.iterations, &sc.integrator))
                    .collect::<revkam::Result<Vec<_>>>()?;
                let residual = reversibility_sup(&sys, &thetas, &lambdas, &sc.integrator)?;
                let escaped = orbits.iter().filter(|o| o.last().is_some_and(|p| p.escaped)).count();
                run.add("section.csv", &section_csv(&orbits))?;
                let s = json!({
                    "rho_star": rho_star, "lambda_star": lambda_star, "reversibility_residual": residual,
                    "orbits": orbits.len(), "escaped": escaped, "structure": structure,
                });
                (s, 0)
            } else {
                let report = lagrange_stability_experiment(&sys, &cfg.stability)?;
                warn_all(&report.warnings[structure.warnings.len().min(report.warnings.len())..]);
                run.add("stability.csv", &stability_csv(&report))?;
                run.add("stability.json", to_json_pretty(&report).as_bytes())?;
                let failed = report.orbits.iter().chain(&report.control).any(|o| o.failure.is_some());
                let max_raw = report.orbits.iter().map(|o| o.raw_ratio).fold(0.0, f64::max);
                let s = json!({
                    "rho_star": rho_star, "bounded": report.bounded, "max_level_ratio": report.max_level_ratio,
                    "max_raw_ratio": max_raw, "max_control_energy_drift": report.max_control_energy_drift,
                    "threshold": cfg.stability.threshold, "warnings": report.warnings,
                });
                (s, if failed { 3 } else { 0 })
            }
        }
    };
    let dir = run.finish()?;
    let mut summary = summary;
    summary["out"] = json!(dir);
    let text = format!("{}\n", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(Outcome {
        stdout: Some(text),
        summary,
        code,
    })
}

fn verify(g: &Global, a: &VerifyArgs) -> CmdResult {
    let dir = a
        .dir
        .clone()
        .or_else(|| g.out.clone())
        .ok_or_else(|| Failure::new(2, "verify needs a run directory"))?;
    let manifest = RunManifest::load(&dir)?;
    let checks = manifest.check_digests(&dir)?;
    let mut code = 0;
    for c in checks.iter().filter(|c| !c.matches) {
        eprintln!("digest mismatch: {} (expected {}, found {})", c.file, c.expected, c.actual);
        code = 4;
    }
    let mut invariance = Value::Null;
    if manifest.command == "kam run" {
        let cfg: KamConfig = from_value(manifest.config.clone(), "manifest config")?;
        let embedding = load_embedding(&dir.join("embedding.json"))?;
        let fpath = dir.join("perturbation_f.json");
        let fields = if fpath.exists() {
            Some((load_field(&fpath)?, load_field(&dir.join("perturbation_g.json"))?))
        } else {
            None
        };
        let report = cfg.verify_embedding(&embedding, fields.as_ref())?;
        if !(report.residual <= a.tol) {
            eprintln!("invariance residual {:.3e} exceeds {:.3e}", report.residual, a.tol);
            if code == 0 {
                code = 3;
            }
        }
        invariance = serde_json::to_value(&report).expect("report serializes");
    }
    let ok = code == 0;
    let text = format!(
        "{}: {} files checked{}\n",
        if ok { "ok" } else { "FAILED" },
        checks.len(),
        if invariance.is_null() {
            String::new()
        } else {
            format!(", invariance residual {:.3e}", invariance["residual"].as_f64().unwrap_or(f64::NAN))
        }
    );
    Ok(Outcome {
        stdout: Some(text),
        summary: json!({ "dir": dir, "ok": ok, "digests": checks, "invariance": invariance }),
        code,
    })
}
