mod common;

use std::f64::consts::TAU;

use statrs::function::beta::beta;

use revkam::integrate::{composition_gammas, verlet_integrate, ImplicitMidpoint, SecondOrder};
use revkam::lienard::{
    compute_reference_orbit, lagrange_stability_experiment, p_class_estimate, poincare_map, reversibility_residual,
    Forcing, LienardProblem, PlaneSystem, PoincareSettings, StabilitySettings, TransformedSystem,
};

use common::{chain_rule_residual, psi_jacobian};

const RHO_STAR: f64 = 1024.0;

fn compliant() -> LienardProblem {
    LienardProblem::new(2, Forcing::single(0.1, 1, 1), Forcing::single(0.1, 3, 1)).unwrap()
}

fn system(problem: LienardProblem) -> TransformedSystem {
    let orbit = compute_reference_orbit(problem.n, 1e-13).unwrap();
    TransformedSystem::new(problem, orbit, RHO_STAR).unwrap()
}

/// Quarter period of `x'' = -x^{2n+1}` from energy `1/2`:
/// `T0 = 4 ∫_0^{x_max} dx / sqrt(1 - x^{2n+2}/(n+1))`.
fn period_by_beta(n: u32) -> f64 {
    let m = 2.0 * n as f64 + 2.0;
    let x_max = (n as f64 + 1.0).powf(1.0 / m);
    4.0 * x_max / m * beta(1.0 / m, 0.5)
}

struct Oscillator(i32);

impl SecondOrder for Oscillator {
    fn accel(&self, x: f64, _t: f64) -> f64 {
        -x.powi(self.0)
    }
}

#[test]
fn reference_orbit_properties() {
    for n in 1..=3 {
        let o = compute_reference_orbit(n, 1e-13).unwrap();
        let p = o.properties();
        assert!(p.energy <= 1e-10 && p.symmetry <= 1e-10 && p.periodicity <= 1e-10, "n = {n}: {p:?}");
        let exact = period_by_beta(n);
        assert!((o.t0 - exact).abs() <= 1e-10 * exact, "n = {n}: {} vs {exact}", o.t0);
        assert!((o.alpha - 1.0 / (n as f64 + 2.0)).abs() < 1e-15);
        assert!((o.alpha + o.beta - 1.0).abs() < 1e-15);
        assert!((o.c - TAU / (o.beta * o.t0)).abs() <= 1e-14 * o.c);
        assert!((o.c0 - o.beta * o.c.powf(2.0 * o.beta)).abs() <= 1e-14 * o.c0);
    }
    let o = compute_reference_orbit(1, 1e-13).unwrap();
    assert!((o.alpha - 1.0 / 3.0).abs() < 1e-15 && (o.beta - 2.0 / 3.0).abs() < 1e-15);
    assert!((o.t0 - 6.236338999021601).abs() < 1e-11);
}

#[test]
fn period_is_self_consistent_under_refinement() {
    let tol = 1e-10;
    let a = compute_reference_orbit(1, tol).unwrap();
    let b = compute_reference_orbit(1, tol / 10.0).unwrap();
    assert!((a.t0 - b.t0).abs() <= 10.0 * tol);
}

#[test]
fn n_zero_is_rejected() {
    assert!(compute_reference_orbit(0, 1e-12).is_err());
    assert!(LienardProblem::unperturbed(0).is_err());
}

#[test]
fn chain_rule_holds() {
    let sys = system(compliant());
    let r = chain_rule_residual(&sys, 200, 3);
    assert!(r <= 1e-8, "residual {r}");
}

#[test]
fn transformed_field_has_the_reversible_parities() {
    let sys = system(compliant());
    let mut worst: f64 = 0.0;
    for i in 0..12 {
        for j in 0..5 {
            let th = 0.37 + TAU * i as f64 / 12.0;
            let t = 0.11 + j as f64 / 5.0;
            let rho = RHO_STAR * (1.0 + i as f64);
            let (a1, b1) = (sys.f1(th, rho, t).unwrap(), sys.f1(-th, rho, -t).unwrap());
            let (a2, b2) = (sys.f2(th, rho, t).unwrap(), sys.f2(-th, rho, -t).unwrap());
            worst = worst.max((a1 + b1).abs() / a1.abs().max(1.0));
            worst = worst.max((a2 - b2).abs() / a2.abs().max(1.0));
        }
    }
    assert!(worst <= 1e-10, "parity defect {worst}");
}

#[test]
fn unperturbed_field_is_a_pure_twist() {
    let sys = system(LienardProblem::unperturbed(2).unwrap());
    let rho = 3.0 * RHO_STAR;
    let (th, r) = sys.rhs(1.2, rho, 0.4).unwrap();
    assert_eq!(r, 0.0);
    assert!((th - sys.twist(rho)).abs() <= 1e-14 * th);
    let o = &sys.orbit;
    assert!((sys.twist(rho) - o.c0 * rho.powf(2.0 / 4.0)).abs() <= 1e-13 * sys.twist(rho));
}

#[test]
fn below_rho_star_is_a_domain_error() {
    let sys = system(compliant());
    assert!(sys.f1(0.3, 0.5 * RHO_STAR, 0.0).is_err());
    let ls = sys.lambda_of_rho(RHO_STAR);
    assert!(poincare_map(&sys, 0.3, 0.5 * ls, &PoincareSettings::default()).is_err());
}

#[test]
fn psi_is_a_diffeomorphism() {
    let sys = system(compliant());
    for i in 0..16 {
        for rho in [1.0, 10.0, 1e3, 1e5] {
            let th = TAU * i as f64 / 16.0 + 0.05;
            let j = psi_jacobian(&sys, th, rho);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            // det Dψ = c T0 (β y0² + α x0^{2n+2}) / 2π = c T0 β / 2π = 1 on the orbit energy
            assert!((det - 1.0).abs() <= 1e-8, "det {det} at θ = {th}, ρ = {rho}");
        }
    }
}

#[test]
fn integrator_is_reversible() {
    let p = LienardProblem::unperturbed(2).unwrap();
    let plane = PlaneSystem { problem: &p };
    let im = ImplicitMidpoint::default();
    for (x0, y0) in [(0.3, 1.1), (-1.2, 0.4), (0.9, -0.7)] {
        let mut z = [x0, y0];
        im.integrate(&plane, &mut z, 0.0, 0.01, 100, 8).unwrap();
        z[0] = -z[0];
        im.integrate(&plane, &mut z, 0.0, 0.01, 100, 8).unwrap();
        assert!((z[0] + x0).abs() <= 1e-11 && (z[1] - y0).abs() <= 1e-11, "{z:?} vs ({x0}, {y0})");
    }
    let gammas = composition_gammas(8).unwrap();
    let (mut x, mut y) = (0.8, 0.5);
    for _ in 0..100 {
        p.split_step(&mut x, &mut y, 0.0, 0.01, &gammas);
    }
    x = -x;
    for _ in 0..100 {
        p.split_step(&mut x, &mut y, 0.0, 0.01, &gammas);
    }
    assert!((x + 0.8).abs() <= 1e-11 && (y - 0.5).abs() <= 1e-11);
}

#[test]
fn energy_has_no_secular_drift() {
    let osc = Oscillator(3);
    let (mut x, mut y) = (0.0, 1.0);
    let h0 = 0.5;
    let h = 0.02;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        verlet_integrate(&osc, &mut x, &mut y, 0.0, h, 1000, 8).unwrap();
        worst = worst.max((0.5 * y * y + 0.25 * x.powi(4) - h0).abs() / h0);
    }
    assert!(worst <= 1e-8, "drift {worst}");
}

#[test]
fn compliant_problem_validates() {
    let r = compliant().validate();
    assert!(r.is_compliant(), "{:?}", r.warnings);
    assert!(r.f_growth <= 1.0 + 0.2 && r.g_growth <= 3.0 + 0.2, "{r:?}");
}

#[test]
fn non_reversible_forcing_warns_but_runs() {
    let p = LienardProblem::new(1, Forcing::single(0.1, 0, 1), Forcing::zero()).unwrap();
    let sys = system(p);
    let settings = StabilitySettings {
        t_max: 5.0,
        levels: vec![2.0],
        phases: 2,
        ..Default::default()
    };
    let r = lagrange_stability_experiment(&sys, &settings).unwrap();
    assert!(r.warnings.iter().any(|w| w.contains("not reversible")), "{:?}", r.warnings);
    assert_eq!(r.orbits.len(), 2);
}

#[test]
fn monomials_in_the_p_class() {
    let rhos: Vec<f64> = (0..8).map(|i| 2f64.powi(4 + i)).collect();
    let gamma = 0.8;
    let inside = p_class_estimate(|_, r, _| r.powf(gamma), 2, 0, gamma, &rhos);
    assert!(inside.member && inside.growth_exponent.abs() <= 0.1, "{inside:?}");
    let outside = p_class_estimate(|_, r, _| r.powf(gamma + 1.0), 2, 0, gamma, &rhos);
    assert!(!outside.member && (outside.growth_exponent - 1.0).abs() <= 0.1, "{outside:?}");
}

#[test]
fn transformed_forcing_grows_at_the_admitted_rate() {
    let sys = system(compliant());
    let n = 2.0;
    let gamma = (2.0 * n + 1.0) / (n + 2.0);
    let rhos: Vec<f64> = (1..7).map(|i| RHO_STAR * 2f64.powi(i)).collect();
    let r = p_class_estimate(|th, rho, t| sys.f1(th, rho, t).unwrap(), 1, 0, gamma, &rhos);
    assert!(r.fitted_gamma <= gamma + 0.1, "{r:?}");
}

#[test]
fn unperturbed_period_map_is_a_rotation() {
    let sys = system(LienardProblem::unperturbed(2).unwrap());
    let ls = sys.lambda_of_rho(RHO_STAR);
    let s = PoincareSettings::default();
    for (th, m) in [(0.2, 1.5), (3.0, 2.5)] {
        let lam = m * ls;
        let img = poincare_map(&sys, th, lam, &s).unwrap();
        assert!((img.lambda - lam).abs() <= 1e-12 * lam, "{img:?}");
        assert!((img.theta - th - lam).abs() <= 1e-9 * lam, "{img:?}");
        assert!(!img.escaped);
    }
}

#[test]
fn period_map_twists_and_is_reversible() {
    let sys = system(compliant());
    let ls = sys.lambda_of_rho(RHO_STAR);
    let s = PoincareSettings::default();
    let mut last = f64::NEG_INFINITY;
    for m in [1.5, 2.0, 2.5, 3.0] {
        let img = poincare_map(&sys, 0.4, m * ls, &s).unwrap();
        let inc = img.theta - 0.4;
        assert!(inc > last, "rotation increment not increasing at λ = {}", m * ls);
        last = inc;
    }
    let r = reversibility_residual(&sys, 1.1, 2.0 * ls, &s).unwrap();
    assert!(r <= 1e-9, "reversibility residual {r}");
}

#[test]
fn short_stability_run() {
    let sys = system(compliant());
    let settings = StabilitySettings {
        t_max: 20.0,
        levels: vec![2.0, 4.0],
        phases: 2,
        ..Default::default()
    };
    let r = lagrange_stability_experiment(&sys, &settings).unwrap();
    assert_eq!(r.orbits.len(), 4);
    assert_eq!(r.control.len(), 4);
    assert!(r.bounded && r.max_level_ratio <= 1.5, "{r:?}");
    assert!(r.max_control_energy_drift <= 1e-6, "{}", r.max_control_energy_drift);
    for o in &r.control {
        assert!((o.level_ratio - 1.0).abs() <= 1e-6 && o.failure.is_none());
    }
}
