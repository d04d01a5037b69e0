mod common;

use std::f64::consts::TAU;

use proptest::prelude::*;

use revkam::diophantine::{certify, certify_rotation, default_tau, make_frequency, Frequency, FrequencyChoice};
use revkam::fourier::{FieldShape, FourierField, Parity, TorusIndex};
use revkam::homological::{solve_flow, solve_map, solve_u, solve_v};
use revkam::smoothing::{loglog_slope, Kernel};
use revkam::synthetic::random_field;
use revkam::Error;

use common::compare_dense;

fn golden() -> f64 {
    make_frequency(1, &FrequencyChoice::Golden).unwrap()[0]
}

fn flow_freq() -> Frequency {
    certify(&[golden()], default_tau(1), 200).unwrap()
}

fn map_freq() -> Frequency {
    certify_rotation(&[TAU * golden()], default_tau(1), 200).unwrap()
}

fn pair(d: usize, cutoff: usize, time: bool, seed: u64) -> (FourierField, FourierField) {
    let shape = FieldShape::new(d, d, cutoff, 2, 1.0, time);
    let f = random_field(shape, Parity::Even, 1.0, 0.3, seed).unwrap();
    let g = random_field(shape, Parity::Odd, 1.0, 0.3, seed + 1).unwrap().without_mean();
    (f, g)
}

#[test]
fn flow_matches_dense_collocation() {
    for seed in [1, 20, 300] {
        let (f, g) = pair(1, 8, true, seed);
        let freq = flow_freq();
        let sol = solve_flow(&f, &g, &freq).unwrap();
        let c = compare_dense(&f, &g, &sol, &freq, &[-0.5, 0.0, 0.8]);
        assert!(c.rel_diff <= 1e-10 && c.residual <= 1e-13, "{c:?}");
    }
}

#[test]
fn map_matches_dense_collocation() {
    for seed in [2, 40, 600] {
        let (f, g) = pair(1, 8, false, seed);
        let freq = map_freq();
        let sol = solve_map(&f, &g, &freq).unwrap();
        let c = compare_dense(&f, &g, &sol, &freq, &[-0.5, 0.0, 0.8]);
        assert!(c.rel_diff <= 1e-10 && c.residual <= 1e-13, "{c:?}");
    }
}

#[test]
fn zero_forcing_gives_zero_solution() {
    let z = FourierField::zeros(FieldShape::new(1, 1, 4, 1, 0.5, true));
    let sol = solve_flow(&z.clone().with_parity(Parity::Even), &z.clone().with_parity(Parity::Odd), &flow_freq()).unwrap();
    assert!(sol.u.is_zero() && sol.v.is_zero());
    let zm = FourierField::zeros(FieldShape::new(1, 1, 4, 1, 0.5, false));
    let sol = solve_map(&zm, &zm, &map_freq()).unwrap();
    assert!(sol.u.is_zero() && sol.v.is_zero());
}

/// `v(x + ω) - v(x) = -sin x` against Cesàro means of the telescoped sums
/// `S_N(x) = Σ_{j<N} sin(x + jω)`, which converge to `v` at rate `1/M`.
#[test]
fn map_single_mode_matches_birkhoff_oracle() {
    let shape = FieldShape::new(1, 1, 2, 0, 0.0, false);
    let mut g = FourierField::zeros(shape);
    g.add_real_mode(0, &TorusIndex::new(vec![1], 0), &[0], 0.0, 1.0).unwrap();
    let f = FourierField::zeros(shape);
    let freq = map_freq();
    let w = freq.omega[0];
    let sol = solve_map(&f, &g, &freq).unwrap();
    let m = 10_000;
    for x in [0.0, 0.9, 2.5, 4.0] {
        let mut partial = 0.0;
        let mut mean = 0.0;
        for n in 0..m {
            partial += (x + n as f64 * w).sin();
            mean += partial;
        }
        let oracle = mean / m as f64;
        let v = sol.v.evaluate(&[x], &[0.0], 0.0).unwrap()[0];
        assert!((v - oracle).abs() <= 1e-3, "x = {x}: {v} vs {oracle}");
    }
}

#[test]
fn odd_mean_is_rejected() {
    let mut g = FourierField::zeros(FieldShape::new(1, 1, 2, 0, 0.0, true));
    g.add_real_mode(0, &TorusIndex::new(vec![0], 0), &[0], 1.0, 0.0).unwrap();
    assert!(matches!(solve_v(&g, &flow_freq()), Err(Error::Structure(_))));
}

#[test]
fn even_g_is_rejected() {
    let (f, _) = pair(1, 4, true, 9);
    assert!(matches!(solve_v(&f.without_mean(), &flow_freq()), Err(Error::Structure(_))));
}

#[test]
fn near_resonant_mode_is_rejected() {
    // ω = 1/2 + 1e-12 with a k = 2 mode: divisor far below any certified floor
    let freq = Frequency {
        omega: vec![0.5 + 1e-12],
        ..flow_freq()
    };
    let mut g = FourierField::zeros(FieldShape::new(1, 1, 3, 0, 0.0, true));
    g.add_real_mode(0, &TorusIndex::new(vec![2], -1), &[0], 0.0, 1.0).unwrap();
    let g = g.with_parity(Parity::Odd);
    assert!(matches!(solve_v(&g, &freq), Err(Error::SmallDivisor { .. })));
}

/// `sup|v| / sup|g|` for a flat spectrum cut at `a / s` grows no faster than `s^{-τ-0.3}`.
#[test]
fn small_divisor_amplification() {
    let freq = flow_freq();
    let kernel = Kernel::default();
    let widths: Vec<f64> = (0..6).map(|i| 0.4 * 0.6f64.powi(i)).collect();
    let ratios: Vec<f64> = widths
        .iter()
        .map(|&s| {
            let n = kernel.cutoff(s);
            let mut g = FourierField::zeros(FieldShape::new(1, 1, n, 0, 0.0, true));
            for idx in g.layout().modes.clone() {
                if idx.k[0] > 0 || (idx.k[0] == 0 && idx.l > 0) {
                    g.add_real_mode(0, &idx, &[0], 0.0, 1.0).unwrap();
                }
            }
            let g = g.with_parity(Parity::Odd);
            let v = solve_v(&g, &freq).unwrap();
            let grid = 4 * n + 1;
            v.sup_norm(0.0, 0.0, grid).unwrap().value / g.sup_norm(0.0, 0.0, grid).unwrap().value
        })
        .collect();
    let tau_eff = -loglog_slope(&widths, &ratios);
    assert!(tau_eff <= freq.tau + 0.3, "fitted exponent {tau_eff}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_solutions_have_the_reversible_parities(seed in 0u64..100_000, d in 1usize..=2) {
        let (f, g) = pair(d, if d == 1 { 8 } else { 4 }, true, seed);
        let freq = certify(&make_frequency(d, &FrequencyChoice::SqrtPrime).unwrap(), default_tau(d), 60).unwrap();
        let sol = solve_flow(&f, &g, &freq).unwrap();
        prop_assert_eq!(sol.u.parity_defect(Parity::Odd), 0.0);
        prop_assert_eq!(sol.v.parity_defect(Parity::Even), 0.0);
        prop_assert!(sol.residual_u <= 1e-13 && sol.residual_v <= 1e-13);
    }

    #[test]
    fn map_residuals_are_exact(seed in 0u64..100_000) {
        let (f, g) = pair(1, 8, false, seed);
        let sol = solve_map(&f, &g, &map_freq()).unwrap();
        prop_assert!(sol.residual_u <= 1e-13 && sol.residual_v <= 1e-13);
    }

    #[test]
    fn solver_is_deterministic(seed in 0u64..100_000) {
        let (f, g) = pair(1, 8, true, seed);
        let a = solve_flow(&f, &g, &flow_freq()).unwrap();
        let b = solve_flow(&f, &g, &flow_freq()).unwrap();
        prop_assert_eq!(a.u.coeffs(), b.u.coeffs());
        prop_assert_eq!(a.v.coeffs(), b.v.coeffs());
    }

    #[test]
    fn u_takes_the_mean_of_f(seed in 0u64..100_000) {
        let (f, g) = pair(1, 6, true, seed);
        let freq = flow_freq();
        let v0 = solve_v(&g, &freq).unwrap();
        let (u, v) = solve_u(&f, &v0, &freq).unwrap();
        prop_assert_eq!(v.mean(), f.mean());
        prop_assert!(u.mean().iter().flatten().all(|c| c.norm() == 0.0));
    }
}
