//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use revkam::diophantine::{Frequency, FrequencyKind};
use revkam::fourier::{FourierField, TorusIndex};
use revkam::homological::HomologicalSolution;
use revkam::lienard::{PlaneSystem, TransformedSystem};
use revkam::integrate::OdeSystem;

pub fn repo_file(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Uniform collocation grid of a 1-d field: `(x, t)` pairs, `t = 0` without time.
fn grid_1d(time: bool, n: usize) -> Vec<(f64, f64)> {
    let nodes: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
    if time {
        nodes.iter().flat_map(|&x| nodes.iter().map(move |&t| (x, t))).collect()
    } else {
        nodes.iter().map(|&x| (x, 0.0)).collect()
    }
}

fn phase(idx: &TorusIndex, x: f64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, idx.k[0] as f64 * x + idx.l as f64 * t)
}

/// Least-squares solution of `L w = rhs` on the grid, with `L` the flow
/// operator `ω ∂_x + ∂_t` or the map operator `w(x + ω) - w(x)` applied to
/// every nonconstant mode of the layout. Returns `w` on the grid.
fn dense_solve(modes: &[TorusIndex], freq: &Frequency, pts: &[(f64, f64)], rhs: &[f64]) -> Vec<f64> {
    let w = freq.omega[0];
    let a = DMatrix::from_fn(pts.len(), modes.len(), |r, c| {
        let idx = &modes[c];
        let sym = match freq.kind {
            FrequencyKind::Flow => Complex64::new(0.0, idx.k[0] as f64 * w + idx.l as f64),
            FrequencyKind::Map => Complex64::from_polar(1.0, idx.k[0] as f64 * w) - 1.0,
        };
        sym * phase(idx, pts[r].0, pts[r].1)
    });
    let b = DVector::from_iterator(rhs.len(), rhs.iter().map(|&v| Complex64::new(v, 0.0)));
    let coef = a.clone().svd(true, true).solve(&b, 1e-13).expect("svd solve");
    pts.iter()
        .map(|&(x, t)| modes.iter().zip(coef.iter()).map(|(m, c)| (c * phase(m, x, t)).re).sum())
        .collect()
}

/// Comparison of a homological solution with the dense collocation oracle.
#[derive(Debug)]
pub struct DenseComparison {
    /// `max |w_fourier - w_dense| / max |w_fourier|` over `u` and `v`.
    pub rel_diff: f64,
    /// Grid residual of both equations for the Fourier solution, relative to the forcing.
    pub residual: f64,
}

/// Solves both equations densely at each action value in `ys` for a 1-d,
/// single component problem and compares with `sol` on the grid.
pub fn compare_dense(f: &FourierField, g: &FourierField, sol: &HomologicalSolution, freq: &Frequency, ys: &[f64]) -> DenseComparison {
    let time = f.time();
    let modes: Vec<TorusIndex> = f.layout().modes.iter().filter(|m| !m.is_zero()).cloned().collect();
    let n = 2 * f.cutoff() + 2;
    let pts = grid_1d(time, n);
    let w = freq.omega[0];
    let ev = |fld: &FourierField, x: f64, y: f64, t: f64| fld.evaluate(&[x], &[y], t).unwrap()[0];
    let (mut diff, mut scale, mut res, mut gscale) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &y in ys {
        let gv: Vec<f64> = pts.iter().map(|&(x, t)| ev(g, x, y, t)).collect();
        let fv: Vec<f64> = pts.iter().map(|&(x, t)| ev(f, x, y, t)).collect();
        let f_mean = fv.iter().sum::<f64>() / fv.len() as f64;
        let neg_g: Vec<f64> = gv.iter().map(|v| -v).collect();
        let v_dense: Vec<f64> = dense_solve(&modes, freq, &pts, &neg_g).iter().map(|v| v + f_mean).collect();
        let rhs_u: Vec<f64> = v_dense.iter().zip(&fv).map(|(v, f)| v - f).collect();
        let u_dense = dense_solve(&modes, freq, &pts, &rhs_u);
        for (i, &(x, t)) in pts.iter().enumerate() {
            let (u, v) = (ev(&sol.u, x, y, t), ev(&sol.v, x, y, t));
            diff = diff.max((u - u_dense[i]).abs()).max((v - v_dense[i]).abs());
            scale = scale.max(u.abs()).max(v.abs());
            gscale = gscale.max(gv[i].abs()).max(fv[i].abs());
            let (lv, lu) = match freq.kind {
                FrequencyKind::Flow => {
                    let op = |fld: &FourierField| {
                        w * ev(&fld.differentiate_x(0).unwrap(), x, y, t)
                            + if time { ev(&fld.differentiate_t(), x, y, t) } else { 0.0 }
                    };
                    (op(&sol.v), op(&sol.u))
                }
                FrequencyKind::Map => (ev(&sol.v, x + w, y, t) - v, ev(&sol.u, x + w, y, t) - u),
            };
            res = res.max((lv + gv[i]).abs()).max((lu - (v - fv[i])).abs());
        }
    }
    DenseComparison {
        rel_diff: diff / scale,
        residual: res / gscale,
    }
}

/// `ψ` Jacobian at `(θ, ρ)` from the reference orbit equations
/// `x0' = y0`, `y0' = -x0^{2n+1}`: `[[∂θ x, ∂ρ x], [∂θ y, ∂ρ y]]`.
pub fn psi_jacobian(sys: &TransformedSystem, theta: f64, rho: f64) -> [[f64; 2]; 2] {
    let o = &sys.orbit;
    let (x0, y0) = o.eval(theta * o.t0 / TAU);
    let s = o.c * rho;
    let (sa, sb) = (s.powf(o.alpha), s.powf(o.beta));
    let dtau = o.t0 / TAU;
    let m = 2 * o.n as i32 + 1;
    [
        [sa * y0 * dtau, o.alpha * sa * x0 / rho],
        [-sb * x0.powi(m) * dtau, o.beta * sb * y0 / rho],
    ]
}

/// Largest relative mismatch between the plane vector field at `ψ(θ, ρ)` and
/// `Dψ (θ', ρ')` from the transformed evaluators, over `count` seeded points
/// with `ρ ∈ [ρ_*, 8 ρ_*]`.
pub fn chain_rule_residual(sys: &TransformedSystem, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = PlaneSystem { problem: &sys.problem };
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let theta = rng.gen_range(0.0..TAU);
        let rho = sys.rho_star * rng.gen_range(1.0..8.0);
        let t = rng.gen_range(0.0..1.0);
        let (x, y) = sys.psi(theta, rho);
        let mut fv = [0.0; 2];
        plane.rhs(t, &[x, y], &mut fv);
        let (th_dot, rho_dot) = sys.rhs(theta, rho, t).unwrap();
        let j = psi_jacobian(sys, theta, rho);
        let px = j[0][0] * th_dot + j[0][1] * rho_dot;
        let py = j[1][0] * th_dot + j[1][1] * rho_dot;
        worst = worst.max((px - fv[0]).hypot(py - fv[1]) / fv[0].hypot(fv[1]));
    }
    worst
}
