use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::OdeSystem;

/// `amp · x^power · cos(2π harmonic t) / (1 + x²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub amp: f64,
    pub power: u32,
    #[serde(default = "one")]
    pub harmonic: u32,
}

fn one() -> u32 {
    1
}

impl Term {
    pub fn new(amp: f64, power: u32, harmonic: u32) -> Self {
        Self { amp, power, harmonic }
    }

    fn eval(&self, x: f64, t: f64) -> f64 {
        self.amp * x.powi(self.power as i32) * (TAU * self.harmonic as f64 * t).cos() / (1.0 + x * x)
    }

    /// `∂_t^ell` of the value.
    fn eval_dt(&self, x: f64, t: f64, ell: u32) -> f64 {
        let w = TAU * self.harmonic as f64;
        let phase = w * t + ell as f64 * std::f64::consts::FRAC_PI_2;
        self.amp * x.powi(self.power as i32) * w.powi(ell as i32) * phase.cos() / (1.0 + x * x)
    }
}

/// A sum of [`Term`]s; the empty sum is zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Forcing {
    pub terms: Vec<Term>,
}

impl Forcing {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(amp: f64, power: u32, harmonic: u32) -> Self {
        Self {
            terms: vec![Term::new(amp, power, harmonic)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amp == 0.0)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(x, t)).sum()
    }

    fn eval_dt(&self, x: f64, t: f64, ell: u32) -> f64 {
        self.terms.iter().map(|term| term.eval_dt(x, t, ell)).sum()
    }

    /// `x^k ∂_x^k ∂_t^ell` by central differences with a step relative to `x`.
    fn scaled_derivative(&self, x: f64, t: f64, k: u32, ell: u32) -> f64 {
        let h = 1e-3 * x.abs().max(1.0);
        let v = |s: f64| self.eval_dt(s, t, ell);
        let d = match k {
            0 => v(x),
            1 => (v(x + h) - v(x - h)) / (2.0 * h),
            _ => (v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h),
        };
        x.powi(k as i32) * d
    }

    /// Worst relative defects of oddness in `x` and evenness in `t` on a grid.
    pub fn parity_defects(&self) -> (f64, f64) {
        let mut scale: f64 = 0.0;
        let mut odd_x: f64 = 0.0;
        let mut even_t: f64 = 0.0;
        for i in 1..=40 {
            let x = 0.25 * i as f64;
            for j in 0..16 {
                let t = j as f64 / 16.0 + 0.013;
                let v = self.eval(x, t);
                scale = scale.max(v.abs());
                odd_x = odd_x.max((self.eval(-x, t) + v).abs());
                even_t = even_t.max((self.eval(x, -t) - v).abs());
            }
        }
        if scale == 0.0 {
            (0.0, 0.0)
        } else {
            (odd_x / scale, even_t / scale)
        }
    }

    /// Fitted growth exponent of `max_{k, ell <= 2} sup_t |x^k ∂_x^k ∂_t^ell F|`
    /// over `|x| ∈ {10, 10², 10³}`.
    pub fn growth_exponent(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let xs = [10.0, 100.0, 1000.0];
        let sizes: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let mut m: f64 = 0.0;
                for k in 0..=2 {
                    for ell in 0..=2 {
                        for j in 0..16 {
                            let t = j as f64 / 16.0;
                            m = m.max(self.scaled_derivative(x, t, k, ell).abs());
                        }
                    }
                }
                m
            })
            .collect();
        let lx: Vec<f64> = xs.iter().map(|v: &f64| v.ln()).collect();
        let ly: Vec<f64> = sizes.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
        let mx = lx.iter().sum::<f64>() / 3.0;
        let my = ly.iter().sum::<f64>() / 3.0;
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
        sxy / sxx
    }
}

/// `x'' + x^{2n+1} + g(x, t) + f(x, t) x' = 0` with declared growth exponents
/// `|f| <~ |x|^p`, `|g| <~ |x|^q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LienardProblem {
    pub n: u32,
    pub f: Forcing,
    pub g: Forcing,
    pub p: f64,
    pub q: f64,
}

/// Numerical check of the structural conditions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub f_odd_x: f64,
    pub f_even_t: f64,
    pub g_odd_x: f64,
    pub g_even_t: f64,
    pub f_growth: f64,
    pub g_growth: f64,
    pub warnings: Vec<String>,
}

impl StructureReport {
    pub fn is_compliant(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Relative tolerance of the parity checks.
pub const PARITY_TOL: f64 = 1e-10;

impl LienardProblem {
    /// Growth exponents default to the largest admitted, `p = n - 1`, `q = 2n - 1`.
    pub fn new(n: u32, f: Forcing, g: Forcing) -> Result<Self> {
        if n < 1 {
            return Err(Error::Parameter("n must be at least 1".into()));
        }
        Ok(Self {
            n,
            f,
            g,
            p: n as f64 - 1.0,
            q: 2.0 * n as f64 - 1.0,
        })
    }

    pub fn unperturbed(n: u32) -> Result<Self> {
        Self::new(n, Forcing::zero(), Forcing::zero())
    }

    /// Parity and growth checks; violations become warnings.
    pub fn validate(&self) -> StructureReport {
        let (f_odd_x, f_even_t) = self.f.parity_defects();
        let (g_odd_x, g_even_t) = self.g.parity_defects();
        let f_growth = self.f.growth_exponent();
        let g_growth = self.g.growth_exponent();
        let mut warnings = Vec::new();
        for (name, v, what) in [
            ("f", f_odd_x, "odd in x"),
            ("f", f_even_t, "even in t"),
            ("g", g_odd_x, "odd in x"),
            ("g", g_even_t, "even in t"),
        ] {
            if v > PARITY_TOL {
                warnings.push(format!("{name} is not {what} (relative defect {v:.3e}); the equation is not reversible"));
            }
        }
        let n = self.n as f64;
        if self.p > n - 1.0 {
            warnings.push(format!("declared p = {} exceeds n - 1 = {}", self.p, n - 1.0));
        }
        if self.q > 2.0 * n - 1.0 {
            warnings.push(format!("declared q = {} exceeds 2n - 1 = {}", self.q, 2.0 * n - 1.0));
        }
        if f_growth > self.p + 0.2 {
            warnings.push(format!("f grows like |x|^{f_growth:.3}, faster than the declared p = {}", self.p));
        }
        if g_growth > self.q + 0.2 {
            warnings.push(format!("g grows like |x|^{g_growth:.3}, faster than the declared q = {}", self.q));
        }
        StructureReport {
            f_odd_x,
            f_even_t,
            g_odd_x,
            g_even_t,
            f_growth,
            g_growth,
            warnings,
        }
    }

    /// `h(x, y) = y²/2 + x^{2n+2} / (2n + 2)`.
    pub fn energy(&self, x: f64, y: f64) -> f64 {
        let m = 2 * self.n as i32 + 2;
        0.5 * y * y + x.powi(m) / m as f64
    }
}

/// The plane system `x' = y`, `y' = -x^{2n+1} - g - f y`.
#[derive(Clone, Copy, Debug)]
pub struct PlaneSystem<'a> {
    pub problem: &'a LienardProblem,
}

impl OdeSystem for PlaneSystem<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, z: &[f64], out: &mut [f64]) {
        let p = self.problem;
        let (x, y) = (z[0], z[1]);
        out[0] = y;
        out[1] = -x.powi(2 * p.n as i32 + 1) - p.g.eval(x, t) - p.f.eval(x, t) * y;
    }
}

impl LienardProblem {
    /// `y' = -x^{2n+1} - g(x, t) - f(x, t) y` with `x` and `t` frozen, solved exactly.
    fn kick(&self, x: f64, y: f64, t: f64, tau: f64) -> f64 {
        let a = x.powi(2 * self.n as i32 + 1) + self.g.eval(x, t);
        let z = -self.f.eval(x, t) * tau;
        let phi = if z == 0.0 { 1.0 } else { z.exp_m1() / z };
        y * z.exp() - a * tau * phi
    }

    /// One composed step from `t` of the drift-kick-drift splitting in the
    /// extended phase space `(x, y, t)`. Both parts are exact flows that
    /// anticommute with `(x, y, t) -> (-x, y, -t)` when `f` and `g` are odd in
    /// `x` and even in `t`, so the step is explicit and reversible.
    pub fn split_step(&self, x: &mut f64, y: &mut f64, t: f64, h: f64, gammas: &[f64]) {
        let mut s = 0.0;
        for &g in gammas {
            let half = 0.5 * g * h;
            *x += half * *y;
            s += half;
            *y = self.kick(*x, *y, t + s, g * h);
            *x += half * *y;
            s += half;
        }
    }
}
