use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{verlet_integrate, SecondOrder};

/// Samples of the reference orbit kept for interpolation.
pub const ORBIT_SAMPLES: usize = 512;

struct Oscillator {
    power: i32,
}

impl SecondOrder for Oscillator {
    fn accel(&self, x: f64, _t: f64) -> f64 {
        -x.powi(self.power)
    }
}

/// The solution of `x' = y`, `y' = -x^{2n+1}` through `(0, 1)` with its
/// period and the constants of the action-angle change of variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOrbit {
    pub n: u32,
    /// Minimal positive period.
    #[serde(rename = "T0")]
    pub t0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub c0: f64,
    /// `x0` at `τ_i = i T0 / S` as integrated.
    pub x_samples: Vec<f64>,
    pub y_samples: Vec<f64>,
    /// `(x0, y0)(T0)` from the integration.
    pub end_state: (f64, f64),
    /// Sine coefficients of `x0` and cosine coefficients of `y0` in `2πτ/T0`.
    pub x_sine: Vec<f64>,
    pub y_cosine: Vec<f64>,
    /// Largest coefficient in the upper quarter of the retained band.
    pub interpolation_tail: f64,
}

/// Residuals of the orbit properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitProperties {
    pub energy: f64,
    pub symmetry: f64,
    pub periodicity: f64,
}

fn integrate(osc: &Oscillator, t_end: f64, steps: usize) -> (f64, f64) {
    let (mut x, mut y) = (0.0, 1.0);
    verlet_integrate(osc, &mut x, &mut y, 0.0, t_end / steps as f64, steps, 8).expect("order 8 is supported");
    (x, y)
}

/// First return to the section `{x = 0, y > 0}` at the given step count,
/// refined by Newton's method on `x(T) = 0` using `x' = y`.
fn return_time(osc: &Oscillator, guess: f64, steps: usize) -> f64 {
    let mut t = guess;
    for _ in 0..8 {
        let (x, y) = integrate(osc, t, steps);
        let dt = -x / y;
        t += dt;
        if dt.abs() <= 1e-15 * t {
            break;
        }
    }
    t
}

/// Integrates with the eighth order Verlet composition and locates the period
/// on the return section, doubling the step count until two estimates agree
/// to `tol`.
pub fn compute_reference_orbit(n: u32, tol: f64) -> Result<ReferenceOrbit> {
    if n < 1 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let osc = Oscillator {
        power: 2 * n as i32 + 1,
    };
    // coarse scan for the sign change of x with y > 0
    let h = 1e-3;
    let (mut x, mut y) = (0.0f64, 1.0f64);
    let mut t = 0.0;
    let guess = loop {
        let px = x;
        verlet_integrate(&osc, &mut x, &mut y, t, h, 1, 2)?;
        t += h;
        if t > 2.0 * h && px < 0.0 && x >= 0.0 && y > 0.0 {
            break t - h + h * (-px) / (x - px);
        }
        if t > 1e4 {
            return Err(Error::Validation("no return to the section found".into()));
        }
    };
    let mut steps = 256;
    let mut t0 = return_time(&osc, guess, steps);
    loop {
        steps *= 2;
        let next = return_time(&osc, t0, steps);
        let change = (next - t0).abs();
        t0 = next;
        if change <= tol || steps >= 1 << 20 {
            break;
        }
    }

    // samples on a uniform grid in time, with the same resolution
    let s = ORBIT_SAMPLES;
    let sub = (steps / s).max(1);
    let hs = t0 / (s * sub) as f64;
    let mut xs = Vec::with_capacity(s);
    let mut ys = Vec::with_capacity(s);
    let (mut x, mut y) = (0.0, 1.0);
    for i in 0..s {
        xs.push(x);
        ys.push(y);
        verlet_integrate(&osc, &mut x, &mut y, i as f64 * sub as f64 * hs, hs, sub, 8)?;
    }
    let end_state = (x, y);

    // symmetrized samples define the interpolant, so x0 is exactly odd and y0 even
    let mut xsym = vec![0.0; s];
    let mut ysym = vec![0.0; s];
    for i in 0..s {
        let j = (s - i) % s;
        xsym[i] = 0.5 * (xs[i] - xs[j]);
        ysym[i] = 0.5 * (ys[i] + ys[j]);
    }
    let (x_sine, y_cosine) = trig_coefficients(&xsym, &ysym);
    let band = x_sine.len();
    let interpolation_tail = x_sine[3 * band / 4..]
        .iter()
        .chain(&y_cosine[3 * band / 4..])
        .fold(0.0f64, |a, b| a.max(b.abs()));

    let nf = n as f64;
    let alpha = 1.0 / (nf + 2.0);
    let beta = 1.0 - alpha;
    let c = TAU / (beta * t0);
    let c0 = beta * c.powf(2.0 * beta);
    Ok(ReferenceOrbit {
        n,
        t0,
        alpha,
        beta,
        c,
        c0,
        x_samples: xs,
        y_samples: ys,
        end_state,
        x_sine,
        y_cosine,
        interpolation_tail,
    })
}

/// `x = Σ b_k sin(kφ)`, `y = a_0 + Σ a_k cos(kφ)` for `k < S/2`, from samples
/// at `φ_i = 2π i / S`.
fn trig_coefficients(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = x.len();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(s);
    let mut bx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut by: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut bx);
    fft.process(&mut by);
    let half = s / 2;
    let norm = 1.0 / s as f64;
    let mut sine = vec![0.0; half];
    let mut cosine = vec![0.0; half];
    cosine[0] = by[0].re * norm;
    for k in 1..half {
        // X_k = -i S b_k / 2 for a pure sine series
        sine[k] = -2.0 * bx[k].im * norm;
        cosine[k] = 2.0 * by[k].re * norm;
    }
    (sine, cosine)
}

impl ReferenceOrbit {
    /// `(x0, y0)(τ)` from the trigonometric interpolant.
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        let phi = TAU * tau / self.t0;
        let (s1, c1) = phi.sin_cos();
        let (mut sk, mut ck) = (0.0, 1.0);
        let mut x = 0.0;
        let mut y = self.y_cosine[0];
        for k in 1..self.x_sine.len() {
            let ns = sk * c1 + ck * s1;
            let nc = ck * c1 - sk * s1;
            sk = ns;
            ck = nc;
            x += self.x_sine[k] * sk;
            y += self.y_cosine[k] * ck;
        }
        (x, y)
    }

    /// Energy, symmetry and periodicity residuals of the integrated samples.
    pub fn properties(&self) -> OrbitProperties {
        let m = 2 * self.n as i32 + 2;
        let nf = self.n as f64 + 1.0;
        let s = self.x_samples.len();
        let mut energy: f64 = 0.0;
        let mut symmetry: f64 = 0.0;
        for i in 0..s {
            let (x, y) = (self.x_samples[i], self.y_samples[i]);
            energy = energy.max((nf * y * y + x.powi(m) - nf).abs());
            let j = (s - i) % s;
            symmetry = symmetry
                .max((self.x_samples[j] + x).abs())
                .max((self.y_samples[j] - y).abs());
        }
        let periodicity = self.end_state.0.hypot(self.end_state.1 - 1.0);
        OrbitProperties {
            energy,
            symmetry,
            periodicity,
        }
    }

    /// `max_τ (a |x0| + b |y0|)` over the samples.
    pub fn max_weighted_sum(&self, a: f64, b: f64) -> f64 {
        self.x_samples
            .iter()
            .zip(&self.y_samples)
            .map(|(x, y)| a * x.abs() + b * y.abs())
            .fold(0.0, f64::max)
    }
}
