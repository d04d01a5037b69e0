//! Symmetric fixed-step integrators: implicit midpoint, Störmer–Verlet and
//! their triple-jump compositions.

use crate::error::{Error, Result};

/// `dz/dt = F(t, z)`.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, z: &[f64], out: &mut [f64]);
}

/// `dx/dt = y`, `dy/dt = a(x, t)` with `x, y` scalar.
pub trait SecondOrder: Sync {
    fn accel(&self, x: f64, t: f64) -> f64;
}

/// Stage weights of the triple-jump composition of a symmetric second order
/// method, for even orders 2 through 8.
pub fn composition_gammas(order: usize) -> Result<Vec<f64>> {
    if !(2..=8).contains(&order) || !order.is_multiple_of(2) {
        return Err(Error::Parameter(format!("composition order must be 2, 4, 6 or 8, got {order}")));
    }
    let mut g = vec![1.0];
    let mut p = 2;
    while p < order {
        let g1 = 1.0 / (2.0 - 2f64.powf(1.0 / (p as f64 + 1.0)));
        let g2 = 1.0 - 2.0 * g1;
        let mut next = Vec::with_capacity(3 * g.len());
        next.extend(g.iter().map(|v| v * g1));
        next.extend(g.iter().map(|v| v * g2));
        next.extend(g.iter().map(|v| v * g1));
        g = next;
        p += 2;
    }
    Ok(g)
}

/// Implicit midpoint rule solved by fixed-point iteration to rounding level.
#[derive(Clone, Copy, Debug)]
pub struct ImplicitMidpoint {
    pub max_iter: usize,
}

impl Default for ImplicitMidpoint {
    fn default() -> Self {
        Self { max_iter: 200 }
    }
}

/// Systems up to this dimension step without allocating.
const SMALL: usize = 8;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

impl ImplicitMidpoint {
    /// `z1 = z + h F(t + h / 2, (z + z1) / 2)`.
    pub fn step<S: OdeSystem + ?Sized>(&self, sys: &S, t: f64, z: &mut [f64], h: f64) -> Result<()> {
        let n = z.len();
        if n <= SMALL {
            let mut buf = [0.0; 3 * SMALL];
            let (k, rest) = buf.split_at_mut(SMALL);
            let (mid, knew) = rest.split_at_mut(SMALL);
            self.solve(sys, t, z, h, &mut k[..n], &mut mid[..n], &mut knew[..n])
        } else {
            let mut buf = vec![0.0; 3 * n];
            let (k, rest) = buf.split_at_mut(n);
            let (mid, knew) = rest.split_at_mut(n);
            self.solve(sys, t, z, h, k, mid, knew)
        }
    }

    fn solve<S: OdeSystem + ?Sized>(
        &self,
        sys: &S,
        t: f64,
        z: &mut [f64],
        h: f64,
        k: &mut [f64],
        mid: &mut [f64],
        knew: &mut [f64],
    ) -> Result<()> {
        let n = z.len();
        sys.rhs(t + 0.5 * h, z, k);
        let scale = 1.0 + max_abs(z);
        let mut last = f64::INFINITY;
        let mut settled = 0;
        for _ in 0..self.max_iter {
            for i in 0..n {
                mid[i] = z[i] + 0.5 * h * k[i];
            }
            sys.rhs(t + 0.5 * h, mid, knew);
            let delta = h.abs() * k.iter().zip(knew.iter()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            k.copy_from_slice(knew);
            if !delta.is_finite() {
                break;
            }
            if delta <= 2.0 * f64::EPSILON * scale {
                settled += 1;
                if settled >= 2 {
                    for i in 0..n {
                        z[i] += h * k[i];
                    }
                    return Ok(());
                }
            } else if delta >= last && delta <= 1e-13 * scale {
                // rounding noise dominates; further sweeps cannot help
                for i in 0..n {
                    z[i] += h * k[i];
                }
                return Ok(());
            }
            last = delta;
        }
        Err(Error::StepFailure {
            step: 0,
            reason: format!("implicit midpoint iteration did not converge at t = {t}, h = {h}"),
        })
    }

    /// `steps` composed steps of order `order` from `t0` to `t0 + steps * h`.
    pub fn integrate<S: OdeSystem + ?Sized>(
        &self,
        sys: &S,
        z: &mut [f64],
        t0: f64,
        h: f64,
        steps: usize,
        order: usize,
    ) -> Result<()> {
        let gammas = composition_gammas(order)?;
        for i in 0..steps {
            self.composed_step(sys, z, t0 + i as f64 * h, h, &gammas)?;
        }
        Ok(())
    }

    /// One composed step with weights from [`composition_gammas`].
    pub fn composed_step<S: OdeSystem + ?Sized>(&self, sys: &S, z: &mut [f64], t: f64, h: f64, gammas: &[f64]) -> Result<()> {
        let mut t = t;
        for &g in gammas {
            self.step(sys, t, z, g * h)?;
            t += g * h;
        }
        Ok(())
    }
}

/// Velocity Verlet step for `x' = y`, `y' = a(x, t)`.
#[inline]
pub fn verlet_step<S: SecondOrder + ?Sized>(sys: &S, t: f64, x: &mut f64, y: &mut f64, h: f64) {
    *y += 0.5 * h * sys.accel(*x, t);
    *x += h * *y;
    *y += 0.5 * h * sys.accel(*x, t + h);
}

/// Composed Verlet steps of the given order.
pub fn verlet_integrate<S: SecondOrder + ?Sized>(
    sys: &S,
    x: &mut f64,
    y: &mut f64,
    t0: f64,
    h: f64,
    steps: usize,
    order: usize,
) -> Result<()> {
    let gammas = composition_gammas(order)?;
    for i in 0..steps {
        let mut t = t0 + i as f64 * h;
        for &g in &gammas {
            verlet_step(sys, t, x, y, g * h);
            t += g * h;
        }
    }
    Ok(())
}
