use crate::error::{Error, Result};
use crate::fourier::FourierField;

/// Iteration cap for the pointwise inversion of a transform.
pub const INVERSION_MAX_ITER: usize = 50;
/// Step size at which the inversion is considered converged.
pub const INVERSION_TOL: f64 = 1e-13;

/// One Newton step's change of variables `ξ = x + u(x, y, t)`,
/// `η = y + v(x, y, t)` together with the fitted inverse
/// `x = ξ + U(ξ, η, t)`, `y = η + V(ξ, η, t)`.
#[derive(Clone, Debug)]
pub struct NearIdentityTransform {
    pub m: usize,
    /// Stacked `(u, v)`, `2d` components.
    pub uv: FourierField,
    /// Stacked `(U, V)`, `2d` components.
    pub inverse: FourierField,
}

impl NearIdentityTransform {
    pub fn d(&self) -> usize {
        self.uv.d()
    }

    pub fn u(&self) -> FourierField {
        split(&self.uv, 0)
    }

    pub fn v(&self) -> FourierField {
        split(&self.uv, 1)
    }

    pub fn big_u(&self) -> FourierField {
        split(&self.inverse, 0)
    }

    pub fn big_v(&self) -> FourierField {
        split(&self.inverse, 1)
    }

    /// `(x, y) -> (x + u, y + v)`.
    pub fn forward(&self, x: &[f64], y: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.d();
        let w = self.uv.eval_unchecked(x, y, t);
        (
            (0..d).map(|j| x[j] + w[j]).collect(),
            (0..d).map(|j| y[j] + w[d + j]).collect(),
        )
    }

    /// Solves `x + u(x, y, t) = ξ`, `y + v(x, y, t) = η` by plain fixed point.
    /// Returns the point and the iteration count.
    pub fn invert(&self, xi: &[f64], eta: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let d = self.d();
        let mut x = xi.to_vec();
        let mut y = eta.to_vec();
        let mut converged_at = None;
        let mut last = f64::INFINITY;
        for it in 1..=INVERSION_MAX_ITER {
            let w = self.uv.eval_unchecked(&x, &y, t);
            let mut delta: f64 = 0.0;
            for j in 0..d {
                let nx = xi[j] - w[j];
                let ny = eta[j] - w[d + j];
                delta = delta.max((nx - x[j]).abs()).max((ny - y[j]).abs());
                x[j] = nx;
                y[j] = ny;
            }
            if !delta.is_finite() {
                break;
            }
            if converged_at.is_none() && delta <= INVERSION_TOL {
                converged_at = Some(it);
            }
            // past the tolerance, sweep on while the step still shrinks so the
            // inverse is accurate relative to small action corrections
            if let Some(first) = converged_at {
                if delta == 0.0 || delta >= last || it >= first + 3 {
                    return Ok((x, y, first));
                }
            }
            last = delta;
        }
        if let Some(first) = converged_at {
            return Ok((x, y, first));
        }
        Err(Error::StepFailure {
            step: self.m,
            reason: format!("transform inversion did not contract within {INVERSION_MAX_ITER} iterations"),
        })
    }

    /// `I + D(u, v)` at `(x, y, t)` as a row-major `2d × 2d` matrix in the
    /// variable order `(x, y)`.
    pub fn forward_jacobian(&self, x: &[f64], y: &[f64], t: f64) -> Vec<f64> {
        let d = self.d();
        let n = 2 * d;
        let jet = self.uv.jet_unchecked(x, y, t);
        let mut out = vec![0.0; n * n];
        for c in 0..n {
            for j in 0..d {
                out[c * n + j] = jet.dx[c * d + j];
                out[c * n + d + j] = jet.dy[c * d + j];
            }
            out[c * n + c] += 1.0;
        }
        out
    }
}

fn split(stacked: &FourierField, half: usize) -> FourierField {
    let d = stacked.d();
    let parts: Vec<FourierField> = (half * d..(half + 1) * d)
        .map(|c| stacked.component(c).expect("component in range"))
        .collect();
    FourierField::stack(&parts).expect("same layout")
}

/// `Φ_0 ∘ Φ_1 ∘ ... ∘ Φ_m`, evaluated pointwise.
#[derive(Clone, Debug, Default)]
pub struct TransformChain {
    pub steps: Vec<NearIdentityTransform>,
}

impl TransformChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push_step(&mut self, step: NearIdentityTransform) {
        self.steps.push(step);
    }

    /// Current coordinates to original coordinates; also returns the total
    /// number of inversion sweeps.
    pub fn pull(&self, xi: &[f64], eta: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let mut x = xi.to_vec();
        let mut y = eta.to_vec();
        let mut iters = 0;
        for step in self.steps.iter().rev() {
            let (nx, ny, it) = step.invert(&x, &y, t)?;
            x = nx;
            y = ny;
            iters += it;
        }
        Ok((x, y, iters))
    }

    /// Original coordinates to current coordinates.
    pub fn push(&self, x: &[f64], y: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let mut x = x.to_vec();
        let mut y = y.to_vec();
        for step in &self.steps {
            let (nx, ny) = step.forward(&x, &y, t);
            x = nx;
            y = ny;
        }
        (x, y)
    }

    /// Pulls `(ξ, η)` back to the original point `z`, evaluates the vector
    /// `w(z)` there and maps it to current coordinates with the Jacobians of
    /// the forward transforms.
    pub fn pushforward<W>(&self, xi: &[f64], eta: &[f64], t: f64, w: W) -> Result<Vec<f64>>
    where
        W: Fn(&[f64], &[f64]) -> Vec<f64>,
    {
        let n = 2 * xi.len();
        let mut points = Vec::with_capacity(self.steps.len());
        let mut x = xi.to_vec();
        let mut y = eta.to_vec();
        for step in self.steps.iter().rev() {
            let (nx, ny, _) = step.invert(&x, &y, t)?;
            x = nx;
            y = ny;
            points.push((x.clone(), y.clone()));
        }
        let mut delta = w(&x, &y);
        // points[i] is the input of step len - 1 - i
        for (i, step) in self.steps.iter().enumerate() {
            let (px, py) = &points[self.steps.len() - 1 - i];
            let jac = step.forward_jacobian(px, py, t);
            let old = delta.clone();
            for r in 0..n {
                delta[r] = (0..n).map(|c| jac[r * n + c] * old[c]).sum();
            }
        }
        Ok(delta)
    }
}
