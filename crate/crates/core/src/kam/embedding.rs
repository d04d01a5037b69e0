use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::fourier::{fit_field, AngleGrid, FieldShape, FourierField, Parity};

/// Parametrized torus `(θ, t) -> (θ + X(θ, t), Y(θ, t))`, stored as grid
/// samples plus the Fourier interpolants of `X` and `Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusEmbedding {
    pub omega: Vec<f64>,
    /// Points per axis of the sampling grid.
    pub n: usize,
    /// `X` at the grid points, laid out `[component][point]`.
    pub grid_x: Vec<f64>,
    /// `Y` at the grid points, laid out `[component][point]`.
    pub grid_y: Vec<f64>,
    pub x_interp: FourierField,
    pub y_interp: FourierField,
}

impl TorusEmbedding {
    pub fn d(&self) -> usize {
        self.omega.len()
    }

    pub fn time(&self) -> bool {
        self.x_interp.time()
    }

    /// Samples `k(θ, t)` on an `n`-point grid and interpolates. Angles returned
    /// by `k` must be lifted (continuous in θ).
    pub fn sample<K>(omega: &[f64], time: bool, n: usize, k: K) -> Result<Self>
    where
        K: Fn(&[f64], f64) -> Result<(Vec<f64>, Vec<f64>)> + Sync,
    {
        let d = omega.len();
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::Parameter(format!("embedding grid needs an odd size >= 3, got {n}")));
        }
        let grid = AngleGrid::new(d, time, n);
        let npts = grid.len();
        let store = Mutex::new((vec![0.0; d * npts], vec![0.0; d * npts]));
        let cutoff = (n - 1) / 2;
        let shape = FieldShape::new(d, 2 * d, cutoff, 0, 0.0, time);
        let h = std::f64::consts::TAU / n as f64;
        let fitted = fit_field(shape, n, 0.0, |theta, _y, t, out| {
            let (x, y) = k(theta, t)?;
            for j in 0..d {
                out[j] = x[j] - theta[j];
                out[d + j] = y[j];
            }
            // recover the flat grid index from the coordinates
            let mut idx = 0usize;
            for &v in theta.iter() {
                idx = idx * n + (v / h).round() as usize;
            }
            if time {
                idx = idx * n + (t / h).round() as usize;
            }
            let mut s = store.lock().expect("sample store poisoned");
            for j in 0..d {
                s.0[j * npts + idx] = out[j];
                s.1[j * npts + idx] = out[d + j];
            }
            Ok(())
        })?;
        let (grid_x, grid_y) = store.into_inner().expect("sample store poisoned");
        let pick = |lo: usize| -> Result<FourierField> {
            let parts: Vec<FourierField> = (lo..lo + d).map(|c| fitted.component(c)).collect::<Result<_>>()?;
            FourierField::stack(&parts)
        };
        Ok(Self {
            omega: omega.to_vec(),
            n,
            grid_x,
            grid_y,
            x_interp: pick(0)?.project_parity(Parity::Odd),
            y_interp: pick(d)?.project_parity(Parity::Even),
        })
    }

    /// `θ -> (θ, 0)`.
    pub fn identity(omega: &[f64], time: bool, n: usize) -> Result<Self> {
        Self::sample(omega, time, n, |theta, _| Ok((theta.to_vec(), vec![0.0; theta.len()])))
    }

    /// `K(θ, t)` from the interpolants.
    pub fn eval(&self, theta: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
        let zero = vec![0.0; self.d()];
        let dx = self.x_interp.eval_unchecked(theta, &zero, t);
        let y = self.y_interp.eval_unchecked(theta, &zero, t);
        (theta.iter().zip(&dx).map(|(a, b)| a + b).collect(), y)
    }

    /// Largest `|Y|` on the sampling grid.
    pub fn max_action(&self) -> f64 {
        let d = self.d();
        let npts = self.grid_y.len() / d.max(1);
        (0..npts)
            .map(|i| (0..d).map(|j| self.grid_y[j * npts + i].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}
