use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::field::{FieldShape, FourierField, Parity};
use super::layout::{layout, Layout};
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized FFT along every axis of a `dims`-dimensional cube of side `n`.
/// Axis 0 is the slowest varying.
pub(crate) fn fft_nd(data: &mut [Complex64], dims: usize, n: usize, inverse: bool) {
    debug_assert_eq!(data.len(), n.pow(dims as u32));
    if dims == 0 || n == 1 {
        return;
    }
    let fft = plan(n, inverse);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..dims {
        let stride = n.pow((dims - 1 - axis) as u32);
        let block = stride * n;
        for start in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}

/// Uniform grid on `T^d` (times `T` when `time` is set) with `n` points per axis.
///
/// Point `i` has multi-index digits `(j_0, ..., j_{d-1}[, j_t])`, slowest first,
/// and coordinates `2π j / n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AngleGrid {
    pub d: usize,
    pub time: bool,
    pub n: usize,
}

impl AngleGrid {
    pub fn new(d: usize, time: bool, n: usize) -> Self {
        Self { d, time, n }
    }

    pub fn dims(&self) -> usize {
        self.d + usize::from(self.time)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dims() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates `(x, t)` of point `i`; `t = 0` without a time axis.
    pub fn point(&self, i: usize) -> (Vec<f64>, f64) {
        let h = 2.0 * PI / self.n as f64;
        let dims = self.dims();
        let mut rest = i;
        let mut digits = vec![0usize; dims];
        for a in (0..dims).rev() {
            digits[a] = rest % self.n;
            rest /= self.n;
        }
        let x = digits[..self.d].iter().map(|&j| j as f64 * h).collect();
        let t = if self.time { digits[self.d] as f64 * h } else { 0.0 };
        (x, t)
    }

    fn slot(&self, k: &[i32], l: i32) -> usize {
        let n = self.n as i64;
        let mut idx = 0usize;
        for &kj in k {
            idx = idx * self.n + (kj as i64).rem_euclid(n) as usize;
        }
        if self.time {
            idx = idx * self.n + (l as i64).rem_euclid(n) as usize;
        }
        idx
    }
}

/// Chebyshev nodes on `[-radius, radius]`; the single node is `0` when `q = 0`.
pub fn chebyshev_nodes(q: usize, radius: f64) -> Vec<f64> {
    if q == 0 {
        return vec![0.0];
    }
    (0..=q)
        .map(|i| radius * ((2 * i + 1) as f64 * PI / (2 * (q + 1)) as f64).cos())
        .collect()
}

/// Tensor product of Chebyshev nodes used to fit the action polynomial.
pub fn action_nodes(d: usize, q: usize, radius: f64) -> Vec<Vec<f64>> {
    let one = chebyshev_nodes(q, radius);
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        let mut next = Vec::with_capacity(out.len() * one.len());
        for p in &out {
            for &v in &one {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn monomial_value(alpha: &[u32], y: &[f64]) -> f64 {
    alpha.iter().zip(y).map(|(&e, &v)| v.powi(e as i32)).product()
}

impl FourierField {
    /// Same coefficients, with a time axis added (modes keep `l = 0`).
    pub fn with_time(&self) -> Self {
        if self.time() {
            return self.clone();
        }
        let lay = layout(self.d(), true, self.cutoff(), self.q_y());
        let mut out = FourierField::from_parts(
            Arc::clone(&lay),
            self.m(),
            self.radius(),
            self.parity(),
            vec![Complex64::new(0.0, 0.0); lay.n_modes() * lay.n_monomials() * self.m()],
        );
        let src = self.layout();
        for p in 0..src.n_monomials() {
            for (mode, idx) in src.modes.iter().enumerate() {
                let dm = lay.mode_index(idx).expect("l = 0 modes persist");
                let s = self.offset(p, mode);
                let t = out.offset(p, dm);
                let m = self.m();
                out.coeffs_mut()[t..t + m].copy_from_slice(&self.coeffs()[s..s + m]);
            }
        }
        out
    }

    /// Angle-only Fourier series of monomial `p`, component `c`, placed on an
    /// FFT cube of side `n` (aliasing sums modes, so sampling is exact for any `n`).
    fn spectrum(&self, p: usize, c: usize, grid: &AngleGrid) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
        let lay = self.layout();
        for mode in 0..lay.n_modes() {
            let v = self.coeffs()[self.offset(p, mode) + c];
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            buf[grid.slot(lay.k_of(mode), lay.l[mode])] += v;
        }
        buf
    }

    /// Values on the uniform grid at fixed action `y`, laid out `[c][point]`.
    pub fn sample_grid(&self, n: usize, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.d() {
            return Err(Error::Shape(format!("action has dim {}, field has d = {}", y.len(), self.d())));
        }
        let grid = AngleGrid::new(self.d(), self.time(), n);
        let lay = self.layout();
        let mut out = vec![0.0; self.m() * grid.len()];
        for c in 0..self.m() {
            let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
            for (p, alpha) in lay.monomials.iter().enumerate() {
                let w = monomial_value(alpha, y);
                if w == 0.0 {
                    continue;
                }
                let mut buf = self.spectrum(p, c, &grid);
                fft_nd(&mut buf, grid.dims(), n, true);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b * w;
                }
            }
            for (i, v) in acc.iter().enumerate() {
                out[c * grid.len() + i] = v.re;
            }
        }
        Ok(out)
    }

    /// Max over the uniform grid and the given action samples of
    /// `|F(-x, y, -t) - sign F(x, y, t)|`, relative to the grid sup.
    pub fn parity_grid_residual(&self, parity: Parity, n: usize, ys: &[Vec<f64>]) -> f64 {
        let Some(sign) = parity.sign() else {
            return 0.0;
        };
        let grid = AngleGrid::new(self.d(), self.time(), n);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for y in ys {
            for i in 0..grid.len() {
                let (x, t) = grid.point(i);
                let xm: Vec<f64> = x.iter().map(|v| -v).collect();
                let a = self.eval_unchecked(&x, y, t);
                let b = self.eval_unchecked(&xm, y, -t);
                for c in 0..self.m() {
                    worst = worst.max((b[c] - sign * a[c]).abs());
                    scale = scale.max(a[c].abs());
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Product truncated to the larger cutoff and action degree; computed
    /// through a `3N + 1` grid, which is alias free for the retained modes.
    pub fn multiply_truncated(&self, other: &Self) -> Result<Self> {
        if self.d() != other.d() {
            return Err(Error::Shape(format!("multiply: d {} vs {}", self.d(), other.d())));
        }
        let m = match (self.m(), other.m()) {
            (a, b) if a == b => a,
            (1, b) => b,
            (a, 1) => a,
            (a, b) => return Err(Error::Shape(format!("multiply: m {a} vs {b}"))),
        };
        let time = self.time() || other.time();
        let a = if time { self.with_time() } else { self.clone() };
        let b = if time { other.with_time() } else { other.clone() };
        let cutoff = a.cutoff().max(b.cutoff());
        let q_y = a.q_y().max(b.q_y());
        let shape = FieldShape::new(a.d(), m, cutoff, q_y, a.radius().min(b.radius()), time);
        let lay = layout(shape.d, time, cutoff, q_y);
        let grid = AngleGrid::new(shape.d, time, 3 * cutoff + 1);
        let norm = 1.0 / grid.len() as f64;
        let mut out = FourierField::zeros(shape);
        let la = a.layout();
        let lb = b.layout();
        for c in 0..m {
            let ca = if a.m() == 1 { 0 } else { c };
            let cb = if b.m() == 1 { 0 } else { c };
            let vals_a: Vec<Option<Vec<Complex64>>> = (0..la.n_monomials())
                .map(|p| {
                    let mut s = a.spectrum(p, ca, &grid);
                    if s.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                        return None;
                    }
                    fft_nd(&mut s, grid.dims(), grid.n, true);
                    Some(s)
                })
                .collect();
            let vals_b: Vec<Option<Vec<Complex64>>> = (0..lb.n_monomials())
                .map(|p| {
                    let mut s = b.spectrum(p, cb, &grid);
                    if s.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                        return None;
                    }
                    fft_nd(&mut s, grid.dims(), grid.n, true);
                    Some(s)
                })
                .collect();
            for (pa, alpha) in la.monomials.iter().enumerate() {
                let Some(va) = &vals_a[pa] else { continue };
                for (pb, beta) in lb.monomials.iter().enumerate() {
                    let Some(vb) = &vals_b[pb] else { continue };
                    let gamma: Vec<u32> = alpha.iter().zip(beta).map(|(x, y)| x + y).collect();
                    let Some(q) = lay.monomial_index(&gamma) else { continue };
                    let mut prod: Vec<Complex64> = va.iter().zip(vb).map(|(x, y)| x * y).collect();
                    fft_nd(&mut prod, grid.dims(), grid.n, false);
                    for mode in 0..lay.n_modes() {
                        let o = out.offset(q, mode) + c;
                        out.coeffs_mut()[o] += prod[grid.slot(lay.k_of(mode), lay.l[mode])] * norm;
                    }
                }
            }
        }
        out.enforce_reality();
        Ok(out.with_parity(a.parity().compose(b.parity())))
    }
}

/// Fits a field of the given shape from point values.
///
/// `eval(x, y, t, out)` is called at every point of the uniform `n` grid times
/// the Chebyshev action nodes of radius `fit_radius`. Angles are analyzed by
/// FFT (so `n` must exceed `2 * cutoff`) and the action polynomial is fitted by
/// least squares.
pub fn fit_field<F>(shape: FieldShape, n: usize, fit_radius: f64, eval: F) -> Result<FourierField>
where
    F: Fn(&[f64], &[f64], f64, &mut [f64]) -> Result<()> + Sync,
{
    if n <= 2 * shape.cutoff {
        return Err(Error::Parameter(format!(
            "grid of {n} points cannot resolve cutoff {}",
            shape.cutoff
        )));
    }
    let lay: Arc<Layout> = layout(shape.d, shape.time, shape.cutoff, shape.q_y);
    let grid = AngleGrid::new(shape.d, shape.time, n);
    let nodes = action_nodes(shape.d, shape.q_y, fit_radius);
    let m = shape.m;
    let npts = grid.len();

    // values[node][c][point]
    let per_node: Vec<Vec<Complex64>> = nodes
        .iter()
        .map(|y| -> Result<Vec<Complex64>> {
            let rows: Vec<Vec<f64>> = (0..npts)
                .into_par_iter()
                .map(|i| {
                    let (x, t) = grid.point(i);
                    let mut out = vec![0.0; m];
                    eval(&x, y, t, &mut out)?;
                    Ok(out)
                })
                .collect::<Result<_>>()?;
            let mut spec = vec![Complex64::new(0.0, 0.0); m * npts];
            for c in 0..m {
                let buf = &mut spec[c * npts..(c + 1) * npts];
                for (i, r) in rows.iter().enumerate() {
                    buf[i] = Complex64::new(r[c], 0.0);
                }
                fft_nd(buf, grid.dims(), n, false);
            }
            Ok(spec)
        })
        .collect::<Result<_>>()?;

    let vand = DMatrix::from_fn(nodes.len(), lay.n_monomials(), |i, p| monomial_value(&lay.monomials[p], &nodes[i]));
    let pinv = vand
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::Parameter(format!("action fit is singular: {e}")))?;

    let norm = 1.0 / npts as f64;
    let mut out = FourierField::zeros(shape);
    for mode in 0..lay.n_modes() {
        let slot = grid.slot(lay.k_of(mode), lay.l[mode]);
        for c in 0..m {
            for p in 0..lay.n_monomials() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, spec) in per_node.iter().enumerate() {
                    acc += spec[c * npts + slot] * pinv[(p, i)];
                }
                let o = out.offset(p, mode) + c;
                out.coeffs_mut()[o] = acc * norm;
            }
        }
    }
    out.enforce_reality();
    Ok(out)
}
