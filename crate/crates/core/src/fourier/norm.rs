use serde::{Deserialize, Serialize};

use super::field::FourierField;
use super::grid::AngleGrid;
use crate::error::{Error, Result};

/// Two-sided size estimate of a field on `D(s, r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupNormReport {
    /// Max of the Euclidean norm over the real grid and the action samples.
    pub value: f64,
    /// `sqrt(sum_c (sum |c| e^{(|k|+|l|) s} r^{|alpha|})^2)`, an upper bound
    /// on the complex strip.
    pub majorant: f64,
    pub grid_size: Vec<usize>,
    pub s_eff: f64,
    pub r_eff: f64,
}

/// Action samples `{0, ±r e_j, ±r/2 e_j}`.
pub fn action_samples(d: usize, r: f64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; d]];
    if r > 0.0 {
        for j in 0..d {
            for v in [r, -r, 0.5 * r, -0.5 * r] {
                let mut y = vec![0.0; d];
                y[j] = v;
                out.push(y);
            }
        }
    }
    out
}

impl FourierField {
    /// Weighted coefficient sum per component.
    pub fn majorant_components(&self, s: f64, r: f64) -> Vec<f64> {
        let lay = self.layout();
        let m = self.m();
        let mut out = vec![0.0; m];
        for (p, alpha) in lay.monomials.iter().enumerate() {
            let rw = r.powi(alpha.iter().sum::<u32>() as i32);
            if rw == 0.0 {
                continue;
            }
            for (mode, idx) in lay.modes.iter().enumerate() {
                let w = rw * (idx.order() as f64 * s).exp();
                let o = self.offset(p, mode);
                for c in 0..m {
                    out[c] += self.coeffs()[o + c].norm() * w;
                }
            }
        }
        out
    }

    /// Strip majorant on `D(s, r)`.
    pub fn majorant(&self, s: f64, r: f64) -> f64 {
        self.majorant_components(s, r).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Grid sup and strip majorant; `n` points per angle axis.
    pub fn sup_norm(&self, s: f64, r: f64, n: usize) -> Result<SupNormReport> {
        if !(s >= 0.0) || !(r >= 0.0) {
            return Err(Error::Domain(format!("sup_norm needs s, r >= 0, got s = {s}, r = {r}")));
        }
        if n == 0 {
            return Err(Error::Domain("sup_norm needs a nonempty grid".into()));
        }
        let grid = AngleGrid::new(self.d(), self.time(), n);
        let npts = grid.len();
        let m = self.m();
        let mut value: f64 = 0.0;
        for y in action_samples(self.d(), r) {
            let vals = self.sample_grid(n, &y)?;
            for i in 0..npts {
                let norm = (0..m).map(|c| vals[c * npts + i].powi(2)).sum::<f64>().sqrt();
                value = value.max(norm);
            }
        }
        Ok(SupNormReport {
            value,
            majorant: self.majorant(s, r),
            grid_size: vec![n; grid.dims()],
            s_eff: s,
            r_eff: r,
        })
    }
}
