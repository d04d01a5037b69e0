//! Analytic smoothing as a Fourier multiplier and the telescoping decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FieldShape, FourierField, TorusIndex};

/// Radial cutoff symbol: `1` on `[0, plateau * a]`, a quintic smoothstep down
/// to `0` at `a`, and `0` beyond. The radius is measured in the l1 norm
/// `|k| + |l|`, matching the mode cutoffs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kernel {
    pub a: f64,
    pub plateau: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self { a: 1.0, plateau: 0.5 }
    }
}

impl Kernel {
    pub fn new(a: f64, plateau: f64) -> Result<Self> {
        if !(a > 0.0) || !(0.0..1.0).contains(&plateau) {
            return Err(Error::Parameter(format!("kernel needs a > 0 and 0 <= plateau < 1, got a = {a}, plateau = {plateau}")));
        }
        Ok(Self { a, plateau })
    }

    pub fn symbol(&self, xi: f64) -> f64 {
        let xi = xi.abs();
        let lo = self.plateau * self.a;
        if xi <= lo {
            1.0
        } else if xi >= self.a {
            0.0
        } else {
            let u = (xi - lo) / (self.a - lo);
            1.0 - u * u * u * (u * (6.0 * u - 15.0) + 10.0)
        }
    }

    /// Mode cutoff of `S_s` output.
    pub fn cutoff(&self, s: f64) -> usize {
        (self.a / s).ceil() as usize
    }
}

/// `S_s F`: multiplies coefficient `(k, l)` by `symbol(s (|k| + |l|))`.
pub fn smooth(input: &FourierField, s: f64, kernel: &Kernel) -> Result<FourierField> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!("smoothing width must lie in (0, 1], got {s}")));
    }
    let mut out = input.with_cutoff(kernel.cutoff(s));
    let lay = out.layout();
    let weights: Vec<f64> = lay.modes.iter().map(|m| kernel.symbol(s * m.order() as f64)).collect();
    let (nm, np, m) = (lay.n_modes(), lay.n_monomials(), out.m());
    let coeffs = out.coeffs_mut();
    for p in 0..np {
        for (mode, w) in weights.iter().enumerate() {
            let o = (p * nm + mode) * m;
            coeffs[o..o + m].iter_mut().for_each(|c| *c *= *w);
        }
    }
    Ok(out)
}

/// Telescoping pieces `F_0 = S_{s_0} F`, `F_{v+1} = S_{s_{v+1}} F - S_{s_v} F`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub pieces: Vec<FourierField>,
    pub widths: Vec<f64>,
    /// `sum |c|` of each piece on the real domain at its own radius.
    pub majorants: Vec<f64>,
    /// Majorant of the input.
    pub source_norm: f64,
}

impl Decomposition {
    /// `sum_{v <= m} F_v`.
    pub fn partial_sum(&self, m: usize) -> Result<FourierField> {
        let mut acc = self.pieces[0].clone();
        for p in &self.pieces[1..=m] {
            acc = acc.add(p)?;
        }
        Ok(acc)
    }
}

pub fn decompose(input: &FourierField, widths: &[f64], kernel: &Kernel) -> Result<Decomposition> {
    if widths.is_empty() {
        return Err(Error::Parameter("decomposition needs at least one width".into()));
    }
    if widths.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter("decomposition widths must decrease strictly".into()));
    }
    let mut pieces = Vec::with_capacity(widths.len());
    let mut prev = smooth(input, widths[0], kernel)?;
    pieces.push(prev.clone());
    for &s in &widths[1..] {
        let next = smooth(input, s, kernel)?;
        pieces.push(next.sub(&prev)?.with_parity(input.parity()));
        prev = next;
    }
    let majorants = pieces.iter().map(|p| p.majorant(0.0, p.radius())).collect();
    Ok(Decomposition {
        pieces,
        widths: widths.to_vec(),
        majorants,
        source_norm: input.majorant(0.0, input.radius()),
    })
}

/// `sum_{n=1}^{n_max} n^{-ell - 1} cos(n x)`, a 1-d time independent field whose
/// Fourier decay corresponds to smoothness `ell`.
pub fn synthetic_input(ell: f64, n_max: usize) -> FourierField {
    let mut f = FourierField::zeros(FieldShape::new(1, 1, n_max, 0, 0.0, false));
    for n in 1..=n_max {
        f.add_real_mode(0, &TorusIndex::new(vec![n as i32], 0), &[0], (n as f64).powf(-ell - 1.0), 0.0)
            .expect("mode inside cutoff");
    }
    f.with_parity(crate::fourier::Parity::Even)
}

/// Grid sup of `S_s F - F` for each width, on a grid four times finer than
/// the input cutoff.
pub fn smoothing_errors(input: &FourierField, widths: &[f64], kernel: &Kernel) -> Result<Vec<f64>> {
    let n = 4 * input.cutoff().max(kernel.cutoff(widths.iter().copied().fold(1.0, f64::min)));
    widths
        .iter()
        .map(|&s| {
            let diff = smooth(input, s, kernel)?.sub(input)?;
            Ok(diff.sup_norm(0.0, 0.0, n)?.value)
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
