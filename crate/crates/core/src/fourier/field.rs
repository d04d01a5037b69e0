use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::layout::{layout, Layout, TorusIndex};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Behaviour under the involution `G: (x, y, t) -> (-x, y, -t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl Parity {
    /// `+1` for even, `-1` for odd.
    pub fn sign(self) -> Option<f64> {
        match self {
            Parity::Even => Some(1.0),
            Parity::Odd => Some(-1.0),
            Parity::None => None,
        }
    }

    /// Parity after a derivative in `x` or `t`.
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
            Parity::None => Parity::None,
        }
    }

    /// Parity of a product.
    pub fn compose(self, other: Parity) -> Self {
        match (self, other) {
            (Parity::None, _) | (_, Parity::None) => Parity::None,
            (a, b) if a == b => Parity::Even,
            _ => Parity::Odd,
        }
    }

    /// Parity of a sum.
    pub fn join(self, other: Parity) -> Self {
        if self == other {
            self
        } else {
            Parity::None
        }
    }
}

/// Shape parameters of a [`FourierField`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldShape {
    /// Angle (and action) dimension.
    pub d: usize,
    /// Codomain dimension.
    pub m: usize,
    /// Mode cutoff on `|k| + |l|`.
    pub cutoff: usize,
    /// Total degree of the action polynomial.
    pub q_y: usize,
    /// Action radius the field is meant to be used on.
    pub radius: f64,
    /// Whether the field depends on time.
    pub time: bool,
}

impl FieldShape {
    pub fn new(d: usize, m: usize, cutoff: usize, q_y: usize, radius: f64, time: bool) -> Self {
        Self {
            d,
            m,
            cutoff,
            q_y,
            radius,
            time,
        }
    }
}

/// Vector-valued trigonometric polynomial on `T^d × T`, polynomial in the
/// action `y ∈ R^d`.
///
/// Coefficients are stored densely per (monomial, mode, component).
#[derive(Clone, Debug)]
pub struct FourierField {
    layout: Arc<Layout>,
    m: usize,
    radius: f64,
    parity: Parity,
    coeffs: Vec<Complex64>,
}

impl PartialEq for FourierField {
    fn eq(&self, other: &Self) -> bool {
        self.layout.same_shape(&other.layout)
            && self.m == other.m
            && self.radius == other.radius
            && self.parity == other.parity
            && self.coeffs == other.coeffs
    }
}

/// Per-point trigonometric and monomial tables.
pub(crate) struct PointTables {
    pub phases: Vec<Complex64>,
    pub ym: Vec<f64>,
    pub dym: Vec<f64>,
}

/// Value and first derivatives of a field at a point.
#[derive(Clone, Debug)]
pub struct Jet {
    pub value: Vec<f64>,
    /// `dx[c * d + j] = ∂ F_c / ∂ x_j`
    pub dx: Vec<f64>,
    /// `dy[c * d + j] = ∂ F_c / ∂ y_j`
    pub dy: Vec<f64>,
    pub dt: Vec<f64>,
}

impl FourierField {
    pub fn zeros(shape: FieldShape) -> Self {
        let layout = layout(shape.d, shape.time, shape.cutoff, shape.q_y);
        let len = layout.n_modes() * layout.n_monomials() * shape.m;
        Self {
            layout,
            m: shape.m,
            radius: shape.radius,
            parity: Parity::None,
            coeffs: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub(crate) fn from_parts(layout: Arc<Layout>, m: usize, radius: f64, parity: Parity, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), layout.n_modes() * layout.n_monomials() * m);
        Self {
            layout,
            m,
            radius,
            parity,
            coeffs,
        }
    }

    pub fn shape(&self) -> FieldShape {
        FieldShape {
            d: self.layout.d,
            m: self.m,
            cutoff: self.layout.cutoff,
            q_y: self.layout.q_y,
            radius: self.radius,
            time: self.layout.time,
        }
    }

    pub fn d(&self) -> usize {
        self.layout.d
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn cutoff(&self) -> usize {
        self.layout.cutoff
    }
    pub fn q_y(&self) -> usize {
        self.layout.q_y
    }
    pub fn time(&self) -> bool {
        self.layout.time
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn parity(&self) -> Parity {
        self.parity
    }
    pub fn layout(&self) -> &Layout {
        &self.layout
    }
    pub(crate) fn layout_arc(&self) -> &Arc<Layout> {
        &self.layout
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Sets the parity tag without checking it.
    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    /// Sets the parity tag after checking the coefficients honour it.
    pub fn tagged(self, parity: Parity) -> Result<Self> {
        let defect = self.parity_defect(parity);
        if defect > 1e-12 {
            return Err(Error::Validation(format!(
                "coefficients are not {parity:?} under the involution (relative defect {defect:.3e})"
            )));
        }
        Ok(self.with_parity(parity))
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    #[inline]
    pub(crate) fn offset(&self, mono: usize, mode: usize) -> usize {
        (mono * self.layout.n_modes() + mode) * self.m
    }

    /// Coefficient vector of mode `idx` and monomial `alpha`.
    pub fn coeff(&self, idx: &TorusIndex, alpha: &[u32]) -> Option<&[Complex64]> {
        let mode = self.layout.mode_index(idx)?;
        let mono = self.layout.monomial_index(alpha)?;
        let o = self.offset(mono, mode);
        Some(&self.coeffs[o..o + self.m])
    }

    pub fn set_coeff(&mut self, idx: &TorusIndex, alpha: &[u32], values: &[Complex64]) -> Result<()> {
        if values.len() != self.m {
            return Err(Error::Shape(format!("expected {} components, got {}", self.m, values.len())));
        }
        let mode = self
            .layout
            .mode_index(idx)
            .ok_or_else(|| Error::Shape(format!("mode {idx:?} outside cutoff {}", self.cutoff())))?;
        let mono = self
            .layout
            .monomial_index(alpha)
            .ok_or_else(|| Error::Shape(format!("monomial {alpha:?} outside degree {}", self.q_y())))?;
        let o = self.offset(mono, mode);
        self.coeffs[o..o + self.m].copy_from_slice(values);
        Ok(())
    }

    /// Adds `a cos(<k,x> + l t) + b sin(<k,x> + l t)` times `y^alpha` to one
    /// component, keeping the coefficients conjugate symmetric.
    pub fn add_real_mode(&mut self, component: usize, idx: &TorusIndex, alpha: &[u32], a: f64, b: f64) -> Result<()> {
        if component >= self.m {
            return Err(Error::Shape(format!("component {component} out of range {}", self.m)));
        }
        let mode = self
            .layout
            .mode_index(idx)
            .ok_or_else(|| Error::Shape(format!("mode {idx:?} outside cutoff {}", self.cutoff())))?;
        let mono = self
            .layout
            .monomial_index(alpha)
            .ok_or_else(|| Error::Shape(format!("monomial {alpha:?} outside degree {}", self.q_y())))?;
        let neg = self.layout.neg[mode];
        if neg == mode {
            let o = self.offset(mono, mode) + component;
            self.coeffs[o] += Complex64::new(a, 0.0);
        } else {
            // a cos θ + b sin θ = (a - i b)/2 e^{iθ} + (a + i b)/2 e^{-iθ}
            let o = self.offset(mono, mode) + component;
            self.coeffs[o] += Complex64::new(0.5 * a, -0.5 * b);
            let o = self.offset(mono, neg) + component;
            self.coeffs[o] += Complex64::new(0.5 * a, 0.5 * b);
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Zero-mode coefficient vector for each monomial, `[mono][component]`.
    pub fn mean(&self) -> Vec<Vec<Complex64>> {
        let zero = self.zero_mode();
        (0..self.layout.n_monomials())
            .map(|p| {
                let o = self.offset(p, zero);
                self.coeffs[o..o + self.m].to_vec()
            })
            .collect()
    }

    pub(crate) fn zero_mode(&self) -> usize {
        self.layout
            .mode_index(&TorusIndex::new(vec![0; self.d()], 0))
            .expect("zero mode always present")
    }

    /// Copy with the `(0, 0)` mode removed for every monomial.
    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        let zero = self.zero_mode();
        for p in 0..self.layout.n_monomials() {
            let o = out.offset(p, zero);
            for c in 0..self.m {
                out.coeffs[o + c] = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    // ---------------------------------------------------------------- evaluation

    fn check_point(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.d() || y.len() != self.d() {
            return Err(Error::Shape(format!(
                "point has dims ({}, {}), field has d = {}",
                x.len(),
                y.len(),
                self.d()
            )));
        }
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny > self.radius * (1.0 + 1e-12) + 1e-300 && self.q_y() > 0 {
            return Err(Error::Domain(format!("action |y| = {ny:.3e} exceeds radius {:.3e}", self.radius)));
        }
        Ok(())
    }

    pub(crate) fn tables(&self, x: &[f64], y: &[f64], t: f64, with_dy: bool) -> PointTables {
        let lay = &*self.layout;
        let d = lay.d;
        let n = lay.cutoff;
        let w = 2 * n + 1;
        let mut ex = vec![Complex64::new(1.0, 0.0); d * w];
        for j in 0..d {
            let base = Complex64::new(x[j].cos(), x[j].sin());
            let row = &mut ex[j * w..(j + 1) * w];
            let mut p = Complex64::new(1.0, 0.0);
            for k in 1..=n {
                p = if k % 64 == 0 {
                    let a = k as f64 * x[j];
                    Complex64::new(a.cos(), a.sin())
                } else {
                    p * base
                };
                row[n + k] = p;
                row[n - k] = p.conj();
            }
        }
        let mut et = vec![Complex64::new(1.0, 0.0); w];
        if lay.time {
            let base = Complex64::new(t.cos(), t.sin());
            let mut p = Complex64::new(1.0, 0.0);
            for l in 1..=n {
                p = if l % 64 == 0 {
                    let a = l as f64 * t;
                    Complex64::new(a.cos(), a.sin())
                } else {
                    p * base
                };
                et[n + l] = p;
                et[n - l] = p.conj();
            }
        }
        let nm = lay.n_modes();
        let mut phases = Vec::with_capacity(nm);
        for mode in 0..nm {
            let mut ph = et[(lay.l[mode] + n as i32) as usize];
            for (j, &k) in lay.k_of(mode).iter().enumerate() {
                ph *= ex[j * w + (k + n as i32) as usize];
            }
            phases.push(ph);
        }
        let np = lay.n_monomials();
        let mut ym = vec![1.0; np];
        let mut dym = if with_dy { vec![0.0; np * d] } else { Vec::new() };
        for (p, alpha) in lay.monomials.iter().enumerate() {
            let mut v = 1.0;
            for (j, &e) in alpha.iter().enumerate() {
                v *= y[j].powi(e as i32);
            }
            ym[p] = v;
            if with_dy {
                for j in 0..d {
                    if alpha[j] == 0 {
                        continue;
                    }
                    let mut dv = alpha[j] as f64;
                    for (i, &e) in alpha.iter().enumerate() {
                        let e = if i == j { e - 1 } else { e };
                        dv *= y[i].powi(e as i32);
                    }
                    dym[p * d + j] = dv;
                }
            }
        }
        PointTables { phases, ym, dym }
    }

    pub(crate) fn eval_tables(&self, tab: &PointTables, out: &mut [Complex64]) {
        let nm = self.layout.n_modes();
        let m = self.m;
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (p, &yv) in tab.ym.iter().enumerate() {
            if yv == 0.0 {
                continue;
            }
            let block = &self.coeffs[p * nm * m..(p + 1) * nm * m];
            let mut acc = vec![Complex64::new(0.0, 0.0); m];
            for (mode, ph) in tab.phases.iter().enumerate() {
                let cs = &block[mode * m..(mode + 1) * m];
                for c in 0..m {
                    acc[c] += cs[c] * ph;
                }
            }
            for c in 0..m {
                out[c] += acc[c] * yv;
            }
        }
    }

    /// Real value at `(x, y, t)`.
    pub fn evaluate(&self, x: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_point(x, y)?;
        Ok(self.eval_unchecked(x, y, t))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64], t: f64) -> Vec<f64> {
        let tab = self.tables(x, y, t, false);
        let mut out = vec![Complex64::new(0.0, 0.0); self.m];
        self.eval_tables(&tab, &mut out);
        out.into_iter().map(|c| c.re).collect()
    }

    /// Complex value; the imaginary part vanishes for conjugate-symmetric
    /// coefficients.
    pub fn evaluate_complex(&self, x: &[f64], y: &[f64], t: f64) -> Result<Vec<Complex64>> {
        self.check_point(x, y)?;
        let tab = self.tables(x, y, t, false);
        let mut out = vec![Complex64::new(0.0, 0.0); self.m];
        self.eval_tables(&tab, &mut out);
        Ok(out)
    }

    /// Value and first derivatives.
    pub fn jet(&self, x: &[f64], y: &[f64], t: f64) -> Result<Jet> {
        self.check_point(x, y)?;
        Ok(self.jet_unchecked(x, y, t))
    }

    pub(crate) fn jet_unchecked(&self, x: &[f64], y: &[f64], t: f64) -> Jet {
        let lay = &*self.layout;
        let d = lay.d;
        let m = self.m;
        let nm = lay.n_modes();
        let tab = self.tables(x, y, t, true);
        let zero = Complex64::new(0.0, 0.0);
        let mut val = vec![zero; m];
        let mut dx = vec![zero; m * d];
        let mut dy = vec![zero; m * d];
        let mut dt = vec![zero; m];
        for p in 0..lay.n_monomials() {
            let yv = tab.ym[p];
            let dyv = &tab.dym[p * d..(p + 1) * d];
            if yv == 0.0 && dyv.iter().all(|&v| v == 0.0) {
                continue;
            }
            let block = &self.coeffs[p * nm * m..(p + 1) * nm * m];
            for (mode, ph) in tab.phases.iter().enumerate() {
                let cs = &block[mode * m..(mode + 1) * m];
                let k = lay.k_of(mode);
                let l = lay.l[mode] as f64;
                for c in 0..m {
                    let cp = cs[c] * ph;
                    if cp.re == 0.0 && cp.im == 0.0 {
                        continue;
                    }
                    let icp = I * cp;
                    val[c] += cp * yv;
                    dt[c] += icp * (l * yv);
                    for j in 0..d {
                        dx[c * d + j] += icp * (k[j] as f64 * yv);
                        dy[c * d + j] += cp * dyv[j];
                    }
                }
            }
        }
        Jet {
            value: val.iter().map(|c| c.re).collect(),
            dx: dx.iter().map(|c| c.re).collect(),
            dy: dy.iter().map(|c| c.re).collect(),
            dt: dt.iter().map(|c| c.re).collect(),
        }
    }

    // ---------------------------------------------------------------- structure

    /// Relative defect of conjugate symmetry `c(-k,-l) = conj c(k,l)`.
    pub fn reality_defect(&self) -> f64 {
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            return 0.0;
        }
        let nm = self.layout.n_modes();
        let mut worst: f64 = 0.0;
        for p in 0..self.layout.n_monomials() {
            for mode in 0..nm {
                let neg = self.layout.neg[mode];
                for c in 0..self.m {
                    let a = self.coeffs[self.offset(p, mode) + c];
                    let b = self.coeffs[self.offset(p, neg) + c];
                    worst = worst.max((a - b.conj()).norm());
                }
            }
        }
        worst / scale
    }

    /// Relative defect of the requested parity at coefficient level.
    pub fn parity_defect(&self, parity: Parity) -> f64 {
        let Some(sign) = parity.sign() else {
            return 0.0;
        };
        let scale = self.max_abs_coeff();
        if scale == 0.0 {
            return 0.0;
        }
        let nm = self.layout.n_modes();
        let mut worst: f64 = 0.0;
        for p in 0..self.layout.n_monomials() {
            for mode in 0..nm {
                let neg = self.layout.neg[mode];
                for c in 0..self.m {
                    let a = self.coeffs[self.offset(p, mode) + c];
                    let b = self.coeffs[self.offset(p, neg) + c];
                    worst = worst.max((b - a * sign).norm());
                }
            }
        }
        worst / scale
    }

    /// Replaces each coefficient pair by its conjugate-symmetric average.
    pub fn enforce_reality(&mut self) {
        let nm = self.layout.n_modes();
        for p in 0..self.layout.n_monomials() {
            for mode in 0..nm {
                let neg = self.layout.neg[mode];
                if neg < mode {
                    continue;
                }
                for c in 0..self.m {
                    let ia = self.offset(p, mode) + c;
                    let ib = self.offset(p, neg) + c;
                    let avg = 0.5 * (self.coeffs[ia] + self.coeffs[ib].conj());
                    self.coeffs[ia] = avg;
                    self.coeffs[ib] = avg.conj();
                }
            }
        }
    }

    /// Projection onto the even or odd part under the involution; tags the result.
    pub fn project_parity(&self, parity: Parity) -> Self {
        let Some(sign) = parity.sign() else {
            return self.clone().with_parity(Parity::None);
        };
        let mut out = self.clone();
        let nm = self.layout.n_modes();
        for p in 0..self.layout.n_monomials() {
            for mode in 0..nm {
                let neg = self.layout.neg[mode];
                for c in 0..self.m {
                    let a = self.coeffs[self.offset(p, mode) + c];
                    let b = self.coeffs[self.offset(p, neg) + c];
                    out.coeffs[self.offset(p, mode) + c] = 0.5 * (a + b * sign);
                }
            }
        }
        out.parity = parity;
        out
    }

    /// `F ∘ G`, i.e. `(x, y, t) -> F(-x, y, -t)`.
    pub fn pullback_involution(&self) -> Self {
        let mut out = self.clone();
        let nm = self.layout.n_modes();
        for p in 0..self.layout.n_monomials() {
            for mode in 0..nm {
                let neg = self.layout.neg[mode];
                let src = self.offset(p, neg);
                let dst = self.offset(p, mode);
                out.coeffs[dst..dst + self.m].copy_from_slice(&self.coeffs[src..src + self.m]);
            }
        }
        out
    }

    // ---------------------------------------------------------------- algebra

    /// Same field on a different mode cutoff (padding with zeros or truncating).
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        if cutoff == self.cutoff() {
            return self.clone();
        }
        self.relayout(cutoff, self.q_y())
    }

    /// Same field with a different action degree (truncating or padding).
    pub fn with_q_y(&self, q_y: usize) -> Self {
        if q_y == self.q_y() {
            return self.clone();
        }
        self.relayout(self.cutoff(), q_y)
    }

    fn relayout(&self, cutoff: usize, q_y: usize) -> Self {
        let mut out = Self::zeros(FieldShape {
            cutoff,
            q_y,
            ..self.shape()
        });
        out.parity = self.parity;
        let src = &*self.layout;
        for (p, alpha) in src.monomials.iter().enumerate() {
            let Some(q) = out.layout.monomial_index(alpha) else {
                continue;
            };
            for (mode, idx) in src.modes.iter().enumerate() {
                if let Some(dm) = out.layout.mode_index(idx) {
                    let s = self.offset(p, mode);
                    let t = out.offset(q, dm);
                    out.coeffs[t..t + self.m].copy_from_slice(&self.coeffs[s..s + self.m]);
                }
            }
        }
        out
    }

    fn check_compatible(&self, other: &Self, what: &str) -> Result<()> {
        if self.d() != other.d() || self.time() != other.time() || self.m != other.m {
            return Err(Error::Shape(format!(
                "{what}: incompatible fields (d {} vs {}, m {} vs {}, time {} vs {})",
                self.d(),
                other.d(),
                self.m,
                other.m,
                self.time(),
                other.time()
            )));
        }
        Ok(())
    }

    fn combine(&self, other: &Self, sign: f64, what: &str) -> Result<Self> {
        self.check_compatible(other, what)?;
        let cutoff = self.cutoff().max(other.cutoff());
        let q_y = self.q_y().max(other.q_y());
        let a = self.relayout_if(cutoff, q_y);
        let b = other.relayout_if(cutoff, q_y);
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y * sign).collect();
        Ok(Self::from_parts(
            Arc::clone(&a.layout),
            self.m,
            self.radius.min(other.radius),
            self.parity.join(other.parity),
            coeffs,
        ))
    }

    fn relayout_if(&self, cutoff: usize, q_y: usize) -> Self {
        if cutoff == self.cutoff() && q_y == self.q_y() {
            self.clone()
        } else {
            self.relayout(cutoff, q_y)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0, "add")
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0, "sub")
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= factor);
        out
    }

    /// `∂/∂x_j`.
    pub fn differentiate_x(&self, j: usize) -> Result<Self> {
        if j >= self.d() {
            return Err(Error::Shape(format!("direction {j} out of range {}", self.d())));
        }
        let mut out = self.clone();
        let nm = self.layout.n_modes();
        for p in 0..self.layout.n_monomials() {
            for mode in 0..nm {
                let f = I * self.layout.k_of(mode)[j] as f64;
                let o = self.offset(p, mode);
                out.coeffs[o..o + self.m].iter_mut().for_each(|c| *c *= f);
            }
        }
        out.parity = self.parity.flip();
        Ok(out)
    }

    /// `∂/∂t`.
    pub fn differentiate_t(&self) -> Self {
        let mut out = self.clone();
        let nm = self.layout.n_modes();
        for p in 0..self.layout.n_monomials() {
            for mode in 0..nm {
                let f = I * self.layout.l[mode] as f64;
                let o = self.offset(p, mode);
                out.coeffs[o..o + self.m].iter_mut().for_each(|c| *c *= f);
            }
        }
        out.parity = self.parity.flip();
        out
    }

    /// `∂/∂y_j`; the top-degree monomials of the result are zero.
    pub fn differentiate_y(&self, j: usize) -> Result<Self> {
        if j >= self.d() {
            return Err(Error::Shape(format!("direction {j} out of range {}", self.d())));
        }
        let mut out = Self::zeros(self.shape());
        out.parity = self.parity;
        let nm = self.layout.n_modes();
        for (p, alpha) in self.layout.monomials.iter().enumerate() {
            if alpha[j] == 0 {
                continue;
            }
            let mut lowered = alpha.clone();
            lowered[j] -= 1;
            let q = self.layout.monomial_index(&lowered).expect("lowered monomial exists");
            let f = alpha[j] as f64;
            for mode in 0..nm {
                let s = self.offset(p, mode);
                let t = out.offset(q, mode);
                for c in 0..self.m {
                    out.coeffs[t + c] = self.coeffs[s + c] * f;
                }
            }
        }
        Ok(out)
    }

    /// Scalar field holding component `c`.
    pub fn component(&self, c: usize) -> Result<Self> {
        if c >= self.m {
            return Err(Error::Shape(format!("component {c} out of range {}", self.m)));
        }
        let coeffs = self.coeffs.iter().skip(c).step_by(self.m).copied().collect();
        Ok(Self::from_parts(Arc::clone(&self.layout), 1, self.radius, self.parity, coeffs))
    }

    /// Stacks fields of identical shape into one vector-valued field.
    pub fn stack(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Shape("stack of zero fields".into()))?;
        let mut m = 0;
        for p in parts {
            if !p.layout.same_shape(&first.layout) {
                return Err(Error::Shape("stack requires identical layouts".into()));
            }
            m += p.m;
        }
        let blocks = first.layout.n_modes() * first.layout.n_monomials();
        let mut coeffs = Vec::with_capacity(blocks * m);
        for b in 0..blocks {
            for p in parts {
                coeffs.extend_from_slice(&p.coeffs[b * p.m..(b + 1) * p.m]);
            }
        }
        let parity = parts.iter().skip(1).fold(first.parity, |acc, p| acc.join(p.parity));
        let radius = parts.iter().map(|p| p.radius).fold(f64::INFINITY, f64::min);
        Ok(Self::from_parts(Arc::clone(&first.layout), m, radius, parity, coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_x() -> FourierField {
        let mut f = FourierField::zeros(FieldShape::new(1, 1, 4, 0, 0.0, true));
        f.add_real_mode(0, &TorusIndex::new(vec![1], 0), &[0], 1.0, 0.0).unwrap();
        f.with_parity(Parity::Even)
    }

    #[test]
    fn zero_field_evaluates_to_zero() {
        let f = FourierField::zeros(FieldShape::new(2, 3, 5, 2, 1.0, true));
        let v = f.evaluate(&[0.3, -1.2], &[0.1, 0.2], 0.7).unwrap();
        assert_eq!(v, vec![0.0; 3]);
    }

    #[test]
    fn cosine_reconstruction() {
        let f = cos_x();
        assert_eq!(f.coeff(&TorusIndex::new(vec![1], 0), &[0]).unwrap()[0], Complex64::new(0.5, 0.0));
        assert_eq!(f.coeff(&TorusIndex::new(vec![-1], 0), &[0]).unwrap()[0], Complex64::new(0.5, 0.0));
        assert!((f.evaluate(&[0.0], &[0.0], 0.0).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((f.evaluate(&[1.0], &[0.0], 0.0).unwrap()[0] - 1.0f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_cosine_is_minus_sine() {
        let df = cos_x().differentiate_x(0).unwrap();
        assert_eq!(df.parity(), Parity::Odd);
        // -sin x = (i/2) e^{ix} - (i/2) e^{-ix}
        assert_eq!(df.coeff(&TorusIndex::new(vec![1], 0), &[0]).unwrap()[0], Complex64::new(0.0, 0.5));
        assert_eq!(df.coeff(&TorusIndex::new(vec![-1], 0), &[0]).unwrap()[0], Complex64::new(0.0, -0.5));
    }

    #[test]
    fn action_derivative_shifts_powers() {
        let mut f = FourierField::zeros(FieldShape::new(1, 1, 2, 2, 1.0, true));
        f.add_real_mode(0, &TorusIndex::new(vec![0], 0), &[2], 3.0, 0.0).unwrap();
        let df = f.differentiate_y(0).unwrap();
        assert_eq!(df.coeff(&TorusIndex::new(vec![0], 0), &[1]).unwrap()[0].re, 6.0);
        assert_eq!(df.coeff(&TorusIndex::new(vec![0], 0), &[2]).unwrap()[0].re, 0.0);
        let v = df.evaluate(&[0.0], &[0.5], 0.0).unwrap()[0];
        assert!((v - 3.0).abs() < 1e-15);
    }

    #[test]
    fn action_outside_radius_is_a_domain_error() {
        let f = FourierField::zeros(FieldShape::new(1, 1, 2, 2, 0.1, true));
        assert!(matches!(f.evaluate(&[0.0], &[0.2], 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn incompatible_add_is_a_shape_error() {
        let a = FourierField::zeros(FieldShape::new(1, 1, 2, 2, 0.1, true));
        let b = FourierField::zeros(FieldShape::new(1, 2, 2, 2, 0.1, true));
        assert!(matches!(a.add(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn jet_matches_finite_differences() {
        let mut f = FourierField::zeros(FieldShape::new(1, 1, 3, 2, 1.0, true));
        f.add_real_mode(0, &TorusIndex::new(vec![1], 1), &[1], 0.7, 0.2).unwrap();
        f.add_real_mode(0, &TorusIndex::new(vec![2], -1), &[2], -0.3, 0.5).unwrap();
        let (x, y, t) = (0.4, 0.3, 1.1);
        let jet = f.jet(&[x], &[y], t).unwrap();
        let h = 1e-6;
        let e = |x: f64, y: f64, t: f64| f.evaluate(&[x], &[y], t).unwrap()[0];
        let fdx = (e(x + h, y, t) - e(x - h, y, t)) / (2.0 * h);
        let fdy = (e(x, y + h, t) - e(x, y - h, t)) / (2.0 * h);
        let fdt = (e(x, y, t + h) - e(x, y, t - h)) / (2.0 * h);
        assert!((jet.dx[0] - fdx).abs() < 1e-8);
        assert!((jet.dy[0] - fdy).abs() < 1e-8);
        assert!((jet.dt[0] - fdt).abs() < 1e-8);
    }

    #[test]
    fn parity_rules() {
        assert_eq!(Parity::Odd.compose(Parity::Odd), Parity::Even);
        assert_eq!(Parity::Odd.compose(Parity::Even), Parity::Odd);
        assert_eq!(Parity::Even.flip(), Parity::Odd);
        assert_eq!(Parity::Even.join(Parity::Odd), Parity::None);
    }
}
