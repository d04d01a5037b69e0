//! Fourier solvers for the flow and map homological equations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diophantine::{Frequency, FrequencyKind};
use crate::error::{Error, Result};
use crate::fourier::{FourierField, Parity};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative tolerance on the structural preconditions (zero mean, parities).
pub const STRUCTURE_TOL: f64 = 1e-10;

/// Output of a homological solve.
#[derive(Clone, Debug)]
pub struct HomologicalSolution {
    pub u: FourierField,
    pub v: FourierField,
    pub min_divisor: f64,
    /// Majorant of the `u` equation residual relative to the forcing.
    pub residual_u: f64,
    /// Majorant of the `v` equation residual relative to the forcing.
    pub residual_v: f64,
}

/// Per-mode divisor: `<k, omega> + l` for flows, `e^{i <k, omega>} - 1` for maps.
fn divisors(field: &FourierField, freq: &Frequency) -> Result<Vec<Option<Complex64>>> {
    if field.d() != freq.d() {
        return Err(Error::Shape(format!("field has d = {}, frequency has d = {}", field.d(), freq.d())));
    }
    let lay = field.layout();
    if freq.kind == FrequencyKind::Map && lay.time {
        return Err(Error::Shape("map solver needs time-independent fields".into()));
    }
    let mut out = Vec::with_capacity(lay.n_modes());
    for idx in &lay.modes {
        if idx.is_zero() {
            out.push(None);
            continue;
        }
        let kw: f64 = idx.k.iter().zip(&freq.omega).map(|(&k, &w)| k as f64 * w).sum();
        let (div, mag) = match freq.kind {
            FrequencyKind::Flow => {
                let v = kw + idx.l as f64;
                (Complex64::new(v, 0.0), v.abs())
            }
            FrequencyKind::Map => {
                let v = Complex64::new(kw.cos() - 1.0, kw.sin());
                // 2 |sin(kw / 2)| without cancellation
                (v, 2.0 * (0.5 * kw).sin().abs())
            }
        };
        let korder: usize = idx.k.iter().map(|v| v.unsigned_abs() as usize).sum();
        let floor = if korder == 0 { 0.5 } else { freq.divisor_floor(korder) };
        if !(mag >= floor) {
            return Err(Error::SmallDivisor {
                k: idx.k.clone(),
                l: idx.l,
                divisor: mag,
                floor,
            });
        }
        out.push(Some(div));
    }
    Ok(out)
}

fn min_divisor(divs: &[Option<Complex64>]) -> f64 {
    divs.iter().flatten().map(|d| d.norm()).fold(f64::INFINITY, f64::min)
}

fn mean_defect(g: &FourierField) -> f64 {
    let scale = g.max_abs_coeff();
    if scale == 0.0 {
        return 0.0;
    }
    g.mean().iter().flatten().map(|c| c.norm()).fold(0.0, f64::max) / scale
}

fn check_parity(field: &FourierField, parity: Parity, name: &str) -> Result<()> {
    let defect = field.parity_defect(parity);
    if defect > STRUCTURE_TOL {
        return Err(Error::Structure(format!(
            "{name} is not {} under the involution (relative defect {defect:.3e})",
            match parity {
                Parity::Even => "even",
                Parity::Odd => "odd",
                Parity::None => "tagged",
            }
        )));
    }
    Ok(())
}

fn check_zero_mean(g: &FourierField) -> Result<()> {
    let defect = mean_defect(g);
    if defect > 1e-12 {
        return Err(Error::Structure(format!("forcing g has a nonzero mean (relative size {defect:.3e})")));
    }
    Ok(())
}

/// Applies `c -> op(c, divisor)` to every nonzero mode, leaving the zero mode at zero.
fn divide(src: &FourierField, divs: &[Option<Complex64>], op: impl Fn(Complex64, Complex64) -> Complex64) -> FourierField {
    let mut out = src.clone();
    let (nm, np, m) = (src.layout().n_modes(), src.layout().n_monomials(), src.m());
    let coeffs = out.coeffs_mut();
    for p in 0..np {
        for (mode, div) in divs.iter().enumerate() {
            let o = (p * nm + mode) * m;
            for c in &mut coeffs[o..o + m] {
                *c = match div {
                    Some(dv) => op(*c, *dv),
                    None => Complex64::new(0.0, 0.0),
                };
            }
        }
    }
    out
}

/// Coefficient-level residual `max |D(w) c_w - c_rhs|` relative to the largest
/// right-hand side coefficient, over nonzero modes.
fn residual(
    sol: &FourierField,
    rhs: &FourierField,
    divs: &[Option<Complex64>],
    apply: impl Fn(Complex64, Complex64) -> Complex64,
) -> f64 {
    let (nm, np, m) = (sol.layout().n_modes(), sol.layout().n_monomials(), sol.m());
    let mut worst: f64 = 0.0;
    for p in 0..np {
        for (mode, div) in divs.iter().enumerate() {
            let Some(dv) = div else { continue };
            let o = (p * nm + mode) * m;
            for c in 0..m {
                worst = worst.max((apply(sol.coeffs()[o + c], *dv) - rhs.coeffs()[o + c]).norm());
            }
        }
    }
    let scale = rhs.max_abs_coeff();
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// Solves `omega . ∂_x v + ∂_t v = -g`: `v(k, l) = i g(k, l) / (<k, omega> + l)`.
/// The zero mode is left at zero; `solve_u` assigns it.
pub fn solve_v(g: &FourierField, freq: &Frequency) -> Result<FourierField> {
    check_flow(freq)?;
    check_zero_mean(g)?;
    check_parity(g, Parity::Odd, "g")?;
    let divs = divisors(g, freq)?;
    Ok(divide(g, &divs, |c, d| I * c / d).with_parity(Parity::Even))
}

/// Sets `v(0, 0) := f(0, 0)` on a copy of `v` and solves
/// `omega . ∂_x u + ∂_t u = v - f`: `u(k, l) = i (f - v)(k, l) / (<k, omega> + l)`.
/// Returns `(u, v)`.
pub fn solve_u(f: &FourierField, v: &FourierField, freq: &Frequency) -> Result<(FourierField, FourierField)> {
    check_flow(freq)?;
    check_parity(f, Parity::Even, "f")?;
    check_parity(v, Parity::Even, "v")?;
    let (f, v) = common_shape(f, v)?;
    let v = with_mean_of(&v, &f);
    let divs = divisors(&f, freq)?;
    let diff = f.sub(&v)?;
    let u = divide(&diff, &divs, |c, d| I * c / d).with_parity(Parity::Odd);
    Ok((u, v.with_parity(Parity::Even)))
}

/// Both flow equations plus residuals and the smallest divisor met.
pub fn solve_flow(f: &FourierField, g: &FourierField, freq: &Frequency) -> Result<HomologicalSolution> {
    let (f, g) = common_shape(f, g)?;
    let v0 = solve_v(&g, freq)?;
    let (u, v) = solve_u(&f, &v0, freq)?;
    let divs = divisors(&f, freq)?;
    // i D v = -g and i D u = v - f on nonzero modes
    let residual_v = residual(&v, &g.scale(-1.0), &divs, |c, d| I * d * c);
    let vf = v.sub(&f)?;
    let residual_u = residual(&u, &vf, &divs, |c, d| I * d * c);
    Ok(HomologicalSolution {
        u,
        v,
        min_divisor: min_divisor(&divs),
        residual_u,
        residual_v,
    })
}

/// Solves `v(x + omega) - v(x) = -g(x)` and `u(x + omega) - u(x) = v(x) - f(x)`
/// with `v(0) := f(0)`. The forcing `g` must have zero mean; no parity is imposed.
pub fn solve_map(f: &FourierField, g: &FourierField, freq: &Frequency) -> Result<HomologicalSolution> {
    if freq.kind != FrequencyKind::Map {
        return Err(Error::Parameter("solve_map needs a rotation certificate".into()));
    }
    let (f, g) = common_shape(f, g)?;
    check_zero_mean(&g)?;
    let divs = divisors(&f, freq)?;
    let v = with_mean_of(&divide(&g, &divs, |c, d| -c / d), &f).with_parity(Parity::None);
    let vf = v.sub(&f)?;
    let u = divide(&vf, &divs, |c, d| c / d).with_parity(Parity::None);
    let residual_v = residual(&v, &g.scale(-1.0), &divs, |c, d| d * c);
    let residual_u = residual(&u, &vf, &divs, |c, d| d * c);
    Ok(HomologicalSolution {
        u,
        v,
        min_divisor: min_divisor(&divs),
        residual_u,
        residual_v,
    })
}

fn check_flow(freq: &Frequency) -> Result<()> {
    if freq.kind != FrequencyKind::Flow {
        return Err(Error::Parameter("flow solver needs a flow certificate".into()));
    }
    Ok(())
}

fn common_shape(a: &FourierField, b: &FourierField) -> Result<(FourierField, FourierField)> {
    if a.d() != b.d() || a.m() != b.m() || a.time() != b.time() {
        return Err(Error::Shape("f and g must share d, m and time dependence".into()));
    }
    let n = a.cutoff().max(b.cutoff());
    let q = a.q_y().max(b.q_y());
    let a2 = a.with_cutoff(n).with_q_y(q);
    let b2 = b.with_cutoff(n).with_q_y(q);
    Ok((a2, b2))
}

/// Copy of `v` whose zero mode equals that of `f`, per monomial.
fn with_mean_of(v: &FourierField, f: &FourierField) -> FourierField {
    let mut out = v.clone();
    let zero = f.zero_mode();
    let (nm, m) = (f.layout().n_modes(), f.m());
    for p in 0..f.layout().n_monomials() {
        let o = (p * nm + zero) * m;
        out.coeffs_mut()[o..o + m].copy_from_slice(&f.coeffs()[o..o + m]);
    }
    out
}

/// `F(x + omega)` for a time-independent field.
pub fn translate(field: &FourierField, omega: &[f64]) -> FourierField {
    let mut out = field.clone();
    let lay = field.layout();
    let (nm, m) = (lay.n_modes(), field.m());
    let phases: Vec<Complex64> = lay
        .modes
        .iter()
        .map(|idx| {
            let a: f64 = idx.k.iter().zip(omega).map(|(&k, &w)| k as f64 * w).sum();
            Complex64::new(a.cos(), a.sin())
        })
        .collect();
    let coeffs = out.coeffs_mut();
    for p in 0..lay.n_monomials() {
        for (mode, ph) in phases.iter().enumerate() {
            let o = (p * nm + mode) * m;
            coeffs[o..o + m].iter_mut().for_each(|c| *c *= ph);
        }
    }
    out
}

/// Summary written by the `homsolve` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub min_divisor: f64,
    pub residual_u: f64,
    pub residual_v: f64,
    pub parity_defect_u: f64,
    pub parity_defect_v: f64,
}

impl HomologicalSolution {
    pub fn report(&self) -> ResidualReport {
        ResidualReport {
            min_divisor: self.min_divisor,
            residual_u: self.residual_u,
            residual_v: self.residual_v,
            parity_defect_u: self.u.parity_defect(Parity::Odd),
            parity_defect_v: self.v.parity_defect(Parity::Even),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::{certify, certify_rotation};
    use crate::fourier::{FieldShape, TorusIndex};

    fn golden() -> Frequency {
        certify(&[(5f64.sqrt() - 1.0) / 2.0], 1.01, 100).unwrap()
    }

    #[test]
    fn single_mode_v() {
        let freq = golden();
        let w = freq.omega[0];
        let eps = 1e-3;
        let mut g = FourierField::zeros(FieldShape::new(1, 1, 2, 0, 0.0, true));
        g.add_real_mode(0, &TorusIndex::new(vec![1], 1), &[0], 0.0, eps).unwrap();
        let v = solve_v(&g, &freq).unwrap();
        for &(x, t) in &[(0.1f64, 0.2f64), (1.3, -0.4), (2.0, 3.0)] {
            let expect = eps * (x + t).cos() / (w + 1.0);
            assert!((v.evaluate(&[x], &[0.0], t).unwrap()[0] - expect).abs() < 1e-16);
        }
    }

    #[test]
    fn single_mode_u() {
        let freq = golden();
        let w = freq.omega[0];
        let mut f = FourierField::zeros(FieldShape::new(1, 1, 2, 0, 0.0, true));
        f.add_real_mode(0, &TorusIndex::new(vec![1], 1), &[0], 1.0, 0.0).unwrap();
        let v = FourierField::zeros(f.shape());
        let (u, _) = solve_u(&f, &v, &freq).unwrap();
        for &(x, t) in &[(0.1f64, 0.2f64), (1.3, -0.4)] {
            let expect = -(x + t).sin() / (w + 1.0);
            assert!((u.evaluate(&[x], &[0.0], t).unwrap()[0] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn nonzero_mean_is_a_structure_error() {
        let mut g = FourierField::zeros(FieldShape::new(1, 1, 2, 0, 0.0, true));
        g.add_real_mode(0, &TorusIndex::new(vec![0], 0), &[0], 1.0, 0.0).unwrap();
        assert!(matches!(solve_v(&g, &golden()), Err(Error::Structure(_))));
    }

    #[test]
    fn tiny_divisor_is_rejected() {
        // omega close to 1/3 has |3 omega - 1| far below the certified floor
        let good = certify(&[0.3333], 1.01, 4).unwrap();
        let mut freq = good.clone();
        freq.omega = vec![1.0 / 3.0 + 1e-9];
        let mut g = FourierField::zeros(FieldShape::new(1, 1, 4, 0, 0.0, true));
        g.add_real_mode(0, &TorusIndex::new(vec![3], -1), &[0], 0.0, 1.0).unwrap();
        assert!(matches!(solve_v(&g, &freq), Err(Error::SmallDivisor { .. })));
    }

    #[test]
    fn map_single_mode_residual() {
        let omega = 2.0 * std::f64::consts::PI * (5f64.sqrt() - 1.0) / 2.0;
        let freq = certify_rotation(&[omega], 1.01, 100).unwrap();
        let mut g = FourierField::zeros(FieldShape::new(1, 1, 3, 0, 0.0, false));
        g.add_real_mode(0, &TorusIndex::new(vec![1], 0), &[0], 0.0, 1.0).unwrap();
        let f = FourierField::zeros(g.shape());
        let sol = solve_map(&f, &g, &freq).unwrap();
        for &x in &[0.0f64, 0.7, 2.5] {
            let lhs = sol.v.evaluate(&[x + omega], &[0.0], 0.0).unwrap()[0] - sol.v.evaluate(&[x], &[0.0], 0.0).unwrap()[0];
            assert!((lhs + x.sin()).abs() < 1e-14);
        }
        assert!(sol.residual_v < 1e-15);
    }
}
