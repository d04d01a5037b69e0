use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothing::Kernel;

/// Iteration constants: perturbation sizes `eps`, analyticity widths `s` and
/// action radii `r` for steps `0..=M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub d: usize,
    pub mu: f64,
    pub ell: f64,
    pub tau: f64,
    pub mu_tilde: f64,
    pub eps0: f64,
    #[serde(rename = "M")]
    pub m_steps: usize,
    pub eps: Vec<f64>,
    pub s: Vec<f64>,
    pub r: Vec<f64>,
}

/// Builds the schedule with `ell = 2d + 1 + mu` unless overridden.
pub fn make_schedule(d: usize, mu: f64, eps0: f64, m_steps: usize, ell: Option<f64>) -> Result<Schedule> {
    if d == 0 {
        return Err(Error::Parameter("d must be at least 1".into()));
    }
    if !(mu > 0.0 && mu <= 0.5) {
        return Err(Error::Parameter(format!("mu must lie in (0, 0.5], got {mu}")));
    }
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::Parameter(format!("eps0 must lie in (0, 1), got {eps0}")));
    }
    if m_steps < 1 {
        return Err(Error::Parameter("M must be at least 1".into()));
    }
    let df = d as f64;
    let ell = ell.unwrap_or(2.0 * df + 1.0 + mu);
    if !(ell > 0.0) {
        return Err(Error::Parameter(format!("ell must be positive, got {ell}")));
    }
    let tau = df + mu / 100.0;
    let mu_tilde = mu / (100.0 * (2.0 * tau + 1.0 + mu));
    let ln_eps0 = eps0.ln();
    let growth = (1.0 + mu_tilde).ln();
    let mut eps = Vec::with_capacity(m_steps + 1);
    let mut s = Vec::with_capacity(m_steps + 1);
    let mut r = Vec::with_capacity(m_steps + 1);
    for nu in 0..=m_steps {
        let ln_eps = ln_eps0 * (growth * nu as f64).exp();
        let ln_s = ln_eps / ell;
        eps.push(ln_eps.exp());
        s.push(ln_s.exp());
        r.push((ln_s * (df + 1.0 + mu / 10.0)).exp());
    }
    if s[0] > 0.5 {
        return Err(Error::Parameter(format!(
            "eps0 = {eps0} gives s_0 = {:.4} > 1/2; choose a smaller eps0",
            s[0]
        )));
    }
    Ok(Schedule {
        d,
        mu,
        ell,
        tau,
        mu_tilde,
        eps0,
        m_steps,
        eps,
        s,
        r,
    })
}

impl Schedule {
    /// Mode cutoff used at step `m`.
    pub fn cutoff(&self, m: usize, kernel: &Kernel) -> usize {
        kernel.cutoff(self.s[m.min(self.m_steps)])
    }

    pub fn radius(&self, m: usize) -> f64 {
        self.r[m.min(self.m_steps)]
    }
}
