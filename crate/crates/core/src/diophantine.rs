//! Diophantine certificates and Rüssmann sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the frequency enters the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyKind {
    /// Divisors `<k, omega> + l`.
    Flow,
    /// Divisors `e^{i <k, omega>} - 1`; the certificate is for `omega / 2π`.
    Map,
}

/// Certified frequency vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub omega: Vec<f64>,
    pub kind: FrequencyKind,
    /// `min |<k, w> + j| |k|^tau` over the certification range, with
    /// `w = omega` for flows and `w = omega / 2π` for maps.
    pub kappa: f64,
    pub tau: f64,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub argmin_k: Vec<i64>,
    pub argmin_j: i64,
}

/// Relative size below which a divisor counts as an exact resonance.
const RESONANCE_EPS: f64 = 4.0 * f64::EPSILON;

/// Default `tau = d + mu / 100` with `mu = 0.01`.
pub fn default_tau(d: usize) -> f64 {
    d as f64 + 0.01 / 100.0
}

/// Nonzero integer vectors with `|k|_1 = n` whose first nonzero entry is positive.
fn half_shell(d: usize, n: usize) -> Vec<Vec<i64>> {
    fn rec(d: usize, left: i64, prefix: &mut Vec<i64>, leading: bool, out: &mut Vec<Vec<i64>>) {
        if prefix.len() == d {
            if left == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        if prefix.len() == d - 1 {
            // the last entry is forced up to sign
            let vals: Vec<i64> = if left == 0 {
                vec![0]
            } else if leading {
                vec![left]
            } else {
                vec![-left, left]
            };
            for v in vals {
                prefix.push(v);
                rec(d, 0, prefix, false, out);
                prefix.pop();
            }
            return;
        }
        let lo = if leading { 0 } else { -left };
        for v in lo..=left {
            prefix.push(v);
            rec(d, left - v.abs(), prefix, leading && v == 0, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, n as i64, &mut Vec::with_capacity(d), true, &mut out);
    out
}

/// Every nonzero integer vector with `|k|_1 = n`.
fn full_shell(d: usize, n: usize) -> Vec<Vec<i64>> {
    let half = half_shell(d, n);
    let mut out = Vec::with_capacity(2 * half.len());
    for k in half {
        out.push(k.iter().map(|v| -v).collect());
        out.push(k);
    }
    out
}

fn dot(k: &[i64], w: &[f64]) -> f64 {
    k.iter().zip(w).map(|(&a, &b)| a as f64 * b).sum()
}

struct ShellResult {
    best: f64,
    k: Vec<i64>,
    j: i64,
    resonance: Option<(Vec<i64>, i64)>,
}

fn scan(w: &[f64], tau: f64, k_max: usize) -> Result<(f64, Vec<i64>, i64)> {
    let shells: Vec<ShellResult> = (1..=k_max)
        .into_par_iter()
        .map(|n| {
            let weight = (n as f64).powf(tau);
            let mut res = ShellResult {
                best: f64::INFINITY,
                k: Vec::new(),
                j: 0,
                resonance: None,
            };
            for k in half_shell(w.len(), n) {
                let s = dot(&k, w);
                let j = -s.round();
                let dist = (s + j).abs();
                if dist <= RESONANCE_EPS * s.abs().max(1.0) {
                    res.resonance = Some((k, j as i64));
                    break;
                }
                if dist * weight < res.best {
                    res.best = dist * weight;
                    res.k = k;
                    res.j = j as i64;
                }
            }
            res
        })
        .collect();
    let mut best = (f64::INFINITY, Vec::new(), 0);
    for s in shells {
        if let Some((k, j)) = s.resonance {
            return Err(Error::Resonance { k, j });
        }
        if s.best < best.0 {
            best = (s.best, s.k, s.j);
        }
    }
    Ok(best)
}

fn check_args(omega: &[f64], tau: f64, k_max: usize) -> Result<()> {
    if omega.is_empty() {
        return Err(Error::Parameter("empty frequency vector".into()));
    }
    if omega.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("frequency components must be finite".into()));
    }
    if k_max < 1 {
        return Err(Error::Parameter("K_max must be at least 1".into()));
    }
    if !(tau > omega.len() as f64) {
        return Err(Error::Parameter(format!("tau = {tau} must exceed d = {}", omega.len())));
    }
    Ok(())
}

fn build(omega: &[f64], w: &[f64], kind: FrequencyKind, tau: f64, k_max: usize) -> Result<Frequency> {
    check_args(omega, tau, k_max)?;
    let (kappa, argmin_k, argmin_j) = scan(w, tau, k_max)?;
    Ok(Frequency {
        omega: omega.to_vec(),
        kind,
        kappa: kappa.min(1.0 - 1e-12),
        tau,
        k_max,
        argmin_k,
        argmin_j,
    })
}

/// Certifies `|<k, omega> + j| >= kappa / |k|^tau` for `0 < |k| <= K_max`.
pub fn certify(omega: &[f64], tau: f64, k_max: usize) -> Result<Frequency> {
    build(omega, omega, FrequencyKind::Flow, tau, k_max)
}

/// Certificate for a rotation `x -> x + omega` on `R^d / 2π Z^d`; the scan is
/// over `omega / 2π`.
pub fn certify_rotation(omega: &[f64], tau: f64, k_max: usize) -> Result<Frequency> {
    let w: Vec<f64> = omega.iter().map(|v| v / (2.0 * std::f64::consts::PI)).collect();
    build(omega, &w, FrequencyKind::Map, tau, k_max)
}

impl Frequency {
    pub fn d(&self) -> usize {
        self.omega.len()
    }

    /// Smallest divisor magnitude the homological solvers accept for modes up
    /// to order `k`: half of the certified lower bound. For maps,
    /// `|e^{iθ} - 1| >= 4 dist(θ / 2π, Z)` gives the extra factor 4.
    pub fn divisor_floor(&self, k: usize) -> f64 {
        let k = k.max(1) as f64;
        let bound = self.kappa / k.powf(self.tau);
        match self.kind {
            FrequencyKind::Flow => 0.5 * bound,
            FrequencyKind::Map => 0.5 * 4.0 * bound,
        }
    }
}

/// `sum |<k, omega> + j|^{-2}` over `0 < |k| <= n` and every `j` with
/// `|<k, omega> + j| <= 1`.
pub fn russmann_sum(freq: &Frequency, n: usize) -> Result<f64> {
    if n > freq.k_max {
        return Err(Error::Parameter(format!("n = {n} exceeds the certified K_max = {}", freq.k_max)));
    }
    let w: Vec<f64> = match freq.kind {
        FrequencyKind::Flow => freq.omega.clone(),
        FrequencyKind::Map => freq.omega.iter().map(|v| v / (2.0 * std::f64::consts::PI)).collect(),
    };
    let partial: Vec<f64> = (1..=n)
        .into_par_iter()
        .map(|shell| {
            let mut acc = 0.0;
            for k in full_shell(w.len(), shell) {
                let s = dot(&k, &w);
                let lo = (-s - 1.0).ceil() as i64;
                let hi = (-s + 1.0).floor() as i64;
                for j in lo..=hi {
                    let v = (s + j as f64).abs();
                    if v <= 1.0 && v > 0.0 {
                        acc += 1.0 / (v * v);
                    }
                }
            }
            acc
        })
        .collect();
    // summing shells in order keeps the result independent of thread count
    Ok(partial.iter().sum())
}

/// Built-in frequency choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyChoice {
    Golden,
    SqrtPrime,
    Custom(Vec<f64>),
}

/// First `d` primes.
fn primes(d: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(d);
    let mut c = 2u64;
    while out.len() < d {
        if out.iter().all(|p| !c.is_multiple_of(*p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Standard badly approximable vectors: the golden mean `(√5 - 1) / 2` for
/// `d = 1`, `√p_i mod 1` for distinct primes otherwise.
pub fn make_frequency(d: usize, choice: &FrequencyChoice) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::Parameter("d must be at least 1".into()));
    }
    match choice {
        FrequencyChoice::Golden if d == 1 => Ok(vec![(5f64.sqrt() - 1.0) / 2.0]),
        FrequencyChoice::Golden | FrequencyChoice::SqrtPrime => {
            Ok(primes(d).into_iter().map(|p| (p as f64).sqrt().fract()).collect())
        }
        FrequencyChoice::Custom(v) => {
            if v.len() != d {
                return Err(Error::Parameter(format!("custom frequency has {} components, d = {d}", v.len())));
            }
            Ok(v.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shells_have_expected_sizes() {
        // |k|_1 = n in Z^2 has 4n points, half of them in the half space
        for n in 1..6 {
            assert_eq!(half_shell(2, n).len(), 2 * n);
            assert_eq!(full_shell(2, n).len(), 4 * n);
        }
        assert_eq!(half_shell(1, 3), vec![vec![3]]);
        // 3-d octahedral shell: 4n^2 + 2 points
        assert_eq!(full_shell(3, 4).len(), 4 * 16 + 2);
    }

    #[test]
    fn rational_frequency_is_resonant() {
        match certify(&[0.5], 1.01, 10) {
            Err(Error::Resonance { k, j }) => {
                assert_eq!(k, vec![2]);
                assert_eq!(j, -1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn golden_and_sqrt_prime_values() {
        assert_eq!(make_frequency(1, &FrequencyChoice::Golden).unwrap(), vec![0.6180339887498949]);
        let w = make_frequency(2, &FrequencyChoice::SqrtPrime).unwrap();
        assert_eq!(w, vec![2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0]);
    }

    #[test]
    fn default_tau_value() {
        assert!((default_tau(1) - 1.0001).abs() < 1e-15);
    }
}
