use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::action_angle::TransformedSystem;

/// Growth exponents up to this are read as bounded.
pub const BOUNDED_SLOPE: f64 = 0.1;

/// Sampled membership test for the class `P_{q,p}(γ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PClassReport {
    pub q: usize,
    pub p_t: usize,
    pub gamma: f64,
    pub rho: Vec<f64>,
    /// `sup_{θ,t} Σ_{k+ℓ<=q} ρ^{ℓ-γ} |∂_θ^k ∂_ρ^ℓ ∂_t^p y|` at each `ρ`.
    pub weighted_sup: Vec<f64>,
    /// Fitted exponent of `weighted_sup` against `ρ` over the upper half of the samples.
    pub growth_exponent: f64,
    /// Smallest `γ` the samples admit: `gamma + growth_exponent`.
    pub fitted_gamma: f64,
    pub member: bool,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Central difference stencil of order `m`: offsets in units of `h` and weights.
fn stencil(m: usize) -> Vec<(f64, f64)> {
    (0..=m)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            (m as f64 / 2.0 - j as f64, sign * binomial(m, j))
        })
        .collect()
}

/// `∂_θ^k ∂_ρ^ℓ ∂_t^p y` by tensor central differences.
fn mixed_derivative<F: Fn(f64, f64, f64) -> f64>(y: &F, theta: f64, rho: f64, t: f64, k: usize, l: usize, p: usize) -> f64 {
    let (ht, hr, hs) = (0.02, 0.01 * rho, 0.01);
    let mut acc = 0.0;
    for (a, wa) in stencil(k) {
        for (b, wb) in stencil(l) {
            for (c, wc) in stencil(p) {
                acc += wa * wb * wc * y(theta + a * ht, rho + b * hr, t + c * hs);
            }
        }
    }
    acc / (ht.powi(k as i32) * hr.powi(l as i32) * hs.powi(p as i32))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NEG_INFINITY;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `sup_{θ,t} Σ_{k+ℓ<=q} ρ^{ℓ-γ} |∂_θ^k ∂_ρ^ℓ ∂_t^p y|` on a `16 × 8` angle grid.
pub fn weighted_sup<F>(y: &F, q: usize, p_t: usize, gamma: f64, rho: f64) -> f64
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    let mut best: f64 = 0.0;
    for i in 0..16 {
        let theta = TAU * (i as f64 + 0.31) / 16.0;
        for j in 0..8 {
            let t = (j as f64 + 0.17) / 8.0;
            let mut sum = 0.0;
            for k in 0..=q {
                for l in 0..=q - k {
                    sum += rho.powf(l as f64 - gamma) * mixed_derivative(y, theta, rho, t, k, l, p_t).abs();
                }
            }
            best = best.max(sum);
        }
    }
    best
}

/// Samples the weighted derivative sums at `rho_samples` and fits their growth.
/// Each term carries the weight `ρ^{ℓ-γ}`, so `ρ^γ` itself is a member.
pub fn p_class_estimate<F>(y: F, q: usize, p_t: usize, gamma: f64, rho_samples: &[f64]) -> PClassReport
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    let sups: Vec<f64> = rho_samples
        .par_iter()
        .map(|&r| weighted_sup(&y, q, p_t, gamma, r))
        .collect();
    let lo = (rho_samples.len() / 2).min(rho_samples.len().saturating_sub(2));
    let growth_exponent = slope(&rho_samples[lo..], &sups[lo..]);
    PClassReport {
        q,
        p_t,
        gamma,
        rho: rho_samples.to_vec(),
        weighted_sup: sups,
        growth_exponent,
        fitted_gamma: gamma + growth_exponent,
        member: growth_exponent <= BOUNDED_SLOPE,
    }
}

/// Smallest `ρ_i = ρ_0 2^i` from which the local growth slopes of
/// `sup_{θ,t} |y|` stay within `0.05` of each other (factor-2 plateau test).
pub fn plateau_rho<F>(y: F, rho0: f64, doublings: usize) -> f64
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    let rhos: Vec<f64> = (0..=doublings).map(|i| rho0 * 2f64.powi(i as i32)).collect();
    let sups: Vec<f64> = rhos.par_iter().map(|&r| weighted_sup(&y, 0, 0, 0.0, r)).collect();
    if sups.iter().any(|v| !(*v > 0.0)) {
        return rho0;
    }
    let slopes: Vec<f64> = sups.windows(2).map(|w| (w[1] / w[0]).log2()).collect();
    for i in 0..slopes.len().saturating_sub(1) {
        if slopes[i..].windows(2).all(|w| (w[1] - w[0]).abs() <= 0.05) {
            return rhos[i];
        }
    }
    rhos[rhos.len().saturating_sub(2)]
}

/// Default `ρ_*` for a transformed system: the plateau of `F1` over `ρ ∈ [1, 2^12]`.
pub fn default_rho_star(sys: &TransformedSystem) -> f64 {
    plateau_rho(|th, r, t| sys.f1_unchecked(th, r, t), 1.0, 12)
}
