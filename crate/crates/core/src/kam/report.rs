use serde::{Deserialize, Serialize};

use super::step::StepDiagnostics;
use super::verify::InvarianceReport;

/// One row of the convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub m: usize,
    pub sup_f: f64,
    pub sup_g: f64,
    pub min_divisor: f64,
    pub inversion_iters: usize,
    /// Invariance residual of the torus built from the chain after this step.
    pub invariance_residual: f64,
    pub diagnostics: StepDiagnostics,
    /// Map case: largest zero-mode coefficient of `g` removed before solving.
    pub dropped_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    /// The carried perturbation fell below the tolerance.
    Converged,
    /// The perturbation stopped decreasing at rounding level.
    RoundingFloor,
    /// All scheduled steps were taken.
    MaxSteps,
    /// A step failed; the embedding is the last good one.
    Failed { step: usize, reason: String },
}

/// Everything measured during a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub mode: String,
    pub rows: Vec<StepRecord>,
    pub status: RunStatus,
    pub warnings: Vec<String>,
    /// Sizes `sup_f + sup_g` entering each step plus the size left after the last.
    pub sizes: Vec<f64>,
    /// Least-squares slope of `ln size_{m+1}` against `ln size_m`.
    pub contraction_order: Option<f64>,
    pub final_invariance: InvarianceReport,
    pub rotation_number: Option<Vec<f64>>,
    /// `max |Y|` of the embedding over its grid.
    pub max_action: f64,
}

impl ConvergenceReport {
    pub fn is_monotone(&self) -> bool {
        self.sizes.windows(2).all(|w| w[1] < w[0])
    }
}

/// Fitted exponent `p` in `size_{m+1} ≈ C size_m^p`.
pub fn contraction_order(sizes: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sizes
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0 && w[0].is_finite() && w[1].is_finite())
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    match pts.len() {
        0 => None,
        1 => Some(pts[0].1 / pts[0].0),
        n => {
            let n = n as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            if sxx == 0.0 {
                None
            } else {
                Some(sxy / sxx)
            }
        }
    }
}
