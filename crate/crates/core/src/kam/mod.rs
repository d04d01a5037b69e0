//! Newton iteration for invariant tori of reversible flows and maps.

mod embedding;
mod flow;
mod map;
mod report;
mod schedule;
mod step;
mod transform;
mod verify;

use serde::{Deserialize, Serialize};

pub use embedding::TorusEmbedding;
pub use flow::run_kam_flow;
pub use map::{reversibility_defect, run_kam_map, KickDriftKick, PerturbedTwistMap, TwistMap};
pub use report::{contraction_order, ConvergenceReport, RunStatus, StepRecord};
pub use schedule::{make_schedule, Schedule};
pub use step::{newton_step, StepDiagnostics, StepOutput, PARITY_REJECT};
pub use transform::{NearIdentityTransform, TransformChain, INVERSION_MAX_ITER, INVERSION_TOL};
pub use verify::{
    integrate_to_tolerance, rotation_number, sample_angles, verify_flow_invariance, verify_map_invariance,
    InvarianceReport, PerturbedFlow,
};

/// Numerical knobs of a run that are not part of the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KamSettings {
    /// Stop once the carried perturbation majorant falls below this.
    pub tol: f64,
    /// Least action degree of the fitted perturbations.
    pub q_y: usize,
    /// Odd grid size per axis for the returned embedding.
    pub embedding_n: usize,
    pub verify_samples: usize,
    /// Integrator agreement tolerance of the flow check.
    pub verify_tol: f64,
    pub verify_t0: f64,
    pub verify_dt: f64,
    /// Run the invariance check after every step (costly for flows).
    pub per_step_verify: bool,
    pub rotation_iterations: usize,
}

impl Default for KamSettings {
    fn default() -> Self {
        Self {
            tol: 1e-40,
            q_y: 2,
            embedding_n: 31,
            verify_samples: 16,
            verify_tol: 1e-12,
            verify_t0: 0.3,
            verify_dt: 1.0,
            per_step_verify: true,
            rotation_iterations: 10_000,
        }
    }
}

/// Output of a Newton run.
#[derive(Clone, Debug)]
pub struct KamRun {
    pub embedding: TorusEmbedding,
    pub report: ConvergenceReport,
    pub chain: TransformChain,
}
