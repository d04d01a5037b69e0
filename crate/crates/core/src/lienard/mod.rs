//! The reversible Liénard equation `x'' + x^{2n+1} + g(x, t) + f(x, t) x' = 0`:
//! action-angle reduction, period map and a boundedness experiment.

mod action_angle;
mod orbit;
mod pclass;
mod poincare;
mod problem;
mod stability;

pub use action_angle::TransformedSystem;
pub use orbit::{compute_reference_orbit, OrbitProperties, ReferenceOrbit, ORBIT_SAMPLES};
pub use pclass::{default_rho_star, p_class_estimate, plateau_rho, weighted_sup, PClassReport, BOUNDED_SLOPE};
pub use poincare::{poincare_map, reversibility_residual, reversibility_sup, section_orbit, PoincareSettings, SectionImage};
pub use problem::{Forcing, LienardProblem, PlaneSystem, StructureReport, Term, PARITY_TOL};
pub use stability::{lagrange_stability_experiment, OrbitRecord, StabilityReport, StabilitySettings};
