//! Trigonometric polynomials on the angle × time torus with polynomial
//! dependence on the action.

mod field;
mod grid;
mod json;
mod layout;
mod norm;

pub use field::{FieldShape, FourierField, Jet, Parity};
pub use grid::{action_nodes, chebyshev_nodes, fit_field, AngleGrid};
pub use json::{CoeffEntry, FieldDoc};
pub use layout::{layout, Layout, TorusIndex};
pub use norm::{action_samples, SupNormReport};
