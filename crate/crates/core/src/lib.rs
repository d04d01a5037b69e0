//! Newton–KAM construction of invariant tori for reversible twist maps and
//! reversible periodically forced vector fields, with a Liénard oscillator
//! application.

pub mod config;
pub mod diophantine;
pub mod error;
pub mod fourier;
pub mod homological;
pub mod integrate;
pub mod io;
pub mod kam;
pub mod lienard;
pub mod smoothing;
pub mod synthetic;

pub use error::{Error, Result};
