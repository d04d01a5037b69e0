//! Seeded random fields for tests and demonstrations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fourier::{FieldShape, FourierField, Parity};

/// Random real field with coefficients uniform in `[-amp, amp] e^{-decay (|k| + |l|)}`,
/// projected onto `parity`. The same seed gives the same field on every platform.
pub fn random_field(shape: FieldShape, parity: Parity, amp: f64, decay: f64, seed: u64) -> Result<FourierField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = FourierField::zeros(shape);
    let layout = f.layout_arc().clone();
    for (i, idx) in layout.modes.iter().enumerate() {
        // visit each conjugate pair once
        if layout.mode_index(&idx.neg()).is_some_and(|j| j < i) {
            continue;
        }
        let w = amp * (-decay * idx.order() as f64).exp();
        for alpha in &layout.monomials {
            for c in 0..f.m() {
                let a = w * rng.gen_range(-1.0..=1.0);
                let b = if idx.is_zero() { 0.0 } else { w * rng.gen_range(-1.0..=1.0) };
                f.add_real_mode(c, idx, alpha, a, b)?;
            }
        }
    }
    Ok(f.project_parity(parity))
}
