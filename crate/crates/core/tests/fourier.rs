use proptest::prelude::*;

use revkam::fourier::{action_samples, FieldShape, FourierField, Parity, TorusIndex};
use revkam::synthetic::random_field;

fn field(d: usize, time: bool, parity: Parity, seed: u64) -> FourierField {
    random_field(FieldShape::new(d, d, 4, 2, 0.5, time), parity, 1.0, 0.3, seed).unwrap()
}

fn parity_strategy() -> impl Strategy<Value = Parity> {
    prop_oneof![Just(Parity::Even), Just(Parity::Odd), Just(Parity::None)]
}

fn assert_real(f: &FourierField) {
    let scale = f.max_abs_coeff().max(1.0);
    assert!(f.reality_defect() <= 1e-14 * scale, "reality defect {}", f.reality_defect());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn algebra_preserves_reality(seed in 0u64..10_000, d in 1usize..=2, time: bool, pa in parity_strategy(), pb in parity_strategy()) {
        let a = field(d, time, pa, seed);
        let b = field(d, time, pb, seed + 1);
        assert_real(&a.add(&b).unwrap());
        assert_real(&a.sub(&b).unwrap());
        assert_real(&a.scale(-0.37));
        assert_real(&a.multiply_truncated(&b).unwrap());
        assert_real(&a.differentiate_x(0).unwrap());
        assert_real(&a.differentiate_y(d - 1).unwrap());
        if time {
            assert_real(&a.differentiate_t());
        }
    }

    #[test]
    fn parity_tags_are_sound(seed in 0u64..10_000, d in 1usize..=2, pa in parity_strategy(), pb in parity_strategy()) {
        let a = field(d, true, pa, seed);
        let b = field(d, true, pb, seed + 7);
        let ys = action_samples(d, 0.5);
        for f in [a.multiply_truncated(&b).unwrap(), a.differentiate_x(0).unwrap(), a.differentiate_t(), a.add(&b).unwrap()] {
            if f.parity() != Parity::None {
                prop_assert!(f.parity_grid_residual(f.parity(), 9, &ys) <= 1e-12);
            }
        }
    }

    #[test]
    fn majorant_bounds_grid_sup(seed in 0u64..10_000, d in 1usize..=2, time: bool) {
        let f = field(d, time, Parity::None, seed);
        let rep = f.sup_norm(0.0, 0.5, 16).unwrap();
        prop_assert!(rep.majorant >= rep.value * (1.0 - 1e-12));
    }

    #[test]
    fn grid_sup_grows_under_refinement(seed in 0u64..10_000, time: bool) {
        let f = field(1, time, Parity::None, seed);
        let mut last = 0.0;
        for n in [8, 16, 32, 64] {
            let v = f.sup_norm(0.0, 0.5, n).unwrap().value;
            prop_assert!(v >= last * (1.0 - 1e-14));
            last = v;
        }
    }

    #[test]
    fn evaluation_of_real_fields_is_real(seed in 0u64..10_000, x in 0.0..6.3f64, y in -0.5..0.5f64, t in 0.0..6.3f64) {
        let f = field(1, true, Parity::None, seed);
        for c in f.evaluate_complex(&[x], &[y], t).unwrap() {
            prop_assert!(c.im.abs() <= 1e-14 * c.re.abs().max(1.0));
        }
    }
}

#[test]
fn grid_fit_recovers_coefficients() {
    let f = field(2, true, Parity::Odd, 3);
    let n = 2 * f.cutoff() + 1;
    let refit = revkam::fourier::fit_field(f.shape(), n, 0.3, |x, y, t, out: &mut [f64]| {
        out.copy_from_slice(&f.evaluate(x, y, t)?);
        Ok(())
    })
    .unwrap();
    let err = refit.sub(&f).unwrap().max_abs_coeff();
    assert!(err <= 1e-12, "refit error {err}");
}

#[test]
fn single_cosine_evaluates_to_one() {
    let mut f = FourierField::zeros(FieldShape::new(1, 1, 3, 0, 0.0, false));
    f.add_real_mode(0, &TorusIndex::new(vec![1], 0), &[0], 1.0, 0.0).unwrap();
    assert!((f.evaluate(&[0.0], &[0.0], 0.0).unwrap()[0] - 1.0).abs() < 1e-15);
}
