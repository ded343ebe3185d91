//! Property tests for the discrete V / V' calculus.

use chflow::hilbert::{duality_pairing, l2_norm, riesz_lift, v_norm, vprime_norm};
use chflow::{make_grid, Field};
use proptest::prelude::*;

fn grid_and_values() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (0.25f64..4.0, 4usize..160)
        .prop_flat_map(|(l, n)| (Just(l), prop::collection::vec(-5.0f64..5.0, n)))
}

proptest! {
    #[test]
    fn dual_norm_bounded_by_l2((l, f) in grid_and_values()) {
        let g = make_grid(l, f.len()).unwrap();
        let dual = vprime_norm(&g, &f).unwrap();
        prop_assert!(dual <= l * l2_norm(&g, &f) * (1.0 + 1e-12));
    }

    #[test]
    fn poincare_inequality((l, mut v) in grid_and_values()) {
        v[0] = 0.0;
        let g = make_grid(l, v.len()).unwrap();
        let v = Field::new(&g, v).unwrap();
        prop_assert!(l2_norm(&g, &v) <= l * v_norm(&g, &v) * (1.0 + 1e-12));
    }

    #[test]
    fn lift_round_trip((l, f) in grid_and_values()) {
        let g = make_grid(l, f.len()).unwrap();
        let rep = riesz_lift(&g, &f).unwrap();
        prop_assert!(rep.round_trip_error(&g, &f) <= 1e-10);
    }

    #[test]
    fn pairing_is_bounded((l, f) in grid_and_values(), seed in -1.0f64..1.0) {
        let g = make_grid(l, f.len()).unwrap();
        let v = Field::from_fn(&g, |x| (seed * 7.0 * x).sin() + x * x).unwrap();
        let pairing = duality_pairing(&g, &f, &v).unwrap();
        let bound = vprime_norm(&g, &f).unwrap() * v_norm(&g, &v);
        prop_assert!(pairing.abs() <= bound * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn lift_is_linear((l, f) in grid_and_values(), a in -3.0f64..3.0) {
        let g = make_grid(l, f.len()).unwrap();
        let scaled: Vec<f64> = f.iter().map(|v| a * v).collect();
        let z1 = riesz_lift(&g, &scaled).unwrap();
        let z2 = riesz_lift(&g, &f).unwrap();
        for (p, q) in z1.lift().iter().zip(z2.lift().iter()) {
            prop_assert!((p - a * q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }
}
