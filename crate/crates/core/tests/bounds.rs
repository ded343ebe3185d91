//! The uniform a-priori bound over a randomized family of runs.

use std::f64::consts::FRAC_PI_2;

use chflow::analysis::apriori_bound_check;
use chflow::{make_grid, solve_fixed_point, Field, PicardConfig, PotentialModel, StepConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Longer horizons never loosen the bound's worst margin without
    /// transport, and the bound itself grows with the horizon otherwise;
    /// the margin never changes sign.
    #[test]
    fn margins_shrink_with_horizon(amplitude in -0.8f64..0.8, mode in 1usize..4, beta in prop_oneof![Just(0.0), 0.05f64..0.3]) {
        let g = make_grid(1.0, 41).unwrap();
        let m = PotentialModel::quartic_well();
        let k = (2 * mode - 1) as f64 * FRAC_PI_2;
        let u0 = Field::from_fn(&g, |x| amplitude * (k * x).sin()).unwrap();
        let tau = 2e-3;
        let mut previous: Option<(f64, f64)> = None;
        for steps in [10usize, 20, 40] {
            let sol = solve_fixed_point(&g, &u0, tau * steps as f64, steps, beta, &m, &StepConfig::default(), &PicardConfig::default())
                .unwrap();
            let rep = apriori_bound_check(&g, &sol.trajectory, &m);
            prop_assert!(rep.passed(), "margin {}", rep.worst.1);
            if let Some((bound, margin)) = previous {
                prop_assert!(rep.bound >= bound);
                if beta == 0.0 {
                    prop_assert!(rep.worst.1 <= margin);
                }
            }
            previous = Some((rep.bound, rep.worst.1));
        }
    }
}
