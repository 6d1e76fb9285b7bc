//! Randomized invariants of the closed-form maps and the jump rule.

use proptest::prelude::*;

use ifire::map::FiringMap;
use ifire::model::{
    CouplingSpec, EnsembleModel, FreeFlow, JumpRule, State, ThresholdSpec,
};

proptest! {
    /// The leaky map is strictly decreasing on (0, 1 - eps), bounded by
    /// eta, and its bisected fixed point is actually fixed.
    #[test]
    fn leaky_map_monotone_and_fixed(
        kappa in 1.05f64..5.0,
        eps in 0.01f64..0.5,
        u in 0.0f64..1.0,
        w in 0.0f64..1.0,
    ) {
        let map = FiringMap::closed_leaky(kappa, eps).unwrap();
        let top = 1.0 - eps;
        let (a, b) = (1e-6 + u * (top - 2e-6), 1e-6 + w * (top - 2e-6));
        let (lo, hi) = (a.min(b), a.max(b));
        if hi - lo > 1e-9 {
            prop_assert!(map.eval(lo) > map.eval(hi));
        }
        prop_assert!((0.0..=map.eta + 1e-12).contains(&map.eval(lo)));
        if map.eta > top {
            let v = map.fixed_point().unwrap();
            prop_assert!((map.eval(v) - v).abs() < 1e-9);
        }
    }

    /// One firing round delivers exactly one increment to each bystander,
    /// no matter how many oscillators initiate simultaneously.
    #[test]
    fn simultaneous_firings_act_as_one_pulse(
        eps in 0.01f64..0.3,
        firers in 1usize..4,
        x in 0.0f64..0.6,
    ) {
        let n = 4;
        let model = EnsembleModel::new(
            n,
            FreeFlow::leaky(2.0, 1.0).unwrap(),
            CouplingSpec::none(n),
            ThresholdSpec::zero(n),
            JumpRule::standard(eps, n),
        ).unwrap();

        let mut coords = vec![1.0; firers];
        coords.resize(n, x);
        let state = State::new(0.0, coords);
        let set: Vec<usize> = (0..firers).collect();
        let out = model.apply_firing(&state, &set).unwrap();

        for i in 0..firers {
            prop_assert_eq!(out.state.x[i], 0.0);
        }
        for i in firers..n {
            prop_assert!((out.state.x[i] - (x + eps)).abs() < 1e-15);
        }
    }
}
