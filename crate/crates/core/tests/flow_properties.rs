use girsanov_bsde::coefficients::CoefficientSet;
use girsanov_bsde::flow::{flow_horizon, one_step_bound, phi_flow, FlowState};
use girsanov_bsde::pde::SpatialGrid;
use girsanov_bsde::tree::PathTree;
use proptest::prelude::*;

const SETS: [&str; 3] = ["tanh_clamped(2)", "tanh_clamped(1)", "burgers"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn one_step_bound_holds(which in 0usize..3, seed in any::<u64>(), steps in 2usize..=7, frac in 0.05f64..1.0) {
        let set = CoefficientSet::from_catalog(SETS[which]).unwrap();
        let horizon = 0.1;
        let tree = PathTree::new(steps, horizon).unwrap();
        let grid = SpatialGrid::new(-1.5, 1.5, 12).unwrap();
        // the chain of inequalities is exact while C1 T |xi| <= 1
        let scale = frac / (set.c1() * horizon);
        let s = FlowState::random(tree, grid, 1, scale, seed);
        prop_assume!(set.c1() * horizon * s.h_norm() <= 1.0);
        let out = phi_flow(&s, &set).unwrap().h_norm();
        let bound = one_step_bound(set.c0(), set.c1(), horizon, s.h_norm());
        prop_assert!(out <= bound * (1.0 + 1e-12), "{out} > {bound}");
    }

    #[test]
    fn ball_is_invariant(seed in any::<u64>(), frac in 0.05f64..1.0, horizon in 0.01f64..0.1) {
        let set = CoefficientSet::from_catalog("tanh_clamped(2)").unwrap();
        let (t_max, k) = flow_horizon(set.c0(), set.c1(), 1).unwrap();
        prop_assert!(horizon <= t_max);
        let tree = PathTree::new(5, horizon).unwrap();
        let s = FlowState::random(tree, SpatialGrid::new(-1.0, 1.0, 8).unwrap(), 1, frac * k, seed);
        prop_assume!(s.h_norm() <= k);
        prop_assert!(phi_flow(&s, &set).unwrap().h_norm() <= k);
    }
}
