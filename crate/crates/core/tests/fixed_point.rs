use girsanov_bsde::cameron_martin::{
    check_representation, contraction_factor, contraction_horizon, phi, picard_solve, PicardOptions,
};
use girsanov_bsde::coefficients::{CoefficientSet, InitialData};
use girsanov_bsde::instances::RandomInstance;
use girsanov_bsde::pde::fd::diffusion_limit;
use girsanov_bsde::pde::{padded_grid, solve_fd_frames};
use girsanov_bsde::tree::{PathTree, TerminalVariable};
use proptest::prelude::*;

const CATALOG: [&str; 4] = ["burgers", "tanh_clamped(1)", "two_component_mix", "constant(0.8)"];

fn bounded_terminal(seed: u64, tree: PathTree, dim: usize) -> TerminalVariable {
    let raw = RandomInstance::generate(seed, tree.steps(), tree.horizon(), dim).unwrap().terminal;
    TerminalVariable::new(tree, dim, raw.values().iter().map(|v| v.tanh()).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn map_is_lipschitz_with_the_proven_factor(
        which in 0usize..4, seed in 0u64..100_000, steps in 1usize..=10, horizon in 0.01f64..1.0, x in -2.0f64..2.0
    ) {
        let set = CoefficientSet::from_catalog(CATALOG[which]).unwrap();
        let tree = PathTree::new(steps, horizon).unwrap();
        // keep |f| h < 1 for the vector case
        prop_assume!(set.max_f_on_range() * tree.h() < 1.0);
        let a = bounded_terminal(seed, tree, set.dim());
        let b = bounded_terminal(seed ^ 0xabcdef, tree, set.dim());
        let d_in = a.l2_distance(&b).unwrap();
        let d_out = phi(&a, &set, x).unwrap().l2_distance(&phi(&b, &set, x).unwrap()).unwrap();
        let factor = contraction_factor(horizon, set.c_u0(), set.c_f());
        prop_assert!(d_out <= factor * d_in * (1.0 + 1e-12), "{d_out} > {factor} * {d_in}");
    }

    #[test]
    fn iterates_stay_in_the_range_of_the_data(which in 0usize..3, x in -2.0f64..2.0, steps in 2usize..=10) {
        let set = CoefficientSet::from_catalog(CATALOG[which]).unwrap();
        let tau = contraction_horizon(set.c_u0(), set.c_f()).unwrap();
        let (xi, d) = picard_solve(&set, x, PathTree::new(steps, tau).unwrap(), &PicardOptions::default()).unwrap();
        prop_assert!(d.range_excess <= 0.0);
        for (s, b) in xi.sup_abs().iter().zip(set.u0_sup()) {
            prop_assert!(*s <= b);
        }
        prop_assert!(d.final_residual <= 1e-10);
    }

    #[test]
    fn fixed_point_does_not_depend_on_the_start(x in -1.5f64..1.5, seed in 0u64..1000) {
        let set = CoefficientSet::from_catalog("burgers").unwrap();
        let tree = PathTree::new(8, 0.05).unwrap();
        let tight = PicardOptions { tol: 1e-13, ..PicardOptions::default() };
        let (a, _) = picard_solve(&set, x, tree, &tight).unwrap();
        let start = PicardOptions { start: Some(bounded_terminal(seed, tree, 1)), ..tight };
        let (b, _) = picard_solve(&set, x, tree, &start).unwrap();
        prop_assert!(a.l2_distance(&b).unwrap() <= 1e-12);
    }
}

#[test]
fn fixed_point_represents_the_pde_solution_along_compensated_paths() {
    let set = CoefficientSet::from_catalog("burgers").unwrap().with_initial(InitialData::Gaussian { amplitude: 1.0, width: 0.7 }).unwrap();
    let horizon = 0.1;
    let tree = PathTree::new(10, horizon).unwrap();
    let grid = padded_grid(-1.0, 1.0, horizon, 0.01).unwrap();
    let times: Vec<f64> = (0..=10).map(|k| tree.time(k)).collect();
    let fam = solve_fd_frames(&set, grid, &times, diffusion_limit(&grid)).unwrap();
    for x in [-0.5, 0.0, 0.4] {
        let (xi, _) = picard_solve(&set, x, tree, &PicardOptions::default()).unwrap();
        let e = check_representation(&xi, &set, x, &fam).unwrap();
        // tree discretization error, first order in dt
        assert!(e.value < 2e-2 && e.gradient < 6e-2, "{e:?}");
    }
}
