use girsanov_bsde::bsde::{solve_driver_bsde, transform_bsde};
use girsanov_bsde::girsanov::{check_density_invariance, exponential_martingale, tilt_measure, Measure};
use girsanov_bsde::instances::{identity_residuals, RandomInstance};
use girsanov_bsde::tree::{ito_sum, AdaptedProcess, PathTree};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_instances_satisfy_the_identities(seed in any::<u64>(), steps in 1usize..=12, dim in 1usize..=3, horizon in 0.1f64..3.0) {
        let r = identity_residuals(&RandomInstance::generate(seed, steps, horizon, dim).unwrap()).unwrap();
        prop_assert!(r.max() <= 1e-12, "{:?}", r);
    }

    #[test]
    fn brownian_density_is_one_under_any_tilt(seed in any::<u64>(), steps in 1usize..=12) {
        let inst = RandomInstance::generate(seed, steps, 1.0, 1).unwrap();
        let b = inst.tree().brownian_process();
        prop_assert!(check_density_invariance(&b, &inst.integrand).unwrap() <= 1e-14);
    }

    #[test]
    fn tilted_expectation_is_weighted_expectation(seed in any::<u64>(), steps in 1usize..=10) {
        let inst = RandomInstance::generate(seed, steps, 1.0, 2).unwrap();
        let density = exponential_martingale(&inst.integrand).unwrap();
        let q = tilt_measure(&density);
        let eq = q.expect(&inst.terminal).unwrap();
        let r = density.terminal();
        let n = inst.tree().leaves() as f64;
        for i in 0..2 {
            let ep: f64 = (0..inst.tree().leaves()).map(|l| r.leaf(l)[0] * inst.terminal.leaf(l)[i]).sum::<f64>() / n;
            prop_assert!((eq[i] - ep).abs() <= 1e-12 * (1.0 + ep.abs()));
        }
    }

    #[test]
    fn transformed_solution_is_driven_by_the_tilted_motion(seed in any::<u64>(), steps in 2usize..=10) {
        // Without a driver, S~ = S - <S, N> integrates Z~ against B~ exactly.
        let inst = RandomInstance::generate(seed, steps, 1.0, 1).unwrap();
        let sol = solve_driver_bsde(&inst.terminal, &girsanov_bsde::bsde::NoDriver).unwrap();
        let conv = inst.convection;
        let tr = transform_bsde(&sol, &girsanov_bsde::bsde::NoDriver, |y, z| conv.eval(y, z)).unwrap();
        let tree = inst.tree();
        let f = AdaptedProcess::from_fn(tree, 1, steps - 1, |k, p, o| o[0] = conv.eval(sol.y.node(k, p), sol.z.node(k, p)));
        let b_tilde = girsanov_bsde::girsanov::compensate(&tree.brownian_process(), &f).unwrap();
        let i = ito_sum(&tr.z_tilde, &b_tilde).unwrap();
        for k in 0..=steps {
            for (node, v) in i.level(k).iter().enumerate() {
                let expect = tr.s_tilde.node(k, node)[0] - tr.s_tilde.node(0, 0)[0];
                prop_assert!((v - expect).abs() <= 1e-12);
            }
        }
        prop_assert!(tr.martingale_residual <= 1e-12);
    }
}

#[test]
fn symmetric_measure_for_zero_integrand() {
    let tree = PathTree::new(6, 1.0).unwrap();
    let f = AdaptedProcess::from_fn(tree, 1, 5, |_, _, o| o[0] = 0.0);
    let q = tilt_measure(&exponential_martingale(&f).unwrap());
    let p = Measure::symmetric(tree);
    let x = tree.terminal_brownian();
    assert_eq!(q.expect(&x).unwrap(), p.expect(&x).unwrap());
}
