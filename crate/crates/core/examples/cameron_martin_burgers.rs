//! Solves viscous Burgers through the nonlinear Cameron-Martin fixed point on
//! the tree and compares with Cole-Hopf, for increasing tree depth.

use girsanov_bsde::cameron_martin::{contraction_horizon, solve_point, PicardOptions};
use girsanov_bsde::coefficients::{CoefficientSet, InitialData};
use girsanov_bsde::pde::cole_hopf;
use girsanov_bsde::tree::PathTree;

fn main() -> girsanov_bsde::Result<()> {
    let set = CoefficientSet::from_catalog("burgers")?.with_initial(InitialData::Gaussian { amplitude: 1.0, width: 1.0 })?;
    let t = 0.25;
    println!("contraction horizon {:.5}; T = {t} lies beyond it, iterations still converge", contraction_horizon(set.c_u0(), set.c_f())?);
    for steps in [8, 12, 16] {
        let tree = PathTree::new(steps, t)?;
        let mut worst = 0.0f64;
        let mut iters = 0;
        for x in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let sol = solve_point(&set, x, tree, &PicardOptions::default())?;
            worst = worst.max((sol.value[0] - cole_hopf(&set.initial, x, t)?).abs());
            iters = iters.max(sol.diagnostics.iterations);
        }
        println!("N = {steps:>2}: max |u_tree - u_cole_hopf| = {worst:.3e} ({iters} iterations)");
    }
    Ok(())
}
