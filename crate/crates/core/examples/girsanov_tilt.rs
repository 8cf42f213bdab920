//! Change of measure by a stochastic exponential: normalization, the tilted
//! up-probabilities, the compensated Brownian motion and density invariance.

use girsanov_bsde::girsanov::{check_density_invariance, compensate, exponential_martingale, martingale_defect, tilt_measure, Measure};
use girsanov_bsde::tree::{conditional_expectations, AdaptedProcess, PathTree, TerminalVariable};

fn main() -> girsanov_bsde::Result<()> {
    let tree = PathTree::new(12, 1.0)?;
    let b = tree.brownian_process();
    // a path-dependent drift with |f| h < 1
    let f = AdaptedProcess::from_fn(tree, 1, tree.steps() - 1, |k, p, o| o[0] = 1.5 * (b.node(k, p)[0] + 0.3).sin());
    let r = exponential_martingale(&f)?;
    println!("max_k |E R_k - 1|         = {:.2e}", r.normalization_defect());

    let q = tilt_measure(&r);
    println!("up-probability at the root = {:.6} (f = {:.6}, h = {:.6})", q.up_probability(0, 0), f.node(0, 0)[0], tree.h());

    let b_tilde = compensate(&b, &f)?;
    println!("B~ martingale defect under Q = {:.2e}", martingale_defect(&b_tilde, &q)?);

    let xi = TerminalVariable::from_fn(tree, 2, |_, x, o| {
        o[0] = x.cos();
        o[1] = (x * x).min(2.0);
    });
    let x = conditional_expectations(&xi, &Measure::symmetric(tree))?;
    println!("max |D_B X - D_B~ X~|      = {:.2e}", check_density_invariance(&x, &f)?);
    Ok(())
}
