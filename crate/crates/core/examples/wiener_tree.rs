//! Conditional expectations, martingale representation and the predictable
//! bracket on a small tree, all by exact enumeration.

use girsanov_bsde::girsanov::Measure;
use girsanov_bsde::tree::{bracket, conditional_expectations, ito_sum, martingale_density, PathTree, TerminalVariable};

fn main() -> girsanov_bsde::Result<()> {
    let tree = PathTree::new(10, 1.0)?;
    let p = Measure::symmetric(tree);

    // S_k = E[B_T^2 | F_k] = B_k^2 + (N - k) dt, with density 2 B_k
    let xi = TerminalVariable::from_fn(tree, 1, |_, b, o| o[0] = b * b);
    let s = conditional_expectations(&xi, &p)?;
    let z = martingale_density(&s, &p)?;
    let b = tree.brownian_process();
    let worst = (0..tree.steps())
        .flat_map(|k| (0..tree.level_len(k)).map(move |n| (k, n)))
        .map(|(k, n)| (z.node(k, n)[0] - 2.0 * b.node(k, n)[0]).abs())
        .fold(0.0, f64::max);
    println!("max |Z_k - 2 B_k|            = {worst:.2e}");

    let rebuilt = ito_sum(&z, &b)?;
    let n = tree.steps();
    let gap = (0..tree.leaves()).map(|l| (rebuilt.node(n, l)[0] + s.node(0, 0)[0] - s.node(n, l)[0]).abs()).fold(0.0, f64::max);
    println!("max |S_0 + sum Z dB - S_T|   = {gap:.2e}");

    let q = bracket(&s, &s, &p)?;
    let var = s.level(n).iter().map(|v| (v - s.node(0, 0)[0]).powi(2)).sum::<f64>() / tree.leaves() as f64;
    println!("E (S_T - S_0)^2 = {var:.12}, E <S>_T = {:.12}", q.expectation(n, &p)[0]);
    Ok(())
}
