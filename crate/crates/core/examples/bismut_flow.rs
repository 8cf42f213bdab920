//! Fixed point of the flow map on a spatial grid with analytic first and
//! second derivatives, checked against finite differences of the PDE.

use girsanov_bsde::coefficients::CoefficientSet;
use girsanov_bsde::flow::{bismut_check, flow_horizon, picard_flow};
use girsanov_bsde::pde::fd::diffusion_limit;
use girsanov_bsde::pde::{padded_grid, solve_fd_frames, SpatialGrid};
use girsanov_bsde::tree::PathTree;

fn main() -> girsanov_bsde::Result<()> {
    let set = CoefficientSet::from_catalog("tanh_clamped(2)")?;
    let (t_max, k) = flow_horizon(set.c0(), set.c1(), 1)?;
    let t = 0.1;
    println!("C0 = {}, C1 = {}, T_max = {t_max:.6}, K = {k}", set.c0(), set.c1());

    let tree = PathTree::new(10, t)?;
    let grid = SpatialGrid::new(-2.0, 2.0, 33)?;
    let (xi, diag) = picard_flow(&set, grid, tree, 1e-10, 100)?;
    println!("{} iterations, ratios {:.3?}", diag.iterations, diag.ratios);
    println!("largest field norm {:.4}", diag.norms.iter().copied().fold(0.0, f64::max));

    let fine = padded_grid(-2.0, 2.0, t, 0.01)?;
    let times: Vec<f64> = (0..=10).map(|k| tree.time(k)).collect();
    let oracle = solve_fd_frames(&set, fine, &times, diffusion_limit(&fine))?;
    let e = bismut_check(&xi, &oracle)?;
    println!("relative errors of u, u_x, u_xx: {:.2e} {:.2e} {:.2e}", e.relative[0], e.relative[1], e.relative[2]);
    Ok(())
}
