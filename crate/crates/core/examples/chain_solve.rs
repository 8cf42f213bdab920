//! Extends the fixed-point solution past the contraction horizon by restarting
//! from the grid solution on consecutive short intervals.

use girsanov_bsde::cameron_martin::{chain_solve, contraction_horizon, PicardOptions};
use girsanov_bsde::coefficients::CoefficientSet;
use girsanov_bsde::pde::fd::diffusion_limit;
use girsanov_bsde::pde::{padded_grid, solve_fd, SpatialGrid};

fn main() -> girsanov_bsde::Result<()> {
    let set = CoefficientSet::from_catalog("two_component_mix")?;
    let tau = contraction_horizon(set.c_u0(), set.c_f())?;
    let total = 3.0 * tau;
    let grid = SpatialGrid::new(-3.0, 3.0, 61)?;
    let chain = chain_solve(&set, grid, total, 10, set.c_u0(), &PicardOptions::default())?;
    println!("tau = {tau:.5}, T = {total:.5}, interval ends {:?}", chain.times);
    println!("gradient bounds at restarts {:?}", chain.gradient_bounds);

    let fine = padded_grid(-3.0, 3.0, total, 0.01)?;
    let fd = solve_fd(&set, fine, total, diffusion_limit(&fine))?;
    let mut r = [0.0; 2];
    let mut worst = 0.0f64;
    for (i, x) in grid.xs().enumerate().filter(|(_, x)| x.abs() <= 1.5) {
        fd.interpolate(x, &mut r);
        let u = chain.u.value_at(i);
        worst = worst.max((u[0] - r[0]).abs()).max((u[1] - r[1]).abs());
    }
    println!("max |u_chain - u_fd| on [-1.5, 1.5] = {worst:.3e}");
    Ok(())
}
