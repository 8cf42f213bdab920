//! Reference solutions of viscous Burgers: Cole-Hopf quadrature (two schemes)
//! against explicit finite differences.

use girsanov_bsde::coefficients::{CoefficientSet, InitialData};
use girsanov_bsde::pde::fd::diffusion_limit;
use girsanov_bsde::pde::{cole_hopf_with, padded_grid, solve_fd, ColeHopfScheme};

fn main() -> girsanov_bsde::Result<()> {
    let set = CoefficientSet::from_catalog("burgers")?.with_initial(InitialData::Gaussian { amplitude: 1.0, width: 0.5 })?;
    let t = 0.5;
    let grid = padded_grid(-2.0, 2.0, t, 0.01)?;
    let fd = solve_fd(&set, grid, t, diffusion_limit(&grid))?;
    println!("{:>6} {:>12} {:>12} {:>12}", "x", "adaptive", "composite", "fd");
    let mut v = [0.0];
    for i in 0..=8 {
        let x = -2.0 + 0.5 * i as f64;
        let a = cole_hopf_with(&set.initial, x, t, ColeHopfScheme::Adaptive)?;
        let b = cole_hopf_with(&set.initial, x, t, ColeHopfScheme::Composite)?;
        fd.interpolate(x, &mut v);
        println!("{x:>6.2} {a:>12.8} {b:>12.8} {:>12.8}", v[0]);
    }
    Ok(())
}
