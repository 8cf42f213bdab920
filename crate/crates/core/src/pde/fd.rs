//! Explicit finite differences for `u_t + f(u, u_x) u_x = u_xx / 2 + g(u, u_x)`
//! with zero-gradient (Neumann) boundaries.

use crate::bsde::Driver;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::pde::grid::{GridFamily, GridFunction, SpatialGrid};

/// Grid covering `[lo, hi]` padded by `6 sqrt(T) + 3` on each side.
pub fn padded_grid(lo: f64, hi: f64, horizon: f64, dx: f64) -> Result<SpatialGrid> {
    let pad = 6.0 * horizon.max(0.0).sqrt() + 3.0;
    SpatialGrid::with_spacing(lo - pad, hi + pad, dx)
}

/// Largest stable step for the diffusion part alone.
pub fn diffusion_limit(grid: &SpatialGrid) -> f64 {
    0.9 * grid.dx() * grid.dx()
}

/// Solution at time `horizon`, with central-difference gradient attached.
pub fn solve_fd(coeffs: &CoefficientSet, grid: SpatialGrid, horizon: f64, dt: f64) -> Result<GridFunction> {
    Ok(solve_fd_frames(coeffs, grid, &[horizon], dt)?.last().clone())
}

/// Frames at each of `times` (ascending, non-negative); `t = 0` yields the initial data.
pub fn solve_fd_frames(coeffs: &CoefficientSet, grid: SpatialGrid, times: &[f64], dt: f64) -> Result<GridFamily> {
    grid.validate()?;
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times", "need a non-empty increasing list of non-negative times"));
    }
    let admissible = diffusion_limit(&grid);
    if !(dt > 0.0) || dt > admissible {
        return Err(Error::Cfl { dt, admissible });
    }
    let m = coeffs.dim();
    let g = grid.points;
    let dx = grid.dx();
    let mut u = vec![0.0; g * m];
    for (i, row) in u.chunks_exact_mut(m).enumerate() {
        coeffs.initial.eval(grid.x(i), row);
    }
    let check_max = coeffs.driver.is_zero();
    let bound = componentwise_sup(&u, m);

    let mut next = vec![0.0; g * m];
    let mut ux = vec![0.0; m];
    let mut uxx = vec![0.0; m];
    let mut gv = vec![0.0; m];
    let mut frames = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &target in times {
        let span = target - t;
        let steps = if span > 0.0 { (span / dt - 1e-9).ceil().max(1.0) as usize } else { 0 };
        let step = if steps > 0 { span / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            for i in 0..g {
                let lo = if i == 0 { 1 } else { i - 1 };
                let hi = if i == g - 1 { g - 2 } else { i + 1 };
                let ui = &u[i * m..(i + 1) * m];
                for c in 0..m {
                    let (a, b) = (u[lo * m + c], u[hi * m + c]);
                    ux[c] = if i == 0 || i == g - 1 { 0.0 } else { (b - a) / (2.0 * dx) };
                    uxx[c] = (a - 2.0 * ui[c] + b) / (dx * dx);
                }
                let f = coeffs.convection.eval(ui, &ux);
                if step * f.abs() > 0.9 * dx {
                    return Err(Error::Cfl { dt: step, admissible: admissible.min(0.9 * dx / f.abs()) });
                }
                coeffs.driver.eval(t, ui, &ux, &mut gv);
                for c in 0..m {
                    next[i * m + c] = ui[c] + step * (0.5 * uxx[c] - f * ux[c] + gv[c]);
                }
            }
            std::mem::swap(&mut u, &mut next);
            if check_max {
                for (c, (v, b)) in componentwise_sup(&u, m).iter().zip(&bound).enumerate() {
                    if *v > b * (1.0 + 1e-10) {
                        return Err(Error::MaximumPrinciple { component: c, value: *v, bound: *b });
                    }
                }
            }
        }
        t = target;
        frames.push(GridFunction::new(grid, m, u.clone())?.with_central_gradient());
    }
    GridFamily::new(times.to_vec(), frames)
}

fn componentwise_sup(u: &[f64], m: usize) -> Vec<f64> {
    let mut s = vec![0.0f64; m];
    for row in u.chunks_exact(m) {
        for (a, v) in s.iter_mut().zip(row) {
            *a = a.max(v.abs());
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Convection, DriverKind, InitialData};

    #[test]
    fn constant_data_is_stationary() {
        let set = CoefficientSet::new("c", InitialData::Constant(vec![0.4, -1.2]), Convection::Burgers, DriverKind::Zero).unwrap();
        let grid = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        let u = solve_fd(&set, grid, 0.5, 0.005).unwrap();
        assert!(u.values().chunks(2).all(|r| r == [0.4, -1.2]));
    }

    #[test]
    fn heat_gaussian() {
        let set = CoefficientSet::from_catalog("zero").unwrap();
        let grid = padded_grid(-1.0, 1.0, 0.25, 0.02).unwrap();
        let u = solve_fd(&set, grid, 0.25, diffusion_limit(&grid)).unwrap();
        let mut worst = 0.0f64;
        for (i, x) in grid.xs().enumerate() {
            let s2: f64 = 1.25;
            let exact = (1.0 / s2).sqrt() * (-x * x / (2.0 * s2)).exp();
            worst = worst.max((u.value_at(i)[0] - exact).abs());
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn cfl_guard() {
        let set = CoefficientSet::from_catalog("burgers").unwrap();
        let grid = SpatialGrid::new(-1.0, 1.0, 101).unwrap();
        assert!(matches!(solve_fd(&set, grid, 0.1, 0.01), Err(Error::Cfl { .. })));
    }

    #[test]
    fn damping_decays() {
        let set = CoefficientSet::new("d", InitialData::Constant(vec![1.0]), Convection::Zero, DriverKind::Damping(1.0)).unwrap();
        let grid = SpatialGrid::new(-1.0, 1.0, 21).unwrap();
        let u = solve_fd(&set, grid, 1.0, 1e-3).unwrap();
        assert!((u.value_at(10)[0] - (-1.0f64).exp()).abs() < 1e-3);
    }
}
