//! Heat semigroup `P_s w(x) = E w(x + sqrt(s) G)`, `G` standard normal.

use crate::error::{Error, Result};
use crate::pde::grid::GridFunction;
use crate::pde::quadrature::{integrate_with_breaks, Tolerance};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const CUT: f64 = 9.0;

pub fn heat_apply<F: Fn(f64) -> f64>(w: F, s: f64, x: f64) -> Result<f64> {
    heat_apply_with_breaks(w, s, x, 8)
}

fn heat_apply_with_breaks<F: Fn(f64) -> f64>(w: F, s: f64, x: f64, pieces: usize) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid("s", "heat semigroup time must be non-negative"));
    }
    if s == 0.0 {
        return Ok(w(x));
    }
    let r = s.sqrt();
    let n = pieces.max(2);
    let breaks: Vec<f64> = (0..=n).map(|j| -CUT + 2.0 * CUT * j as f64 / n as f64).collect();
    let tol = Tolerance { abs: 1e-14, rel: 1e-10, max_segments: 20_000 };
    integrate_with_breaks(|z| w(x + r * z) * (-0.5 * z * z).exp() * INV_SQRT_2PI, &breaks, tol)
}

/// `P_s` applied to `h(u)` where `u` is the interpolated component `c` of a grid
/// function. Points outside the grid are clamped; a warning is logged when the
/// Gaussian mass there is not negligible.
pub fn heat_apply_grid<H: Fn(f64) -> f64>(w: &GridFunction, component: usize, h: H, s: f64, x: f64) -> Result<f64> {
    heat_apply_layer(w, component, false, h, s, x)
}

/// As [`heat_apply_grid`] for the gradient layer.
pub fn heat_apply_grid_gradient<H: Fn(f64) -> f64>(w: &GridFunction, component: usize, h: H, s: f64, x: f64) -> Result<f64> {
    heat_apply_layer(w, component, true, h, s, x)
}

fn heat_apply_layer<H: Fn(f64) -> f64>(
    w: &GridFunction,
    component: usize,
    gradient: bool,
    h: H,
    s: f64,
    x: f64,
) -> Result<f64> {
    if component >= w.dim() {
        return Err(Error::ShapeMismatch(format!("component {component} of a {}-component grid function", w.dim())));
    }
    let grid = w.grid();
    let reach = CUT * s.max(0.0).sqrt();
    if x - reach < grid.x_min - 1e-12 || x + reach > grid.x_max + 1e-12 {
        log::warn!("heat kernel at x = {x} with variance {s} reaches outside the grid; values are clamped");
    }
    let eval = |y: f64| {
        let mut out = vec![0.0; w.dim()];
        if gradient {
            w.interpolate_gradient(y, &mut out);
        } else {
            w.interpolate(y, &mut out);
        }
        h(out[component])
    };
    // one break per grid cell under the kernel so each piece is smooth
    let cells = if s > 0.0 { (2.0 * reach / grid.dx()).ceil() as usize } else { 2 };
    heat_apply_with_breaks(eval, s, x, cells.clamp(8, 4000))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::SpatialGrid;

    #[test]
    fn constants_and_identity() {
        assert!((heat_apply(|_| 2.5, 0.7, 1.0).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(heat_apply(|y| y.sin(), 0.0, 0.4).unwrap(), 0.4f64.sin());
    }

    #[test]
    fn gaussian_convolution() {
        let sigma2: f64 = 0.5;
        let s = 0.3;
        let w = |y: f64| (-y * y / (2.0 * sigma2)).exp();
        for x in [0.0, 0.6, -1.3] {
            let exact = (sigma2 / (sigma2 + s)).sqrt() * (-x * x / (2.0 * (sigma2 + s))).exp();
            assert!((heat_apply(w, s, x).unwrap() - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_version_matches_closed_form() {
        let grid = SpatialGrid::new(-8.0, 8.0, 1601).unwrap();
        let g = GridFunction::from_fn(grid, 1, |y, o| o[0] = (-y * y).exp()).unwrap();
        let exact = (1.0f64 / 1.4).sqrt() * (-0.25f64 / 1.4).exp();
        let v = heat_apply_grid(&g, 0, |u| u, 0.2, 0.5).unwrap();
        assert!((v - exact).abs() < 1e-4);
    }
}
