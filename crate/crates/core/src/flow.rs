//! Random fields `xi_t(x, omega)` with first and second spatial derivatives and the
//! Picard map `Phi(xi)_t = u0(X(xi)_t)`, where
//! `X(xi)_t = x + B_t - int_0^t f(Y(xi_t)_s) ds` and `Y(xi_t)_s = E[xi_t | F_s]`.
//!
//! Derivatives are propagated with the chain rule rather than by differencing in
//! `x`, so the fixed point carries exact derivatives of the discrete equation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bsde::Driver;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::pde::grid::{GridFamily, SpatialGrid};
use crate::tree::PathTree;

/// Spatial dimension of the tree backend.
const D: f64 = 1.0;

/// `(T_max, K)`: the horizon below which `Phi` maps the `K`-ball into itself.
/// `T_max` is infinite when `C0 C1 = 0`.
pub fn flow_horizon(c0: f64, c1: f64, d: usize) -> Result<(f64, f64)> {
    if !(c0 >= 0.0) || !(c1 >= 0.0) {
        return Err(Error::invalid("constants", "flow constants must be non-negative"));
    }
    let d = d as f64;
    let k = 2.0 * c0 * (1.0 + d).powi(2);
    if c0 * c1 == 0.0 {
        return Ok((f64::INFINITY, k));
    }
    let inner = d + 0.5 + c0 * (1.0 + c1) * (1.0 + d).powi(2);
    Ok(((1.0 / (2.0 * (c0 * c1).sqrt() * inner.sqrt())).min(1.0), k))
}

/// Right-hand side of the one-step bound
/// `|Phi(xi)| <= C0 (1+d)^2 + C0 C1 T {(2d+1) + (1+C1 T)|xi|} |xi|`.
pub fn one_step_bound(c0: f64, c1: f64, horizon: f64, norm: f64) -> f64 {
    c0 * (1.0 + D).powi(2) + c0 * c1 * horizon * ((2.0 * D + 1.0) + (1.0 + c1 * horizon) * norm) * norm
}

/// Field values per tree level; level `k` stores `[x][node][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    tree: PathTree,
    grid: SpatialGrid,
    dim: usize,
    value: Vec<Vec<f64>>,
    grad: Vec<Vec<f64>>,
    hess: Vec<Vec<f64>>,
}

impl FlowState {
    pub fn zeros(tree: PathTree, grid: SpatialGrid, dim: usize) -> Self {
        let level = |k: usize| vec![0.0; grid.points * tree.level_len(k) * dim];
        let mk = || (0..=tree.steps()).map(level).collect::<Vec<_>>();
        Self { tree, grid, dim, value: mk(), grad: mk(), hess: mk() }
    }

    /// Field with `fill(k, node, x, value, grad, hess)` at every cell.
    pub fn from_fn<F>(tree: PathTree, grid: SpatialGrid, dim: usize, mut fill: F) -> Self
    where
        F: FnMut(usize, usize, f64, &mut [f64], &mut [f64], &mut [f64]),
    {
        let mut s = Self::zeros(tree, grid, dim);
        for k in 0..=tree.steps() {
            let nodes = tree.level_len(k);
            for xi in 0..grid.points {
                for p in 0..nodes {
                    let o = (xi * nodes + p) * dim;
                    fill(
                        k,
                        p,
                        grid.x(xi),
                        &mut s.value[k][o..o + dim],
                        &mut s.grad[k][o..o + dim],
                        &mut s.hess[k][o..o + dim],
                    );
                }
            }
        }
        s
    }

    /// `u0(x + B_t)` with its derivatives: the state for `f = 0`.
    pub fn uncoupled(coeffs: &CoefficientSet, tree: PathTree, grid: SpatialGrid) -> Self {
        Self::from_fn(tree, grid, coeffs.dim(), |k, p, x, v, g, h| {
            let at = x + tree.brownian(k, p);
            coeffs.initial.eval(at, v);
            coeffs.initial.eval_dx(at, g);
            coeffs.initial.eval_dxx(at, h);
        })
    }

    /// Random state: per cell and component a sum of three sinusoids in `x`
    /// (derivatives consistent), scaled so that the field norm is about `scale`.
    pub fn random(tree: PathTree, grid: SpatialGrid, dim: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self::from_fn(tree, grid, dim, |_, _, _, _, _, _| {});
        for k in 0..=tree.steps() {
            let nodes = tree.level_len(k);
            for p in 0..nodes {
                for i in 0..dim {
                    let modes: Vec<(f64, f64, f64)> =
                        (0..3).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.2..2.0), rng.random_range(0.0..6.3))).collect();
                    for xi in 0..grid.points {
                        let x = grid.x(xi);
                        let o = (xi * nodes + p) * dim + i;
                        let (mut v, mut g, mut h) = (0.0, 0.0, 0.0);
                        for &(a, w, ph) in &modes {
                            let arg = w * x + ph;
                            v += a * arg.sin();
                            g += a * w * arg.cos();
                            h -= a * w * w * arg.sin();
                        }
                        s.value[k][o] = v;
                        s.grad[k][o] = g;
                        s.hess[k][o] = h;
                    }
                }
            }
        }
        let n = s.h_norm();
        if n > 0.0 {
            for lvl in s.value.iter_mut().chain(s.grad.iter_mut()).chain(s.hess.iter_mut()) {
                lvl.iter_mut().for_each(|v| *v *= scale / n);
            }
        }
        s
    }

    pub fn tree(&self) -> PathTree {
        self.tree
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn offset(&self, k: usize, xi: usize, p: usize) -> usize {
        (xi * self.tree.level_len(k) + p) * self.dim
    }

    /// `(xi, grad xi, hess xi)` at level `k`, grid index `xi`, node `p`.
    pub fn cell(&self, k: usize, xi: usize, p: usize) -> (&[f64], &[f64], &[f64]) {
        let o = self.offset(k, xi, p);
        let r = o..o + self.dim;
        (&self.value[k][r.clone()], &self.grad[k][r.clone()], &self.hess[k][r])
    }

    /// `E^P` of the `j`-th derivative field at level `k`, grid index `xi`.
    pub fn mean(&self, j: usize, k: usize, xi: usize) -> Vec<f64> {
        let layer = match j {
            0 => &self.value[k],
            1 => &self.grad[k],
            _ => &self.hess[k],
        };
        let nodes = self.tree.level_len(k);
        let mut out = vec![0.0; self.dim];
        for p in 0..nodes {
            let o = self.offset(k, xi, p);
            for (a, v) in out.iter_mut().zip(&layer[o..o + self.dim]) {
                *a += v;
            }
        }
        out.iter_mut().for_each(|a| *a /= nodes as f64);
        out
    }

    /// `max_{t, omega} sum_{j=0}^{2} max_x |grad^j xi_t(x, omega)|`.
    pub fn h_norm(&self) -> f64 {
        let d = self.dim;
        let mut best = 0.0f64;
        for k in 0..=self.tree.steps() {
            let nodes = self.tree.level_len(k);
            for p in 0..nodes {
                let mut sum = 0.0;
                for layer in [&self.value[k], &self.grad[k], &self.hess[k]] {
                    let mut sup = 0.0f64;
                    for xi in 0..self.grid.points {
                        let o = (xi * nodes + p) * d;
                        sup = sup.max(layer[o..o + d].iter().map(|v| v * v).sum::<f64>().sqrt());
                    }
                    sum += sup;
                }
                best = best.max(sum);
            }
        }
        best
    }

    pub fn distance(&self, other: &FlowState) -> Result<f64> {
        if self.tree != other.tree || self.grid != other.grid || self.dim != other.dim {
            return Err(Error::ShapeMismatch("flow states on different index sets".into()));
        }
        let mut diff = self.clone();
        for (a, b) in [(&mut diff.value, &other.value), (&mut diff.grad, &other.grad), (&mut diff.hess, &other.hess)] {
            for (la, lb) in a.iter_mut().zip(b) {
                la.iter_mut().zip(lb).for_each(|(x, y)| *x -= y);
            }
        }
        Ok(diff.h_norm())
    }
}

fn check_scope(coeffs: &CoefficientSet) -> Result<()> {
    if coeffs.convection.depends_on_z() || !coeffs.driver.is_zero() {
        return Err(Error::Scope("the flow map needs f = f(y) and g = 0".into()));
    }
    Ok(())
}

/// Checks the declared `C0` and `C1` against samples on `[-span, span]` and on
/// the box of attainable `y`.
pub fn certify_flow_constants(coeffs: &CoefficientSet, span: f64, samples: usize) -> Result<(f64, f64)> {
    let m = coeffs.dim();
    let (c0, c1) = (coeffs.c0(), coeffs.c1());
    let n = samples.max(16);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (mut v, mut g, mut h) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut seen0 = 0.0f64;
    for j in 0..=n {
        let x = -span + 2.0 * span * j as f64 / n as f64;
        coeffs.initial.eval(x, &mut v);
        coeffs.initial.eval_dx(x, &mut g);
        coeffs.initial.eval_dxx(x, &mut h);
        seen0 = seen0.max(norm(&v)).max(norm(&g)).max(norm(&h));
    }
    if seen0 > c0 * (1.0 + 1e-9) {
        return Err(Error::Certification { name: "C0".into(), declared: c0, sampled: seen0 });
    }
    let r = coeffs.u0_sup();
    let mut seen1 = 0.0f64;
    let (mut gf, mut hf) = (vec![0.0; m], vec![0.0; m * m]);
    let eps = 1e-4;
    let mut y = vec![0.0; m];
    for j in 0..=n {
        let s = -1.0 + 2.0 * j as f64 / n as f64;
        for i in 0..m {
            y[i] = r[i] * s;
        }
        coeffs.convection.grad(&y, &mut gf);
        coeffs.convection.hessian(&y, &mut hf);
        // third derivative along the diagonal by differencing the Hessian
        let mut yp = y.clone();
        yp[0] += eps;
        let mut hp = vec![0.0; m * m];
        coeffs.convection.hessian(&yp, &mut hp);
        let third = (hp[0] - hf[0]).abs() / eps;
        let hn = hf.iter().map(|a| a * a).sum::<f64>().sqrt();
        seen1 = seen1.max(norm(&gf)).max(hn).max(third);
    }
    if seen1 > c1 * (1.0 + 1e-3) {
        return Err(Error::Certification { name: "C1".into(), declared: c1, sampled: seen1 });
    }
    Ok((seen0, seen1))
}

/// One application of `Phi` at every `(t_k, x)`.
pub fn phi_flow(state: &FlowState, coeffs: &CoefficientSet) -> Result<FlowState> {
    check_scope(coeffs)?;
    if state.dim != coeffs.dim() {
        return Err(Error::ShapeMismatch(format!("state has {} components, data {}", state.dim, coeffs.dim())));
    }
    let tree = state.tree;
    let grid = state.grid;
    let m = state.dim;
    let mut out = FlowState::zeros(tree, grid, m);
    for k in 0..=tree.steps() {
        let nodes = tree.level_len(k);
        let cells: Vec<Result<Vec<[Vec<f64>; 3]>>> =
            (0..grid.points).into_par_iter().map(|xi| phi_cell(state, coeffs, k, xi)).collect();
        for (xi, cell) in cells.into_iter().enumerate() {
            for (p, [v, g, h]) in cell?.into_iter().enumerate() {
                let o = (xi * nodes + p) * m;
                out.value[k][o..o + m].copy_from_slice(&v);
                out.grad[k][o..o + m].copy_from_slice(&g);
                out.hess[k][o..o + m].copy_from_slice(&h);
            }
        }
    }
    Ok(out)
}

/// Conditional expectations of a level-`k` slice `[node][component]` at all levels `0..=k`.
fn backward_means(slice: &[f64], k: usize, m: usize) -> Vec<Vec<f64>> {
    let mut levels = vec![Vec::new(); k + 1];
    levels[k] = slice.to_vec();
    for j in (0..k).rev() {
        let child = &levels[j + 1];
        levels[j] = (0..(1usize << j) * m)
            .map(|idx| {
                let (p, i) = (idx / m, idx % m);
                0.5 * (child[2 * p * m + i] + child[(2 * p + 1) * m + i])
            })
            .collect();
    }
    levels
}

fn phi_cell(state: &FlowState, coeffs: &CoefficientSet, k: usize, xi: usize) -> Result<Vec<[Vec<f64>; 3]>> {
    let tree = state.tree;
    let m = state.dim;
    let nodes = tree.level_len(k);
    let dt = tree.dt();
    let h = tree.h();
    let x = state.grid.x(xi);
    let o = xi * nodes * m;
    let r = o..o + nodes * m;
    let yv = backward_means(&state.value[k][r.clone()], k, m);
    let yg = backward_means(&state.grad[k][r.clone()], k, m);
    let yh = backward_means(&state.hess[k][r], k, m);

    // path sums of f, grad f . Y(grad xi) and hess f(Y grad xi, Y grad xi) + grad f . Y(hess xi)
    let mut sums = vec![[0.0f64; 3]];
    let (mut gf, mut hf) = (vec![0.0; m], vec![0.0; m * m]);
    let zero = vec![0.0; m];
    for j in 0..k {
        let mut next = vec![[0.0f64; 3]; 1usize << (j + 1)];
        for q in 0..(1usize << j) {
            let y = &yv[j][q * m..(q + 1) * m];
            let a = &yg[j][q * m..(q + 1) * m];
            let b = &yh[j][q * m..(q + 1) * m];
            let f = coeffs.convection.eval(y, &zero);
            if f.abs() * h >= 1.0 {
                return Err(Error::Positivity { level: j, node: q, value: f.abs() * h });
            }
            coeffs.convection.grad(y, &mut gf);
            coeffs.convection.hessian(y, &mut hf);
            let first: f64 = gf.iter().zip(a).map(|(g, v)| g * v).sum();
            let mut second: f64 = gf.iter().zip(b).map(|(g, v)| g * v).sum();
            for i in 0..m {
                for l in 0..m {
                    second += hf[i * m + l] * a[i] * a[l];
                }
            }
            let s = sums[q];
            for c in [2 * q, 2 * q + 1] {
                next[c] = [s[0] + f * dt, s[1] + first * dt, s[2] + second * dt];
            }
        }
        sums = next;
    }
    let (mut u, mut du, mut ddu) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    Ok((0..nodes)
        .map(|p| {
            let s = sums[p];
            let big_x = x + tree.brownian(k, p) - s[0];
            let dx = 1.0 - s[1];
            let ddx = -s[2];
            coeffs.initial.eval(big_x, &mut u);
            coeffs.initial.eval_dx(big_x, &mut du);
            coeffs.initial.eval_dxx(big_x, &mut ddu);
            let g: Vec<f64> = du.iter().map(|d| d * dx).collect();
            let hh: Vec<f64> = ddu.iter().zip(&du).map(|(a, b)| a * dx * dx + b * ddx).collect();
            [u.clone(), g, hh]
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowDiagnostics {
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Field norm of every iterate, starting state first.
    pub norms: Vec<f64>,
    pub t_max: f64,
    pub k_bound: f64,
    pub within_horizon: bool,
}

/// Iterates `Phi` from the uncoupled state until the field distance is below `tol`.
pub fn picard_flow(
    coeffs: &CoefficientSet,
    grid: SpatialGrid,
    tree: PathTree,
    tol: f64,
    max_iter: usize,
) -> Result<(FlowState, FlowDiagnostics)> {
    check_scope(coeffs)?;
    let (t_max, k_bound) = flow_horizon(coeffs.c0(), coeffs.c1(), 1)?;
    let within = tree.horizon() <= t_max;
    if !within {
        log::warn!("horizon {} exceeds the flow horizon {t_max:.6}; the ball bound is not guaranteed", tree.horizon());
    }
    let mut xi = FlowState::uncoupled(coeffs, tree, grid);
    let mut diag = FlowDiagnostics {
        iterations: 0,
        distances: Vec::new(),
        ratios: Vec::new(),
        norms: vec![xi.h_norm()],
        t_max,
        k_bound,
        within_horizon: within,
    };
    let ball = |n: f64| -> Result<()> {
        if within && n > k_bound * (1.0 + 1e-12) {
            return Err(Error::BallViolation { norm: n, bound: k_bound });
        }
        Ok(())
    };
    ball(diag.norms[0])?;
    for _ in 0..max_iter {
        let next = phi_flow(&xi, coeffs)?;
        diag.iterations += 1;
        let n = next.h_norm();
        diag.norms.push(n);
        ball(n)?;
        let d = next.distance(&xi)?;
        if let Some(&prev) = diag.distances.last() {
            if prev > 1e-14 {
                diag.ratios.push(d / prev);
            }
        }
        diag.distances.push(d);
        if d <= tol {
            return Ok((xi, diag));
        }
        xi = next;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        tol,
        last: diag.distances.last().copied().unwrap_or(f64::NAN),
        ratios: diag.ratios,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BismutErrors {
    /// `max |E grad^j xi_t(x) - grad^j u(x, t)| / max |grad^j u|` for `j = 0, 1, 2`.
    pub relative: [f64; 3],
    pub absolute: [f64; 3],
}

/// Compares the means of the fixed-point field and its derivatives with a
/// reference family `u(., t)`, `t` in `[0, T]`.
pub fn bismut_check(xi_star: &FlowState, oracle: &GridFamily) -> Result<BismutErrors> {
    let tree = xi_star.tree;
    let grid = xi_star.grid;
    let og = oracle.grid();
    if oracle.dim() != xi_star.dim {
        return Err(Error::ShapeMismatch("oracle has a different component count".into()));
    }
    if grid.x_min < og.x_min || grid.x_max > og.x_max {
        return Err(Error::RangeViolation { x: if grid.x_min < og.x_min { grid.x_min } else { grid.x_max }, x_min: og.x_min, x_max: og.x_max });
    }
    let times = oracle.times();
    if times[0] > 1e-12 || times[times.len() - 1] < tree.horizon() - 1e-9 {
        return Err(Error::invalid("oracle", "reference family must cover [0, T]"));
    }
    let m = xi_star.dim;
    let mut abs = [0.0f64; 3];
    let mut scale = [0.0f64; 3];
    let mut r = vec![0.0; m];
    for k in 0..=tree.steps() {
        let t = tree.time(k);
        for xi in 0..grid.points {
            let x = grid.x(xi);
            for (j, (a, s)) in abs.iter_mut().zip(scale.iter_mut()).enumerate() {
                match j {
                    0 => oracle.value(x, t, &mut r),
                    1 => oracle.gradient(x, t, &mut r),
                    _ => oracle.second_derivative(x, t, &mut r),
                };
                let mean = xi_star.mean(j, k, xi);
                for (e, o) in mean.iter().zip(&r) {
                    *a = a.max((e - o).abs());
                    *s = s.max(o.abs());
                }
            }
        }
    }
    let rel = [0, 1, 2].map(|j| if scale[j] > 0.0 { abs[j] / scale[j] } else { abs[j] });
    Ok(BismutErrors { relative: rel, absolute: abs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Convection, DriverKind, InitialData};

    #[test]
    fn horizon_values() {
        let (t, k) = flow_horizon(1.0, 1.0, 1).unwrap();
        assert!((t - 0.162_221).abs() < 1e-5);
        assert_eq!(k, 8.0);
        let (t, k) = flow_horizon(2.0, 1.0, 1).unwrap();
        assert_eq!(k, 16.0);
        assert!((t - 1.0 / (2.0 * 2f64.sqrt() * 17.5f64.sqrt())).abs() < 1e-12);
        assert!((t - 0.0845).abs() < 1e-4);
        assert_eq!(flow_horizon(1.0, 1e-12, 1).unwrap(), (1.0, 8.0));
        assert_eq!(flow_horizon(1.0, 0.0, 1).unwrap().0, f64::INFINITY);
        assert!(flow_horizon(-1.0, 1.0, 1).is_err());
    }

    #[test]
    fn norms_of_simple_states() {
        let tree = PathTree::new(3, 0.1).unwrap();
        let grid = SpatialGrid::new(-1.0, 1.0, 9).unwrap();
        assert_eq!(FlowState::zeros(tree, grid, 2).h_norm(), 0.0);
        let c = FlowState::from_fn(tree, grid, 1, |_, _, _, v, _, _| v[0] = -0.7);
        assert_eq!(c.h_norm(), 0.7);
    }

    #[test]
    fn uncoupled_map_and_norm() {
        let set = CoefficientSet::from_catalog("zero").unwrap();
        let tree = PathTree::new(4, 0.2).unwrap();
        let grid = SpatialGrid::new(-1.0, 1.0, 11).unwrap();
        let s = phi_flow(&FlowState::zeros(tree, grid, 1), &set).unwrap();
        assert_eq!(s, FlowState::uncoupled(&set, tree, grid));
        let mut expect = 0.0f64;
        for k in 0..=4 {
            for p in 0..tree.level_len(k) {
                let mut sum = 0.0;
                for j in 0..3 {
                    let mut sup = 0.0f64;
                    for x in grid.xs() {
                        let mut o = [0.0];
                        let at = x + tree.brownian(k, p);
                        match j {
                            0 => set.initial.eval(at, &mut o),
                            1 => set.initial.eval_dx(at, &mut o),
                            _ => set.initial.eval_dxx(at, &mut o),
                        }
                        sup = sup.max(o[0].abs());
                    }
                    sum += sup;
                }
                expect = expect.max(sum);
            }
        }
        assert_eq!(s.h_norm(), expect);
    }

    #[test]
    fn constant_field_shifts_paths() {
        let set = CoefficientSet::from_catalog("burgers").unwrap();
        let tree = PathTree::new(2, 0.1).unwrap();
        let grid = SpatialGrid::new(-0.5, 0.5, 3).unwrap();
        let c = 0.4;
        let s = FlowState::from_fn(tree, grid, 1, |_, _, _, v, _, _| v[0] = c);
        let out = phi_flow(&s, &set).unwrap();
        let h = tree.h();
        for (p, b) in [2.0 * h, 0.0, 0.0, -2.0 * h].iter().enumerate() {
            let (v, g, hh) = out.cell(2, 2, p);
            let x = 0.5 + b - 0.1 * c;
            assert!((v[0] + x.tanh()).abs() < 1e-15);
            let sech2 = 1.0 - x.tanh().powi(2);
            assert!((g[0] + sech2).abs() < 1e-15);
            assert!((hh[0] - 2.0 * x.tanh() * sech2).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_data_is_fixed() {
        let set = CoefficientSet::new("c", InitialData::Constant(vec![0.2]), Convection::Burgers, DriverKind::Zero).unwrap();
        let tree = PathTree::new(4, 0.1).unwrap();
        let grid = SpatialGrid::new(-1.0, 1.0, 5).unwrap();
        let (xi, d) = picard_flow(&set, grid, tree, 1e-12, 10).unwrap();
        assert_eq!(d.iterations, 1);
        assert_eq!(xi.h_norm(), 0.2);
    }

    #[test]
    fn one_step_bound_for_random_states() {
        let set = CoefficientSet::from_catalog("tanh_clamped(1)").unwrap();
        let tree = PathTree::new(5, 0.1).unwrap();
        let grid = SpatialGrid::new(-2.0, 2.0, 9).unwrap();
        for seed in 0..5 {
            let s = FlowState::random(tree, grid, 1, 1.0 + seed as f64, seed);
            let out = phi_flow(&s, &set).unwrap();
            let bound = one_step_bound(set.c0(), set.c1(), 0.1, s.h_norm());
            assert!(out.h_norm() <= bound, "{} > {bound}", out.h_norm());
        }
    }

    #[test]
    fn derivatives_match_differences_at_the_fixed_point() {
        let set = CoefficientSet::from_catalog("tanh_clamped(1)").unwrap();
        let tree = PathTree::new(6, 0.1).unwrap();
        let e = 1e-4;
        let grid = SpatialGrid::new(0.3 - e, 0.3 + e, 3).unwrap();
        let (xi, _) = picard_flow(&set, grid, tree, 1e-13, 60).unwrap();
        let k = 6;
        for p in 0..tree.level_len(k) {
            let (lo, _, _) = xi.cell(k, 0, p);
            let (_, g, hh) = xi.cell(k, 1, p);
            let (hi, _, _) = xi.cell(k, 2, p);
            assert!(((hi[0] - lo[0]) / (2.0 * e) - g[0]).abs() < 1e-6);
            let (_, glo, _) = xi.cell(k, 0, p);
            let (_, ghi, _) = xi.cell(k, 2, p);
            assert!(((ghi[0] - glo[0]) / (2.0 * e) - hh[0]).abs() < 1e-5);
        }
    }

    #[test]
    fn certification_of_catalog_constants() {
        for name in ["burgers", "tanh_clamped(1)", "tanh_clamped(0.5)", "two_component_mix"] {
            certify_flow_constants(&CoefficientSet::from_catalog(name).unwrap(), 10.0, 4000).unwrap();
        }
    }
}
