//! Nonlinear Cameron-Martin representation: the terminal-variable equation
//! `xi = u0(x + B_T - int_0^T f(Y(xi)_s, Z(xi)_s) ds)` solved by Picard iteration,
//! and its use as a solver for the quasi-linear system.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bsde::{solve_driver_bsde, BsdeSolution};
use crate::coefficients::{CoefficientSet, InitialData};
use crate::error::{Error, Result};
use crate::pde::grid::{GridFamily, GridFunction, SpatialGrid};
use crate::tree::{AdaptedProcess, PathTree, TerminalVariable};

/// Largest horizon for which the Picard map provably contracts (factor 1/2);
/// infinite when `C_u0 C_f = 0`.
pub fn contraction_horizon(c_u0: f64, c_f: f64) -> Result<f64> {
    if !(c_u0 >= 0.0) || !(c_f >= 0.0) {
        return Err(Error::invalid("constants", "Lipschitz constants must be non-negative"));
    }
    let prod = c_u0 * c_f;
    if prod == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 / (8.0 * prod * prod) + 1.0).sqrt() - 1.0)
}

/// `sqrt(2) C_u0 C_f sqrt(T (T + 2))`.
pub fn contraction_factor(horizon: f64, c_u0: f64, c_f: f64) -> f64 {
    std::f64::consts::SQRT_2 * c_u0 * c_f * (horizon * (horizon + 2.0)).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointDiagnostics {
    /// Number of evaluations of the map.
    pub iterations: usize,
    /// `|phi(xi_k) - xi_k|_2` per iteration.
    pub distances: Vec<f64>,
    /// Successive distance ratios (only where the denominator exceeds `1e-14`).
    pub ratios: Vec<f64>,
    pub final_residual: f64,
    /// Contraction horizon of the data.
    pub horizon: f64,
    pub beyond_horizon: bool,
    /// Proven contraction factor at the tree horizon.
    pub contraction_bound: f64,
    /// Largest `|xi^i| - sup |u0^i|` over all iterates (non-positive when bounded).
    pub range_excess: f64,
}

#[derive(Debug, Clone)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Start iterate; `u0(x + B_T)` when absent.
    pub start: Option<TerminalVariable>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100, start: None }
    }
}

/// `(Y, Z)` of the terminal variable: martingale representation when `g = 0`,
/// explicit backward scheme otherwise.
pub fn backward_solution(xi: &TerminalVariable, coeffs: &CoefficientSet) -> Result<BsdeSolution> {
    solve_driver_bsde(xi, &coeffs.driver)
}

/// Scalar process `f(Y_k, Z_k)` on levels `0..N-1`.
pub fn drift_process(sol: &BsdeSolution, coeffs: &CoefficientSet) -> AdaptedProcess {
    let tree = sol.y.tree();
    AdaptedProcess::from_fn(tree, 1, tree.steps() - 1, |k, p, o| {
        o[0] = coeffs.convection.eval(sol.y.node(k, p), sol.z.node(k, p))
    })
}

/// Compensated Brownian motion `B~_k = B_k - sum_{j<k} f_j dt`.
pub fn shifted_brownian(fvals: &AdaptedProcess) -> AdaptedProcess {
    let tree = fvals.tree();
    let dt = tree.dt();
    let n = tree.steps();
    let mut drift = vec![0.0];
    let mut out = tree.brownian_process();
    for k in 0..n {
        let f = fvals.level(k);
        let next: Vec<f64> = (0..tree.level_len(k + 1)).map(|c| drift[c / 2] + f[c / 2] * dt).collect();
        for (o, d) in out.level_mut(k + 1).iter_mut().zip(&next) {
            *o -= d;
        }
        drift = next;
    }
    out
}

/// One application of the map: `u0(x + B~(xi)_T)` leafwise.
pub fn phi(xi: &TerminalVariable, coeffs: &CoefficientSet, x: f64) -> Result<TerminalVariable> {
    if xi.dim() != coeffs.dim() {
        return Err(Error::ShapeMismatch(format!("terminal variable has {} components, data {}", xi.dim(), coeffs.dim())));
    }
    let tree = xi.tree();
    if coeffs.convection.is_zero() {
        return Ok(start_iterate(coeffs, x, tree));
    }
    let sol = backward_solution(xi, coeffs)?;
    Ok(phi_from_solution(&sol, coeffs, x))
}

fn phi_from_solution(sol: &BsdeSolution, coeffs: &CoefficientSet, x: f64) -> TerminalVariable {
    let tree = sol.y.tree();
    let bt = shifted_brownian(&drift_process(sol, coeffs));
    let last = bt.level(tree.steps());
    TerminalVariable::from_fn(tree, coeffs.dim(), |p, _, out| coeffs.initial.eval(x + last[p], out))
}

/// `u0(x + B_T)`, the solution of the uncoupled problem.
pub fn start_iterate(coeffs: &CoefficientSet, x: f64, tree: PathTree) -> TerminalVariable {
    TerminalVariable::from_fn(tree, coeffs.dim(), |_, b, out| coeffs.initial.eval(x + b, out))
}

pub fn picard_solve(
    coeffs: &CoefficientSet,
    x: f64,
    tree: PathTree,
    opts: &PicardOptions,
) -> Result<(TerminalVariable, FixedPointDiagnostics)> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let horizon = contraction_horizon(coeffs.c_u0(), coeffs.c_f())?;
    let t = tree.horizon();
    let beyond = t > horizon;
    if beyond {
        log::warn!("horizon {t} exceeds the contraction horizon {horizon:.6}; iterating without a contraction guarantee");
    }
    let sup = coeffs.u0_sup();
    let excess = |v: &TerminalVariable| {
        v.sup_abs().iter().zip(&sup).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut xi = match &opts.start {
        Some(s) => {
            tree.ensure_same(&s.tree(), "start iterate")?;
            s.clone()
        }
        None => start_iterate(coeffs, x, tree),
    };
    let mut diag = FixedPointDiagnostics {
        iterations: 0,
        distances: Vec::new(),
        ratios: Vec::new(),
        final_residual: f64::NAN,
        horizon,
        beyond_horizon: beyond,
        contraction_bound: contraction_factor(t, coeffs.c_u0(), coeffs.c_f()),
        range_excess: if opts.start.is_some() { f64::NEG_INFINITY } else { excess(&xi) },
    };
    for _ in 0..opts.max_iter {
        let next = phi(&xi, coeffs, x)?;
        diag.iterations += 1;
        diag.range_excess = diag.range_excess.max(excess(&next));
        let d = next.l2_distance(&xi)?;
        if let Some(&prev) = diag.distances.last() {
            if prev > 1e-14 {
                diag.ratios.push(d / prev);
            }
        }
        diag.distances.push(d);
        if d <= opts.tol {
            diag.final_residual = d;
            return Ok((xi, diag));
        }
        xi = next;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        tol: opts.tol,
        last: diag.distances.last().copied().unwrap_or(f64::NAN),
        ratios: diag.ratios,
    })
}

/// Fixed point at one spatial point together with `u(x, T) = Y_0`, `grad u(x, T) = Z_0`.
#[derive(Debug, Clone)]
pub struct PointSolution {
    pub xi: TerminalVariable,
    pub value: Vec<f64>,
    pub gradient: Vec<f64>,
    pub diagnostics: FixedPointDiagnostics,
}

pub fn solve_point(coeffs: &CoefficientSet, x: f64, tree: PathTree, opts: &PicardOptions) -> Result<PointSolution> {
    let (xi, diagnostics) = picard_solve(coeffs, x, tree, opts)?;
    let sol = backward_solution(&xi, coeffs)?;
    Ok(PointSolution { value: sol.y.node(0, 0).to_vec(), gradient: sol.z.node(0, 0).to_vec(), xi, diagnostics })
}

/// `u(., T)` and `grad u(., T)` on every grid point, `T` the tree horizon.
pub fn solve_u(
    coeffs: &CoefficientSet,
    grid: SpatialGrid,
    tree: PathTree,
    opts: &PicardOptions,
) -> Result<(GridFunction, Vec<FixedPointDiagnostics>)> {
    grid.validate()?;
    let m = coeffs.dim();
    let points: Vec<PointSolution> = (0..grid.points)
        .into_par_iter()
        .map(|i| solve_point(coeffs, grid.x(i), tree, opts))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(grid.points * m);
    let mut gradient = Vec::with_capacity(grid.points * m);
    let mut diags = Vec::with_capacity(grid.points);
    for p in points {
        values.extend(p.value);
        gradient.extend(p.gradient);
        diags.push(p.diagnostics);
    }
    Ok((GridFunction::new(grid, m, values)?.with_gradient(gradient)?, diags))
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub u: GridFunction,
    /// End time of each interval.
    pub times: Vec<f64>,
    /// Interpolated gradient bound observed at the start of each interval.
    pub gradient_bounds: Vec<f64>,
    pub max_iterations: usize,
}

/// Solves on consecutive intervals no longer than the contraction horizons for
/// `C_u0` and the supplied uniform gradient bound `c_u`, restarting from the
/// interpolated grid solution each time.
pub fn chain_solve(
    coeffs: &CoefficientSet,
    grid: SpatialGrid,
    total: f64,
    steps_per_interval: usize,
    c_u: f64,
    opts: &PicardOptions,
) -> Result<ChainResult> {
    if !(total > 0.0) {
        return Err(Error::invalid("total", "horizon must be positive"));
    }
    if !(c_u >= 0.0) {
        return Err(Error::invalid("c_u", "gradient bound must be non-negative"));
    }
    let c_f = coeffs.c_f();
    let tau = contraction_horizon(coeffs.c_u0(), c_f)?.min(contraction_horizon(c_u, c_f)?);
    let intervals = if tau.is_finite() { (total / tau - 1e-9).ceil().max(1.0) as usize } else { 1 };
    let len = total / intervals as f64;
    let tree = PathTree::new(steps_per_interval, len)?;
    let mut current = coeffs.clone();
    let mut times = Vec::with_capacity(intervals);
    let mut bounds = Vec::with_capacity(intervals);
    let mut max_iterations = 0;
    let mut u = None;
    for j in 0..intervals {
        let slope = current.c_u0();
        bounds.push(slope);
        if j > 0 && slope > 2.0 * c_u {
            return Err(Error::GradientBound { observed: slope, bound: c_u });
        }
        let (next, diags) = solve_u(&current, grid, tree, opts)?;
        max_iterations = max_iterations.max(diags.iter().map(|d| d.iterations).max().unwrap_or(0));
        times.push(len * (j + 1) as f64);
        if j + 1 < intervals {
            current = coeffs.with_initial(InitialData::Grid(Arc::new(next.clone())))?;
        }
        u = Some(next);
    }
    Ok(ChainResult { u: u.expect("at least one interval"), times, gradient_bounds: bounds, max_iterations })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RepresentationError {
    /// `sup |u(x + B~_k, T - t_k) - Y_k|`.
    pub value: f64,
    /// `sup |grad u(x + B~_k, T - t_k) - Z_k|` over levels `0..N-1`.
    pub gradient: f64,
}

/// Compares the fixed point's `(Y, Z)` along the compensated paths with a
/// reference family `u(., s)`, `s` in `[0, T]`.
pub fn check_representation(
    xi_star: &TerminalVariable,
    coeffs: &CoefficientSet,
    x: f64,
    family: &GridFamily,
) -> Result<RepresentationError> {
    let tree = xi_star.tree();
    let n = tree.steps();
    let m = coeffs.dim();
    if family.dim() != m {
        return Err(Error::ShapeMismatch("reference family has a different component count".into()));
    }
    let sol = backward_solution(xi_star, coeffs)?;
    let bt = shifted_brownian(&drift_process(&sol, coeffs));
    let grid = family.grid();
    let mut err = RepresentationError { value: 0.0, gradient: 0.0 };
    let mut u = vec![0.0; m];
    for k in 0..=n {
        let s = tree.horizon() - tree.time(k);
        for (p, b) in bt.level(k).iter().enumerate() {
            let at = x + b;
            if !grid.contains(at) {
                return Err(Error::RangeViolation { x: at, x_min: grid.x_min, x_max: grid.x_max });
            }
            family.value(at, s, &mut u);
            for (a, e) in u.iter().zip(sol.y.node(k, p)) {
                err.value = err.value.max((a - e).abs());
            }
            if k < n {
                family.gradient(at, s, &mut u);
                for (a, e) in u.iter().zip(sol.z.node(k, p)) {
                    err.gradient = err.gradient.max((a - e).abs());
                }
            }
        }
    }
    Ok(err)
}
