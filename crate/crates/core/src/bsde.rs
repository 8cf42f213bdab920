//! Backward equations on the tree and their Girsanov transform.
//!
//! The explicit scheme reads
//! `Y_k = E[Y_{k+1} | F_k] + g(t_k, E[Y_{k+1} | F_k], Z_k) dt`, with
//! `Z_k` the sibling difference of `Y_{k+1}` over `2h`. The martingale part is
//! `S_k = Y_k + sum_{j<k} g_j dt`, so that `dY = -g dt + dS` holds exactly.

use crate::error::{Error, Result};
use crate::girsanov::{compensate_with_density, exponential_martingale, tilt_measure, DensityProcess, Measure};
use crate::tree::{conditional_expectations, sibling_density, AdaptedProcess, TerminalVariable};

/// Driver `g(t, y, z)` with values in `R^m`; `z` holds one entry per component (d = 1).
pub trait Driver: Sync {
    fn eval(&self, t: f64, y: &[f64], z: &[f64], out: &mut [f64]);

    /// Declared global Lipschitz constant.
    fn lipschitz(&self) -> f64;

    fn is_zero(&self) -> bool {
        false
    }
}

/// The zero driver.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoDriver;

impl Driver for NoDriver {
    fn eval(&self, _t: f64, _y: &[f64], _z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn lipschitz(&self) -> f64 {
        0.0
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Driver backed by a closure.
pub struct FnDriver<F> {
    f: F,
    lipschitz: f64,
}

impl<F> FnDriver<F>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Sync,
{
    pub fn new(lipschitz: f64, f: F) -> Self {
        Self { f, lipschitz }
    }
}

impl<F> Driver for FnDriver<F>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Sync,
{
    fn eval(&self, t: f64, y: &[f64], z: &[f64], out: &mut [f64]) {
        (self.f)(t, y, z, out)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[derive(Debug, Clone)]
pub struct BsdeSolution {
    pub y: AdaptedProcess,
    /// Density of the martingale part, levels `0..N-1`.
    pub z: AdaptedProcess,
    /// Martingale part, levels `0..=N`.
    pub s: AdaptedProcess,
    pub measure: Measure,
}

/// `Y_k = E[xi | F_k]`, `Z = D_B(Y)`.
pub fn solve_martingale_bsde(xi: &TerminalVariable) -> BsdeSolution {
    let tree = xi.tree();
    let measure = Measure::symmetric(tree);
    let y = conditional_expectations(xi, &measure).expect("same tree");
    let z = sibling_density(&y);
    BsdeSolution { s: y.clone(), y, z, measure }
}

/// Explicit backward scheme for a Lipschitz driver.
pub fn solve_driver_bsde(xi: &TerminalVariable, g: &dyn Driver) -> Result<BsdeSolution> {
    if g.is_zero() {
        return Ok(solve_martingale_bsde(xi));
    }
    let tree = xi.tree();
    let product = tree.horizon() * g.lipschitz();
    if !(product < 1.0) {
        return Err(Error::Stability { product });
    }
    let n = tree.steps();
    let dim = xi.dim();
    let dt = tree.dt();

    let mut y_levels = vec![Vec::new(); n + 1];
    let mut z_levels = vec![Vec::new(); n];
    // accumulated driver sum_{j<k} g_j dt per node, filled top-down afterwards
    let mut g_levels = vec![Vec::new(); n];
    y_levels[n] = xi.values().to_vec();
    let mut ey = vec![0.0; dim];
    let mut gv = vec![0.0; dim];
    for k in (0..n).rev() {
        let child = &y_levels[k + 1];
        let nodes = tree.level_len(k);
        let mut y = vec![0.0; nodes * dim];
        let mut z = vec![0.0; nodes * dim];
        let mut gk = vec![0.0; nodes * dim];
        for p in 0..nodes {
            let inv = 1.0 / (tree.brownian(k + 1, 2 * p) - tree.brownian(k + 1, 2 * p + 1));
            let up = &child[2 * p * dim..(2 * p + 1) * dim];
            let down = &child[(2 * p + 1) * dim..(2 * p + 2) * dim];
            for i in 0..dim {
                ey[i] = 0.5 * (up[i] + down[i]);
                z[p * dim + i] = (up[i] - down[i]) * inv;
            }
            g.eval(tree.time(k), &ey, &z[p * dim..(p + 1) * dim], &mut gv);
            for i in 0..dim {
                y[p * dim + i] = ey[i] + gv[i] * dt;
                gk[p * dim + i] = gv[i];
            }
        }
        y_levels[k] = y;
        z_levels[k] = z;
        g_levels[k] = gk;
    }
    let y = AdaptedProcess::from_levels(tree, dim, y_levels);
    let z = AdaptedProcess::from_levels(tree, dim, z_levels);

    let mut s = y.clone();
    let mut acc: Vec<f64> = vec![0.0; dim];
    for k in 0..n {
        let mut next = vec![0.0; tree.level_len(k + 1) * dim];
        for c in 0..tree.level_len(k + 1) {
            let p = c / 2;
            for i in 0..dim {
                next[c * dim + i] = acc[p * dim + i] + g_levels[k][p * dim + i] * dt;
            }
        }
        let level = s.level_mut(k + 1);
        for (v, a) in level.iter_mut().zip(&next) {
            *v += a;
        }
        acc = next;
    }
    Ok(BsdeSolution { y, z, s, measure: Measure::symmetric(tree) })
}

/// Result of moving a solution to the tilted measure.
#[derive(Debug, Clone)]
pub struct TransformedBsde {
    pub y: AdaptedProcess,
    /// `S~ = S - <S, N>`.
    pub s_tilde: AdaptedProcess,
    /// `D_{B~}(S~)`.
    pub z_tilde: AdaptedProcess,
    pub density: DensityProcess,
    pub measure: Measure,
    /// Largest per-node defect of the transformed one-step equation.
    pub residual: f64,
    /// Largest one-step defect of `S~` as a `Q`-martingale.
    pub martingale_residual: f64,
}

/// Transforms a `P`-solution with `N = sum f(Y, Z) dB` and checks the equation
/// `dY = -g(t, Y, Z~) dt + Z~ f dt + dS~` under `Q`.
pub fn transform_bsde<F>(sol: &BsdeSolution, g: &dyn Driver, f: F) -> Result<TransformedBsde>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let tree = sol.y.tree();
    let n = tree.steps();
    let dim = sol.y.dim();
    let dt = tree.dt();
    let fvals = AdaptedProcess::from_fn(tree, 1, n - 1, |k, p, o| o[0] = f(sol.y.node(k, p), sol.z.node(k, p)));
    let density = exponential_martingale(&fvals)?;
    let measure = tilt_measure(&density);
    let s_tilde = compensate_with_density(&sol.s, &sol.z, &fvals);
    let z_tilde = sibling_density(&s_tilde);

    let mut residual = 0.0f64;
    let mut gv = vec![0.0; dim];
    let mut ey = vec![0.0; dim];
    for k in 0..n {
        let yc = sol.y.level(k + 1);
        let yp = sol.y.level(k);
        let sc = s_tilde.level(k + 1);
        let sp = s_tilde.level(k);
        for p in 0..tree.level_len(k) {
            for i in 0..dim {
                ey[i] = 0.5 * (yc[2 * p * dim + i] + yc[(2 * p + 1) * dim + i]);
            }
            let zt = z_tilde.node(k, p);
            g.eval(tree.time(k), &ey, zt, &mut gv);
            let fk = fvals.node(k, p)[0];
            for c in [2 * p, 2 * p + 1] {
                for i in 0..dim {
                    let lhs = yc[c * dim + i] - yp[p * dim + i];
                    let rhs = -gv[i] * dt + zt[i] * fk * dt + (sc[c * dim + i] - sp[p * dim + i]);
                    residual = residual.max((lhs - rhs).abs());
                }
            }
        }
    }
    let martingale_residual = crate::tree::martingale_residual(&s_tilde, &measure)?.0;
    Ok(TransformedBsde { y: sol.y.clone(), s_tilde, z_tilde, density, measure, residual, martingale_residual })
}
