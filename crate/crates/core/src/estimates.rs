//! Gradient estimates for the convection-only system (`f = f(y)`, `g = 0`):
//! both sides evaluated numerically, the PDE side from finite differences and the
//! heat semigroup, the probabilistic side exactly on the tree.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::bsde::{solve_martingale_bsde, BsdeSolution, Driver};
use crate::cameron_martin::{drift_process, picard_solve, PicardOptions};
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::girsanov::{exponential_martingale, DensityProcess, Measure};
use crate::pde::fd::{diffusion_limit, padded_grid, solve_fd, solve_fd_frames};
use crate::pde::grid::SpatialGrid;
use crate::pde::heat::heat_apply_grid_gradient;
use crate::tree::{bracket, PathTree, TerminalVariable};

pub const DEFAULT_SLACK: f64 = 0.10;
/// Sample count per axis for the maximum of `|f|^2` over the ball.
pub const BALL_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Serialize)]
pub struct EstimateInputs {
    pub x: f64,
    pub horizon: f64,
    pub t: f64,
    pub p: f64,
    pub coefficients: String,
    pub steps: usize,
    pub grid: SpatialGrid,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub name: String,
    pub component: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub inputs: EstimateInputs,
    pub extra: BTreeMap<String, f64>,
}

impl EstimateReport {
    fn new(name: &str, component: usize, lhs: f64, rhs: f64, slack: f64, inputs: EstimateInputs) -> Self {
        let pass = lhs <= rhs * (1.0 + slack);
        Self { name: name.into(), component, lhs, rhs, slack, pass, inputs, extra: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateSettings {
    pub steps: usize,
    pub dx: f64,
    /// Finite-difference step; defaults to the diffusion limit.
    pub dt: Option<f64>,
    /// Left-endpoint nodes of the time integral on the PDE side.
    pub time_nodes: usize,
    pub slack: f64,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        Self { steps: 12, dx: 0.02, dt: None, time_nodes: 64, slack: DEFAULT_SLACK }
    }
}

/// Fixed point, its martingale solution and the density `R = E(int f(Y) dB)`
/// at one `(x, T)`, shared by all estimates.
#[derive(Debug, Clone)]
pub struct EstimateContext {
    coeffs: CoefficientSet,
    x: f64,
    tree: PathTree,
    settings: EstimateSettings,
    grid: SpatialGrid,
    xi: TerminalVariable,
    sol: BsdeSolution,
    density: DensityProcess,
}

impl EstimateContext {
    pub fn new(coeffs: &CoefficientSet, x: f64, horizon: f64, settings: EstimateSettings) -> Result<Self> {
        check_scope(coeffs)?;
        let tree = PathTree::new(settings.steps, horizon)?;
        let opts = PicardOptions { tol: 1e-12, max_iter: 200, start: None };
        let (xi, _) = picard_solve(coeffs, x, tree, &opts)?;
        let sol = solve_martingale_bsde(&xi);
        let density = exponential_martingale(&drift_process(&sol, coeffs))?;
        let grid = padded_grid(x, x, horizon, settings.dx)?;
        Ok(Self { coeffs: coeffs.clone(), x, tree, settings, grid, xi, sol, density })
    }

    pub fn tree(&self) -> PathTree {
        self.tree
    }

    pub fn fixed_point(&self) -> &TerminalVariable {
        &self.xi
    }

    pub fn density(&self) -> &DensityProcess {
        &self.density
    }

    fn inputs(&self, t: f64, p: f64) -> EstimateInputs {
        EstimateInputs {
            x: self.x,
            horizon: self.tree.horizon(),
            t,
            p,
            coefficients: self.coeffs.label(),
            steps: self.tree.steps(),
            grid: self.grid,
        }
    }

    fn fd_dt(&self) -> f64 {
        let lim = diffusion_limit(&self.grid);
        self.settings.dt.map_or(lim, |d| d.min(lim))
    }

    /// Tree level of time `t`.
    fn level_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.tree.dt()).round();
        if !(t > 0.0) || (k * self.tree.dt() - t).abs() > 1e-9 * self.tree.horizon() || k as usize > self.tree.steps() {
            return Err(Error::invalid("t", format!("{t} must be a positive multiple of the tree step {} up to T", self.tree.dt())));
        }
        Ok(k as usize)
    }

    /// `E <Y^i>_{t_k}` under `P`.
    pub fn expected_bracket(&self, component: usize, level: usize) -> Result<f64> {
        let yi = self.sol.y.component(component);
        let br = bracket(&yi, &yi, &Measure::symmetric(self.tree))?;
        Ok(br.expectation(level, &Measure::symmetric(self.tree))[0])
    }

    /// `sum_{j<k} E R_{t_j}^q dt`, left endpoints.
    fn integrated_moment(&self, q: f64, level: usize) -> f64 {
        self.density.moments(q)[..level].iter().sum::<f64>() * self.tree.dt()
    }

    /// `int_0^t P_s |grad u^i|^p (x, T - s) ds` by the left-endpoint rule.
    pub fn heat_side(&self, component: usize, t: f64, p: f64) -> Result<f64> {
        let horizon = self.tree.horizon();
        let m = self.settings.time_nodes.max(1);
        let ds = t / m as f64;
        let mut times: Vec<f64> = (0..m).map(|j| horizon - j as f64 * ds).collect();
        times.reverse();
        let fam = solve_fd_frames(&self.coeffs, self.grid, &times, self.fd_dt())?;
        let mut total = 0.0;
        for (frame, time) in fam.frames().iter().zip(fam.times()) {
            let s = (horizon - time).max(0.0);
            total += heat_apply_grid_gradient(frame, component, |v| v.abs().powf(p), s, self.x)?;
        }
        Ok(total * ds)
    }

    fn check_component(&self, component: usize) -> Result<()> {
        if component >= self.coeffs.dim() {
            return Err(Error::invalid("component", format!("{component} out of range for {} components", self.coeffs.dim())));
        }
        Ok(())
    }

    /// Heat-side integral against bracket and density moments (Hoelder form).
    pub fn estimate_one(&self, component: usize, t: f64, p: f64) -> Result<EstimateReport> {
        check_p(p)?;
        self.check_component(component)?;
        let k = self.level_of(t)?;
        let q = 2.0 / (2.0 - p);
        let br = self.expected_bracket(component, k)?;
        let moment = self.integrated_moment(q, k);
        let rhs = br.powf(p / 2.0) * moment.powf(1.0 - p / 2.0);
        let lhs = self.heat_side(component, t, p)?;
        let mut r = EstimateReport::new("estimate_one", component, lhs, rhs, self.settings.slack, self.inputs(t, p));
        r.extra.insert("expected_bracket".into(), br);
        r.extra.insert("integrated_moment".into(), moment);
        Ok(r)
    }

    /// `|grad u^i|^2 (x, T)` against `(1/t) E <Y^i>_t` at `t = dt`; values at
    /// `2dt` and `4dt` are recorded in `extra`.
    pub fn estimate_two(&self, component: usize) -> Result<EstimateReport> {
        self.check_component(component)?;
        let u = solve_fd(&self.coeffs, self.grid, self.tree.horizon(), self.fd_dt())?;
        let mut g = vec![0.0; self.coeffs.dim()];
        u.interpolate_gradient(self.x, &mut g);
        let lhs = g[component] * g[component];
        let dt = self.tree.dt();
        let rhs = self.expected_bracket(component, 1)? / dt;
        let mut r = EstimateReport::new("estimate_two", component, lhs, rhs, self.settings.slack, self.inputs(dt, 2.0));
        for j in [1usize, 2, 4] {
            if j <= self.tree.steps() {
                r.extra.insert(format!("bracket_rate_{j}dt"), self.expected_bracket(component, j)? / (j as f64 * dt));
            }
        }
        Ok(r)
    }

    /// Largest `|f(y)|^2` over `|y| <= sup |u0|` by dense sampling.
    pub fn max_f_squared(&self) -> Result<f64> {
        max_f_squared(&self.coeffs)
    }

    /// `E R_t^{2/(2-p)}` against `exp(p/(2-p)^2 t max |f|^2)`.
    pub fn density_moment_bound(&self, t: f64, p: f64) -> Result<EstimateReport> {
        check_p(p)?;
        let k = self.level_of(t)?;
        let q = 2.0 / (2.0 - p);
        let lhs = self.density.moments(q)[k];
        let mf = self.max_f_squared()?;
        let rhs = (p / (2.0 - p).powi(2) * t * mf).exp();
        let mut r = EstimateReport::new("density_moment_bound", 0, lhs, rhs, self.settings.slack, self.inputs(t, p));
        r.extra.insert("max_f_squared".into(), mf);
        Ok(r)
    }

    /// Heat-side integral against `|u0^i|^p exp(p/(2(2-p)) t max |f|^2)` (`d = 1`).
    pub fn gradient_lp_bound(&self, component: usize, t: f64, p: f64) -> Result<EstimateReport> {
        check_p(p)?;
        self.check_component(component)?;
        self.level_of(t)?;
        let sup = self.coeffs.u0_sup()[component];
        let mf = self.max_f_squared()?;
        let rhs = sup.powf(p) * (p / (2.0 * (2.0 - p)) * t * mf).exp();
        let lhs = self.heat_side(component, t, p)?;
        let mut r = EstimateReport::new("gradient_lp_bound", component, lhs, rhs, self.settings.slack, self.inputs(t, p));
        // the bound with the Hoelder factor t^{1-p/2} kept
        r.extra.insert("rhs_with_time_factor".into(), rhs * t.powf(1.0 - p / 2.0));
        Ok(r)
    }

    /// All four reports for every component at the given `(t, p)`.
    pub fn all(&self, t: f64, p: f64) -> Result<Vec<EstimateReport>> {
        let mut out = Vec::new();
        for i in 0..self.coeffs.dim() {
            out.push(self.estimate_one(i, t, p)?);
            out.push(self.estimate_two(i)?);
            out.push(self.gradient_lp_bound(i, t, p)?);
        }
        out.push(self.density_moment_bound(t, p)?);
        Ok(out)
    }
}

fn check_scope(coeffs: &CoefficientSet) -> Result<()> {
    if coeffs.convection.depends_on_z() || !coeffs.driver.is_zero() {
        return Err(Error::Scope("gradient estimates need f = f(y) and g = 0".into()));
    }
    if coeffs.dim() > 2 {
        return Err(Error::Scope("ball maximum is sampled for at most two components".into()));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::invalid("p", format!("{p} outside [1, 2)")));
    }
    Ok(())
}

/// `max |f(y)|^2` over the Euclidean ball of radius `sup |u0|`, sampled on a
/// `BALL_SAMPLES^m` lattice (`m <= 2`).
pub fn max_f_squared(coeffs: &CoefficientSet) -> Result<f64> {
    let m = coeffs.dim();
    if m > 2 {
        return Err(Error::Scope("ball maximum is sampled for at most two components".into()));
    }
    let r = coeffs.initial.sup_norm();
    let n = BALL_SAMPLES;
    let axis: Vec<f64> = (0..n).map(|j| -r + 2.0 * r * j as f64 / (n - 1) as f64).collect();
    let z = vec![0.0; m];
    let mut best = 0.0f64;
    if m == 1 {
        for &a in &axis {
            best = best.max(coeffs.convection.eval(&[a], &z).powi(2));
        }
    } else {
        for &a in &axis {
            for &b in &axis {
                if a * a + b * b <= r * r {
                    best = best.max(coeffs.convection.eval(&[a, b], &z).powi(2));
                }
            }
        }
    }
    Ok(best)
}

/// CSV summary `name,component,t,p,lhs,rhs,slack,pass`.
pub fn write_csv<W: Write>(reports: &[EstimateReport], mut w: W) -> Result<()> {
    writeln!(w, "name,component,t,p,lhs,rhs,slack,pass")?;
    for r in reports {
        writeln!(w, "{},{},{},{},{},{},{},{}", r.name, r.component + 1, r.inputs.t, r.inputs.p, r.lhs, r.rhs, r.slack, r.pass)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Convection, DriverKind, InitialData};

    fn ctx(set: &CoefficientSet, x: f64, horizon: f64) -> EstimateContext {
        EstimateContext::new(set, x, horizon, EstimateSettings { steps: 8, dx: 0.04, ..Default::default() }).unwrap()
    }

    #[test]
    fn scope_and_parameter_guards() {
        let set = CoefficientSet::new("d", InitialData::NegTanh, Convection::Burgers, DriverKind::Damping(0.1)).unwrap();
        assert!(matches!(EstimateContext::new(&set, 0.0, 0.1, EstimateSettings::default()), Err(Error::Scope(_))));
        let c = ctx(&CoefficientSet::from_catalog("burgers").unwrap(), 0.2, 0.1);
        assert!(c.estimate_one(0, 0.05, 2.0).is_err());
        assert!(c.estimate_one(0, 0.0333, 1.5).is_err());
    }

    #[test]
    fn constant_data_gives_zero_sides() {
        let set = CoefficientSet::new("c", InitialData::Constant(vec![0.5]), Convection::Burgers, DriverKind::Zero).unwrap();
        let c = ctx(&set, 0.0, 0.1);
        let r = c.estimate_one(0, 0.05, 1.5).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.pass);
        let r2 = c.estimate_two(0).unwrap();
        assert_eq!((r2.lhs, r2.rhs), (0.0, 0.0));
        assert!(r2.pass);
    }

    #[test]
    fn zero_convection_reduces_to_hoelder() {
        let set = CoefficientSet::from_catalog("zero").unwrap();
        let c = ctx(&set, 0.6, 0.2);
        let r = c.density_moment_bound(0.1, 1.5).unwrap();
        assert_eq!((r.lhs, r.rhs), (1.0, 1.0));
        let one = c.estimate_one(0, 0.1, 1.5).unwrap();
        assert!((one.extra["integrated_moment"] - 0.1).abs() < 1e-15);
        assert!(one.pass, "{one:?}");
    }

    #[test]
    fn constant_drift_moment_is_binomial() {
        let set = CoefficientSet::from_catalog("constant(0.8)").unwrap();
        let c = ctx(&set, 0.0, 0.4);
        let h = c.tree().h();
        let p: f64 = 1.5;
        let q = 2.0 / (2.0 - p);
        let one_step = 0.5 * ((1.0 + 0.8 * h).powf(q) + (1.0 - 0.8 * h).powf(q));
        let r = c.density_moment_bound(0.2, p).unwrap();
        assert!((r.lhs - one_step.powi(4)).abs() < 1e-12 * r.lhs);
        assert!(r.lhs <= r.rhs);
    }

    #[test]
    fn exponential_defect_shrinks_with_dt() {
        let c = 0.9f64;
        let p = 1.5;
        let q = 2.0 / (2.0 - p);
        let t = 0.5;
        let defect = |n: usize| {
            let h = (t / n as f64).sqrt();
            let binom = (0.5 * ((1.0 + c * h).powf(q) + (1.0 - c * h).powf(q))).powi(n as i32);
            (binom / (q * (q - 1.0) / 2.0 * c * c * t).exp() - 1.0).abs()
        };
        // leading term of n log E(1 + c dB)^q - a c^2 t is t c^4 (C(q,4) - a^2/2) dt
        let a = q * (q - 1.0) / 2.0;
        let c4 = q * (q - 1.0) * (q - 2.0) * (q - 3.0) / 24.0;
        let lead = t * c.powi(4) * (c4 - a * a / 2.0).abs();
        for n in [8usize, 16, 32, 64] {
            assert!(defect(n) <= 1.05 * lead * t / n as f64, "{n}: {}", defect(n));
        }
        assert!(defect(64) < defect(8));
    }

    #[test]
    fn bracket_bounded_by_data() {
        let set = CoefficientSet::from_catalog("tanh_clamped(1)").unwrap();
        let c = ctx(&set, 0.3, 0.2);
        for k in 0..=8 {
            assert!(c.expected_bracket(0, k).unwrap() <= 1.0);
        }
    }

    #[test]
    fn ball_maximum() {
        assert_eq!(max_f_squared(&CoefficientSet::from_catalog("burgers").unwrap()).unwrap(), 1.0);
        let mix = max_f_squared(&CoefficientSet::from_catalog("two_component_mix").unwrap()).unwrap();
        assert!(mix <= 1.25 && mix > 1.249);
    }
}
