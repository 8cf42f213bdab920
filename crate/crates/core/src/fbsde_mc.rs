//! Monte Carlo simulation of the forward-backward system
//! `dX = -f(Y, Z) dt + dB`, `dY = -g(Y, Z) dt + Z dB`, `Y_T = u0(X_T)`,
//! decoupled through a known field `Y_t = u(X_t, T - t)`, `Z_t = grad u(X_t, T - t)`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsde::Driver;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::pde::grid::GridFamily;

/// `u` and `grad u` on `R^d x [0, T]` together with the coefficients.
pub trait DecouplingField: Sync {
    /// Spatial dimension `d`.
    fn space_dim(&self) -> usize;
    /// Component count `m`.
    fn dim(&self) -> usize;
    /// `u(x, s)` into `u` and `grad u` (`m x d`, row-major) into `grad`.
    fn eval(&self, x: &[f64], s: f64, u: &mut [f64], grad: &mut [f64]);
    fn initial(&self, x: &[f64], out: &mut [f64]);
    /// Forward drift coefficient `f(y, z)` in `R^d`.
    fn convection(&self, y: &[f64], z: &[f64], out: &mut [f64]);
    fn driver(&self, y: &[f64], z: &[f64], out: &mut [f64]);
    /// Whether `x` lies in the region where `eval` is meaningful.
    fn contains(&self, x: &[f64]) -> bool;
    /// Distance from `x` to the boundary of that region.
    fn clearance(&self, x: &[f64]) -> f64;
}

/// One-dimensional field interpolated from a grid family.
#[derive(Debug, Clone)]
pub struct GridField {
    coeffs: CoefficientSet,
    family: GridFamily,
}

impl GridField {
    pub fn new(coeffs: &CoefficientSet, family: GridFamily) -> Result<Self> {
        if family.dim() != coeffs.dim() {
            return Err(Error::ShapeMismatch("family and coefficients differ in component count".into()));
        }
        Ok(Self { coeffs: coeffs.clone(), family })
    }
}

impl DecouplingField for GridField {
    fn space_dim(&self) -> usize {
        1
    }

    fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    fn eval(&self, x: &[f64], s: f64, u: &mut [f64], grad: &mut [f64]) {
        self.family.value(x[0], s, u);
        self.family.gradient(x[0], s, grad);
    }

    fn initial(&self, x: &[f64], out: &mut [f64]) {
        self.coeffs.initial.eval(x[0], out);
    }

    fn convection(&self, y: &[f64], z: &[f64], out: &mut [f64]) {
        out[0] = self.coeffs.convection.eval(y, z);
    }

    fn driver(&self, y: &[f64], z: &[f64], out: &mut [f64]) {
        self.coeffs.driver.eval(0.0, y, z, out);
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.family.grid().contains(x[0])
    }

    fn clearance(&self, x: &[f64]) -> f64 {
        let g = self.family.grid();
        (x[0] - g.x_min).min(g.x_max - x[0])
    }
}

/// Heat flow of a product of Gaussians on `R^d` (no convection, no driver):
/// `u(x, s) = prod_j w / sqrt(w^2 + s) exp(-x_j^2 / (2 (w^2 + s)))`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianHeatField {
    pub space_dim: usize,
    pub width: f64,
}

impl DecouplingField for GaussianHeatField {
    fn space_dim(&self) -> usize {
        self.space_dim
    }

    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], s: f64, u: &mut [f64], grad: &mut [f64]) {
        let v = self.width * self.width + s;
        let val: f64 = x.iter().map(|xj| (self.width / v.sqrt()) * (-xj * xj / (2.0 * v)).exp()).product();
        u[0] = val;
        for (g, xj) in grad.iter_mut().zip(x) {
            *g = -xj / v * val;
        }
    }

    fn initial(&self, x: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; self.space_dim];
        self.eval(x, 0.0, out, &mut g);
    }

    fn convection(&self, _y: &[f64], _z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn driver(&self, _y: &[f64], _z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn contains(&self, _x: &[f64]) -> bool {
        true
    }

    fn clearance(&self, _x: &[f64]) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub x: Vec<f64>,
    pub horizon: f64,
    /// Number of leading paths whose trajectories are kept.
    #[serde(default)]
    pub record_paths: usize,
}

impl McConfig {
    fn validate(&self, d: usize) -> Result<usize> {
        if self.paths == 0 {
            return Err(Error::invalid("paths", "need at least one path"));
        }
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return Err(Error::invalid("dt", "step and horizon must be positive"));
        }
        if self.x.len() != d {
            return Err(Error::ShapeMismatch(format!("start point has {} coordinates, field {d}", self.x.len())));
        }
        Ok((self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Standard error of the mean.
    pub std_error: f64,
}

impl MeanEstimate {
    fn from_samples(v: impl Iterator<Item = f64> + Clone) -> Self {
        let n = v.clone().count() as f64;
        let mean = v.clone().sum::<f64>() / n;
        let var = if n > 1.0 { v.map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, std_error: (var / n).sqrt() }
    }

    /// Half-width of the 95% normal confidence interval.
    pub fn half_width(&self) -> f64 {
        1.96 * self.std_error
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathRecord {
    pub path: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McStatistics {
    pub paths: usize,
    pub steps: usize,
    pub dt: f64,
    /// `|Y_T - u0(X_T)|`.
    pub residual: MeanEstimate,
    /// `max_t |Y_t|`.
    pub max_abs_y: MeanEstimate,
    pub max_abs_y_worst: f64,
    /// Componentwise mean of `X_T`.
    pub terminal: Vec<MeanEstimate>,
    #[serde(skip)]
    pub trajectories: Vec<PathRecord>,
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

struct PathOutcome {
    residual: f64,
    max_abs_y: f64,
    terminal: Vec<f64>,
    escaped: bool,
    records: Vec<PathRecord>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn simulate_path<F: DecouplingField + ?Sized>(field: &F, cfg: &McConfig, steps: usize, path: usize) -> PathOutcome {
    let d = field.space_dim();
    let m = field.dim();
    let dt = cfg.horizon / steps as f64;
    let sq = dt.sqrt();
    let mut rng = path_rng(cfg.seed, path);
    let mut x = cfg.x.clone();
    let (mut u, mut z) = (vec![0.0; m], vec![0.0; m * d]);
    let (mut drift, mut gv) = (vec![0.0; d], vec![0.0; m]);
    field.eval(&x, cfg.horizon, &mut u, &mut z);
    let mut y = u.clone();
    let mut max_abs_y = norm(&y);
    let keep = path < cfg.record_paths;
    let mut records = Vec::new();
    let mut db = vec![0.0; d];
    for n in 0..steps {
        if keep {
            records.push(PathRecord { path, t: n as f64 * dt, x: x[0], y: y[0] });
        }
        if !field.contains(&x) {
            return PathOutcome { residual: f64::NAN, max_abs_y, terminal: x, escaped: true, records };
        }
        let s = cfg.horizon - n as f64 * dt;
        field.eval(&x, s, &mut u, &mut z);
        field.convection(&u, &z, &mut drift);
        field.driver(&u, &z, &mut gv);
        for b in db.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut rng);
            *b = g * sq;
        }
        for i in 0..m {
            let zdb: f64 = (0..d).map(|j| z[i * d + j] * db[j]).sum();
            y[i] += -gv[i] * dt + zdb;
        }
        for j in 0..d {
            x[j] += -drift[j] * dt + db[j];
        }
        max_abs_y = max_abs_y.max(norm(&y));
    }
    if keep {
        records.push(PathRecord { path, t: cfg.horizon, x: x[0], y: y[0] });
    }
    let escaped = !field.contains(&x);
    field.initial(&x, &mut u);
    let diff: Vec<f64> = y.iter().zip(&u).map(|(a, b)| a - b).collect();
    PathOutcome { residual: norm(&diff), max_abs_y, terminal: x, escaped, records }
}

fn check_margin<F: DecouplingField + ?Sized>(field: &F, cfg: &McConfig) -> Result<()> {
    let margin = 6.0 * cfg.horizon.sqrt();
    let c = field.clearance(&cfg.x);
    if c < margin {
        return Err(Error::RangeViolation { x: cfg.x[0], x_min: cfg.x[0] - c, x_max: cfg.x[0] + c });
    }
    Ok(())
}

/// Euler-Maruyama for `X` and the forward form of `Y`, one independent stream per path.
pub fn simulate_fbsde<F: DecouplingField + ?Sized>(field: &F, cfg: &McConfig) -> Result<McStatistics> {
    let steps = cfg.validate(field.space_dim())?;
    check_margin(field, cfg)?;
    let outcomes: Vec<PathOutcome> = (0..cfg.paths).into_par_iter().map(|p| simulate_path(field, cfg, steps, p)).collect();
    let escaped = outcomes.iter().filter(|o| o.escaped).count();
    if escaped > 0 {
        return Err(Error::Escape { escaped, paths: cfg.paths, rate: escaped as f64 / cfg.paths as f64 });
    }
    let d = field.space_dim();
    let terminal = (0..d).map(|j| MeanEstimate::from_samples(outcomes.iter().map(move |o| o.terminal[j]))).collect();
    let trajectories = outcomes.iter().flat_map(|o| o.records.iter().copied()).collect();
    Ok(McStatistics {
        paths: cfg.paths,
        steps,
        dt: cfg.horizon / steps as f64,
        residual: MeanEstimate::from_samples(outcomes.iter().map(|o| o.residual)),
        max_abs_y: MeanEstimate::from_samples(outcomes.iter().map(|o| o.max_abs_y)),
        max_abs_y_worst: outcomes.iter().map(|o| o.max_abs_y).fold(0.0, f64::max),
        terminal,
        trajectories,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GirsanovCrossCheck {
    /// Mean of `X_T` under the drifted Euler scheme.
    pub drifted: Vec<MeanEstimate>,
    /// Weighted mean of `x + B_T` with weights `exp(sum b dB - 1/2 sum |b|^2 dt)`.
    pub reweighted: Vec<MeanEstimate>,
    pub mean_weight: MeanEstimate,
    /// `|drifted - reweighted| / sqrt(se1^2 + se2^2)`, largest over coordinates.
    pub z_score: f64,
    /// `|difference|` in units of the combined 95% half-width.
    pub half_widths: f64,
    pub pass: bool,
}

/// Reweights drift-free paths by the discrete exponential density of the drift
/// `b = -f(u, grad u)` and compares with the drifted simulation (independent streams).
pub fn girsanov_cross_check<F: DecouplingField + ?Sized>(field: &F, cfg: &McConfig) -> Result<GirsanovCrossCheck> {
    let steps = cfg.validate(field.space_dim())?;
    check_margin(field, cfg)?;
    let drifted = simulate_fbsde(field, cfg)?.terminal;
    let d = field.space_dim();
    let m = field.dim();
    let dt = cfg.horizon / steps as f64;
    let sq = dt.sqrt();
    let seed = cfg.seed ^ 0x9e37_79b9_7f4a_7c15;
    let samples: Vec<(f64, Vec<f64>, bool)> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut x = cfg.x.clone();
            let (mut u, mut z, mut b) = (vec![0.0; m], vec![0.0; m * d], vec![0.0; d]);
            let mut log_w = 0.0;
            let mut out = false;
            for n in 0..steps {
                out |= !field.contains(&x);
                field.eval(&x, cfg.horizon - n as f64 * dt, &mut u, &mut z);
                field.convection(&u, &z, &mut b);
                for j in 0..d {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    let inc = g * sq;
                    // drift of the target law is -f
                    log_w += -b[j] * inc - 0.5 * b[j] * b[j] * dt;
                    x[j] += inc;
                }
            }
            (log_w.exp(), x, out)
        })
        .collect();
    let escaped = samples.iter().filter(|s| s.2).count();
    if escaped > 0 {
        return Err(Error::Escape { escaped, paths: cfg.paths, rate: escaped as f64 / cfg.paths as f64 });
    }
    let reweighted: Vec<MeanEstimate> =
        (0..d).map(|j| MeanEstimate::from_samples(samples.iter().map(move |(w, x, _)| w * x[j]))).collect();
    let mean_weight = MeanEstimate::from_samples(samples.iter().map(|s| s.0));
    let mut z_score = 0.0f64;
    for (a, b) in drifted.iter().zip(&reweighted) {
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        let diff = (a.mean - b.mean).abs();
        z_score = z_score.max(if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    let half_widths = z_score / 1.96;
    Ok(GirsanovCrossCheck { drifted, reweighted, mean_weight, z_score, half_widths, pass: half_widths <= 3.0 })
}

/// CSV `path,t,x,y` of the recorded trajectories.
pub fn write_paths_csv<W: Write>(records: &[PathRecord], mut w: W) -> Result<()> {
    writeln!(w, "path,t,x,y")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.path, r.t, r.x, r.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(paths: usize, dt: f64, d: usize) -> McConfig {
        McConfig { paths, dt, seed: 7, x: vec![0.2; d], horizon: 0.25, record_paths: 0 }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let f = GaussianHeatField { space_dim: 2, width: 1.0 };
        let a = simulate_fbsde(&f, &cfg(500, 0.05, 2)).unwrap();
        let b = simulate_fbsde(&f, &cfg(500, 0.05, 2)).unwrap();
        assert_eq!(a.residual.mean.to_bits(), b.residual.mean.to_bits());
        assert_eq!(a.terminal[1].mean.to_bits(), b.terminal[1].mean.to_bits());
    }

    #[test]
    fn single_step_by_hand() {
        let f = GaussianHeatField { space_dim: 1, width: 1.0 };
        let c = McConfig { paths: 1, dt: 0.25, seed: 11, x: vec![0.3], horizon: 0.25, record_paths: 1 };
        let s = simulate_fbsde(&f, &c).unwrap();
        let mut rng = path_rng(11, 0);
        let g: f64 = StandardNormal.sample(&mut rng);
        let db = 0.5 * g;
        let v: f64 = 1.25;
        let u = (1.0 / v.sqrt()) * (-0.09 / (2.0 * v)).exp();
        let y_t = u + (-0.3 / v * u) * db;
        let x_t = 0.3 + db;
        let expect = (y_t - (-x_t * x_t / 2.0).exp()).abs();
        assert!((s.residual.mean - expect).abs() < 1e-15);
        assert_eq!(s.trajectories.len(), 2);
    }

    #[test]
    fn weights_have_unit_mean_without_drift() {
        let f = GaussianHeatField { space_dim: 2, width: 0.8 };
        let c = girsanov_cross_check(&f, &cfg(2000, 0.05, 2)).unwrap();
        assert!(c.mean_weight.mean == 1.0 && c.pass);
    }

    #[test]
    fn bad_config() {
        let f = GaussianHeatField { space_dim: 1, width: 1.0 };
        assert!(simulate_fbsde(&f, &cfg(0, 0.1, 1)).is_err());
        assert!(simulate_fbsde(&f, &cfg(10, 0.1, 2)).is_err());
    }
}
