//! Configuration-driven runs: one JSON file selects a command and its
//! parameters; results go to `verdict.json`, CSV tables and `manifest.json`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cameron_martin::{chain_solve, contraction_factor, contraction_horizon, solve_u, PicardOptions};
use crate::coefficients::{CoefficientSet, CoefficientSpec, Convection};
use crate::error::{Error, Result};
use crate::estimates::{self, EstimateContext, EstimateSettings};
use crate::fbsde_mc::{girsanov_cross_check, simulate_fbsde, write_paths_csv, GridField, McConfig};
use crate::flow::{bismut_check, picard_flow};
use crate::instances::{identity_residuals, RandomInstance};
use crate::pde::fd::diffusion_limit;
use crate::pde::{cole_hopf, padded_grid, solve_fd, solve_fd_frames, GridFamily, GridFunction, SpatialGrid};
use crate::tree::PathTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolvePde,
    SolveCm,
    ChainCm,
    CheckGirsanov,
    CheckBsdeTransform,
    CheckEstimates,
    CheckFlow,
    SimulateFbsde,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolvePde => "solve-pde",
            Command::SolveCm => "solve-cm",
            Command::ChainCm => "chain-cm",
            Command::CheckGirsanov => "check-girsanov",
            Command::CheckBsdeTransform => "check-bsde-transform",
            Command::CheckEstimates => "check-estimates",
            Command::CheckFlow => "check-flow",
            Command::SimulateFbsde => "simulate-fbsde",
            Command::Compare => "compare",
        }
    }
}

/// A catalog name such as `"burgers"`, or an object with overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientEntry {
    Name(String),
    Spec(CoefficientSpec),
}

impl CoefficientEntry {
    pub fn resolve(&self) -> Result<CoefficientSet> {
        match self {
            CoefficientEntry::Name(n) => CoefficientSet::from_catalog(n),
            CoefficientEntry::Spec(s) => CoefficientSet::from_spec(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub steps: usize,
    pub horizon: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { steps: 16, horizon: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeConfig {
    pub dx: f64,
    /// Defaults to the diffusion limit `0.9 dx^2`.
    pub dt: Option<f64>,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self { dx: 0.01, dt: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// Total horizon; defaults to twice the contraction horizon.
    pub total: Option<f64>,
    /// Uniform gradient bound; defaults to the Lipschitz constant of the initial data.
    pub gradient_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatesConfig {
    pub x: f64,
    pub horizon: f64,
    pub t: f64,
    pub p: Vec<f64>,
    pub steps: usize,
    pub dx: f64,
}

impl Default for EstimatesConfig {
    fn default() -> Self {
        Self { x: 0.25, horizon: 0.2, t: 0.1, p: vec![1.0, 1.5, 1.9], steps: 12, dx: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub steps: usize,
    pub horizon: f64,
    pub grid: SpatialGrid,
    pub tol: f64,
    pub max_iter: usize,
    pub oracle_dx: f64,
    /// Relative error bounds for `j = 0, 1, 2`.
    pub tolerances: [f64; 3],
    /// Relative bound for the agreement with the pointwise fixed point.
    pub cross_tolerance: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            steps: 12,
            horizon: 0.1,
            grid: SpatialGrid { x_min: -2.0, x_max: 2.0, points: 64 },
            tol: 1e-10,
            max_iter: 100,
            oracle_dx: 0.01,
            tolerances: [0.05, 0.05, 0.10],
            cross_tolerance: 0.07,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub paths: usize,
    /// Step counts, each the double of the previous one.
    pub steps: Vec<usize>,
    pub x: f64,
    pub horizon: f64,
    pub record_paths: usize,
    /// Largest admissible residual ratio per halving of the step.
    pub ratio: f64,
    pub oracle_dx: f64,
    pub oracle_frames: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self { paths: 100_000, steps: vec![8, 16, 32], x: 0.0, horizon: 0.25, record_paths: 0, ratio: 0.75, oracle_dx: 0.01, oracle_frames: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstancesConfig {
    pub count: usize,
    pub steps: usize,
    pub horizon: f64,
    pub dim: usize,
    pub tol: f64,
}

impl Default for InstancesConfig {
    fn default() -> Self {
        Self { count: 100, steps: 10, horizon: 1.0, dim: 2, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlackConfig {
    pub compare: f64,
    pub chain: f64,
    pub estimates: f64,
    pub contraction: f64,
}

impl Default for SlackConfig {
    fn default() -> Self {
        Self { compare: 0.05, chain: 0.05, estimates: estimates::DEFAULT_SLACK, contraction: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "default_coefficients")]
    pub coefficients: Vec<CoefficientEntry>,
    #[serde(default)]
    pub tree: TreeConfig,
    #[serde(default = "default_grid")]
    pub grid: SpatialGrid,
    #[serde(default)]
    pub pde: PdeConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub estimates: EstimatesConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub instances: InstancesConfig,
    #[serde(default)]
    pub slack: SlackConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_coefficients() -> Vec<CoefficientEntry> {
    vec![CoefficientEntry::Name("burgers".into())]
}

fn default_grid() -> SpatialGrid {
    SpatialGrid { x_min: -1.0, x_max: 1.0, points: 21 }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` must be positive and finite, got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` must be at least 1")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.is_empty() {
            return Err(Error::Config("`coefficients` must name at least one set".into()));
        }
        for c in &self.coefficients {
            c.resolve().map_err(|e| Error::Config(format!("`coefficients`: {e}")))?;
        }
        nonzero("tree.steps", self.tree.steps)?;
        positive("tree.horizon", self.tree.horizon)?;
        self.grid.validate().map_err(|e| Error::Config(format!("`grid`: {e}")))?;
        positive("pde.dx", self.pde.dx)?;
        if let Some(dt) = self.pde.dt {
            positive("pde.dt", dt)?;
        }
        positive("picard.tol", self.picard.tol)?;
        nonzero("picard.max_iter", self.picard.max_iter)?;
        if let Some(t) = self.chain.total {
            positive("chain.total", t)?;
        }
        if let Some(c) = self.chain.gradient_bound {
            positive("chain.gradient_bound", c)?;
        }
        let e = &self.estimates;
        positive("estimates.horizon", e.horizon)?;
        positive("estimates.t", e.t)?;
        positive("estimates.dx", e.dx)?;
        nonzero("estimates.steps", e.steps)?;
        if e.t > e.horizon {
            return Err(Error::Config("`estimates.t` must not exceed `estimates.horizon`".into()));
        }
        if e.p.is_empty() || e.p.iter().any(|p| !(*p >= 1.0 && *p < 2.0)) {
            return Err(Error::Config("`estimates.p` needs values in [1, 2)".into()));
        }
        let f = &self.flow;
        nonzero("flow.steps", f.steps)?;
        positive("flow.horizon", f.horizon)?;
        positive("flow.tol", f.tol)?;
        positive("flow.oracle_dx", f.oracle_dx)?;
        f.grid.validate().map_err(|e| Error::Config(format!("`flow.grid`: {e}")))?;
        let m = &self.mc;
        nonzero("mc.paths", m.paths)?;
        positive("mc.horizon", m.horizon)?;
        positive("mc.ratio", m.ratio)?;
        positive("mc.oracle_dx", m.oracle_dx)?;
        nonzero("mc.oracle_frames", m.oracle_frames)?;
        if m.steps.is_empty() || m.steps.contains(&0) {
            return Err(Error::Config("`mc.steps` needs at least one positive step count".into()));
        }
        let i = &self.instances;
        nonzero("instances.count", i.count)?;
        nonzero("instances.steps", i.steps)?;
        nonzero("instances.dim", i.dim)?;
        positive("instances.horizon", i.horizon)?;
        positive("instances.tol", i.tol)?;
        for (name, v) in [("slack.compare", self.slack.compare), ("slack.chain", self.slack.chain), ("slack.estimates", self.slack.estimates)] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("`{name}` must be non-negative")));
            }
        }
        Ok(())
    }

    fn coefficient_sets(&self) -> Result<Vec<CoefficientSet>> {
        self.coefficients.iter().map(CoefficientEntry::resolve).collect()
    }

    fn picard_options(&self) -> PicardOptions {
        PicardOptions { tol: self.picard.tol, max_iter: self.picard.max_iter, start: None }
    }
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value <= bound }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub command: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    pub command: String,
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub artifacts: Vec<String>,
}

struct Output {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Output {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }
}

fn file_label(set: &CoefficientSet) -> String {
    set.name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect::<String>().trim_end_matches('_').to_string()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads the configuration, runs its command and writes the artifacts.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<Verdict> {
    let bytes = fs::read(config_path).map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config("configuration is not UTF-8".into()))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = opts.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    let mut out = Output { dir: dir.clone(), artifacts: Vec::new() };
    log::info!("running {} into {}", cfg.command.name(), dir.display());
    let (checks, details) = execute(&cfg, &mut out)?;
    let pass = checks.iter().all(|c| c.pass);
    let mut artifacts = out.artifacts;
    artifacts.push("verdict.json".into());
    let verdict = Verdict { command: cfg.command.name().into(), pass, checks, artifacts: artifacts.clone(), details };
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("verdict.json"))?), &verdict)?;
    artifacts.push("manifest.json".into());
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command.name().into(),
        config: config_path.display().to_string(),
        config_sha256: hex(&Sha256::digest(&bytes)),
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        artifacts,
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("manifest.json"))?), &manifest)?;
    Ok(verdict)
}

/// Runs the command of an already validated configuration, writing tables into `dir`.
pub fn execute_in(cfg: &RunConfig, dir: &Path) -> Result<(Vec<Check>, Value)> {
    fs::create_dir_all(dir)?;
    execute(cfg, &mut Output { dir: dir.to_path_buf(), artifacts: Vec::new() })
}

fn execute(cfg: &RunConfig, out: &mut Output) -> Result<(Vec<Check>, Value)> {
    match cfg.command {
        Command::SolvePde => solve_pde(cfg, out),
        Command::SolveCm => solve_cm(cfg, out),
        Command::ChainCm => chain_cm(cfg, out),
        Command::CheckGirsanov | Command::CheckBsdeTransform => check_identities(cfg, out),
        Command::CheckEstimates => check_estimates(cfg, out),
        Command::CheckFlow => check_flow(cfg, out),
        Command::SimulateFbsde => simulate(cfg, out),
        Command::Compare => compare(cfg, out),
    }
}

/// FD solution at `horizon` on a padded grid, resampled onto `grid`.
fn fd_on(set: &CoefficientSet, grid: SpatialGrid, horizon: f64, pde: &PdeConfig) -> Result<GridFunction> {
    let fine = padded_grid(grid.x_min, grid.x_max, horizon, pde.dx)?;
    let dt = pde.dt.unwrap_or_else(|| diffusion_limit(&fine));
    let u = solve_fd(set, fine, horizon, dt)?;
    resample(&u, grid)
}

fn resample(u: &GridFunction, grid: SpatialGrid) -> Result<GridFunction> {
    let m = u.dim();
    let mut grad = vec![0.0; grid.points * m];
    for (i, row) in grad.chunks_exact_mut(m).enumerate() {
        u.interpolate_gradient(grid.x(i), row);
    }
    GridFunction::from_fn(grid, m, |x, o| {
        u.interpolate(x, o);
    })?
    .with_gradient(grad)
}

/// `sup |a - b| / sup |b|` over the interior points of a common grid.
fn relative_sup(a: &GridFunction, b: &GridFunction) -> f64 {
    let m = a.dim();
    let n = a.grid().points;
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for i in 1..n.saturating_sub(1).max(1) {
        for c in 0..m {
            diff = diff.max((a.value_at(i)[c] - b.value_at(i)[c]).abs());
            scale = scale.max(b.value_at(i)[c].abs());
        }
    }
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

fn solve_pde(cfg: &RunConfig, out: &mut Output) -> Result<(Vec<Check>, Value)> {
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for set in cfg.coefficient_sets()? {
        let u = fd_on(&set, cfg.grid, cfg.tree.horizon, &cfg.pde)?;
        u.write_csv(out.create(&format!("u_fd_{}.csv", file_label(&set)))?)?;
        let sup = set.u0_sup().into_iter().fold(0.0, f64::max);
        checks.push(Check::at_most(format!("{}: sup |u| <= sup |u0|", set.name), u.sup_norm(), sup * (1.0 + 1e-10)));
        details.push(json!({ "coefficients": set.name, "sup_norm": u.sup_norm(), "max_slope": u.max_slope() }));
    }
    Ok((checks, Value::Array(details)))
}

fn solve_cm(cfg: &RunConfig, out: &mut Output) -> Result<(Vec<Check>, Value)> {
    let tree = PathTree::new(cfg.tree.steps, cfg.tree.horizon)?;
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for set in cfg.coefficient_sets()? {
        let (u, diags) = solve_u(&set, cfg.grid, tree, &cfg.picard_options())?;
        u.write_csv(out.create(&format!("u_cm_{}.csv", file_label(&set)))?)?;
        let tau = contraction_horizon(set.c_u0(), set.c_f())?;
        let bound = contraction_factor(tree.horizon(), set.c_u0(), set.c_f());
        let worst_ratio = diags.iter().flat_map(|d| d.ratios.iter().copied()).fold(0.0, f64::max);
        let excess = diags.iter().map(|d| d.range_excess).fold(f64::NEG_INFINITY, f64::max);
        if tree.horizon() <= tau {
            checks.push(Check::at_most(format!("{}: contraction ratio", set.name), worst_ratio, bound * (1.0 + cfg.slack.contraction)));
        }
        checks.push(Check::at_most(format!("{}: iterates within sup |u0|", set.name), excess, 1e-10));
        details.push(json!({
            "coefficients": set.name,
            "contraction_horizon": tau,
            "contraction_bound": bound,
            "max_iterations": diags.iter().map(|d| d.iterations).max(),
            "max_ratio": worst_ratio,
            "diagnostics": diags,
        }));
    }
    Ok((checks, Value::Array(details)))
}

fn chain_cm(cfg: &RunConfig, out: &mut Output) -> Result<(Vec<Check>, Value)> {
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for set in cfg.coefficient_sets()? {
        let c_u = cfg.chain.gradient_bound.unwrap_or_else(|| set.c_u0());
        let tau = contraction_horizon(set.c_u0(), set.c_f())?.min(contraction_horizon(c_u, set.c_f())?);
        let total = match cfg.chain.total {
            Some(t) => t,
            None if tau.is_finite() => 2.0 * tau,
            None => cfg.tree.horizon,
        };
        let chain = chain_solve(&set, cfg.grid, total, cfg.tree.steps, c_u, &cfg.picard_options())?;
        let fd = fd_on(&set, cfg.grid, total, &cfg.pde)?;
        let rel = relative_sup(&chain.u, &fd);
        let mut w = out.create(&format!("chain_{}.csv", file_label(&set)))?;
        write_pair_csv(&mut w, &chain.u, &fd, "u_chain", "u_fd")?;
        checks.push(Check::at_most(format!("{}: chain vs fd", set.name), rel, cfg.slack.chain));
        details.push(json!({
            "coefficients": set.name,
            "total": total,
            "interval_ends": chain.times,
            "gradient_bounds": chain.gradient_bounds,
            "max_iterations": chain.max_iterations,
            "relative_sup_error": rel,
        }));
    }
    Ok((checks, Value::Array(details)))
}

fn write_pair_csv<W: std::io::Write>(w: &mut W, a: &GridFunction, b: &GridFunction, na: &str, nb: &str) -> Result<()> {
    let m = a.dim();
    let cols = |n: &str| (1..=m).map(|c| format!("{n}{c}")).collect::<Vec<_>>().join(",");
    writeln!(w, "x,{},{}", cols(na), cols(nb))?;
    for i in 0..a.grid().points {
        let fmt = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        writeln!(w, "{},{},{}", a.grid().x(i), fmt(a.value_at(i)), fmt(b.value_at(i)))?;
    }
    Ok(())
}

fn check_identities(cfg: &RunConfig, out: &mut Output) -> Result<(Vec<Check>, Value)> {
    let ic = &cfg.instances;
    let residuals = (0..ic.count as u64)
        .map(|i| identity_residuals(&RandomInstance::generate(cfg.seed.wrapping_add(i), ic.steps, ic.horizon, ic.dim)?))
        .collect::<Result<Vec<_>>>()?;
    let girsanov = cfg.command == Command::CheckGirsanov;
    let name = if girsanov { "girsanov_instances.csv" } else { "bsde_transform_instances.csv" };
    let mut w = out.create(name)?;
    use std::io::Write;
    writeln!(w, "seed,density_invariance,normalization,transform,tilted_martingale")?;
    for r in &residuals {
        writeln!(w, "{},{:e},{:e},{:e},{:e}", r.seed, r.density_invariance, r.normalization, r.transform, r.tilted_martingale)?;
    }
    let worst = |f: fn(&crate::instances::IdentityResiduals) -> f64| residuals.iter().map(f).fold(0.0, f64::max);
    let checks = if girsanov {
        vec![
            Check::at_most("density invariance", worst(|r| r.density_invariance), ic.tol),
            Check::at_most("density normalization", worst(|r| r.normalization), ic.tol),
        ]
    } else {
        vec![
            Check::at_most("transformed equation residual", worst(|r| r.transform), ic.tol),
            Check::at_most("tilted martingale defect", worst(|r| r.tilted_martingale), ic.tol),
        ]
    };
    let max_residual = checks.iter().map(|c| c.value).fold(0.0, f64::max);
    let pass = checks.iter().all(|c| c.pass);
    Ok((checks, json!({ "instances": ic.count, "max_residual": max_residual, "pass": pass })))
}

fn check_estimates(cfg: &RunConfig, out: &mut Output) -> Result<(Vec<Check>, Value)> {
    let e = &cfg.estimates;
    let settings = EstimateSettings { steps: e.steps, dx: e.dx, slack: cfg.slack.estimates, ..EstimateSettings::default() };
    let mut reports = Vec::new();
    for set in cfg.coefficient_sets()? {
        let ctx = EstimateContext::new(&set, e.x, e.horizon, settings)?;
        for &p in &e.p {
            reports.extend(ctx.all(e.t, p)?);
        }
    }
    estimates::write_csv(&reports, out.create("estimates.csv")?)?;
    let checks = reports
        .iter()
        .map(|r| Check {
            name: format!("{} {} component {} p={}", r.inputs.coefficients, r.name, r.component, r.inputs.p),
            value: r.lhs,
            bound: r.rhs * (1.0 + r.slack),
            pass: r.pass,
        })
        .collect();
    Ok((checks, serde_json::to_value(&reports)?))
}

fn check_flow(cfg: &RunConfig, out: &mut Output) -> Result<(Vec<Check>, Value)> {
    let f = &cfg.flow;
    let tree = PathTree::new(f.steps, f.horizon)?;
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for set in cfg.coefficient_sets()? {
        let (xi, diag) = picard_flow(&set, f.grid, tree, f.tol, f.max_iter)?;
        let oracle = oracle_family(&set, f.grid.x_min, f.grid.x_max, f.horizon, f.oracle_dx, &(0..=f.steps).map(|k| tree.time(k)).collect::<Vec<_>>())?;
        let errs = bismut_check(&xi, &oracle)?;
        for j in 0..3 {
            checks.push(Check::at_most(format!("{}: derivative {j} vs oracle", set.name), errs.relative[j], f.tolerances[j]));
        }
        if diag.within_horizon {
            checks.push(Check::at_most(format!("{}: field norm", set.name), diag.norms.iter().copied().fold(0.0, f64::max), diag.k_bound));
        }
        let (u, _) = solve_u(&set, f.grid, tree, &cfg.picard_options())?;
        let m = set.dim();
        let mut means = Vec::with_capacity(f.grid.points * m);
        for i in 0..f.grid.points {
            means.extend(xi.mean(0, f.steps, i));
        }
        let field = GridFunction::new(f.grid, m, means)?;
        let cross = relative_sup(&field, &u);
        checks.push(Check::at_most(format!("{}: field mean vs pointwise fixed point", set.name), cross, f.cross_tolerance));
        let mut w = out.create(&format!("flow_{}.csv", file_label(&set)))?;
        write_pair_csv(&mut w, &field, &u, "u_flow", "u_cm")?;
        details.push(json!({ "coefficients": set.name, "diagnostics": diag, "bismut": errs, "cross_relative": cross }));
    }
    Ok((checks, Value::Array(details)))
}

fn oracle_family(set: &CoefficientSet, lo: f64, hi: f64, horizon: f64, dx: f64, times: &[f64]) -> Result<GridFamily> {
    let grid = padded_grid(lo, hi, horizon, dx)?;
    solve_fd_frames(set, grid, times, diffusion_limit(&grid))
}

fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<(Vec<Check>, Value)> {
    let mc = &cfg.mc;
    let mut checks = Vec::new();
    let mut details = Vec::new();
    let times: Vec<f64> = (0..=mc.oracle_frames).map(|k| mc.horizon * k as f64 / mc.oracle_frames as f64).collect();
    for set in cfg.coefficient_sets()? {
        let family = oracle_family(&set, mc.x, mc.x, mc.horizon, mc.oracle_dx, &times)?;
        let field = GridField::new(&set, family)?;
        let label = file_label(&set);
        let mut w = out.create(&format!("mc_{label}.csv"))?;
        use std::io::Write;
        writeln!(w, "steps,dt,residual_mean,residual_ci,max_abs_y_mean,max_abs_y_ci,terminal_mean,terminal_ci")?;
        let mut residuals = Vec::new();
        let mut stats_all = Vec::new();
        for (idx, &steps) in mc.steps.iter().enumerate() {
            let record = if idx + 1 == mc.steps.len() { mc.record_paths } else { 0 };
            let c = McConfig { paths: mc.paths, dt: mc.horizon / steps as f64, seed: cfg.seed, x: vec![mc.x], horizon: mc.horizon, record_paths: record };
            let s = simulate_fbsde(&field, &c)?;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.steps,
                s.dt,
                s.residual.mean,
                s.residual.half_width(),
                s.max_abs_y.mean,
                s.max_abs_y.half_width(),
                s.terminal[0].mean,
                s.terminal[0].half_width()
            )?;
            if record > 0 {
                write_paths_csv(&s.trajectories, out.create(&format!("paths_{label}.csv"))?)?;
            }
            residuals.push(s.residual.mean);
            stats_all.push(s);
        }
        for (k, pair) in residuals.windows(2).enumerate() {
            checks.push(Check::at_most(
                format!("{}: residual ratio {} -> {} steps", set.name, mc.steps[k], mc.steps[k + 1]),
                pair[1] / pair[0],
                mc.ratio,
            ));
        }
        let finest = *mc.steps.last().expect("validated non-empty");
        let c = McConfig { paths: mc.paths, dt: mc.horizon / finest as f64, seed: cfg.seed, x: vec![mc.x], horizon: mc.horizon, record_paths: 0 };
        let cross = girsanov_cross_check(&field, &c)?;
        checks.push(Check::at_most(format!("{}: reweighted terminal mean (half-widths)", set.name), cross.half_widths, 3.0));
        details.push(json!({ "coefficients": set.name, "statistics": stats_all, "girsanov": cross }));
    }
    Ok((checks, Value::Array(details)))
}

fn compare(cfg: &RunConfig, out: &mut Output) -> Result<(Vec<Check>, Value)> {
    let tree = PathTree::new(cfg.tree.steps, cfg.tree.horizon)?;
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for set in cfg.coefficient_sets()? {
        if set.dim() != 1 || set.convection != Convection::Burgers {
            return Err(Error::Scope(format!("compare needs scalar Burgers coefficients, got `{}`", set.name)));
        }
        let (cm, _) = solve_u(&set, cfg.grid, tree, &cfg.picard_options())?;
        let fd = fd_on(&set, cfg.grid, tree.horizon(), &cfg.pde)?;
        let ch: Vec<f64> = cfg.grid.xs().map(|x| cole_hopf(&set.initial, x, tree.horizon())).collect::<Result<_>>()?;
        let scale = ch.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut w = out.create(&format!("compare_{}.csv", file_label(&set)))?;
        use std::io::Write;
        writeln!(w, "x,u_cm,u_fd,u_ch,rel_err_cm_ch")?;
        let mut worst = 0.0f64;
        for (i, x) in cfg.grid.xs().enumerate() {
            let (a, b) = (cm.value_at(i)[0], fd.value_at(i)[0]);
            let rel = (a - ch[i]).abs() / scale;
            worst = worst.max(rel);
            writeln!(w, "{x},{a},{b},{},{rel}", ch[i])?;
        }
        checks.push(Check::at_most(format!("{}: cm vs cole-hopf", set.name), worst, cfg.slack.compare));
        let fd_rel = relative_sup(&fd, &GridFunction::new(cfg.grid, 1, ch.clone())?);
        checks.push(Check::at_most(format!("{}: fd vs cole-hopf", set.name), fd_rel, cfg.slack.compare));
        details.push(json!({ "coefficients": set.name, "max_rel_err_cm_ch": worst, "rel_err_fd_ch": fd_rel, "scale": scale }));
    }
    Ok((checks, Value::Array(details)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_json(r#"{"command": "solve-pde"}"#).unwrap();
        assert_eq!(cfg.tree, TreeConfig::default());
        assert_eq!(cfg.coefficients, vec![CoefficientEntry::Name("burgers".into())]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_json(r#"{"command": "solve-pde", "tree": {"steps": 4, "depth": 3}}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("depth"), "{e}");
    }

    #[test]
    fn bad_values_are_config_errors() {
        for text in [
            r#"{"command": "compare", "tree": {"steps": 8, "horizon": -1}}"#,
            r#"{"command": "compare", "coefficients": ["nope"]}"#,
            r#"{"command": "check-estimates", "estimates": {"p": [2.5]}}"#,
            r#"{"command": "fly"}"#,
        ] {
            assert_eq!(RunConfig::from_json(text).unwrap_err().exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn coefficient_entries() {
        let cfg = RunConfig::from_json(
            r#"{"command": "solve-cm", "coefficients": ["burgers", {"name": "tanh_clamped(1)", "driver": "damping(0.5)"}]}"#,
        )
        .unwrap();
        let sets = cfg.coefficient_sets().unwrap();
        assert_eq!(sets[1].convection, Convection::TanhClamped(1.0));
    }

    #[test]
    fn identity_check_writes_table() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_json(r#"{"command": "check-girsanov", "instances": {"count": 5, "steps": 6}}"#).unwrap();
        let (checks, details) = execute_in(&cfg, dir.path()).unwrap();
        assert!(checks.iter().all(|c| c.pass));
        assert_eq!(details["pass"], Value::Bool(true));
        assert!(dir.path().join("girsanov_instances.csv").exists());
    }

    #[test]
    fn resampling_keeps_grid_values() {
        let set = CoefficientSet::from_catalog("burgers").unwrap();
        let grid = SpatialGrid::new(-1.0, 1.0, 5).unwrap();
        let u = fd_on(&set, grid, 0.0001, &PdeConfig { dx: 0.005, dt: None }).unwrap();
        for i in 0..5 {
            assert!((u.value_at(i)[0] + grid.x(i).tanh()).abs() < 1e-3);
        }
    }
}
