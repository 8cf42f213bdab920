//! Closed catalog of problem data `(u0, f, g)` with declared bound constants.
//!
//! Spatial dimension is one throughout, so `f` is scalar valued and `z = grad u`
//! has the same length `m` as `y`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bsde::Driver;
use crate::error::{Error, Result};
use crate::pde::grid::GridFunction;

const TANH_SECOND: f64 = 0.769_800_358_919_501; // max |d^2/dx^2 tanh x| = 4 / (3 sqrt 3)

/// Initial data `u0: R -> R^m`.
#[derive(Debug, Clone)]
pub enum InitialData {
    Constant(Vec<f64>),
    /// `-tanh(x)`.
    NegTanh,
    /// `amplitude * exp(-x^2 / (2 width^2))`.
    Gaussian { amplitude: f64, width: f64 },
    /// `(-tanh x, 0.5 exp(-x^2 / 2))`.
    TwoComponent,
    /// Piecewise-linear interpolation of grid values, clamped outside the grid.
    Grid(Arc<GridFunction>),
}

impl InitialData {
    pub fn dim(&self) -> usize {
        match self {
            InitialData::Constant(c) => c.len(),
            InitialData::TwoComponent => 2,
            InitialData::Grid(g) => g.dim(),
            _ => 1,
        }
    }

    pub fn eval(&self, x: f64, out: &mut [f64]) {
        match self {
            InitialData::Constant(c) => out.copy_from_slice(c),
            InitialData::NegTanh => out[0] = -x.tanh(),
            InitialData::Gaussian { amplitude, width } => out[0] = amplitude * (-0.5 * (x / width).powi(2)).exp(),
            InitialData::TwoComponent => {
                out[0] = -x.tanh();
                out[1] = 0.5 * (-0.5 * x * x).exp();
            }
            InitialData::Grid(g) => {
                g.interpolate(x, out);
            }
        }
    }

    pub fn eval_dx(&self, x: f64, out: &mut [f64]) {
        match self {
            InitialData::Constant(_) => out.fill(0.0),
            InitialData::NegTanh => out[0] = -sech2(x),
            InitialData::Gaussian { amplitude, width } => {
                out[0] = -amplitude * x / (width * width) * (-0.5 * (x / width).powi(2)).exp()
            }
            InitialData::TwoComponent => {
                out[0] = -sech2(x);
                out[1] = -0.5 * x * (-0.5 * x * x).exp();
            }
            InitialData::Grid(g) => g.slope(x, out),
        }
    }

    /// Second derivative; zero for grid data (piecewise linear).
    pub fn eval_dxx(&self, x: f64, out: &mut [f64]) {
        match self {
            InitialData::Constant(_) | InitialData::Grid(_) => out.fill(0.0),
            InitialData::NegTanh => out[0] = 2.0 * x.tanh() * sech2(x),
            InitialData::Gaussian { amplitude, width } => {
                let s2 = width * width;
                out[0] = amplitude * (x * x / s2 - 1.0) / s2 * (-0.5 * x * x / s2).exp()
            }
            InitialData::TwoComponent => {
                out[0] = 2.0 * x.tanh() * sech2(x);
                out[1] = 0.5 * (x * x - 1.0) * (-0.5 * x * x).exp();
            }
        }
    }

    /// Antiderivative `int_0^x u0` for scalar closed-form data.
    pub fn potential(&self, x: f64) -> Option<f64> {
        match self {
            InitialData::Constant(c) if c.len() == 1 => Some(c[0] * x),
            InitialData::NegTanh => Some(-log_cosh(x)),
            InitialData::Gaussian { amplitude, width } => Some(
                amplitude * width * (std::f64::consts::PI / 2.0).sqrt() * libm::erf(x / (width * std::f64::consts::SQRT_2)),
            ),
            _ => None,
        }
    }

    /// Componentwise `sup |u0^i|`.
    pub fn sup_abs(&self) -> Vec<f64> {
        match self {
            InitialData::Constant(c) => c.iter().map(|v| v.abs()).collect(),
            InitialData::NegTanh => vec![1.0],
            InitialData::Gaussian { amplitude, .. } => vec![amplitude.abs()],
            InitialData::TwoComponent => vec![1.0, 0.5],
            InitialData::Grid(g) => g.sup_abs(),
        }
    }

    /// `sup |u0|` in the Euclidean norm of `R^m`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            // tanh^2 + exp(-x^2)/4 peaks at its limit 1 (checked in the tests)
            InitialData::TwoComponent => 1.0,
            InitialData::Grid(g) => {
                let d = g.dim();
                g.values().chunks_exact(d).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
            }
            _ => self.sup_abs().iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Declared Lipschitz constant `C_u0` (Euclidean norm).
    pub fn lipschitz(&self) -> f64 {
        self.derivative_bounds()[1]
    }

    /// Declared `[sup |u0|, sup |u0'|, sup |u0''|]` (Euclidean norms).
    pub fn derivative_bounds(&self) -> [f64; 3] {
        match self {
            InitialData::Constant(_) => [self.sup_norm(), 0.0, 0.0],
            InitialData::NegTanh => [1.0, 1.0, TANH_SECOND],
            InitialData::Gaussian { amplitude, width } => {
                let a = amplitude.abs();
                [a, a / (width * std::f64::consts::E.sqrt()), a / (width * width)]
            }
            // derivative sups reached at x = 0 (|u'| = 1) and near x = 0.66 (|u''| = 0.8099)
            InitialData::TwoComponent => [1.0, 1.0, 0.82],
            InitialData::Grid(g) => [self.sup_norm(), g.max_slope(), 0.0],
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitialData::Constant(c) => format!("constant({})", join(c)),
            InitialData::NegTanh => "neg_tanh".into(),
            InitialData::Gaussian { amplitude, width } => format!("gaussian({width},{amplitude})"),
            InitialData::TwoComponent => "two_component".into(),
            InitialData::Grid(g) => format!("grid({} points)", g.grid().points),
        }
    }

    /// Parses `neg_tanh`, `gaussian(width[,amplitude])`, `constant(c1[,c2..])`, `two_component`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, args) = split_call(spec)?;
        match (name, args.len()) {
            ("neg_tanh", 0) => Ok(InitialData::NegTanh),
            ("two_component", 0) => Ok(InitialData::TwoComponent),
            ("gaussian", 1 | 2) => {
                let width = args[0];
                if !(width > 0.0) {
                    return Err(Error::Config(format!("gaussian width must be positive in `{spec}`")));
                }
                Ok(InitialData::Gaussian { amplitude: args.get(1).copied().unwrap_or(1.0), width })
            }
            ("constant", n) if n >= 1 => Ok(InitialData::Constant(args)),
            _ => Err(Error::Config(format!("unknown initial data `{spec}`"))),
        }
    }
}

/// Convection coefficient `f(y)` (scalar since `d = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Convection {
    Zero,
    Constant(f64),
    /// `f(y) = y_1`.
    Burgers,
    /// `f(y) = a tanh(y_1 / a)`.
    TanhClamped(f64),
    /// `f(y) = y_1 + y_2 / 2`.
    Mix,
}

impl Convection {
    pub fn eval(&self, y: &[f64], _z: &[f64]) -> f64 {
        match *self {
            Convection::Zero => 0.0,
            Convection::Constant(c) => c,
            Convection::Burgers => y[0],
            Convection::TanhClamped(a) => a * (y[0] / a).tanh(),
            Convection::Mix => y[0] + 0.5 * y[1],
        }
    }

    /// `df/dy_i`.
    pub fn grad(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match *self {
            Convection::Zero | Convection::Constant(_) => {}
            Convection::Burgers => out[0] = 1.0,
            Convection::TanhClamped(a) => out[0] = sech2(y[0] / a),
            Convection::Mix => {
                out[0] = 1.0;
                out[1] = 0.5;
            }
        }
    }

    /// `d^2 f / dy_i dy_j`, row-major `m x m`.
    pub fn hessian(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        if let Convection::TanhClamped(a) = *self {
            let t = (y[0] / a).tanh();
            out[0] = -2.0 / a * t * (1.0 - t * t);
        }
    }

    /// Never true for the catalog; kept as the scope flag of the gradient estimates.
    pub fn depends_on_z(&self) -> bool {
        false
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Convection::Zero)
    }

    /// Smallest admissible state dimension.
    pub fn min_dim(&self) -> usize {
        match self {
            Convection::Mix => 2,
            Convection::Burgers | Convection::TanhClamped(_) => 1,
            _ => 0,
        }
    }

    /// Declared Lipschitz constant `C_f`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Convection::Zero | Convection::Constant(_) => 0.0,
            Convection::Burgers | Convection::TanhClamped(_) => 1.0,
            Convection::Mix => 1.25f64.sqrt(),
        }
    }

    /// Declared `C_1` bounding `|grad^k f|` for `k = 1, 2, 3`.
    pub fn derivative_bound(&self) -> f64 {
        match *self {
            Convection::TanhClamped(a) => 1f64.max(TANH_SECOND / a).max(2.0 / (a * a)),
            _ => self.lipschitz(),
        }
    }

    /// `max |f(y)|` over the box `|y_i| <= r_i`, exact for the catalog.
    pub fn max_abs_on_box(&self, r: &[f64]) -> f64 {
        match *self {
            Convection::Zero => 0.0,
            Convection::Constant(c) => c.abs(),
            Convection::Burgers => r[0],
            Convection::TanhClamped(a) => a * (r[0] / a).tanh(),
            Convection::Mix => r[0] + 0.5 * r[1],
        }
    }

    pub fn label(&self) -> String {
        match self {
            Convection::Zero => "zero".into(),
            Convection::Constant(c) => format!("constant({c})"),
            Convection::Burgers => "burgers".into(),
            Convection::TanhClamped(a) => format!("tanh_clamped({a})"),
            Convection::Mix => "mix".into(),
        }
    }
}

/// Lipschitz driver `g(y)`; the catalog only needs linear damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriverKind {
    Zero,
    /// `g(y) = -c y`.
    Damping(f64),
}

impl Driver for DriverKind {
    fn eval(&self, _t: f64, y: &[f64], _z: &[f64], out: &mut [f64]) {
        match *self {
            DriverKind::Zero => out.fill(0.0),
            DriverKind::Damping(c) => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = -c * v;
                }
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            DriverKind::Zero => 0.0,
            DriverKind::Damping(c) => c.abs(),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, DriverKind::Zero) || matches!(self, DriverKind::Damping(c) if *c == 0.0)
    }
}

impl DriverKind {
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, args) = split_call(spec)?;
        match (name, args.as_slice()) {
            ("zero", []) => Ok(DriverKind::Zero),
            ("damping", [c]) => Ok(DriverKind::Damping(*c)),
            _ => Err(Error::Config(format!("unknown driver `{spec}`"))),
        }
    }
}

/// The problem data with its declared constants.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub name: String,
    pub initial: InitialData,
    pub convection: Convection,
    pub driver: DriverKind,
}

/// Sampled constants next to the declared ones.
#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    pub name: String,
    pub declared: f64,
    pub sampled: f64,
}

/// Catalog entry plus optional overrides, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub name: String,
    #[serde(default)]
    pub initial: Option<String>,
    #[serde(default)]
    pub driver: Option<String>,
}

impl CoefficientSet {
    pub fn new(name: impl Into<String>, initial: InitialData, convection: Convection, driver: DriverKind) -> Result<Self> {
        let m = initial.dim();
        if m == 0 {
            return Err(Error::invalid("initial", "needs at least one component"));
        }
        if convection.min_dim() > m {
            return Err(Error::invalid("convection", format!("{} needs {} components, initial data has {m}", convection.label(), convection.min_dim())));
        }
        if let Convection::TanhClamped(a) = convection {
            if !(a > 0.0) {
                return Err(Error::invalid("tanh_clamped", "clamp level must be positive"));
            }
        }
        Ok(Self { name: name.into(), initial, convection, driver })
    }

    /// Looks up `zero`, `constant(c)`, `burgers`, `tanh_clamped(a)` or `two_component_mix`.
    pub fn from_catalog(spec: &str) -> Result<Self> {
        let (name, args) = split_call(spec)?;
        let (initial, convection) = match (name, args.as_slice()) {
            ("zero", []) => (InitialData::Gaussian { amplitude: 1.0, width: 1.0 }, Convection::Zero),
            ("constant", [c]) => (InitialData::NegTanh, Convection::Constant(*c)),
            ("burgers", []) => (InitialData::NegTanh, Convection::Burgers),
            ("tanh_clamped", [a]) => (InitialData::NegTanh, Convection::TanhClamped(*a)),
            ("two_component_mix", []) => (InitialData::TwoComponent, Convection::Mix),
            _ => return Err(Error::Config(format!("unknown coefficient set `{spec}`"))),
        };
        Self::new(spec.trim(), initial, convection, DriverKind::Zero)
    }

    pub fn from_spec(spec: &CoefficientSpec) -> Result<Self> {
        let mut set = Self::from_catalog(&spec.name)?;
        if let Some(init) = &spec.initial {
            set = Self::new(set.name, InitialData::parse(init)?, set.convection, set.driver)?;
        }
        if let Some(d) = &spec.driver {
            set.driver = DriverKind::parse(d)?;
        }
        Ok(set)
    }

    pub fn with_initial(&self, initial: InitialData) -> Result<Self> {
        Self::new(self.name.clone(), initial, self.convection, self.driver)
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    pub fn c_u0(&self) -> f64 {
        self.initial.lipschitz()
    }

    pub fn c_f(&self) -> f64 {
        self.convection.lipschitz()
    }

    pub fn u0_sup(&self) -> Vec<f64> {
        self.initial.sup_abs()
    }

    /// `C_0` bounding `|grad^{k-1} u0|` for `k = 1, 2, 3`.
    pub fn c0(&self) -> f64 {
        let b = self.initial.derivative_bounds();
        b[0].max(b[1]).max(b[2])
    }

    pub fn c1(&self) -> f64 {
        self.convection.derivative_bound()
    }

    /// `max |f(y)|` over the box of attainable values `|y_i| <= sup |u0^i|`.
    pub fn max_f_on_range(&self) -> f64 {
        self.convection.max_abs_on_box(&self.u0_sup())
    }

    pub fn label(&self) -> String {
        format!("{} [u0={}, f={}]", self.name, self.initial.label(), self.convection.label())
    }

    /// Compares declared constants with sampled difference quotients on `[-span, span]`.
    pub fn certify(&self, span: f64, samples: usize) -> Result<Vec<Certification>> {
        let m = self.dim();
        let n = samples.max(16);
        let step = 2.0 * span / n as f64;
        let mut a = vec![0.0; m];
        let mut b = vec![0.0; m];
        let mut lip_u = 0.0f64;
        let mut sup_u = vec![0.0f64; m];
        for j in 0..n {
            let x = -span + j as f64 * step;
            self.initial.eval(x, &mut a);
            self.initial.eval(x + step, &mut b);
            let d: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            lip_u = lip_u.max(d / step);
            for (s, v) in sup_u.iter_mut().zip(&a) {
                *s = s.max(v.abs());
            }
        }
        // f on random-free deterministic pairs inside the attainable box
        let range = self.u0_sup();
        let mut lip_f = 0.0f64;
        let mut y1 = vec![0.0; m];
        let mut y2 = vec![0.0; m];
        let z = vec![0.0; m];
        for j in 0..n {
            let s = -1.0 + 2.0 * j as f64 / n as f64;
            for i in 0..m {
                y1[i] = range[i] * s * ((i + 1) as f64 * 0.7).cos();
                y2[i] = range[i] * (s + 2.0 / n as f64) * ((i + 1) as f64 * 0.3).cos();
            }
            let dy: f64 = y1.iter().zip(&y2).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            if dy > 0.0 {
                lip_f = lip_f.max((self.convection.eval(&y1, &z) - self.convection.eval(&y2, &z)).abs() / dy);
            }
        }
        let mut report = vec![
            Certification { name: "C_u0".into(), declared: self.c_u0(), sampled: lip_u },
            Certification { name: "C_f".into(), declared: self.c_f(), sampled: lip_f },
        ];
        for (i, (d, s)) in range.iter().zip(&sup_u).enumerate() {
            report.push(Certification { name: format!("sup|u0^{}|", i + 1), declared: *d, sampled: *s });
        }
        for c in &report {
            if c.sampled > c.declared * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Certification { name: c.name.clone(), declared: c.declared, sampled: c.sampled });
            }
        }
        Ok(report)
    }
}

impl fmt::Display for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn sech2(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Splits `name(a, b, ..)` into the name and numeric arguments.
fn split_call(spec: &str) -> Result<(&str, Vec<f64>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec, Vec::new()));
    };
    let inner = spec[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::Config(format!("missing `)` in `{spec}`")))?;
    let args = inner
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{a}` in `{spec}`"))))
        .collect::<Result<Vec<_>>>()?;
    if args.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config(format!("non-finite argument in `{spec}`")));
    }
    Ok((spec[..open].trim(), args))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_lookup() {
        assert_eq!(CoefficientSet::from_catalog("burgers").unwrap().convection, Convection::Burgers);
        assert_eq!(CoefficientSet::from_catalog("tanh_clamped(2)").unwrap().convection, Convection::TanhClamped(2.0));
        assert_eq!(CoefficientSet::from_catalog("constant(0.5)").unwrap().c_f(), 0.0);
        assert_eq!(CoefficientSet::from_catalog("two_component_mix").unwrap().dim(), 2);
        assert!(matches!(CoefficientSet::from_catalog("quartic"), Err(Error::Config(_))));
        assert!(matches!(CoefficientSet::from_catalog("constant(x)"), Err(Error::Config(_))));
        let spec = CoefficientSpec { name: "burgers".into(), initial: Some("gaussian(0.5,0.8)".into()), driver: Some("damping(0.3)".into()) };
        let set = CoefficientSet::from_spec(&spec).unwrap();
        assert_eq!(set.u0_sup(), vec![0.8]);
        assert_eq!(set.driver, DriverKind::Damping(0.3));
    }

    #[test]
    fn declared_constants_survive_sampling() {
        for name in ["zero", "constant(0.4)", "burgers", "tanh_clamped(1.5)", "two_component_mix"] {
            let set = CoefficientSet::from_catalog(name).unwrap();
            set.certify(12.0, 20_000).unwrap();
        }
    }

    #[test]
    fn derivative_bounds_dominate_samples() {
        for init in [InitialData::NegTanh, InitialData::Gaussian { amplitude: -0.7, width: 0.6 }, InitialData::TwoComponent] {
            let m = init.dim();
            let b = init.derivative_bounds();
            let (mut v, mut d1, mut d2) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
            for j in 0..40_000 {
                let x = -10.0 + j as f64 * 5e-4;
                init.eval(x, &mut v);
                init.eval_dx(x, &mut d1);
                init.eval_dxx(x, &mut d2);
                let n = |w: &[f64]| w.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!(n(&v) <= b[0] + 1e-12 && n(&d1) <= b[1] + 1e-12 && n(&d2) <= b[2] + 1e-12, "{x}");
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-5;
        for init in [InitialData::NegTanh, InitialData::Gaussian { amplitude: 1.3, width: 0.8 }, InitialData::TwoComponent] {
            let m = init.dim();
            let (mut a, mut b, mut d, mut dd) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
            for x in [-1.7, -0.2, 0.0, 0.9] {
                init.eval(x + h, &mut a);
                init.eval(x - h, &mut b);
                init.eval_dx(x, &mut d);
                for i in 0..m {
                    assert!(((a[i] - b[i]) / (2.0 * h) - d[i]).abs() < 1e-8);
                }
                init.eval_dx(x + h, &mut a);
                init.eval_dx(x - h, &mut b);
                init.eval_dxx(x, &mut dd);
                for i in 0..m {
                    assert!(((a[i] - b[i]) / (2.0 * h) - dd[i]).abs() < 1e-8);
                }
            }
        }
        let c = Convection::TanhClamped(0.7);
        let (mut g1, mut g2, mut hs) = ([0.0], [0.0], [0.0]);
        c.grad(&[0.3 + h], &mut g1);
        c.grad(&[0.3 - h], &mut g2);
        c.hessian(&[0.3], &mut hs);
        assert!(((g1[0] - g2[0]) / (2.0 * h) - hs[0]).abs() < 1e-8);
    }

    #[test]
    fn potentials_differentiate_to_data() {
        let h = 1e-5;
        for init in [InitialData::NegTanh, InitialData::Gaussian { amplitude: 0.9, width: 1.1 }, InitialData::Constant(vec![0.3])] {
            let mut v = [0.0];
            for x in [-30.0, -2.0, 0.4, 3.0] {
                init.eval(x, &mut v);
                let d = (init.potential(x + h).unwrap() - init.potential(x - h).unwrap()) / (2.0 * h);
                assert!((d - v[0]).abs() < 1e-7, "{x}");
            }
        }
    }

    #[test]
    fn tanh_clamped_constants() {
        assert_eq!(Convection::TanhClamped(1.0).derivative_bound(), 2.0);
        assert_eq!(Convection::TanhClamped(4.0).derivative_bound(), 1.0);
        assert_eq!(Convection::Burgers.derivative_bound(), 1.0);
    }
}
