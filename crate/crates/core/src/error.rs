use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tree depth {steps} outside the supported range 1..={max}")]
    Capacity { steps: usize, max: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operands live on different trees or have incompatible shapes: {0}")]
    ShapeMismatch(String),

    #[error("process is not a martingale: residual {residual:.3e} at level {level}, node {node}")]
    NotMartingale { level: usize, node: usize, residual: f64 },

    #[error(
        "density positivity violated: |f|*h = {value:.4} >= 1 at level {level}, node {node}; \
         increase the number of tree steps"
    )]
    Positivity { level: usize, node: usize, value: f64 },

    #[error("explicit backward scheme unstable: horizon * Lip(g) = {product:.4} >= 1")]
    Stability { product: f64 },

    #[error("degenerate sibling difference of the compensated Brownian motion at level {level}, node {node}")]
    DegenerateIncrement { level: usize, node: usize },

    #[error("fixed-point iteration did not reach tol {tol:.1e} after {iterations} iterations (last distance {last:.3e})")]
    NonConvergence { iterations: usize, tol: f64, last: f64, ratios: Vec<f64> },

    #[error("CFL condition violated: dt = {dt:.3e}, admissible dt <= {admissible:.3e}")]
    Cfl { dt: f64, admissible: f64 },

    #[error("maximum principle violated: component {component} reached {value:.6} > bound {bound:.6}")]
    MaximumPrinciple { component: usize, value: f64, bound: f64 },

    #[error("point {x:.4} outside grid [{x_min:.4}, {x_max:.4}]; extend the grid")]
    RangeViolation { x: f64, x_min: f64, x_max: f64 },

    #[error("interpolated gradient {observed:.4} exceeds twice the certified bound {bound:.4}")]
    GradientBound { observed: f64, bound: f64 },

    #[error("declared constant `{name}` = {declared} is below the sampled value {sampled}")]
    Certification { name: String, declared: f64, sampled: f64 },

    #[error("ball bound violated: field norm {norm:.6} exceeds K = {bound:.6}")]
    BallViolation { norm: f64, bound: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("operation outside supported scope: {0}")]
    Scope(String),

    #[error("{escaped} of {paths} paths left the decoupling field's domain (rate {rate:.3e})")]
    Escape { escaped: usize, paths: usize, rate: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Process exit status used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::InvalidParameter { .. } => 2,
            Error::Capacity { .. }
            | Error::Positivity { .. }
            | Error::Stability { .. }
            | Error::Cfl { .. }
            | Error::RangeViolation { .. }
            | Error::GradientBound { .. }
            | Error::Certification { .. }
            | Error::DegenerateIncrement { .. }
            | Error::Escape { .. } => 3,
            _ => 1,
        }
    }
}
