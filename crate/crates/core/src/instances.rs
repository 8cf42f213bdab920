//! Seeded random problems on the tree for the exact Girsanov identities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bsde::{solve_driver_bsde, transform_bsde, Driver};
use crate::error::Result;
use crate::girsanov::{check_density_invariance, exponential_martingale};
use crate::tree::{conditional_expectations, AdaptedProcess, PathTree, TerminalVariable};
use crate::girsanov::Measure;

/// `g_i(t, y, z) = a_i sin(y_i) + b_i z_i + c t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SineDriver {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl Driver for SineDriver {
    fn eval(&self, t: f64, y: &[f64], z: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = self.a[i] * y[i].sin() + self.b[i] * z[i] + self.c * t;
        }
    }

    fn lipschitz(&self) -> f64 {
        let a = self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let b = self.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        a + b
    }
}

/// `f(y, z) = alpha tanh(y_0 + beta z_0)`, with `|alpha| h < 1` by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TanhIntegrand {
    pub alpha: f64,
    pub beta: f64,
}

impl TanhIntegrand {
    pub fn eval(&self, y: &[f64], z: &[f64]) -> f64 {
        self.alpha * (y[0] + self.beta * z[0]).tanh()
    }
}

/// One random problem: a terminal variable, a drift integrand, a driver and a convection.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub seed: u64,
    pub terminal: TerminalVariable,
    /// `f_k` on levels `0..N-1`, `|f| h <= 0.9`.
    pub integrand: AdaptedProcess,
    pub driver: SineDriver,
    pub convection: TanhIntegrand,
}

impl RandomInstance {
    pub fn generate(seed: u64, steps: usize, horizon: f64, dim: usize) -> Result<Self> {
        let tree = PathTree::new(steps, horizon)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let freq: Vec<(f64, f64, f64)> =
            (0..dim).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(0.2..3.0), rng.random_range(-1.0..1.0))).collect();
        let mut noise = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let terminal = TerminalVariable::from_fn(tree, dim, |_, b, o| {
            for (v, (amp, w, shift)) in o.iter_mut().zip(&freq) {
                *v = amp * (w * b + shift).sin() + 0.3 * noise.random_range(-1.0..1.0);
            }
        });
        let cap = 0.9 / tree.h();
        let integrand = AdaptedProcess::from_fn(tree, 1, steps - 1, |_, _, o| o[0] = rng.random_range(-cap..cap));
        // Keep T * Lip(g) below 1 so the explicit scheme is admissible.
        let lip = 0.9 / horizon;
        let driver = SineDriver {
            a: (0..dim).map(|_| rng.random_range(-0.5..0.5) * lip).collect(),
            b: (0..dim).map(|_| rng.random_range(-0.5..0.5) * lip).collect(),
            c: rng.random_range(-1.0..1.0),
        };
        let convection = TanhIntegrand { alpha: rng.random_range(-cap..cap), beta: rng.random_range(-1.0..1.0) };
        Ok(Self { seed, terminal, integrand, driver, convection })
    }

    pub fn tree(&self) -> PathTree {
        self.terminal.tree()
    }

    /// `E[terminal | F_k]` under the symmetric measure.
    pub fn martingale(&self) -> Result<AdaptedProcess> {
        conditional_expectations(&self.terminal, &Measure::symmetric(self.tree()))
    }
}

/// Exact-identity residuals of one instance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityResiduals {
    pub seed: u64,
    /// `max |D_B(X) - D_{B~}(X~)|`.
    pub density_invariance: f64,
    /// `max_k |E R_k - 1|`.
    pub normalization: f64,
    /// Largest per-node defect of the transformed backward equation.
    pub transform: f64,
    /// Martingale defect of `S~` under the tilted measure.
    pub tilted_martingale: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.density_invariance.max(self.normalization).max(self.transform).max(self.tilted_martingale)
    }
}

pub fn identity_residuals(instance: &RandomInstance) -> Result<IdentityResiduals> {
    let martingale = instance.martingale()?;
    let density_invariance = check_density_invariance(&martingale, &instance.integrand)?;
    let normalization = exponential_martingale(&instance.integrand)?.normalization_defect();
    let sol = solve_driver_bsde(&instance.terminal, &instance.driver)?;
    let conv = instance.convection;
    let tr = transform_bsde(&sol, &instance.driver, |y, z| conv.eval(y, z))?;
    Ok(IdentityResiduals {
        seed: instance.seed,
        density_invariance,
        normalization,
        transform: tr.residual,
        tilted_martingale: tr.martingale_residual,
    })
}
