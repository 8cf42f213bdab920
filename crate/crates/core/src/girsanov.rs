//! Equivalent measures on the tree, exponential martingales and compensation.
//!
//! A measure is a choice of up-probability at every non-leaf node. The
//! stochastic exponential `R_{k+1} = R_k (1 + f_k dB_{k+1})` of `N = sum f dB`
//! induces the tilt `q = (1 + f h) / 2`, which shifts both children of a node
//! by the same drift `-f dt` when passing from `B` to `B~ = B - sum f dt`. That
//! is why densities are measure invariant on the tree without any rounding
//! beyond floating point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tree::{average_level, sibling_density, martingale_density, AdaptedProcess, PathTree, TerminalVariable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Symmetric,
    Tilted,
}

/// Probability on the path space of a [`PathTree`].
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    tree: PathTree,
    // None means every up-probability is 1/2.
    up: Option<Vec<Vec<f64>>>,
}

impl Measure {
    pub fn symmetric(tree: PathTree) -> Self {
        Self { tree, up: None }
    }

    /// Measure from explicit up-probabilities on levels `0..N`, each in `(0, 1)`.
    pub fn from_up_probabilities(tree: PathTree, up: Vec<Vec<f64>>) -> Result<Self> {
        if up.len() != tree.steps() {
            return Err(Error::ShapeMismatch(format!("need {} levels of probabilities, got {}", tree.steps(), up.len())));
        }
        for (k, level) in up.iter().enumerate() {
            if level.len() != tree.level_len(k) {
                return Err(Error::ShapeMismatch(format!("level {k} has {} probabilities", level.len())));
            }
            if let Some(q) = level.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
                return Err(Error::invalid("up_probability", format!("{q} not in (0, 1) at level {k}")));
            }
        }
        Ok(Self { tree, up: Some(up) })
    }

    pub fn tree(&self) -> PathTree {
        self.tree
    }

    pub fn kind(&self) -> MeasureKind {
        if self.up.is_some() {
            MeasureKind::Tilted
        } else {
            MeasureKind::Symmetric
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.up.is_none()
    }

    pub fn up_probability(&self, level: usize, node: usize) -> f64 {
        match &self.up {
            None => 0.5,
            Some(up) => up[level][node],
        }
    }

    pub(crate) fn up_level(&self, level: usize) -> Option<&[f64]> {
        self.up.as_ref().map(|u| u[level].as_slice())
    }

    /// Expectation of level-`k` node values.
    pub fn expect_level(&self, values: &[f64], k: usize, dim: usize) -> Vec<f64> {
        let mut current = values.to_vec();
        for level in (1..=k).rev() {
            current = average_level(self, level, &current, dim);
        }
        current
    }

    pub fn expect(&self, x: &TerminalVariable) -> Result<Vec<f64>> {
        self.tree.ensure_same(&x.tree(), "expect")?;
        Ok(self.expect_level(x.values(), self.tree.steps(), x.dim()))
    }
}

/// Radon-Nikodym density process `dQ/dP |_{F_k} = R_k`, `R_0 = 1`.
#[derive(Debug, Clone)]
pub struct DensityProcess {
    r: AdaptedProcess,
}

impl DensityProcess {
    pub fn process(&self) -> &AdaptedProcess {
        &self.r
    }

    pub fn tree(&self) -> PathTree {
        self.r.tree()
    }

    pub fn terminal(&self) -> TerminalVariable {
        self.r.terminal().expect("density process reaches the leaves")
    }

    /// `max_k |E^P[R_k] - 1|`.
    pub fn normalization_defect(&self) -> f64 {
        let p = Measure::symmetric(self.tree());
        (0..=self.r.last_level()).map(|k| (self.r.expectation(k, &p)[0] - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `E^P[R_k^power]` for every level `k`.
    pub fn moments(&self, power: f64) -> Vec<f64> {
        (0..=self.r.last_level())
            .map(|k| {
                let lvl = self.r.level(k);
                lvl.iter().map(|r| r.powf(power)).sum::<f64>() / lvl.len() as f64
            })
            .collect()
    }
}

fn check_scalar_integrand(fvals: &AdaptedProcess) -> Result<()> {
    if fvals.dim() != 1 {
        return Err(Error::ShapeMismatch("Girsanov integrand must be scalar (d = 1)".into()));
    }
    Ok(())
}

/// Largest `|f| h` over the levels used by a depth-`N` recursion.
pub(crate) fn positivity_guard(fvals: &AdaptedProcess, levels: usize) -> Result<()> {
    let h = fvals.tree().h();
    for k in 0..levels {
        for (p, f) in fvals.level(k).iter().enumerate() {
            let v = f.abs() * h;
            if !(v < 1.0) {
                return Err(Error::Positivity { level: k, node: p, value: v });
            }
        }
    }
    Ok(())
}

/// Stochastic exponential of `N_k = sum_{j<k} f_j dB_{j+1}` on the full tree.
///
/// `fvals` must be defined on levels `0..N-1` (more levels are ignored).
pub fn exponential_martingale(fvals: &AdaptedProcess) -> Result<DensityProcess> {
    check_scalar_integrand(fvals)?;
    let tree = fvals.tree();
    let n = tree.steps();
    if fvals.last_level() + 1 < n {
        return Err(Error::ShapeMismatch("integrand must cover levels 0..N-1".into()));
    }
    positivity_guard(fvals, n)?;
    let h = tree.h();
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    levels.push(vec![1.0]);
    for k in 0..n {
        let parent = &levels[k];
        let f = fvals.level(k);
        let mut child = vec![0.0; parent.len() * 2];
        for (p, r) in parent.iter().enumerate() {
            child[2 * p] = r * (1.0 + f[p] * h);
            child[2 * p + 1] = r * (1.0 - f[p] * h);
        }
        levels.push(child);
    }
    Ok(DensityProcess { r: AdaptedProcess::from_levels(tree, 1, levels) })
}

/// The measure `Q` with `dQ/dP = R_T`.
pub fn tilt_measure(density: &DensityProcess) -> Measure {
    let tree = density.tree();
    let r = density.process();
    let up = (0..tree.steps())
        .map(|k| {
            let child = r.level(k + 1);
            (0..tree.level_len(k)).map(|p| child[2 * p] / (child[2 * p] + child[2 * p + 1])).collect()
        })
        .collect();
    Measure { tree, up: Some(up) }
}

/// Girsanov compensation `X~ = X - <X, N>` of a `P`-martingale, `N = sum f dB`.
pub fn compensate(x: &AdaptedProcess, fvals: &AdaptedProcess) -> Result<AdaptedProcess> {
    check_scalar_integrand(fvals)?;
    x.tree().ensure_same(&fvals.tree(), "compensate")?;
    let z = martingale_density(x, &Measure::symmetric(x.tree()))?;
    if fvals.last_level() + 1 < x.last_level() {
        return Err(Error::ShapeMismatch("integrand shorter than the martingale".into()));
    }
    Ok(compensate_with_density(x, &z, fvals))
}

pub(crate) fn compensate_with_density(x: &AdaptedProcess, z: &AdaptedProcess, fvals: &AdaptedProcess) -> AdaptedProcess {
    let tree = x.tree();
    let dim = x.dim();
    let dt = tree.dt();
    // Predictable compensator C_{k+1} = C_k + z_k f_k dt, shared by siblings; X~ = X - C.
    let mut comp = vec![0.0; dim];
    let mut out = x.clone();
    for k in 0..x.last_level() {
        let f = fvals.level(k);
        let zk = z.level(k);
        let mut next = vec![0.0; tree.level_len(k + 1) * dim];
        for c in 0..tree.level_len(k + 1) {
            let p = c / 2;
            for i in 0..dim {
                next[c * dim + i] = comp[p * dim + i] + zk[p * dim + i] * f[p] * dt;
            }
        }
        for (o, cv) in out.level_mut(k + 1).iter_mut().zip(&next) {
            *o -= cv;
        }
        comp = next;
    }
    out
}

/// `max |D_B(X) - D_{B~}(X~)|` over all non-leaf nodes and components.
///
/// `D_{B~}(X~)` divides the sibling difference of `X~` by that of `B~`.
pub fn check_density_invariance(x: &AdaptedProcess, fvals: &AdaptedProcess) -> Result<f64> {
    let tree = x.tree();
    let d_b = martingale_density(x, &Measure::symmetric(tree))?;
    let x_tilde = compensate_with_density(x, &d_b, fvals);
    let b = tree.brownian_process();
    let ones = AdaptedProcess::from_fn(tree, 1, tree.steps() - 1, |_, _, o| o[0] = 1.0);
    let b_tilde = compensate_with_density(&b, &ones, fvals);
    let dim = x.dim();
    let mut worst = 0.0f64;
    for k in 0..x.last_level() {
        let xc = x_tilde.level(k + 1);
        let bc = b_tilde.level(k + 1);
        let zb = d_b.level(k);
        for p in 0..tree.level_len(k) {
            let db = bc[2 * p] - bc[2 * p + 1];
            if db.abs() < 1e-300 {
                return Err(Error::DegenerateIncrement { level: k, node: p });
            }
            for i in 0..dim {
                let d_tilde = (xc[2 * p * dim + i] - xc[(2 * p + 1) * dim + i]) / db;
                worst = worst.max((zb[p * dim + i] - d_tilde).abs());
            }
        }
    }
    Ok(worst)
}

/// Largest one-step defect of `x` as a martingale under `measure`.
pub fn martingale_defect(x: &AdaptedProcess, measure: &Measure) -> Result<f64> {
    Ok(crate::tree::martingale_residual(x, measure)?.0)
}

/// `D_{B~}(X~)` by the sibling rule, for a `Q`-martingale.
pub fn tilted_density(x_tilde: &AdaptedProcess) -> AdaptedProcess {
    sibling_density(x_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn const_f(tree: PathTree, c: f64) -> AdaptedProcess {
        AdaptedProcess::from_fn(tree, 1, tree.steps() - 1, |_, _, o| o[0] = c)
    }

    #[test]
    fn zero_integrand_gives_unit_density() {
        let tree = PathTree::new(5, 1.0).unwrap();
        let r = exponential_martingale(&const_f(tree, 0.0)).unwrap();
        assert!(r.process().level(5).iter().all(|v| *v == 1.0));
        let q = tilt_measure(&r);
        for k in 0..5 {
            for p in 0..tree.level_len(k) {
                assert_eq!(q.up_probability(k, p), 0.5);
            }
        }
    }

    #[test]
    fn constant_integrand_two_steps() {
        let tree = PathTree::new(2, 1.0).unwrap();
        let (c, h) = (0.8, tree.h());
        let r = exponential_martingale(&const_f(tree, c)).unwrap();
        let leaves = r.process().level(2);
        let expect = [(1.0 + c * h).powi(2), (1.0 + c * h) * (1.0 - c * h), (1.0 - c * h) * (1.0 + c * h), (1.0 - c * h).powi(2)];
        for (a, e) in leaves.iter().zip(expect) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
        assert!(r.normalization_defect() < 1e-15);
        let q = tilt_measure(&r);
        for k in 0..2 {
            for p in 0..tree.level_len(k) {
                assert_abs_diff_eq!(q.up_probability(k, p), (1.0 + c * h) / 2.0, epsilon = 1e-15);
            }
        }
        let one = TerminalVariable::constant(tree, &[1.0]);
        assert_abs_diff_eq!(q.expect(&one).unwrap()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn positivity_guard_rejects_large_integrand() {
        let tree = PathTree::new(4, 1.0).unwrap();
        // h = 0.5, so |f| h = 1 exactly.
        assert!(matches!(exponential_martingale(&const_f(tree, 2.0)), Err(Error::Positivity { .. })));
        assert!(exponential_martingale(&const_f(tree, 1.99)).is_ok());
    }

    #[test]
    fn compensate_brownian_with_constant_drift() {
        let tree = PathTree::new(6, 1.2).unwrap();
        let c = 0.7;
        let b = tree.brownian_process();
        let bt = compensate(&b, &const_f(tree, c)).unwrap();
        for k in 0..=6 {
            for p in 0..tree.level_len(k) {
                assert_abs_diff_eq!(bt.node(k, p)[0], tree.brownian(k, p) - c * tree.time(k), epsilon = 1e-13);
            }
        }
        assert_eq!(compensate(&b, &const_f(tree, 0.0)).unwrap(), b);
        let q = tilt_measure(&exponential_martingale(&const_f(tree, c)).unwrap());
        assert!(martingale_defect(&bt, &q).unwrap() < 1e-14);
    }

    #[test]
    fn invariance_for_brownian_and_zero_drift() {
        let tree = PathTree::new(5, 1.0).unwrap();
        let b = tree.brownian_process();
        let f = AdaptedProcess::from_fn(tree, 1, 4, |k, p, o| o[0] = (0.3 * k as f64 - tree.brownian(k, p)).sin());
        assert!(check_density_invariance(&b, &f).unwrap() < 1e-14);
        let x = TerminalVariable::from_fn(tree, 1, |_, bt, o| o[0] = bt.cos());
        let y = crate::tree::conditional_expectations(&x, &Measure::symmetric(tree)).unwrap();
        assert_eq!(check_density_invariance(&y, &const_f(tree, 0.0)).unwrap(), 0.0);
    }
}
