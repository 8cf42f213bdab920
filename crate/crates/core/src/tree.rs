//! Exact discrete Wiener space.
//!
//! A [`PathTree`] of depth `N` carries a scaled symmetric random walk
//! `B_k = h (#up - #down)` with `h = sqrt(T/N)`. The tree is non-recombining,
//! so every node is a distinct path prefix and the node-indexed storage of an
//! [`AdaptedProcess`] is adapted by construction.
//!
//! Node addressing: level `k` holds `2^k` nodes indexed by `p`; the children of
//! `(k, p)` are `(k+1, 2p)` (up move) and `(k+1, 2p+1)` (down move). Process
//! values are stored level by level, node-major, `dim` components per node.

use crate::error::{Error, Result};
use crate::girsanov::Measure;

/// Depth-`N` binary tree discretizing Brownian motion on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTree {
    steps: usize,
    horizon: f64,
}

impl PathTree {
    pub const MAX_STEPS: usize = 24;

    pub fn new(steps: usize, horizon: f64) -> Result<Self> {
        if steps == 0 || steps > Self::MAX_STEPS {
            return Err(Error::Capacity { steps, max: Self::MAX_STEPS });
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid("horizon", format!("must be positive and finite, got {horizon}")));
        }
        Ok(Self { steps, horizon })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Spatial step of the walk, `sqrt(dt)`.
    pub fn h(&self) -> f64 {
        self.dt().sqrt()
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt()
    }

    pub fn level_len(&self, level: usize) -> usize {
        1usize << level
    }

    pub fn leaves(&self) -> usize {
        1usize << self.steps
    }

    /// Value of the walk at node `(level, node)`.
    #[inline]
    pub fn brownian(&self, level: usize, node: usize) -> f64 {
        let downs = node.count_ones() as f64;
        self.h() * (level as f64 - 2.0 * downs)
    }

    /// `B` as a scalar adapted process on levels `0..=N`.
    pub fn brownian_process(&self) -> AdaptedProcess {
        AdaptedProcess::from_fn(*self, 1, self.steps, |k, p, out| out[0] = self.brownian(k, p))
    }

    /// `B_T` on the leaves.
    pub fn terminal_brownian(&self) -> TerminalVariable {
        TerminalVariable::from_fn(*self, 1, |_, b, out| out[0] = b)
    }

    pub(crate) fn ensure_same(&self, other: &PathTree, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!(
                "{what}: tree ({}, {}) vs ({}, {})",
                self.steps, self.horizon, other.steps, other.horizon
            )));
        }
        Ok(())
    }
}

/// Vector-valued process indexed by tree nodes on levels `0..=last_level`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    tree: PathTree,
    dim: usize,
    levels: Vec<Vec<f64>>,
}

impl AdaptedProcess {
    pub fn zeros(tree: PathTree, dim: usize, last_level: usize) -> Self {
        assert!(last_level <= tree.steps(), "last level beyond tree depth");
        let levels = (0..=last_level).map(|k| vec![0.0; tree.level_len(k) * dim]).collect();
        Self { tree, dim, levels }
    }

    pub fn from_fn<F>(tree: PathTree, dim: usize, last_level: usize, mut fill: F) -> Self
    where
        F: FnMut(usize, usize, &mut [f64]),
    {
        let mut process = Self::zeros(tree, dim, last_level);
        for (k, level) in process.levels.iter_mut().enumerate() {
            for (p, out) in level.chunks_exact_mut(dim).enumerate() {
                fill(k, p, out);
            }
        }
        process
    }

    pub(crate) fn from_levels(tree: PathTree, dim: usize, levels: Vec<Vec<f64>>) -> Self {
        debug_assert!(levels.iter().enumerate().all(|(k, l)| l.len() == tree.level_len(k) * dim));
        Self { tree, dim, levels }
    }

    pub fn tree(&self) -> PathTree {
        self.tree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn last_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    #[inline]
    pub fn node(&self, k: usize, p: usize) -> &[f64] {
        &self.levels[k][p * self.dim..(p + 1) * self.dim]
    }

    #[inline]
    pub fn node_mut(&mut self, k: usize, p: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.levels[k][p * d..(p + 1) * d]
    }

    pub fn component(&self, i: usize) -> AdaptedProcess {
        assert!(i < self.dim);
        let levels = self
            .levels
            .iter()
            .map(|l| l.chunks_exact(self.dim).map(|c| c[i]).collect())
            .collect();
        Self { tree: self.tree, dim: 1, levels }
    }

    /// The leaf level as a terminal variable; requires `last_level == N`.
    pub fn terminal(&self) -> Result<TerminalVariable> {
        if self.last_level() != self.tree.steps() {
            return Err(Error::ShapeMismatch("process does not reach the leaves".into()));
        }
        Ok(TerminalVariable { tree: self.tree, dim: self.dim, values: self.levels[self.tree.steps()].clone() })
    }

    /// Expectation of the level-`k` values under `measure`.
    pub fn expectation(&self, k: usize, measure: &Measure) -> Vec<f64> {
        measure.expect_level(&self.levels[k], k, self.dim)
    }

    pub fn max_abs(&self) -> f64 {
        self.levels.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &AdaptedProcess) -> Result<AdaptedProcess> {
        self.tree.ensure_same(&other.tree, "sub")?;
        if self.dim != other.dim || self.levels.len() != other.levels.len() {
            return Err(Error::ShapeMismatch("sub: dimension or depth differs".into()));
        }
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Ok(Self { tree: self.tree, dim: self.dim, levels })
    }
}

/// `F_T`-measurable vector variable: one `R^m` value per leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalVariable {
    tree: PathTree,
    dim: usize,
    values: Vec<f64>,
}

impl TerminalVariable {
    pub fn new(tree: PathTree, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != tree.leaves() * dim {
            return Err(Error::ShapeMismatch(format!(
                "expected {} leaf values of dimension {dim}, got {}",
                tree.leaves(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("values", format!("non-finite leaf entry {v}")));
        }
        Ok(Self { tree, dim, values })
    }

    /// Builds a leaf variable from `(leaf index, B_T at that leaf, output)`.
    pub fn from_fn<F>(tree: PathTree, dim: usize, mut fill: F) -> Self
    where
        F: FnMut(usize, f64, &mut [f64]),
    {
        let n = tree.steps();
        let mut values = vec![0.0; tree.leaves() * dim];
        for (p, out) in values.chunks_exact_mut(dim).enumerate() {
            fill(p, tree.brownian(n, p), out);
        }
        Self { tree, dim, values }
    }

    pub fn constant(tree: PathTree, value: &[f64]) -> Self {
        Self::from_fn(tree, value.len(), |_, _, out| out.copy_from_slice(value))
    }

    pub fn tree(&self) -> PathTree {
        self.tree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn leaf(&self, p: usize) -> &[f64] {
        &self.values[p * self.dim..(p + 1) * self.dim]
    }

    /// Componentwise `max_leaf |X^i|`.
    pub fn sup_abs(&self) -> Vec<f64> {
        let mut sup = vec![0.0f64; self.dim];
        for leaf in self.values.chunks_exact(self.dim) {
            for (s, v) in sup.iter_mut().zip(leaf) {
                *s = s.max(v.abs());
            }
        }
        sup
    }

    /// `sqrt(E^P |X|^2)` under the symmetric measure.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v * v).sum();
        (sum / self.tree.leaves() as f64).sqrt()
    }

    /// `||self - other||_2` under the symmetric measure.
    pub fn l2_distance(&self, other: &TerminalVariable) -> Result<f64> {
        self.tree.ensure_same(&other.tree, "l2_distance")?;
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch("l2_distance: dimension differs".into()));
        }
        let sum: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((sum / self.tree.leaves() as f64).sqrt())
    }
}

/// Averages a child level into its parent level under `measure`.
pub(crate) fn average_level(measure: &Measure, child_level: usize, child: &[f64], dim: usize) -> Vec<f64> {
    let parent_level = child_level - 1;
    let parents = 1usize << parent_level;
    let mut out = vec![0.0; parents * dim];
    match measure.up_level(parent_level) {
        None => {
            for (p, o) in out.chunks_exact_mut(dim).enumerate() {
                let up = &child[2 * p * dim..(2 * p + 1) * dim];
                let down = &child[(2 * p + 1) * dim..(2 * p + 2) * dim];
                for i in 0..dim {
                    o[i] = 0.5 * (up[i] + down[i]);
                }
            }
        }
        Some(q) => {
            for (p, o) in out.chunks_exact_mut(dim).enumerate() {
                let up = &child[2 * p * dim..(2 * p + 1) * dim];
                let down = &child[(2 * p + 1) * dim..(2 * p + 2) * dim];
                let qp = q[p];
                for i in 0..dim {
                    o[i] = qp * up[i] + (1.0 - qp) * down[i];
                }
            }
        }
    }
    out
}

/// `E^measure[X | F_k]` as level-`k` node values.
pub fn cond_exp(x: &TerminalVariable, k: usize, measure: &Measure) -> Result<Vec<f64>> {
    x.tree.ensure_same(&measure.tree(), "cond_exp")?;
    let n = x.tree.steps();
    if k > n {
        return Err(Error::invalid("k", format!("level {k} exceeds tree depth {n}")));
    }
    let mut current = x.values.clone();
    for level in (k + 1..=n).rev() {
        current = average_level(measure, level, &current, x.dim);
    }
    Ok(current)
}

/// All conditional expectations `E^measure[X | F_k]`, `k = 0..=N`, as one process.
pub fn conditional_expectations(x: &TerminalVariable, measure: &Measure) -> Result<AdaptedProcess> {
    x.tree.ensure_same(&measure.tree(), "conditional_expectations")?;
    let n = x.tree.steps();
    let mut levels = vec![Vec::new(); n + 1];
    levels[n] = x.values.clone();
    for level in (1..=n).rev() {
        levels[level - 1] = average_level(measure, level, &levels[level], x.dim);
    }
    Ok(AdaptedProcess::from_levels(x.tree, x.dim, levels))
}

/// Largest one-step martingale defect of `s` under `measure`.
pub fn martingale_residual(s: &AdaptedProcess, measure: &Measure) -> Result<(f64, usize, usize)> {
    s.tree.ensure_same(&measure.tree(), "martingale_residual")?;
    let mut worst = (0.0f64, 0usize, 0usize);
    for k in 0..s.last_level() {
        let avg = average_level(measure, k + 1, s.level(k + 1), s.dim);
        for (idx, (a, v)) in avg.iter().zip(s.level(k)).enumerate() {
            let r = (a - v).abs();
            if r > worst.0 {
                worst = (r, k, idx / s.dim);
            }
        }
    }
    Ok(worst)
}

fn martingale_tolerance(s: &AdaptedProcess) -> f64 {
    1e-12 * s.max_abs().max(1.0)
}

/// Density (integrand) of the martingale representation of `s`.
///
/// `Z_k = (S_{k+1}^+ - S_{k+1}^-) / (2h)` on levels `0..last_level`. Under any
/// measure in the Girsanov family the sibling spread of the driving motion is
/// `2h`, so the same rule yields `D_B(S)` for `P` and `D_{B~}(S~)` for tilts.
pub fn martingale_density(s: &AdaptedProcess, measure: &Measure) -> Result<AdaptedProcess> {
    let (residual, level, node) = martingale_residual(s, measure)?;
    if residual > martingale_tolerance(s) {
        return Err(Error::NotMartingale { level, node, residual });
    }
    Ok(sibling_density(s))
}

/// Sibling difference over the sibling difference of `B` (`2h` up to rounding),
/// without the martingale check.
pub(crate) fn sibling_density(s: &AdaptedProcess) -> AdaptedProcess {
    let tree = s.tree;
    let dim = s.dim;
    let last = s.last_level();
    let levels = (0..last)
        .map(|k| {
            let child = s.level(k + 1);
            let mut out = vec![0.0; tree.level_len(k) * dim];
            for (p, o) in out.chunks_exact_mut(dim).enumerate() {
                let inv = 1.0 / (tree.brownian(k + 1, 2 * p) - tree.brownian(k + 1, 2 * p + 1));
                for i in 0..dim {
                    o[i] = (child[2 * p * dim + i] - child[(2 * p + 1) * dim + i]) * inv;
                }
            }
            out
        })
        .collect::<Vec<_>>();
    if levels.is_empty() {
        return AdaptedProcess { tree, dim, levels: vec![vec![0.0; dim]] };
    }
    AdaptedProcess::from_levels(tree, dim, levels)
}

/// Discrete Ito sum `I_k = sum_{j<k} Z_j (W_{j+1} - W_j)` against a scalar integrator `W`.
pub fn ito_sum(z: &AdaptedProcess, integrator: &AdaptedProcess) -> Result<AdaptedProcess> {
    z.tree.ensure_same(&integrator.tree, "ito_sum")?;
    if integrator.dim != 1 {
        return Err(Error::ShapeMismatch("ito_sum: integrator must be scalar (d = 1)".into()));
    }
    let last = integrator.last_level();
    if z.last_level() + 1 < last {
        return Err(Error::ShapeMismatch(format!(
            "ito_sum: integrand defined on levels 0..={}, integrator reaches {last}",
            z.last_level()
        )));
    }
    let dim = z.dim;
    let mut out = AdaptedProcess::zeros(z.tree, dim, last);
    for k in 0..last {
        let (lower, upper) = out.levels.split_at_mut(k + 1);
        let parent = &lower[k];
        let child = &mut upper[0];
        let w_parent = integrator.level(k);
        let w_child = integrator.level(k + 1);
        let zk = z.level(k);
        for c in 0..child.len() / dim {
            let p = c / 2;
            let dw = w_child[c] - w_parent[p];
            for i in 0..dim {
                child[c * dim + i] = parent[p * dim + i] + zk[p * dim + i] * dw;
            }
        }
    }
    Ok(out)
}

/// Predictable bracket `<S1^i, S2^i>_k = sum_{j<k} z1_j z2_j dt`, componentwise.
pub fn bracket(s1: &AdaptedProcess, s2: &AdaptedProcess, measure: &Measure) -> Result<AdaptedProcess> {
    s1.tree.ensure_same(&s2.tree, "bracket")?;
    if s1.dim != s2.dim || s1.last_level() != s2.last_level() {
        return Err(Error::ShapeMismatch("bracket: dimension or depth differs".into()));
    }
    let z1 = martingale_density(s1, measure)?;
    let z2 = martingale_density(s2, measure)?;
    Ok(bracket_from_densities(&z1, &z2))
}

pub(crate) fn bracket_from_densities(z1: &AdaptedProcess, z2: &AdaptedProcess) -> AdaptedProcess {
    let tree = z1.tree;
    let dim = z1.dim;
    let dt = tree.dt();
    let last = z1.last_level() + 1;
    let mut out = AdaptedProcess::zeros(tree, dim, last);
    for k in 0..last {
        let (lower, upper) = out.levels.split_at_mut(k + 1);
        let parent = &lower[k];
        let child = &mut upper[0];
        let a = z1.level(k);
        let b = z2.level(k);
        for c in 0..child.len() / dim {
            let p = c / 2;
            for i in 0..dim {
                child[c * dim + i] = parent[p * dim + i] + a[p * dim + i] * b[p * dim + i] * dt;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sym(tree: PathTree) -> Measure {
        Measure::symmetric(tree)
    }

    #[test]
    fn build_tree_one_step() {
        let tree = PathTree::new(1, 1.0).unwrap();
        assert_eq!(tree.brownian(1, 0), 1.0);
        assert_eq!(tree.brownian(1, 1), -1.0);
        assert_eq!(tree.brownian(0, 0), 0.0);
    }

    #[test]
    fn build_tree_two_steps() {
        let tree = PathTree::new(2, 1.0).unwrap();
        let h = 0.5f64.sqrt();
        let leaves: Vec<f64> = (0..4).map(|p| tree.brownian(2, p)).collect();
        assert_abs_diff_eq!(leaves[0], 2.0 * h, epsilon = 1e-15);
        assert_eq!(leaves[1], 0.0);
        assert_eq!(leaves[2], 0.0);
        assert_abs_diff_eq!(leaves[3], -2.0 * h, epsilon = 1e-15);
    }

    #[test]
    fn capacity_guard() {
        assert!(matches!(PathTree::new(25, 1.0), Err(Error::Capacity { .. })));
        assert!(matches!(PathTree::new(0, 1.0), Err(Error::Capacity { .. })));
        assert!(PathTree::new(3, 0.0).is_err());
    }

    #[test]
    fn brownian_increments_are_exact() {
        let tree = PathTree::new(6, 0.7).unwrap();
        let h = tree.h();
        for k in 0..6 {
            for p in 0..tree.level_len(k) {
                let b = tree.brownian(k, p);
                assert_abs_diff_eq!(tree.brownian(k + 1, 2 * p) - b, h, epsilon = 1e-14);
                assert_abs_diff_eq!(tree.brownian(k + 1, 2 * p + 1) - b, -h, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn cond_exp_two_leaves() {
        let tree = PathTree::new(1, 1.0).unwrap();
        let x = TerminalVariable::new(tree, 1, vec![0.0, 2.0]).unwrap();
        assert_eq!(cond_exp(&x, 0, &sym(tree)).unwrap(), vec![1.0]);
        // Value 2 on the up leaf, 0 on the down leaf: 0.75 * 2 + 0.25 * 0.
        let y = TerminalVariable::from_fn(tree, 1, |_, b, out| out[0] = b + 1.0);
        let tilted = Measure::from_up_probabilities(tree, vec![vec![0.75]]).unwrap();
        assert_abs_diff_eq!(cond_exp(&y, 0, &tilted).unwrap()[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cond_exp(&y, 0, &sym(tree)).unwrap()[0], 1.0, epsilon = 1e-15);
        assert_eq!(cond_exp(&x, 1, &sym(tree)).unwrap(), x.values());
    }

    #[test]
    fn cond_exp_rejects_foreign_measure() {
        let tree = PathTree::new(2, 1.0).unwrap();
        let other = PathTree::new(3, 1.0).unwrap();
        let x = TerminalVariable::constant(tree, &[1.0]);
        assert!(matches!(cond_exp(&x, 0, &sym(other)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn density_of_brownian_is_one() {
        let tree = PathTree::new(5, 1.3).unwrap();
        let z = martingale_density(&tree.brownian_process(), &sym(tree)).unwrap();
        for k in 0..5 {
            assert!(z.level(k).iter().all(|v| (v - 1.0).abs() < 1e-14));
        }
    }

    #[test]
    fn density_of_squared_brownian_martingale() {
        // S_k = B_k^2 + (N - k) dt is E[B_T^2 | F_k]; its density is 2 B_k.
        let tree = PathTree::new(2, 1.0).unwrap();
        let dt = tree.dt();
        let s = AdaptedProcess::from_fn(tree, 1, 2, |k, p, out| {
            let b = tree.brownian(k, p);
            out[0] = b * b + (2 - k) as f64 * dt;
        });
        let z = martingale_density(&s, &sym(tree)).unwrap();
        for k in 0..2 {
            for p in 0..tree.level_len(k) {
                assert_abs_diff_eq!(z.node(k, p)[0], 2.0 * tree.brownian(k, p), epsilon = 1e-14);
            }
        }
        // Cross-check against enumerated cond_exp of B_T^2.
        let bt2 = TerminalVariable::from_fn(tree, 1, |_, b, out| out[0] = b * b);
        let y = conditional_expectations(&bt2, &sym(tree)).unwrap();
        for k in 0..=2 {
            for (a, b) in y.level(k).iter().zip(s.level(k)) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn density_of_constant_is_zero() {
        let tree = PathTree::new(4, 1.0).unwrap();
        let s = AdaptedProcess::from_fn(tree, 2, 4, |_, _, out| out.copy_from_slice(&[3.0, -1.0]));
        let z = martingale_density(&s, &sym(tree)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn density_rejects_non_martingale() {
        let tree = PathTree::new(3, 1.0).unwrap();
        let s = AdaptedProcess::from_fn(tree, 1, 3, |k, _, out| out[0] = k as f64);
        assert!(matches!(martingale_density(&s, &sym(tree)), Err(Error::NotMartingale { .. })));
    }

    #[test]
    fn ito_sum_basic_cases() {
        let tree = PathTree::new(4, 2.0).unwrap();
        let b = tree.brownian_process();
        let ones = AdaptedProcess::from_fn(tree, 1, 3, |_, _, out| out[0] = 1.0);
        let i = ito_sum(&ones, &b).unwrap();
        for k in 0..=4 {
            for (a, e) in i.level(k).iter().zip(b.level(k)) {
                assert_abs_diff_eq!(a, e, epsilon = 1e-14);
            }
        }
        let zeros = AdaptedProcess::zeros(tree, 1, 3);
        assert_eq!(ito_sum(&zeros, &b).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn bracket_of_brownian_is_time() {
        let tree = PathTree::new(5, 1.5).unwrap();
        let b = tree.brownian_process();
        let q = bracket(&b, &b, &sym(tree)).unwrap();
        for k in 0..=5 {
            assert!(q.level(k).iter().all(|v| (v - tree.time(k)).abs() < 1e-14));
        }
        let c = AdaptedProcess::from_fn(tree, 1, 5, |_, _, out| out[0] = 2.0);
        assert_eq!(bracket(&b, &c, &sym(tree)).unwrap().max_abs(), 0.0);
    }
}
