//! Uniform one-dimensional grids and `m`-component grid functions.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        let g = Self { x_min, x_max, points };
        g.validate()?;
        Ok(g)
    }

    /// Grid on `[x_min, x_max]` with spacing as close to `dx` as possible (never larger).
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::invalid("dx", "must be positive"));
        }
        let cells = ((x_max - x_min) / dx - 1e-9).ceil().max(2.0) as usize;
        Self::new(x_min, x_max, cells + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 3 {
            return Err(Error::invalid("points", format!("need at least 3 grid points, got {}", self.points)));
        }
        if !(self.x_max > self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::invalid("x_max", format!("empty interval [{}, {}]", self.x_min, self.x_max)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |i| self.x(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min - 1e-12 && x <= self.x_max + 1e-12
    }

    /// Cell index and weight of `x`, clamped to the grid.
    #[inline]
    pub(crate) fn locate(&self, x: f64) -> (usize, f64) {
        let s = ((x - self.x_min) / self.dx()).clamp(0.0, (self.points - 1) as f64);
        let i = (s.floor() as usize).min(self.points - 2);
        (i, s - i as f64)
    }
}

/// `m`-component function sampled on a [`SpatialGrid`], optionally with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpatialGrid,
    dim: usize,
    values: Vec<f64>,
    gradient: Option<Vec<f64>>,
}

impl GridFunction {
    pub fn new(grid: SpatialGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if dim == 0 || values.len() != grid.points * dim {
            return Err(Error::ShapeMismatch(format!("grid of {} points x {dim} components vs {} values", grid.points, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "non-finite grid value"));
        }
        Ok(Self { grid, dim, values, gradient: None })
    }

    pub fn from_fn<F: FnMut(f64, &mut [f64])>(grid: SpatialGrid, dim: usize, mut fill: F) -> Result<Self> {
        let mut values = vec![0.0; grid.points * dim];
        for (i, out) in values.chunks_exact_mut(dim).enumerate() {
            fill(grid.x(i), out);
        }
        Self::new(grid, dim, values)
    }

    pub fn with_gradient(mut self, gradient: Vec<f64>) -> Result<Self> {
        if gradient.len() != self.values.len() {
            return Err(Error::ShapeMismatch("gradient layer size".into()));
        }
        self.gradient = Some(gradient);
        Ok(self)
    }

    /// Attaches central differences (one-sided at the ends) as the gradient layer.
    pub fn with_central_gradient(mut self) -> Self {
        let (g, d) = (self.grid.points, self.dim);
        let dx = self.grid.dx();
        let mut grad = vec![0.0; g * d];
        for i in 0..g {
            let (lo, hi, w) = if i == 0 {
                (0, 1, dx)
            } else if i == g - 1 {
                (g - 2, g - 1, dx)
            } else {
                (i - 1, i + 1, 2.0 * dx)
            };
            for c in 0..d {
                grad[i * d + c] = (self.values[hi * d + c] - self.values[lo * d + c]) / w;
            }
        }
        self.gradient = Some(grad);
        self
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradient(&self) -> Option<&[f64]> {
        self.gradient.as_deref()
    }

    pub fn value_at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    fn interp_layer(&self, layer: &[f64], x: f64, out: &mut [f64]) -> bool {
        let (i, w) = self.grid.locate(x);
        let d = self.dim;
        for c in 0..d {
            out[c] = (1.0 - w) * layer[i * d + c] + w * layer[(i + 1) * d + c];
        }
        self.grid.contains(x)
    }

    /// Piecewise-linear interpolation, clamped outside the grid. Returns whether `x` was inside.
    pub fn interpolate(&self, x: f64, out: &mut [f64]) -> bool {
        self.interp_layer(&self.values, x, out)
    }

    /// Interpolated gradient layer; falls back to the slope of the interpolant.
    pub fn interpolate_gradient(&self, x: f64, out: &mut [f64]) -> bool {
        match &self.gradient {
            Some(g) => self.interp_layer(g, x, out),
            None => {
                self.slope(x, out);
                self.grid.contains(x)
            }
        }
    }

    /// Slope of the piecewise-linear interpolant (zero outside the grid).
    pub fn slope(&self, x: f64, out: &mut [f64]) {
        let d = self.dim;
        if !self.grid.contains(x) {
            out.fill(0.0);
            return;
        }
        let (i, _) = self.grid.locate(x);
        let dx = self.grid.dx();
        for c in 0..d {
            out[c] = (self.values[(i + 1) * d + c] - self.values[i * d + c]) / dx;
        }
    }

    /// Second central difference at grid node `i` (mirrored at the ends).
    pub fn second_difference(&self, i: usize, out: &mut [f64]) {
        let g = self.grid.points;
        let d = self.dim;
        let dx2 = self.grid.dx().powi(2);
        let lo = if i == 0 { 1 } else { i - 1 };
        let hi = if i == g - 1 { g - 2 } else { i + 1 };
        for c in 0..d {
            out[c] = (self.values[lo * d + c] - 2.0 * self.values[i * d + c] + self.values[hi * d + c]) / dx2;
        }
    }

    /// Interpolated second central difference.
    pub fn interpolate_second(&self, x: f64, out: &mut [f64]) -> bool {
        let (i, w) = self.grid.locate(x);
        let d = self.dim;
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        self.second_difference(i, &mut a);
        self.second_difference(i + 1, &mut b);
        for c in 0..d {
            out[c] = (1.0 - w) * a[c] + w * b[c];
        }
        self.grid.contains(x)
    }

    /// Componentwise `max_x |u^i|`.
    pub fn sup_abs(&self) -> Vec<f64> {
        let mut s = vec![0.0f64; self.dim];
        for row in self.values.chunks_exact(self.dim) {
            for (a, v) in s.iter_mut().zip(row) {
                *a = a.max(v.abs());
            }
        }
        s
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest Euclidean norm of the slope of the interpolant over all cells.
    pub fn max_slope(&self) -> f64 {
        let d = self.dim;
        let dx = self.grid.dx();
        (0..self.grid.points - 1)
            .map(|i| {
                (0..d)
                    .map(|c| ((self.values[(i + 1) * d + c] - self.values[i * d + c]) / dx).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// CSV with columns `x, u1..um, du1..dum` (gradient columns only when present).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["x".to_string()];
        header.extend((1..=self.dim).map(|i| format!("u{i}")));
        if self.gradient.is_some() {
            header.extend((1..=self.dim).map(|i| format!("du{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.grid.points {
            let mut row = vec![format!("{}", self.grid.x(i))];
            row.extend(self.value_at(i).iter().map(|v| format!("{v}")));
            if let Some(g) = &self.gradient {
                row.extend(g[i * self.dim..(i + 1) * self.dim].iter().map(|v| format!("{v}")));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Grid functions at increasing times, linearly interpolated in between.
#[derive(Debug, Clone)]
pub struct GridFamily {
    times: Vec<f64>,
    frames: Vec<GridFunction>,
}

impl GridFamily {
    pub fn new(times: Vec<f64>, frames: Vec<GridFunction>) -> Result<Self> {
        if times.is_empty() || times.len() != frames.len() {
            return Err(Error::ShapeMismatch("times and frames must have equal non-zero length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times", "must be strictly increasing"));
        }
        let (g, d) = (frames[0].grid, frames[0].dim);
        if frames.iter().any(|f| f.grid != g || f.dim != d) {
            return Err(Error::ShapeMismatch("frames on different grids".into()));
        }
        Ok(Self { times, frames })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[GridFunction] {
        &self.frames
    }

    pub fn grid(&self) -> SpatialGrid {
        self.frames[0].grid
    }

    pub fn dim(&self) -> usize {
        self.frames[0].dim
    }

    pub fn last(&self) -> &GridFunction {
        self.frames.last().expect("non-empty")
    }

    /// Frame index pair and weight for time `t` (clamped to the covered range).
    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let j = self.times.partition_point(|s| *s <= t);
        let (a, b) = (j - 1, j);
        let w = (t - self.times[a]) / (self.times[b] - self.times[a]);
        if w < 1e-12 {
            (a, a, 0.0)
        } else if w > 1.0 - 1e-12 {
            (b, b, 0.0)
        } else {
            (a, b, w)
        }
    }

    /// The frame at time `t` if one exists (within `1e-9`).
    pub fn frame_at(&self, t: f64) -> Option<&GridFunction> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-9).map(|i| &self.frames[i])
    }

    fn blend<F: Fn(&GridFunction, &mut [f64]) -> bool>(&self, t: f64, out: &mut [f64], eval: F) -> bool {
        let (a, b, w) = self.bracket(t);
        let inside = eval(&self.frames[a], out);
        if a != b {
            let mut other = vec![0.0; out.len()];
            eval(&self.frames[b], &mut other);
            for (o, v) in out.iter_mut().zip(other) {
                *o = (1.0 - w) * *o + w * v;
            }
        }
        inside
    }

    pub fn value(&self, x: f64, t: f64, out: &mut [f64]) -> bool {
        self.blend(t, out, |f, o| f.interpolate(x, o))
    }

    pub fn gradient(&self, x: f64, t: f64, out: &mut [f64]) -> bool {
        self.blend(t, out, |f, o| f.interpolate_gradient(x, o))
    }

    pub fn second_derivative(&self, x: f64, t: f64, out: &mut [f64]) -> bool {
        self.blend(t, out, |f, o| f.interpolate_second(x, o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_gradient() {
        let grid = SpatialGrid::new(-1.0, 1.0, 21).unwrap();
        let f = GridFunction::from_fn(grid, 2, |x, o| {
            o[0] = 2.0 * x + 1.0;
            o[1] = x * x
        })
        .unwrap()
        .with_central_gradient();
        let mut out = [0.0; 2];
        assert!(f.interpolate(0.33, &mut out));
        assert!((out[0] - 1.66).abs() < 1e-12);
        f.interpolate_gradient(0.3, &mut out);
        assert!((out[0] - 2.0).abs() < 1e-12 && (out[1] - 0.6).abs() < 1e-12);
        f.second_difference(5, &mut out);
        assert!((out[1] - 2.0).abs() < 1e-9);
        assert!(!f.interpolate(1.5, &mut out));
        assert!((out[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_columns() {
        let grid = SpatialGrid::new(0.0, 1.0, 3).unwrap();
        let f = GridFunction::from_fn(grid, 1, |x, o| o[0] = x).unwrap().with_central_gradient();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "x,u1,du1");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn family_time_interpolation() {
        let grid = SpatialGrid::new(0.0, 1.0, 5).unwrap();
        let a = GridFunction::from_fn(grid, 1, |_, o| o[0] = 0.0).unwrap();
        let b = GridFunction::from_fn(grid, 1, |_, o| o[0] = 1.0).unwrap();
        let fam = GridFamily::new(vec![0.0, 2.0], vec![a, b]).unwrap();
        let mut o = [0.0];
        fam.value(0.5, 0.5, &mut o);
        assert!((o[0] - 0.25).abs() < 1e-15);
        assert!(fam.frame_at(2.0).is_some());
        assert!(fam.frame_at(1.0).is_none());
    }
}
