//! Adaptive Gauss-Kronrod (7/15) quadrature and a composite Simpson rule.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-14, rel: 1e-10, max_segments: 4000 }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = r * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * r, ((kronrod - gauss) * r).abs())
}

/// Globally adaptive integration of `f` over `[a, b]`, refining the segment
/// with the largest error estimate first.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    integrate_with_breaks(f, &[a, b], tol)
}

/// As [`integrate`], starting from the partition given by `breaks` (ascending).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> Result<f64> {
    if breaks.len() < 2 {
        return Err(Error::Quadrature("need at least two break points".into()));
    }
    let mut segments: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    if segments.is_empty() {
        return Ok(0.0);
    }
    loop {
        let total: f64 = segments.iter().map(|s| s.2).sum();
        let err: f64 = segments.iter().map(|s| s.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if segments.len() >= tol.max_segments {
            return Err(Error::Quadrature(format!(
                "error estimate {err:.3e} above tolerance after {} segments",
                segments.len()
            )));
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (a, b, _, _) = segments.swap_remove(idx);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        segments.push((a, m, v1, e1));
        segments.push((m, b, v2, e2));
    }
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_and_gaussian() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tolerance::default()).unwrap();
        assert_relative_eq!(v, (64.0 - 1.0) / 6.0 - 9.0, max_relative = 1e-13);
        let g = integrate(|x| (-0.5 * x * x).exp(), -12.0, 12.0, Tolerance::default()).unwrap();
        assert_relative_eq!(g, (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-12);
        let s = simpson(|x| x.cos(), 0.0, 1.0, 200);
        assert_relative_eq!(s, 1f64.sin(), max_relative = 1e-10);
    }

    #[test]
    fn kinked_integrand() {
        let v = integrate(|x: f64| x.abs(), -1.0, 3.0, Tolerance::default()).unwrap();
        assert_relative_eq!(v, 5.0, max_relative = 1e-10);
    }
}
