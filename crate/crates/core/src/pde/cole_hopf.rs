//! Exact solution of the viscous Burgers equation `u_t + u u_x = u_xx / 2`.
//!
//! With `phi = int K_T(x - y) exp(-U0(y)) dy`, `U0' = u0`, the solution is
//! `u = -phi_x / phi`. Two independent quadratures are offered so that one can
//! be checked against the other.

use crate::coefficients::InitialData;
use crate::error::{Error, Result};
use crate::pde::quadrature::{integrate, simpson, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColeHopfScheme {
    /// `int u0 K e^{-U0} / int K e^{-U0}` by adaptive Gauss-Kronrod.
    Adaptive,
    /// `int (x - y)/T K e^{-U0} / int K e^{-U0}` by composite Simpson.
    Composite,
}

fn half_width(u0: &InitialData, t: f64) -> f64 {
    let sup = u0.sup_abs().first().copied().unwrap_or(0.0);
    8.0 * t.sqrt() + 4.0 * t * sup
}

pub fn cole_hopf(u0: &InitialData, x: f64, t: f64) -> Result<f64> {
    cole_hopf_with(u0, x, t, ColeHopfScheme::Adaptive)
}

pub fn cole_hopf_with(u0: &InitialData, x: f64, t: f64, scheme: ColeHopfScheme) -> Result<f64> {
    if u0.dim() != 1 {
        return Err(Error::Scope("Cole-Hopf needs scalar initial data".into()));
    }
    if !(t >= 0.0) || !x.is_finite() {
        return Err(Error::invalid("t", "need t >= 0 and finite x"));
    }
    if t == 0.0 {
        let mut v = [0.0];
        u0.eval(x, &mut v);
        return Ok(v[0]);
    }
    let potential = |y: f64| {
        u0.potential(y).ok_or_else(|| Error::Scope(format!("no closed-form potential for {}", u0.label())))
    };
    potential(x)?;
    let w = half_width(u0, t);
    let (a, b) = (x - w, x + w);
    // log-weight, shifted by its value at the kernel centre to avoid overflow
    let shift = -potential(x)?;
    let weight = |y: f64| (-(x - y) * (x - y) / (2.0 * t) - u0.potential(y).unwrap_or(0.0) - shift).exp();
    match scheme {
        ColeHopfScheme::Adaptive => {
            let tol = Tolerance { abs: 0.0, rel: 1e-11, max_segments: 4000 };
            let den = integrate(weight, a, b, tol)?;
            let abs = Tolerance { abs: 1e-13 * den, rel: 1e-11, max_segments: 4000 };
            let num = integrate(
                |y| {
                    let mut v = [0.0];
                    u0.eval(y, &mut v);
                    v[0] * weight(y)
                },
                a,
                b,
                abs,
            )?;
            Ok(num / den)
        }
        ColeHopfScheme::Composite => {
            let panels = 8000;
            let den = simpson(weight, a, b, panels);
            let num = simpson(|y| (x - y) / t * weight(y), a, b, panels);
            Ok(num / den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_travels_unchanged() {
        let u0 = InitialData::Constant(vec![0.7]);
        for s in [ColeHopfScheme::Adaptive, ColeHopfScheme::Composite] {
            assert!((cole_hopf_with(&u0, 0.3, 0.4, s).unwrap() - 0.7).abs() < 1e-9);
        }
    }

    #[test]
    fn short_time_limit() {
        let u0 = InitialData::NegTanh;
        for x in [-1.0, 0.2, 0.8] {
            assert!((cole_hopf(&u0, x, 1e-6).unwrap() + f64::tanh(x)).abs() < 1e-3);
        }
    }

    #[test]
    fn schemes_agree() {
        for u0 in [InitialData::NegTanh, InitialData::Gaussian { amplitude: 1.0, width: 0.7 }] {
            for x in [0.0, 0.35, -1.1] {
                let a = cole_hopf_with(&u0, x, 0.25, ColeHopfScheme::Adaptive).unwrap();
                let b = cole_hopf_with(&u0, x, 0.25, ColeHopfScheme::Composite).unwrap();
                assert!((a - b).abs() < 1e-6, "{x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn vector_data_rejected() {
        assert!(cole_hopf(&InitialData::TwoComponent, 0.0, 0.1).is_err());
    }
}
