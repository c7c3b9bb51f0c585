//! Characteristic functions of the scenery law: the exact `lambda` and the
//! stable target `lambda_bar`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use super::doa::DoaLaw;
use crate::error::{param_err, Result};
use crate::numeric::{compensated_sum, factorial, falling, integrate, BERNOULLI_EVEN};

/// Which model CF to evaluate.
#[derive(Clone, Copy, Debug)]
pub enum ModelCf<'a> {
    /// `E exp(i u xi)` computed from the law itself.
    Lambda(&'a DoaLaw),
    /// `exp(-|u|^alpha)`.
    LambdaBar { alpha: f64 },
}

pub fn model_cf(which: ModelCf<'_>, u: f64) -> Result<f64> {
    if !u.is_finite() {
        return param_err("CF argument must be finite");
    }
    match which {
        ModelCf::Lambda(law) => {
            law.validate()?;
            Ok(law.cf(u))
        }
        ModelCf::LambdaBar { alpha } => {
            if !(alpha > 0.0 && alpha <= 2.0) {
                return param_err(format!("alpha must be in (0, 2], got {alpha}"));
            }
            Ok(lambda_bar(alpha, u))
        }
    }
}

#[inline]
pub fn lambda_bar(alpha: f64, u: f64) -> f64 {
    (-u.abs().powf(alpha)).exp()
}

/// Maps u onto [0, pi] using evenness and 2pi-periodicity of lattice CFs.
fn reduce_lattice(u: f64) -> f64 {
    let v = u.abs() % TAU;
    if v > PI {
        TAU - v
    } else {
        v
    }
}

/// `Σ_{k>=1} k^{-1-a} (1 - cos(k u))` for `a` in (0, 2).
///
/// For the symmetric discrete Pareto law with `pmf(±k) = c k^{-1-a}` the CF
/// is `1 - 2c` times this sum.
pub(crate) fn pareto_deficit(a: f64, u: f64) -> f64 {
    let u = reduce_lattice(u);
    if u == 0.0 {
        return 0.0;
    }
    if a == 1.0 {
        // Σ cos(ku)/k^2 = pi^2/6 - pi u/2 + u^2/4 on [0, 2pi].
        return PI * u / 2.0 - u * u / 4.0;
    }
    pareto_deficit_series(a, u)
}

/// `∫_0^∞ y^{-1-a} (1 - cos y) dy`.
fn deficit_constant(a: f64) -> f64 {
    PI / (2.0 * a * gamma(a) * (PI * a / 2.0).sin())
}

/// `∫_z^∞ y^{-1-a} (1 - cos y) dy` for z > 0.
fn deficit_tail_integral(a: f64, z: f64) -> f64 {
    if z <= 2.0 {
        // Subtract the head ∫_0^z using the cosine power series.
        let mut head = 0.0;
        let mut m = 1;
        loop {
            let e = 2.0 * m as f64 - a;
            let term = z.powf(e) / (factorial(2 * m) * e);
            head += if m % 2 == 1 { term } else { -term };
            if term < 1e-19 || m > 40 {
                break;
            }
            m += 1;
        }
        deficit_constant(a) - head
    } else {
        // ∫_z^∞ y^{-s} e^{iy} dy = i e^{iz} ∫_0^∞ (z + it)^{-s} e^{-t} dt
        let s = 1.0 + a;
        let re = integrate(
            |t| (Complex64::new(z, t).powf(-s) * (-t).exp()).re,
            0.0,
            50.0,
            25,
        );
        let im = integrate(
            |t| (Complex64::new(z, t).powf(-s) * (-t).exp()).im,
            0.0,
            50.0,
            25,
        );
        let osc = Complex64::i() * Complex64::from_polar(1.0, z) * Complex64::new(re, im);
        z.powf(-a) / a - osc.re
    }
}

/// Euler-Maclaurin evaluation of [`pareto_deficit`], valid for u in (0, pi].
pub(crate) fn pareto_deficit_series(a: f64, u: f64) -> f64 {
    const M: usize = 64;
    let s = 1.0 + a;
    let f = |x: f64| {
        let h = (0.5 * u * x).sin();
        x.powf(-s) * 2.0 * h * h
    };
    let head = compensated_sum((1..M).map(|k| f(k as f64)));
    let m = M as f64;
    // m-th derivative of x^{-s} - Re[x^{-s} e^{iux}] at x = M
    let deriv = |order: usize| {
        let power = falling(-s, order) * m.powf(-s - order as f64);
        let iu = Complex64::new(0.0, u);
        let mut osc = Complex64::new(0.0, 0.0);
        let mut binom = 1.0;
        for j in 0..=order {
            osc += binom * falling(-s, j) * m.powf(-s - j as f64) * iu.powu((order - j) as u32);
            binom = binom * (order - j) as f64 / (j + 1) as f64;
        }
        power - (osc * Complex64::from_polar(1.0, u * m)).re
    };
    let mut tail = u.powf(a) * deficit_tail_integral(a, u * m) + 0.5 * f(m);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        tail -= b / factorial(2 * j + 2) * deriv(2 * j + 1);
    }
    head + tail
}
