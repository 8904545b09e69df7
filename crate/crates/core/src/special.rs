//! Scalar special functions: the Laplace rate function `h`, Gaussian tail
//! bounds and the regularized upper incomplete gamma function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{invalid, Error, Result};

const GOLDEN_MAX_ITER: usize = 200;
const GOLDEN_TOL: f64 = 1e-14;

/// `h(u) = sqrt(1+u^2) - 1 - log((1 + sqrt(1+u^2)) / 2)`.
///
/// Evaluated as `d - log1p(d/2)` with `d = sqrt(1+u^2) - 1`, where `d` itself
/// is formed as `u^2 / (1 + sqrt(1+u^2))` below one so small arguments do not
/// cancel (`h(u) ~ u^2/4` near zero).
pub fn h_closed(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(invalid(format!("h(u) needs u >= 0, got {u}")));
    }
    Ok(h_unchecked(u))
}

pub(crate) fn h_unchecked(u: f64) -> f64 {
    let s = 1f64.hypot(u);
    let d = if u < 1.0 { u * u / (1.0 + s) } else { s - 1.0 };
    d - (0.5 * d).ln_1p()
}

/// Result of the direct maximisation of `theta*u + log(1 - theta^2)` over `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HSup {
    pub value: f64,
    pub argmax: f64,
    pub iterations: usize,
}

fn h_objective(theta: f64, u: f64) -> f64 {
    let log_term = if theta < 0.5 {
        (-theta * theta).ln_1p()
    } else {
        ((1.0 - theta) * (1.0 + theta)).ln()
    };
    theta * u + log_term
}

/// `sup_{theta in (0,1)} (theta*u + log(1 - theta^2))` by golden-section search.
pub fn h_sup(u: f64) -> Result<HSup> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(invalid(format!("h_sup needs finite u >= 0, got {u}")));
    }
    if u == 0.0 {
        return Ok(HSup {
            value: 0.0,
            argmax: 0.0,
            iterations: 0,
        });
    }
    let f = |th: f64| h_objective(th, u);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut iterations = 0;
    while hi - lo > GOLDEN_TOL {
        if iterations == GOLDEN_MAX_ITER {
            let last = 0.5 * (lo + hi);
            return Err(Error::NumericFailure {
                context: "h_sup",
                detail: format!("golden section did not reach width {GOLDEN_TOL:e}"),
                last,
            });
        }
        iterations += 1;
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let (argmax, value) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok(HSup {
        value,
        argmax,
        iterations,
    })
}

/// `(1/sqrt(2 pi)) * u/(u^2+1) * exp(-u^2/2)`, a lower bound on `P(G > u)`.
pub fn gaussian_tail_lower(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(invalid(format!("Gaussian tail bound needs u > 0, got {u}")));
    }
    Ok((-0.5 * u * u).exp() * u / (u * u + 1.0) / (2.0 * PI).sqrt())
}

/// Simplified form `(1/(2 sqrt(2 pi))) * (1/u) * exp(-u^2/2)`, valid for `u >= 1`.
pub fn gaussian_tail_lower_simple(u: f64) -> Result<f64> {
    if !(u >= 1.0) {
        return Err(invalid(format!(
            "simplified Gaussian tail bound needs u >= 1, got {u}"
        )));
    }
    Ok((-0.5 * u * u).exp() / u / (2.0 * (2.0 * PI).sqrt()))
}

/// Exact standard Gaussian upper tail `P(G > u)`.
pub fn gaussian_tail(u: f64) -> f64 {
    0.5 * libm::erfc(u * FRAC_1_SQRT_2)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Regularized upper incomplete gamma `Q(shape, x)`.
pub fn gamma_upper_tail(shape: f64, x: f64) -> Result<f64> {
    Ok(ln_gamma_upper_tail(shape, x)?.exp())
}

/// `log Q(shape, x)`, finite wherever `Q` is positive in exact arithmetic.
pub fn ln_gamma_upper_tail(shape: f64, x: f64) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return Err(invalid(format!(
            "incomplete gamma shape must be positive, got {shape}"
        )));
    }
    if !(x >= 0.0) {
        return Err(invalid(format!(
            "incomplete gamma argument must be >= 0, got {x}"
        )));
    }
    Ok(ln_q_unchecked(shape, x))
}

pub(crate) fn ln_q_unchecked(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let ln_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P by series, Q = 1 - P
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..100_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let ln_p = ln_prefactor + sum.ln();
        (-ln_p.exp_m1()).ln()
    } else {
        // modified Lentz continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut frac = d;
        for i in 1..100_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            frac *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        ln_prefactor + frac.ln()
    }
}
