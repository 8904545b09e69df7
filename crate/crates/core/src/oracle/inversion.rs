//! Tail probabilities by inverting the characteristic function along a
//! vertical line `Re z = c` through the saddle point.
//!
//! For `c > 0` inside the strip where the moment generating function `M` is
//! finite,
//!
//! ```text
//! P(S > t) = (1/pi) int_0^inf Re[ M(c+is) e^{-(c+is) t} / (c+is) ] ds
//! ```
//!
//! and for `c < 0` the same integral plus one. `c = 0` collapses to the
//! Gil–Pelaez formula. Placing `c` at the saddle point factors out
//! `exp(K(c) - c t)`, so deep tails keep their relative accuracy. The
//! integrand is oscillatory with half-period `pi / t`; it is integrated cycle
//! by cycle and the partial sums are extrapolated with Wynn's epsilon.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::legendre::SumCgf;
use crate::quadrature::{integrate, wynn_epsilon};
use crate::weights::{Distribution, WeightVector};

/// Absolute error target on the tail probability.
pub const ABS_TOL: f64 = 1e-9;
/// Evaluation budget for one inversion.
pub const MAX_EVALS: usize = 1_000_000;
/// Relative accuracy requested from the normalised integral.
const REL_TOL: f64 = 1e-12;
const WYNN_WINDOW: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub value: f64,
    /// Estimated absolute error of `value`.
    pub error: f64,
    pub contour: f64,
    pub evaluations: usize,
}

pub fn invert_tail(d: Distribution, w: &WeightVector, t: f64) -> Result<Inversion> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "threshold must be finite, got {t}"
        )));
    }
    if d.is_nonnegative() && t <= 0.0 {
        return Ok(Inversion {
            value: 1.0,
            error: 0.0,
            contour: 0.0,
            evaluations: 0,
        });
    }
    let cgf = SumCgf::new(d, w);
    let a_max = w.max();
    let sd = cgf.derivs(0.0).1.sqrt();
    let c_min = (0.25 / a_max).min(1.0 / sd);
    let saddle = cgf.saddle_point(t)?;
    let c = if saddle.abs() >= c_min {
        saddle
    } else if saddle >= 0.0 {
        c_min
    } else {
        -c_min
    };
    let k_c = cgf.value(c);
    let scale = (k_c - c * t).exp();
    let integrand = |s: f64| -> f64 {
        let z = Complex64::new(c, s);
        let expo = cgf.value_complex(z) - k_c - Complex64::new(0.0, s * t);
        (expo.exp() / z).re
    };
    let norm_tol = REL_TOL;
    let (integral, err, evals) = oscillatory_half_line(integrand, t.abs(), norm_tol, MAX_EVALS)
        .map_err(|(last, evals)| Error::NumericFailure {
            context: "characteristic function inversion",
            detail: format!("no convergence after {evals} integrand evaluations"),
            last: last * scale / std::f64::consts::PI + if c < 0.0 { 1.0 } else { 0.0 },
        })?;
    let body = scale * integral / std::f64::consts::PI;
    let value = if c > 0.0 { body } else { 1.0 + body };
    let error = scale * err / std::f64::consts::PI;
    if error > ABS_TOL.max(1e-6 * value.abs()) {
        return Err(Error::NumericFailure {
            context: "characteristic function inversion",
            detail: format!("achieved error {error:e} above target"),
            last: value,
        });
    }
    Ok(Inversion {
        value: value.clamp(0.0, 1.0),
        error,
        contour: c,
        evaluations: evals,
    })
}

/// `int_0^inf f(s) ds` for `f` oscillating with angular frequency `freq`.
/// Errors carry the last estimate and the evaluation count.
fn oscillatory_half_line(
    mut f: impl FnMut(f64) -> f64,
    freq: f64,
    rel_tol: f64,
    max_evals: usize,
) -> std::result::Result<(f64, f64, usize), (f64, usize)> {
    // cycle length: half a period of e^{-ist}, kept finite for tiny t
    let cycle = if freq > 0.0 {
        std::f64::consts::PI / freq
    } else {
        f64::INFINITY
    };
    let mut evals = 0;
    let first_end = if cycle.is_finite() { cycle } else { 1.0 };
    let probe = crate::quadrature::gk15(&mut f, 0.0, first_end);
    let first = integrate(
        &mut f,
        0.0,
        first_end,
        rel_tol * probe.abs_value,
        rel_tol,
        max_evals / 4,
    );
    evals += first.evaluations + 15;
    let reference = first
        .abs_value
        .max(first.value.abs())
        .max(f64::MIN_POSITIVE);
    let abs_tol = rel_tol * reference;
    let mut partial = vec![first.value];
    let mut err_sum = first.error;
    let mut extrapolated: Vec<f64> = Vec::new();
    let mut start = first_end;
    // without oscillation, grow the panels geometrically
    let mut width = if cycle.is_finite() { cycle } else { 1.0 };
    loop {
        if evals >= max_evals {
            return Err((*partial.last().unwrap(), evals));
        }
        let end = start + width;
        let piece = integrate(&mut f, start, end, 0.25 * abs_tol, 0.0, max_evals - evals);
        evals += piece.evaluations;
        err_sum += piece.error;
        let total = partial.last().unwrap() + piece.value;
        partial.push(total);
        start = end;
        if !cycle.is_finite() {
            width *= 2.0;
        }
        // direct convergence: this panel and the envelope are negligible
        if piece.abs_value <= 0.1 * abs_tol {
            let tiny_tail = piece.abs_value;
            if partial.len() > 2 {
                return Ok((total, err_sum + tiny_tail, evals));
            }
            continue;
        }
        if !cycle.is_finite() {
            continue;
        }
        let lo = partial.len().saturating_sub(WYNN_WINDOW);
        let window = &partial[lo..];
        if window.len() >= 5 {
            let est = wynn_epsilon(window);
            extrapolated.push(est);
            let n = extrapolated.len();
            if n >= 3 {
                let d1 = (extrapolated[n - 1] - extrapolated[n - 2]).abs();
                let d2 = (extrapolated[n - 1] - extrapolated[n - 3]).abs();
                if d1.max(d2) <= abs_tol {
                    return Ok((est, err_sum + d1.max(d2), evals));
                }
            }
        }
    }
}
