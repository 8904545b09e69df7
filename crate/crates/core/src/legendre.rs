//! Log-moment generating functions and their Legendre transforms.
//!
//! `psi(theta) = log E exp(theta X)` for a single summand, and the Cramér
//! rate function `I(t) = sup_{theta > 0} (t theta - psi(theta))`. The
//! cumulant generating function of the weighted sum, [`SumCgf`], supplies the
//! saddle points used by the inversion oracle and the importance sampler.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::weights::{Distribution, WeightVector};

const NEWTON_MAX_ITER: usize = 200;
const THETA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreResult {
    pub value: f64,
    pub theta_star: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `psi(theta)`; `+inf` outside the domain of the moment generating function.
pub fn log_mgf(d: Distribution, theta: f64) -> f64 {
    match d {
        Distribution::Laplace => {
            if theta.abs() < 1.0 {
                -(-theta * theta).ln_1p()
            } else {
                f64::INFINITY
            }
        }
        _ => {
            let shape = d.gamma_shape().unwrap_or(1.0);
            if theta < 1.0 {
                -shape * (-theta).ln_1p()
            } else {
                f64::INFINITY
            }
        }
    }
}

/// `psi'(theta)` and `psi''(theta)`, finite inside the domain.
fn log_mgf_derivs(d: Distribution, theta: f64) -> (f64, f64) {
    match d {
        Distribution::Laplace => {
            let q = (1.0 - theta) * (1.0 + theta);
            (2.0 * theta / q, 2.0 * (1.0 + theta * theta) / (q * q))
        }
        _ => {
            let shape = d.gamma_shape().unwrap_or(1.0);
            let q = 1.0 - theta;
            (shape / q, shape / (q * q))
        }
    }
}

/// `I(t)`, using the closed forms for the exponential and gamma laws and the
/// numeric supremum for Laplace.
pub fn rate_function(d: Distribution, t: f64) -> Result<LegendreResult> {
    check_above_mean(d, t)?;
    match d {
        Distribution::Laplace => rate_function_numeric(d, t),
        _ => {
            let shape = d.gamma_shape().unwrap_or(1.0);
            let ratio = t / shape;
            // I(s) = s - shape - shape log(s/shape), maximiser 1 - shape/s
            let value = shape * ((ratio - 1.0) - ratio.ln());
            Ok(LegendreResult {
                value,
                theta_star: 1.0 - 1.0 / ratio,
                converged: true,
                iterations: 0,
            })
        }
    }
}

/// `I(t)` by solving `psi'(theta) = t` with safeguarded Newton on `(0, 1)`.
pub fn rate_function_numeric(d: Distribution, t: f64) -> Result<LegendreResult> {
    check_above_mean(d, t)?;
    let root = solve_increasing(|th| log_mgf_derivs(d, th), t, 0.0, 1.0, 0.5, 1.0)?;
    let theta = root.theta;
    Ok(LegendreResult {
        value: t * theta - log_mgf(d, theta),
        theta_star: theta,
        converged: root.converged,
        iterations: root.iterations,
    })
}

fn check_above_mean(d: Distribution, t: f64) -> Result<()> {
    if !t.is_finite() || t <= d.mean() {
        return Err(Error::Domain(format!(
            "rate function evaluated at t = {t}, needs t > mean {}",
            d.mean()
        )));
    }
    Ok(())
}

struct Root {
    theta: f64,
    converged: bool,
    iterations: usize,
}

/// Solve `g(theta) = target` for increasing `g` on the open bracket `(lo, hi)`;
/// `derivs` returns `(g, g')`. `scale` is the natural size of theta, so the
/// stopping rule is a Newton step below `THETA_TOL * scale`.
fn solve_increasing(
    derivs: impl Fn(f64) -> (f64, f64),
    target: f64,
    mut lo: f64,
    mut hi: f64,
    start: f64,
    scale: f64,
) -> Result<Root> {
    let mut theta = start;
    for iterations in 1..=NEWTON_MAX_ITER {
        let (g, dg) = derivs(theta);
        let resid = g - target;
        if resid == 0.0 {
            return Ok(Root {
                theta,
                converged: true,
                iterations,
            });
        }
        if resid > 0.0 {
            hi = theta;
        } else {
            lo = theta;
        }
        let newton = theta - resid / dg;
        let inside = newton > lo && newton < hi && newton.is_finite();
        let next = if inside { newton } else { 0.5 * (lo + hi) };
        let step = (next - theta).abs();
        theta = next;
        // near a domain edge the step must also be small against the gap
        let gap = (theta - lo).min(hi - theta).min(scale);
        if (inside && step <= THETA_TOL * gap) || step == 0.0 {
            return Ok(Root {
                theta,
                converged: true,
                iterations,
            });
        }
    }
    Err(Error::NumericFailure {
        context: "Legendre stationarity solve",
        detail: format!("no convergence in {NEWTON_MAX_ITER} iterations"),
        last: theta,
    })
}

/// Cumulant generating function `K(theta) = sum_i psi(theta a_i)` of the
/// weighted sum.
#[derive(Debug, Clone)]
pub struct SumCgf {
    dist: Distribution,
    weights: Vec<f64>,
    a_max: f64,
}

impl SumCgf {
    pub fn new(dist: Distribution, w: &WeightVector) -> Self {
        Self {
            dist,
            weights: w.as_slice().to_vec(),
            a_max: w.max(),
        }
    }

    /// Open interval on which `K` is finite.
    pub fn domain(&self) -> (f64, f64) {
        let edge = 1.0 / self.a_max;
        match self.dist {
            Distribution::Laplace => (-edge, edge),
            _ => (f64::NEG_INFINITY, edge),
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.weights
            .iter()
            .map(|&a| log_mgf(self.dist, theta * a))
            .sum()
    }

    /// `(K'(theta), K''(theta))`.
    pub fn derivs(&self, theta: f64) -> (f64, f64) {
        self.weights.iter().fold((0.0, 0.0), |(k1, k2), &a| {
            let (d1, d2) = log_mgf_derivs(self.dist, theta * a);
            (k1 + a * d1, k2 + a * a * d2)
        })
    }

    pub fn mean(&self) -> f64 {
        self.derivs(0.0).0
    }

    /// `K(z)` at complex `z` inside the strip of convergence.
    pub fn value_complex(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match self.dist {
            Distribution::Laplace => self
                .weights
                .iter()
                .map(|&a| -(one - (z * a) * (z * a)).ln())
                .sum(),
            _ => {
                let shape = self.dist.gamma_shape().unwrap_or(1.0);
                self.weights
                    .iter()
                    .map(|&a| -shape * (one - z * a).ln())
                    .sum()
            }
        }
    }

    /// Solve `K'(theta) = x` (the Chernoff stationarity condition at `x`).
    pub fn saddle_point(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let mean = self.mean();
        if !x.is_finite() {
            return Err(Error::Domain(format!("saddle point at non-finite x = {x}")));
        }
        if x == mean {
            return Ok(0.0);
        }
        if self.dist.is_nonnegative() && x <= 0.0 {
            return Err(Error::Domain(format!(
                "no saddle point at x = {x} for a nonnegative sum"
            )));
        }
        let (lo, hi) = if x > mean {
            (0.0, hi)
        } else if lo.is_finite() {
            (lo, 0.0)
        } else {
            // K' -> 0 as theta -> -inf; walk out until K'(lo) < x
            let mut lo = -1.0 / self.a_max;
            while self.derivs(lo).0 >= x {
                lo *= 2.0;
                if lo < -1e300 {
                    return Err(Error::NumericFailure {
                        context: "saddle point bracket",
                        detail: format!("could not bracket x = {x}"),
                        last: lo,
                    });
                }
            }
            (lo, 0.0)
        };
        let start = if hi.is_finite() && lo.is_finite() {
            0.5 * (lo + hi)
        } else {
            0.0
        };
        Ok(solve_increasing(|th| self.derivs(th), x, lo, hi, start, 1.0 / self.a_max)?.theta)
    }
}
