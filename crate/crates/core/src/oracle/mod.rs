//! Exact tails and moments of weighted sums.
//!
//! Two independent routes: partial-fraction mixtures (hypoexponential for
//! nonnegative sums, signed Laplace mixtures for two-sided sums) and
//! characteristic-function inversion. Gamma sums with arbitrary shape only
//! have the inversion route.

mod inversion;
mod mixture;

use serde::{Deserialize, Serialize};

pub use inversion::{invert_tail, Inversion};
pub use mixture::{ExpMixture, MixtureTerm, Side, CLUSTER_RTOL, MAX_COEF_ABS_SUM, MAX_TERMS};

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate;
use crate::special::ln_gamma;
use crate::weights::{Distribution, WeightVector};

/// Where an "exact" tail value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactSource {
    Mixture,
    CfInversion,
    ImportanceSampling,
}

impl ExactSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExactSource::Mixture => "mixture",
            ExactSource::CfInversion => "cf_inversion",
            ExactSource::ImportanceSampling => "importance_sampling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactTail {
    pub value: f64,
    pub source: ExactSource,
}

/// Mixture for `sum a_i Y_i` with `Y_i` mean-one exponentials.
pub fn hypoexp_mixture(w: &WeightVector) -> Result<ExpMixture> {
    mixture::build(w.as_slice(), Side::OneSided)
}

/// Mixture for `sum a_i X_i` with `X_i` standard Laplace.
pub fn laplace_mixture(w: &WeightVector) -> Result<ExpMixture> {
    mixture::build(w.as_slice(), Side::TwoSided)
}

fn mixture_unavailable(e: &Error) -> bool {
    matches!(e, Error::IllConditioned { .. } | Error::Domain(_))
}

/// `P(sum a_i Y_i > t)`, falling back to inversion when the mixture is
/// ill-conditioned or `n` exceeds the partial-fraction cap.
pub fn hypoexp_tail(w: &WeightVector, t: f64) -> Result<f64> {
    Ok(exact_tail(Distribution::Exponential, w, t)?.value)
}

/// `P(sum a_i X_i > s)` for standard Laplace `X_i`; `s` may be negative.
pub fn laplace_tail(w: &WeightVector, s: f64) -> Result<f64> {
    Ok(exact_tail(Distribution::Laplace, w, s)?.value)
}

/// Tail from the best available exact route for `d`.
pub fn exact_tail(d: Distribution, w: &WeightVector, threshold: f64) -> Result<ExactTail> {
    if threshold.is_nan() {
        return Err(invalid("threshold is NaN"));
    }
    let built = match d {
        Distribution::Exponential => Some(hypoexp_mixture(w)),
        Distribution::Laplace => Some(laplace_mixture(w)),
        Distribution::Gamma { .. } => None,
    };
    match built {
        Some(Ok(mix)) => Ok(ExactTail {
            value: mix.tail(threshold).clamp(0.0, 1.0),
            source: ExactSource::Mixture,
        }),
        Some(Err(e)) if !mixture_unavailable(&e) => Err(e),
        _ => Ok(ExactTail {
            value: cf_tail_inversion(d, w, threshold)?,
            source: ExactSource::CfInversion,
        }),
    }
}

/// `P(S > t)` by characteristic-function inversion.
pub fn cf_tail_inversion(d: Distribution, w: &WeightVector, t: f64) -> Result<f64> {
    Ok(invert_tail(d, w, t)?.value)
}

/// `E|S|^p` for the Laplace sum. Uses the mixture moments; when the mixture
/// is unavailable or returns a nonpositive value, integrates
/// `2 p s^{p-1} P(S > s)` with inversion tails instead.
pub fn laplace_abs_moment(w: &WeightVector, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(invalid(format!("moment order must be positive, got {p}")));
    }
    match laplace_mixture(w) {
        Ok(mix) => {
            let m = mix.abs_moment(p);
            if m > 0.0 && m.is_finite() {
                return Ok(m);
            }
        }
        Err(e) if !mixture_unavailable(&e) => return Err(e),
        Err(_) => {}
    }
    laplace_abs_moment_quadrature(w, p)
}

/// `E|S|^p = 2 int_0^inf p s^{p-1} P(S > s) ds`, tails by inversion.
pub fn laplace_abs_moment_quadrature(w: &WeightVector, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(invalid(format!("moment order must be positive, got {p}")));
    }
    let a_max = w.max();
    let sigma = std::f64::consts::SQRT_2 * w.as_slice().iter().map(|a| a * a).sum::<f64>().sqrt();
    // beyond this the tail times s^p is below 1e-18 of the moment scale
    let upper = a_max * (45.0 + 3.0 * p) + 8.0 * sigma;
    let mut failure = None;
    // substitute s = x^2 to tame the s^{p-1} singularity near zero for p < 1
    let res = integrate(
        |x| {
            let s = x * x;
            if s == 0.0 {
                return 0.0;
            }
            match invert_tail(Distribution::Laplace, w, s) {
                Ok(inv) => 4.0 * p * x * s.powf(p - 1.0) * inv.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        upper.sqrt(),
        0.0,
        1e-10,
        20_000,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !res.converged || !(res.value > 0.0) {
        return Err(Error::NumericFailure {
            context: "moment quadrature",
            detail: format!("error estimate {:e}", res.error),
            last: res.value,
        });
    }
    Ok(res.value)
}

/// `P(S >= E S)` via the matching exact oracle (1/2 for Laplace).
pub fn p_ge_mean(d: Distribution, w: &WeightVector) -> Result<f64> {
    match d {
        Distribution::Laplace => Ok(0.5),
        _ => {
            let mean = d.mean() * w.as_slice().iter().sum::<f64>();
            Ok(exact_tail(d, w, mean)?.value)
        }
    }
}

/// `E|X|^p` for one standard Laplace summand, `Gamma(p + 1)`.
pub fn laplace_unit_abs_moment(p: f64) -> f64 {
    ln_gamma(p + 1.0).exp()
}
