//! Weight vectors, summand laws and the derived scale statistics every bound
//! consumes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Positive weights `a_1, ..., a_n` of the sum `S = sum a_i X_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("weight vector must be non-empty"));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(invalid(format!(
                    "weight #{i} = {w} is not a finite positive number"
                )));
            }
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Weights squared, i.e. the weights of `sum a_i^2 Y_i`.
    pub fn squared(&self) -> WeightVector {
        WeightVector(self.0.iter().map(|a| a * a).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<WeightVector> {
        WeightVector::new(self.0.iter().map(|a| a * c).collect())
    }

    /// Parse from a JSON array of numbers.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Vec<f64> =
            serde_json::from_str(text).map_err(|e| invalid(format!("weights JSON: {e}")))?;
        Self::new(v)
    }
}

impl FromStr for WeightVector {
    type Err = Error;

    /// Comma-separated list, e.g. `2,1,0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let parsed = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| invalid(format!("cannot parse weight '{p}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parsed)
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        WeightVector::new(v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Law of each summand `X_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    /// Mean-one exponential.
    Exponential,
    /// Gamma with the given shape and unit scale (mean = shape).
    Gamma { shape: f64 },
    /// Standard two-sided exponential, density `exp(-|x|)/2`.
    Laplace,
}

impl Distribution {
    pub fn gamma(shape: f64) -> Result<Self> {
        if !shape.is_finite() || shape <= 0.0 {
            return Err(invalid(format!(
                "gamma shape must be positive, got {shape}"
            )));
        }
        Ok(Distribution::Gamma { shape })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Exponential => 1.0,
            Distribution::Gamma { shape } => shape,
            Distribution::Laplace => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Exponential => 1.0,
            Distribution::Gamma { shape } => shape,
            Distribution::Laplace => 2.0,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        !matches!(self, Distribution::Laplace)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Exponential => "exponential",
            Distribution::Gamma { .. } => "gamma",
            Distribution::Laplace => "laplace",
        }
    }

    /// Shape of the gamma law this summand is a special case of (`None` for Laplace).
    pub(crate) fn gamma_shape(&self) -> Option<f64> {
        match *self {
            Distribution::Exponential => Some(1.0),
            Distribution::Gamma { shape } => Some(shape),
            Distribution::Laplace => None,
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Gamma { shape } => write!(f, "gamma({shape})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Scales derived from a weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    /// `sqrt(2 sum a_i^2)`, the standard deviation of the Laplace sum.
    pub sigma: f64,
    pub a_max: f64,
    /// `sigma / a_max`.
    pub alpha_sym: f64,
    /// `sum a_i / a_max`.
    pub alpha_exp: f64,
    pub l1: f64,
    pub l2: f64,
    /// `E S`: `mu * l1` for nonnegative laws, 0 for Laplace.
    pub mean_s: f64,
}

pub fn weight_stats(w: &WeightVector, d: Distribution) -> WeightStats {
    let a = w.as_slice();
    let a_max = w.max();
    let l1: f64 = a.iter().sum();
    // scaled sum of squares avoids overflow for huge weights
    let l2 = a_max * a.iter().map(|x| (x / a_max).powi(2)).sum::<f64>().sqrt();
    let sigma = std::f64::consts::SQRT_2 * l2;
    WeightStats {
        sigma,
        a_max,
        alpha_sym: sigma / a_max,
        alpha_exp: l1 / a_max,
        l1,
        l2,
        mean_s: d.mean() * l1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_weight_forces_sqrt2() {
        let w = WeightVector::new(vec![1.0]).unwrap();
        let s = weight_stats(&w, Distribution::Laplace);
        assert!(close(s.sigma, 2f64.sqrt(), 1e-15));
        assert_eq!(s.a_max, 1.0);
        assert!(close(s.alpha_sym, 2f64.sqrt(), 1e-15));
        assert_eq!(s.alpha_exp, 1.0);
        assert_eq!(s.mean_s, 0.0);
    }

    #[test]
    fn two_one_laplace_and_exponential() {
        let w: WeightVector = "2,1".parse().unwrap();
        let s = weight_stats(&w, Distribution::Laplace);
        assert!(close(s.sigma, 10f64.sqrt(), 1e-14));
        assert!(close(s.alpha_sym, 1.581139, 1e-6));
        let e = weight_stats(&w, Distribution::Exponential);
        assert_eq!(e.mean_s, 3.0);
        assert_eq!(e.alpha_exp, 1.5);
        let g = weight_stats(&w, Distribution::gamma(2.5).unwrap());
        assert_eq!(g.mean_s, 7.5);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(WeightVector::new(vec![]).is_err());
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![-1.0]).is_err());
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
        assert!("1,x".parse::<WeightVector>().is_err());
        assert!("".parse::<WeightVector>().is_err());
        assert!(Distribution::gamma(0.0).is_err());
    }

    #[test]
    fn parses_json_and_csv_forms() {
        let a = WeightVector::from_json("[2, 1, 0.5]").unwrap();
        let b: WeightVector = " 2, 1 ,0.5".parse().unwrap();
        assert_eq!(a, b);
        assert!(WeightVector::from_json("[1, -2]").is_err());
        let back: WeightVector = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn alpha_sym_exceeds_sqrt2_for_several_weights() {
        let w: WeightVector = "3,1e-3,0.2".parse().unwrap();
        let s = weight_stats(&w, Distribution::Laplace);
        assert!(s.alpha_sym > 2f64.sqrt());
        assert!(s.alpha_exp > 1.0);
        assert!(close(s.alpha_sym, 2f64.sqrt() * s.l2 / s.a_max, 1e-14));
    }
}
