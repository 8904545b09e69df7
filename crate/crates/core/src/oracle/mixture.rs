//! Signed exponential/Erlang mixtures from partial fractions of
//! `prod_j (1 + b_j s)^{-m_j}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::ln_gamma;

/// Weights within this relative distance are merged into one pole.
pub const CLUSTER_RTOL: f64 = 1e-9;
/// Above this `sum |coef|` the mixture is not trusted.
pub const MAX_COEF_ABS_SUM: f64 = 1e12;
/// Largest `n` handled by partial fractions.
pub const MAX_TERMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Sum of exponentials: each term is an Erlang(power+1, scale) law.
    OneSided,
    /// Sum of Laplace variables: each term is a sum of power+1 i.i.d.
    /// Laplace(scale) variables.
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureTerm {
    pub coef: f64,
    pub scale: f64,
    pub power: u32,
}

/// Exact law of a weighted sum as a signed mixture of Erlang-type terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpMixture {
    terms: Vec<MixtureTerm>,
    side: Side,
    /// Per term, `P_m` with tail `exp(-x) sum_m P_m x^m`, `x = t / scale`.
    polys: Vec<Vec<f64>>,
}

impl ExpMixture {
    pub fn new(terms: Vec<MixtureTerm>, side: Side) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("mixture needs at least one term"));
        }
        for t in &terms {
            if !(t.scale > 0.0) || !t.coef.is_finite() {
                return Err(invalid(format!("bad mixture term {t:?}")));
            }
        }
        let polys = terms.iter().map(|t| tail_poly(side, t.power)).collect();
        Ok(Self { terms, side, polys })
    }

    pub fn terms(&self) -> &[MixtureTerm] {
        &self.terms
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn coef_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.coef).sum()
    }

    pub fn coef_abs_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.coef.abs()).sum()
    }

    /// `P(S > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        match self.side {
            Side::OneSided if t <= 0.0 => 1.0,
            Side::TwoSided if t < 0.0 => 1.0 - self.tail_nonneg(-t),
            _ => self.tail_nonneg(t),
        }
    }

    fn tail_nonneg(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .zip(&self.polys)
            .map(|(term, poly)| term.coef * exp_poly(t / term.scale, poly))
            .sum()
    }

    /// `E S^p` (one-sided) or `E |S|^p` (two-sided) for `p > 0`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let k = t.power as f64 + 1.0;
                let ln_unit = match self.side {
                    // Erlang(k): Gamma(p + k) / Gamma(k)
                    Side::OneSided => ln_gamma(p + k) - ln_gamma(k),
                    Side::TwoSided => ln_laplace_sum_abs_moment(t.power as usize + 1, p),
                };
                t.coef * (p * t.scale.ln() + ln_unit).exp()
            })
            .sum()
    }

    /// JSON list of `{coef, scale, power}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.terms).expect("terms serialize")
    }

    pub fn from_json(text: &str, side: Side) -> Result<Self> {
        let terms: Vec<MixtureTerm> =
            serde_json::from_str(text).map_err(|e| invalid(format!("mixture JSON: {e}")))?;
        Self::new(terms, side)
    }
}

/// `exp(-x) * sum_m poly[m] x^m`, evaluated in log space when needed.
fn exp_poly(x: f64, poly: &[f64]) -> f64 {
    if poly.len() == 1 {
        return poly[0] * (-x).exp();
    }
    if x < 600.0 {
        let mut acc = 0.0;
        for &c in poly.iter().rev() {
            acc = acc * x + c;
        }
        return acc * (-x).exp();
    }
    let lx = x.ln();
    poly.iter()
        .enumerate()
        .map(|(m, &c)| (c.ln() + m as f64 * lx - x).exp())
        .sum()
}

fn tail_poly(side: Side, power: u32) -> Vec<f64> {
    let k = power as usize + 1;
    let inv_fact: Vec<f64> = (0..k).map(|m| (-ln_gamma(m as f64 + 1.0)).exp()).collect();
    match side {
        Side::OneSided => inv_fact,
        Side::TwoSided => {
            // P(L_k > x) = e^{-x} sum_i w_i sum_{m <= k-1-i} x^m/m!,
            // w_i = (k-1+i)! / ((k-1)! i! 2^{k+i})
            let w: Vec<f64> = (0..k)
                .map(|i| {
                    let i = i as f64;
                    let kf = k as f64;
                    (ln_gamma(kf + i)
                        - ln_gamma(kf)
                        - ln_gamma(i + 1.0)
                        - (kf + i) * std::f64::consts::LN_2)
                        .exp()
                })
                .collect();
            (0..k)
                .map(|m| w[..k - m].iter().sum::<f64>() * inv_fact[m])
                .collect()
        }
    }
}

/// `log E|L_k|^p` where `L_k` is a sum of `k` i.i.d. standard Laplace variables.
fn ln_laplace_sum_abs_moment(k: usize, p: f64) -> f64 {
    // E|L_k|^p = 2/((k-1)!)^2 sum_i C(k-1,i) (k-1+i)! Gamma(p+k-i) / 2^{k+i}
    let kf = k as f64;
    let logs: Vec<f64> = (0..k)
        .map(|i| {
            let i = i as f64;
            ln_gamma(kf) - ln_gamma(i + 1.0) - ln_gamma(kf - i)
                + ln_gamma(kf + i)
                + ln_gamma(p + kf - i)
                - (kf + i) * std::f64::consts::LN_2
        })
        .collect();
    let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + logs.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
    std::f64::consts::LN_2 - 2.0 * ln_gamma(kf) + lse
}

/// A pole of multiplicity `mult` at scale `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Pole {
    pub scale: f64,
    pub mult: usize,
}

/// Sort and merge weights equal within [`CLUSTER_RTOL`].
pub(crate) fn cluster(weights: &[f64]) -> Vec<Pole> {
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for w in sorted {
        match groups.last_mut() {
            Some(g) if (w - g[0]) <= CLUSTER_RTOL * g[0] => g.push(w),
            _ => groups.push(vec![w]),
        }
    }
    groups
        .into_iter()
        .map(|g| Pole {
            scale: g.iter().sum::<f64>() / g.len() as f64,
            mult: g.len(),
        })
        .collect()
}

/// Partial fractions `prod_j (1 + b_j s)^{-m_j} = sum_j sum_k c_jk (1 + b_j s)^{-k}`.
/// Returns `(c_jk, j, k)` triples.
fn partial_fractions(b: &[f64], mult: &[usize]) -> Vec<(f64, usize, usize)> {
    let mut out = Vec::new();
    for j in 0..b.len() {
        let degree = mult[j] - 1;
        // g_j(z) = prod_{i != j} ((1 - r_i) + r_i z)^{-m_i}, r_i = b_i / b_j
        let mut series = vec![0.0; degree + 1];
        series[0] = 1.0;
        let mut prefactor = 1.0;
        for i in (0..b.len()).filter(|&i| i != j) {
            let r = b[i] / b[j];
            let one_minus_r = (b[j] - b[i]) / b[j];
            prefactor *= one_minus_r.powi(-(mult[i] as i32));
            let q = r / one_minus_r;
            // (1 + q z)^{-m}: coefficients C(m+l-1, l) (-q)^l
            let m = mult[i] as f64;
            let mut factor = vec![1.0; degree + 1];
            for l in 1..=degree {
                factor[l] = factor[l - 1] * (-q) * (m + l as f64 - 1.0) / l as f64;
            }
            let mut prod = vec![0.0; degree + 1];
            for (d1, &s) in series.iter().enumerate() {
                for (d2, &f) in factor.iter().enumerate().take(degree + 1 - d1) {
                    prod[d1 + d2] += s * f;
                }
            }
            series = prod;
        }
        for k in 1..=mult[j] {
            out.push((prefactor * series[mult[j] - k], j, k));
        }
    }
    out
}

pub(crate) fn build(weights: &[f64], side: Side) -> Result<ExpMixture> {
    if weights.len() > MAX_TERMS {
        return Err(Error::Domain(format!(
            "partial fractions capped at n = {MAX_TERMS}, got {}",
            weights.len()
        )));
    }
    let poles = cluster(weights);
    let b: Vec<f64> = poles
        .iter()
        .map(|p| match side {
            Side::OneSided => p.scale,
            Side::TwoSided => p.scale * p.scale,
        })
        .collect();
    let mult: Vec<usize> = poles.iter().map(|p| p.mult).collect();
    let terms: Vec<MixtureTerm> = partial_fractions(&b, &mult)
        .into_iter()
        .filter(|&(c, _, _)| c != 0.0)
        .map(|(coef, j, k)| MixtureTerm {
            coef,
            scale: poles[j].scale,
            power: (k - 1) as u32,
        })
        .collect();
    let mix = ExpMixture::new(terms, side)?;
    let abs_sum = mix.coef_abs_sum();
    if !(abs_sum <= MAX_COEF_ABS_SUM) {
        return Err(Error::IllConditioned {
            coef_abs_sum: abs_sum,
        });
    }
    Ok(mix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clustering_merges_near_equal() {
        let poles = cluster(&[1.0, 2.0, 1.0 + 1e-12, 3.0, 2.0]);
        assert_eq!(poles.len(), 3);
        assert_eq!(poles[0].mult, 2);
        assert_eq!(poles[1].mult, 2);
        assert_eq!(poles[2].mult, 1);
        assert_eq!(cluster(&[1.0, 1.0 + 1e-6]).len(), 2);
    }

    #[test]
    fn erlang_three_from_repeated_weights() {
        let mix = build(&[2.0, 2.0, 2.0], Side::OneSided).unwrap();
        assert_eq!(mix.terms().len(), 1);
        assert_eq!(mix.terms()[0].power, 2);
        for &t in &[0.5, 3.0, 10.0] {
            let x: f64 = t / 2.0;
            let exact = (1.0 + x + x * x / 2.0) * (-x).exp();
            assert!((mix.tail(t) - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_multiplicities_sum_to_one() {
        let mix = build(&[1.0, 1.0, 3.0, 0.5, 0.5, 0.5], Side::OneSided).unwrap();
        assert!((mix.coef_sum() - 1.0).abs() < 1e-12);
        assert!((mix.tail(0.0) - 1.0).abs() < 1e-12);
        let two = build(&[1.0, 1.0, 3.0, 0.5, 0.5, 0.5], Side::TwoSided).unwrap();
        assert!((two.coef_sum() - 1.0).abs() < 1e-12);
        assert!((two.tail(0.0) - 0.5).abs() < 1e-12);
        // mean of the one-sided law = sum of weights
        assert!((mix.abs_moment(1.0) - 6.5).abs() < 1e-11);
        // variance of the Laplace sum = 2 sum a^2
        assert!((two.abs_moment(2.0) - 2.0 * 11.75).abs() < 1e-10);
    }

    #[test]
    fn laplace_sum_moment_closed_form() {
        // L_2: E L_2^2 = 4, E L_2^4 = 2*24 + 6*2*2 = 72
        assert!((ln_laplace_sum_abs_moment(2, 2.0).exp() - 4.0).abs() < 1e-12);
        assert!((ln_laplace_sum_abs_moment(2, 4.0).exp() - 72.0).abs() < 1e-10);
        assert!((ln_laplace_sum_abs_moment(1, 3.0).exp() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn cap_and_conditioning_guards() {
        let many: Vec<f64> = (0..65).map(|i| 1.0 + i as f64).collect();
        assert!(matches!(
            build(&many, Side::OneSided),
            Err(Error::Domain(_))
        ));
        // tightly packed but unmerged weights explode the coefficients
        let packed: Vec<f64> = (0..12).map(|i| 1.0 + i as f64 * 1e-4).collect();
        assert!(matches!(
            build(&packed, Side::OneSided),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn json_dump_round_trip() {
        let mix = build(&[2.0, 1.0], Side::OneSided).unwrap();
        let text = mix.to_json();
        assert!(text.contains("\"coef\""));
        let back = ExpMixture::from_json(&text, Side::OneSided).unwrap();
        assert_eq!(back, mix);
        assert!(ExpMixture::from_json("[]", Side::OneSided).is_err());
    }
}
