//! Closed-form tail and moment bounds for weighted sums.
//!
//! Every tail bound is computed in log space and carried as a [`BoundValue`].
//! Inputs outside a bound's hypotheses (typically `t <= 1`) still evaluate the
//! formula but come back with `valid = false`.

use std::f64::consts::{E, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::legendre::rate_function;
use crate::special::{gamma_fn, h_unchecked, ln_gamma, ln_q_unchecked};
use crate::weights::{weight_stats, Distribution, WeightStats, WeightVector};

/// Constant in the Laplace lower bound.
pub const LAPLACE_LOWER_CONST: f64 = 57.0;
/// Range `P(S >= E S)` is known to lie in for exponential sums.
pub const P_GE_MEAN_RANGE: (f64, f64) = (1.0 / 24.0, 23.0 / 24.0);
/// Fourth-moment ratio `E(Y-1)^4 / (E(Y-1)^2)^2` of a mean-one exponential.
pub const EXP_KURTOSIS: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    JansonUpper,
    JansonLower,
    LaplaceUpper,
    LaplaceLower,
    GenericUpper,
    GenericLower,
    GammaUpper,
    GammaLower,
    SIneqUpper,
    MomentUpper,
    MomentLower,
    PzLower,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::JansonUpper => "janson_upper",
            BoundKind::JansonLower => "janson_lower",
            BoundKind::LaplaceUpper => "laplace_upper",
            BoundKind::LaplaceLower => "laplace_lower",
            BoundKind::GenericUpper => "generic_upper",
            BoundKind::GenericLower => "generic_lower",
            BoundKind::GammaUpper => "gamma_upper",
            BoundKind::GammaLower => "gamma_lower",
            BoundKind::SIneqUpper => "s_ineq_upper",
            BoundKind::MomentUpper => "moment_upper",
            BoundKind::MomentLower => "moment_lower",
            BoundKind::PzLower => "pz_lower",
        }
    }
}

/// A bound evaluated at one input. `log_value` is authoritative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub log_value: f64,
    pub kind: BoundKind,
    /// Whether the hypotheses of the underlying inequality hold here.
    pub valid: bool,
}

impl BoundValue {
    pub fn from_log(log_value: f64, kind: BoundKind, valid: bool) -> Self {
        Self {
            value: log_value.exp(),
            log_value,
            kind,
            valid,
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!(
            "threshold multiple t must be finite and > 0, got {t}"
        )));
    }
    Ok(())
}

/// `(1/t) exp(-alpha (t - 1 - log t))`, `alpha = sum a / max a`, for
/// mean-one exponential summands.
pub fn janson_upper(t: f64, stats: &WeightStats) -> Result<BoundValue> {
    check_t(t)?;
    let alpha = stats.alpha_exp;
    let log = -t.ln() - alpha * ((t - 1.0) - t.ln());
    Ok(BoundValue::from_log(log, BoundKind::JansonUpper, t > 1.0))
}

/// `exp(-alpha (t - 1)) / (2 e alpha)`.
pub fn janson_lower(t: f64, stats: &WeightStats) -> Result<BoundValue> {
    check_t(t)?;
    let alpha = stats.alpha_exp;
    let log = -(2.0 * E * alpha).ln() - alpha * (t - 1.0);
    Ok(BoundValue::from_log(log, BoundKind::JansonLower, t > 1.0))
}

/// Laplace upper bound `exp(-(alpha^2/2) h(2t/alpha))`, `alpha = sigma / max a`,
/// on `P(S > t sigma)`.
pub fn laplace_upper(t: f64, stats: &WeightStats) -> Result<BoundValue> {
    check_t(t)?;
    let alpha = stats.alpha_sym;
    let log = -0.5 * alpha * alpha * h_unchecked(2.0 * t / alpha);
    Ok(BoundValue::from_log(log, BoundKind::LaplaceUpper, t > 1.0))
}

/// Laplace lower bound `exp(-alpha t) / (57 sqrt(alpha t))`.
pub fn laplace_lower(t: f64, stats: &WeightStats) -> Result<BoundValue> {
    check_t(t)?;
    let at = stats.alpha_sym * t;
    let log = -LAPLACE_LOWER_CONST.ln() - 0.5 * at.ln() - at;
    Ok(BoundValue::from_log(log, BoundKind::LaplaceLower, t > 1.0))
}

fn require_nonnegative(d: Distribution, operation: &'static str) -> Result<()> {
    if d.is_nonnegative() {
        Ok(())
    } else {
        Err(Error::UnsupportedLaw {
            operation,
            law: d.name(),
        })
    }
}

/// `exp(-alpha I(mu t))` on `P(S > t E S)` for i.i.d. nonnegative summands.
pub fn generic_upper(d: Distribution, w: &WeightVector, t: f64) -> Result<BoundValue> {
    require_nonnegative(d, "generic_upper")?;
    check_t(t)?;
    if t <= 1.0 {
        // sup over theta > 0 is attained at 0 below the mean
        return Ok(BoundValue::from_log(0.0, BoundKind::GenericUpper, false));
    }
    let stats = weight_stats(w, d);
    let rate = rate_function(d, d.mean() * t)?;
    Ok(BoundValue::from_log(
        -stats.alpha_exp * rate.value,
        BoundKind::GenericUpper,
        true,
    ))
}

/// `P(S >= E S) * r((t - 1) alpha mu)`; `p_ge_mean` from an oracle or [`pz_bound`].
pub fn generic_lower(
    d: Distribution,
    w: &WeightVector,
    t: f64,
    p_ge_mean: f64,
) -> Result<BoundValue> {
    require_nonnegative(d, "generic_lower")?;
    check_t(t)?;
    check_probability(p_ge_mean)?;
    if t <= 1.0 {
        // P(S > t ES) >= P(S >= ES) trivially
        return Ok(BoundValue::from_log(
            p_ge_mean.ln(),
            BoundKind::GenericLower,
            false,
        ));
    }
    let stats = weight_stats(w, d);
    let v = (t - 1.0) * stats.alpha_exp * d.mean();
    let log = p_ge_mean.ln() + ln_r_function(d, v)?;
    Ok(BoundValue::from_log(log, BoundKind::GenericLower, true))
}

fn check_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("P(S >= ES) must lie in (0, 1], got {p}")));
    }
    Ok(())
}

/// Worst-case decay ratio `inf_u P(X > u + v) / P(X > u)`, closed forms.
pub fn r_function(d: Distribution, v: f64) -> Result<f64> {
    Ok(ln_r_function(d, v)?.exp())
}

fn ln_r_function(d: Distribution, v: f64) -> Result<f64> {
    require_nonnegative(d, "r_function")?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("r(v) needs finite v > 0, got {v}")));
    }
    let shape = d.gamma_shape().unwrap_or(1.0);
    if shape >= 1.0 {
        Ok(-v)
    } else {
        let min_term = ((shape - 1.0) * v.ln()).min(0.0);
        Ok(-(2.0 * gamma_fn(shape)).ln() + min_term - v)
    }
}

/// Direct evaluation of `inf_{u > 0} P(X > u + v) / P(X > u)` on a log grid
/// with golden-section refinement around the best grid point.
pub fn r_infimum_numeric(d: Distribution, v: f64) -> Result<f64> {
    require_nonnegative(d, "r_infimum_numeric")?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(format!("r(v) needs finite v > 0, got {v}")));
    }
    let shape = d.gamma_shape().unwrap_or(1.0);
    let ln_ratio = |u: f64| ln_q_unchecked(shape, u + v) - ln_q_unchecked(shape, u);
    let (lo_exp, hi_exp, points) = (-16.0_f64, 3.0_f64, 1141);
    let grid: Vec<f64> = (0..points)
        .map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (points - 1) as f64))
        .collect();
    let (best_i, best) = grid
        .iter()
        .map(|&u| ln_ratio(u))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");
    let mut lo = grid[best_i.saturating_sub(1)];
    let mut hi = grid[(best_i + 1).min(points - 1)];
    let mut best_val = best;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = hi - inv_phi * (hi - lo);
        let x2 = lo + inv_phi * (hi - lo);
        let (f1, f2) = (ln_ratio(x1), ln_ratio(x2));
        best_val = best_val.min(f1).min(f2);
        if f1 < f2 {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    Ok(best_val.exp())
}

/// Paley–Zygmund-type bound `1 / (16^{1/3} max(C, 3))` on `P(Z >= 0)`.
pub fn pz_bound(c: f64) -> Result<f64> {
    if !(c >= 1.0) || !c.is_finite() {
        return Err(invalid(format!(
            "fourth-moment constant C must be >= 1, got {c}"
        )));
    }
    Ok(1.0 / (16f64.cbrt() * c.max(3.0)))
}

/// [`pz_bound`] with `C = 9`, the exponential case, as a bound row.
pub fn pz_lower_exponential() -> BoundValue {
    let v = pz_bound(EXP_KURTOSIS).expect("constant is valid");
    BoundValue::from_log(v.ln(), BoundKind::PzLower, true)
}

/// Fourth-moment constant `3 (1 + 2/shape)` of a centred gamma variable.
pub fn gamma_kurtosis(shape: f64) -> f64 {
    3.0 * (1.0 + 2.0 / shape)
}

/// Gamma upper bound `exp(-alpha shape (t - 1 - log t))`.
pub fn gamma_upper(t: f64, stats: &WeightStats, shape: f64) -> Result<BoundValue> {
    check_t(t)?;
    if !(shape > 0.0) {
        return Err(invalid(format!(
            "gamma shape must be positive, got {shape}"
        )));
    }
    let log = if t > 1.0 {
        -stats.alpha_exp * shape * ((t - 1.0) - t.ln())
    } else {
        0.0
    };
    Ok(BoundValue::from_log(log, BoundKind::GammaUpper, t > 1.0))
}

/// Gamma lower bound `r_shape(alpha shape (t - 1)) / (3 16^{1/3} (1 + 2/shape))`.
pub fn gamma_lower(t: f64, stats: &WeightStats, shape: f64) -> Result<BoundValue> {
    check_t(t)?;
    let d = Distribution::gamma(shape)?;
    let p = pz_bound(gamma_kurtosis(shape))?;
    if t <= 1.0 {
        return Ok(BoundValue::from_log(p.ln(), BoundKind::GammaLower, false));
    }
    let log = p.ln() + ln_r_function(d, stats.alpha_exp * shape * (t - 1.0))?;
    Ok(BoundValue::from_log(log, BoundKind::GammaLower, true))
}

/// `exp(-a t)` with `a = -log P(S >= E S)`, from the S-inequality.
pub fn s_inequality_upper(t: f64, p_ge_mean: f64) -> Result<BoundValue> {
    if !(p_ge_mean > 0.0 && p_ge_mean < 1.0) {
        return Err(invalid(format!(
            "P(S >= ES) must lie in (0, 1), got {p_ge_mean}"
        )));
    }
    if !t.is_finite() {
        return Err(invalid(format!("t must be finite, got {t}")));
    }
    let a = -p_ge_mean.ln();
    let (lo, hi) = P_GE_MEAN_RANGE;
    let valid = t >= 1.0 && p_ge_mean > lo && p_ge_mean < hi;
    Ok(BoundValue::from_log(-a * t, BoundKind::SIneqUpper, valid))
}

/// Which lower constant to use in [`moment_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMode {
    /// `sqrt(2e) / (sqrt(2e) + 1)` as printed with the theorem.
    Paper,
    /// `sqrt(2/e) / (sqrt(2e) + 1)`, what `max{p a_inf / e, sqrt(2p/e) |a|_2}`
    /// actually yields.
    #[default]
    ProofDerived,
}

impl MomentMode {
    pub fn lower_constant(&self) -> f64 {
        let s = (2.0 * E).sqrt();
        match self {
            MomentMode::Paper => s / (s + 1.0),
            MomentMode::ProofDerived => (2.0 / E).sqrt() / (s + 1.0),
        }
    }
}

pub const MOMENT_UPPER_CONST: f64 = 4.0 * SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBounds {
    pub p: f64,
    pub lower: f64,
    pub upper: f64,
    pub mode: MomentMode,
}

/// Two-sided bounds on `(E|S|^p)^{1/p}` for Laplace sums, `p >= 2`.
pub fn moment_bounds(p: f64, w: &WeightVector, mode: MomentMode) -> Result<MomentBounds> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("moment bounds need p >= 2, got {p}")));
    }
    let stats = weight_stats(w, Distribution::Laplace);
    let base = p * stats.a_max + p.sqrt() * stats.l2;
    Ok(MomentBounds {
        p,
        lower: mode.lower_constant() * base,
        upper: MOMENT_UPPER_CONST * base,
        mode,
    })
}

/// `Gamma(x + 1)^{1/x}`, used when checking the Stirling-type steps.
pub fn gamma_root(x: f64) -> f64 {
    (ln_gamma(x + 1.0) / x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn janson_examples() {
        let w = wv(&[2.0, 1.0]);
        let s = weight_stats(&w, Distribution::Exponential);
        let up = janson_upper(2.0, &s).unwrap();
        assert!((up.value - 0.315_553_698_656_390_2).abs() < 1e-14);
        assert!(up.valid);
        let lo = janson_lower(2.0, &s).unwrap();
        assert!((lo.value - 0.027_361_666_207_966_27).abs() < 1e-15);
        let at1 = janson_upper(1.0, &s).unwrap();
        assert!((at1.value - 1.0).abs() < 1e-15 && !at1.valid);
        let near1 = janson_lower(1.0 + 1e-12, &s).unwrap();
        assert!((near1.value - 1.0 / (2.0 * E * 1.5)).abs() < 1e-12);
        let one = weight_stats(&wv(&[1.0]), Distribution::Exponential);
        let up1 = janson_upper(2.0, &one).unwrap();
        assert!((up1.value - 0.5 * (-(1.0 - 2f64.ln())).exp()).abs() < 1e-15);
        assert!(up1.value >= (-2f64).exp());
        let lo1 = janson_lower(2.0, &one).unwrap();
        assert!((lo1.value - (-1f64).exp() / (2.0 * E)).abs() < 1e-16);
        assert!(lo1.value <= (-2f64).exp());
        assert!(janson_upper(0.0, &s).is_err());
    }

    #[test]
    fn janson_upper_nonincreasing() {
        let s = weight_stats(&wv(&[3.0, 1.0, 0.5]), Distribution::Exponential);
        let mut prev = f64::INFINITY;
        for i in 0..500 {
            let t = 1.0 + i as f64 * 0.05;
            let v = janson_upper(t, &s).unwrap().log_value;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn laplace_examples() {
        let s = weight_stats(&wv(&[2.0, 1.0]), Distribution::Laplace);
        let up = laplace_upper(2.0, &s).unwrap();
        assert!((up.value - 0.252_953_855_321_830_8).abs() < 1e-14);
        let lo = laplace_lower(2.0, &s).unwrap();
        assert!((lo.value - 4.176_047_273_190_601e-4).abs() < 1e-17);
        let one = weight_stats(&wv(&[1.0]), Distribution::Laplace);
        let up3 = laplace_upper(3.0, &one).unwrap();
        assert!((up3.value - 0.093_173_904_502_860_02).abs() < 1e-14);
        assert!(up3.value >= 0.5 * (-3.0 * SQRT_2).exp());
        let near = laplace_lower(1.0001, &one).unwrap();
        assert!(near.value > 0.0 && near.value.is_finite() && near.valid);
        assert!(!laplace_lower(1.0, &one).unwrap().valid);
    }

    #[test]
    fn log_space_survives_huge_alpha_t() {
        let s = weight_stats(&wv(&[1.0; 50]), Distribution::Laplace);
        let up = laplace_upper(1e3, &s).unwrap();
        assert_eq!(up.value, 0.0);
        assert!(up.log_value.is_finite() && up.log_value < -7000.0);
        // log_value ~ -alpha t (1 + o(1))
        let ratio = -laplace_upper(1e6, &s).unwrap().log_value / (s.alpha_sym * 1e6);
        assert!((ratio - 1.0).abs() < 1e-3);
        let lo = laplace_lower(1e3, &s).unwrap();
        assert!(lo.log_value.is_finite());
    }

    #[test]
    fn generic_examples() {
        let w = wv(&[2.0, 1.0]);
        let s = weight_stats(&w, Distribution::Exponential);
        let g = generic_upper(Distribution::Exponential, &w, 2.0).unwrap();
        let j = janson_upper(2.0, &s).unwrap();
        assert!((g.log_value - j.log_value - 2f64.ln()).abs() < 1e-12);
        assert!((g.value - 0.631_107_397_312_780_3).abs() < 1e-14);
        let gg = generic_upper(Distribution::Gamma { shape: 2.0 }, &wv(&[1.0, 1.0]), 2.0).unwrap();
        assert!((gg.value - 0.293_050_222_219_746_9).abs() < 1e-14);
        let at1 = generic_upper(Distribution::Exponential, &w, 1.0).unwrap();
        assert_eq!(at1.value, 1.0);
        assert!(matches!(
            generic_upper(Distribution::Laplace, &w, 2.0),
            Err(Error::UnsupportedLaw { .. })
        ));
    }

    #[test]
    fn r_function_examples() {
        assert!(
            (r_function(Distribution::Exponential, 1.0).unwrap() - (-1f64).exp()).abs() < 1e-16
        );
        let half = r_function(Distribution::Gamma { shape: 0.5 }, 1.0).unwrap();
        assert!((half - 0.103_776_874_355_148_68).abs() < 1e-15);
        let two = r_function(Distribution::Gamma { shape: 2.0 }, 1.0).unwrap();
        assert!((two - (-1f64).exp()).abs() < 1e-16);
        assert!(r_function(Distribution::Laplace, 1.0).is_err());
        assert!(r_function(Distribution::Exponential, 0.0).is_err());
    }

    #[test]
    fn r_numeric_examples() {
        let e = r_infimum_numeric(Distribution::Exponential, 2.0).unwrap();
        assert!((e - (-2f64).exp()).abs() < 1e-12);
        let g2 = r_infimum_numeric(Distribution::Gamma { shape: 2.0 }, 1.0).unwrap();
        // infimum approached as u -> inf: grid cap u = 1e3 gives e^{-1} (1 + 1/1001)
        assert!(g2 >= (-1f64).exp() - 1e-9);
        assert!(g2 - (-1f64).exp() < 1e-3);
        let g05 = r_infimum_numeric(Distribution::Gamma { shape: 0.5 }, 1.0).unwrap();
        assert!(g05 >= 0.103_776 - 1e-9);
        // decreasing hazard: infimum at u -> 0 is Q(1/2, 1) = erfc(1)
        assert!((g05 - libm::erfc(1.0)).abs() < 1e-6);
    }

    #[test]
    fn generic_lower_examples() {
        let w = wv(&[2.0, 1.0]);
        let p = 0.396_473_251_928_995_7;
        let g = generic_lower(Distribution::Exponential, &w, 2.0, p).unwrap();
        assert!((g.value - 0.088_465_140_197_485_58).abs() < 1e-15);
        let pz = pz_bound(9.0).unwrap();
        let g = generic_lower(Distribution::Exponential, &w, 2.0, pz).unwrap();
        assert!((g.value - 0.009_838_806_970_706_953).abs() < 1e-15);
        let near = generic_lower(Distribution::Exponential, &w, 1.0 + 1e-12, p).unwrap();
        assert!((near.value - p).abs() < 1e-11);
        assert!(generic_lower(Distribution::Exponential, &w, 2.0, 0.0).is_err());
        assert!(generic_lower(Distribution::Exponential, &w, 2.0, 1.5).is_err());
    }

    #[test]
    fn pz_examples() {
        assert!((pz_bound(9.0).unwrap() - 0.044_094_473_665_783_32).abs() < 1e-16);
        assert!((pz_bound(2.0).unwrap() - 0.132_283_420_997_349_96).abs() < 1e-16);
        assert!((pz_bound(gamma_kurtosis(2.0)).unwrap() - 0.066_141_710_498_674_98).abs() < 1e-16);
        assert!(pz_bound(0.5).is_err());
    }

    #[test]
    fn gamma_bounds_match_generic_forms() {
        let w = wv(&[1.0, 0.3, 2.0]);
        for &shape in &[0.5, 1.0, 2.0] {
            let d = Distribution::Gamma { shape };
            let s = weight_stats(&w, d);
            let p = pz_bound(gamma_kurtosis(shape)).unwrap();
            for &t in &[1.1, 2.0, 7.0] {
                let a = gamma_upper(t, &s, shape).unwrap();
                let b = generic_upper(d, &w, t).unwrap();
                assert!((a.log_value - b.log_value).abs() < 1e-12);
                let a = gamma_lower(t, &s, shape).unwrap();
                let b = generic_lower(d, &w, t, p).unwrap();
                assert!((a.log_value - b.log_value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn s_inequality_examples() {
        let p = 0.396_473_251_928_995_7;
        let b = s_inequality_upper(2.0, p).unwrap();
        assert!((b.value - 0.157_191_039_495_152_9).abs() < 1e-15);
        assert!(b.value <= (23.0f64 / 24.0).powi(2));
        assert!((s_inequality_upper(1.0, p).unwrap().value - p).abs() < 1e-16);
        assert!(!s_inequality_upper(2.0, 0.01).unwrap().valid);
        assert!(s_inequality_upper(2.0, 1.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let w = wv(&[2.0, 1.0]);
        let m = moment_bounds(3.0, &w, MomentMode::ProofDerived).unwrap();
        assert!((m.lower - 2.541_894_811_682_583).abs() < 1e-12);
        assert!((m.upper - 55.850_027_797_160_93).abs() < 1e-11);
        let exact = 62f64.cbrt();
        assert!(m.lower <= exact && exact <= m.upper);
        let one = wv(&[1.0]);
        let paper = moment_bounds(2.0, &one, MomentMode::Paper).unwrap();
        assert!((paper.lower - 2.389_430_127_758_815).abs() < 1e-12);
        assert!(paper.lower > 2f64.sqrt());
        let derived = moment_bounds(2.0, &one, MomentMode::ProofDerived).unwrap();
        assert!((derived.lower - 0.879_022_220_118_121).abs() < 1e-12);
        assert!(derived.lower <= 2f64.sqrt());
        assert!(moment_bounds(1.5, &one, MomentMode::default()).is_err());
        assert_eq!(MomentMode::default(), MomentMode::ProofDerived);
    }

    #[test]
    fn stirling_steps_used_by_moment_proof() {
        for i in 1..200 {
            let x = i as f64 * 0.1;
            assert!(gamma_root(x) >= x / E);
            if x >= 1.0 {
                assert!(ln_gamma(x + 1.0) <= x * x.ln() + 1e-12);
            }
        }
    }
}
