//! Samplers, plain Monte Carlo and exponentially tilted importance sampling.
//!
//! Work is split into fixed chunks of [`CHUNK`] draws. Chunk `i` draws from
//! ChaCha substream `i` of the seed, and chunk statistics are merged in
//! index order, so serial and parallel runs agree bit for bit.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::legendre::SumCgf;
use crate::special::ln_gamma;
use crate::weights::{Distribution, WeightVector};

pub const CHUNK: usize = 16_384;
/// Below this many hits plain estimates use the Clopper–Pearson interval.
pub const EXACT_CI_HITS: u64 = 30;
/// Tilts are clamped to this fraction of `1 / max a`.
pub const TILT_CLAMP: f64 = 0.999;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Plain,
    Tilted,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::Tilted => "tilted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    Direct,
    /// Laplace sums as `sqrt(2 sum a_i^2 Y_i) G`.
    GaussianMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub hits: u64,
    pub method: Method,
    pub seed: u64,
    pub tilt_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
/// How chunks are scheduled. Both give bit-identical results.
pub enum Execution {
    Serial,
    Parallel,
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(CHUNK))
        .map(|i| (i, CHUNK.min(n - i * CHUNK)))
        .collect()
}

fn run_chunks<T: Send>(n: usize, exec: Execution, f: impl Fn(usize, usize) -> T + Sync) -> Vec<T> {
    let ranges = chunk_ranges(n);
    match exec {
        Execution::Serial => ranges.into_iter().map(|(i, len)| f(i, len)).collect(),
        Execution::Parallel => ranges.into_par_iter().map(|(i, len)| f(i, len)).collect(),
    }
}

/// Draws one summand `a X` from the untilted law.
fn draw(d: Distribution, a: f64, gamma: Option<&Gamma<f64>>, rng: &mut ChaCha8Rng) -> f64 {
    match d {
        Distribution::Exponential => a * rng.sample::<f64, _>(Exp1),
        Distribution::Gamma { .. } => a * gamma.expect("gamma sampler").sample(rng),
        Distribution::Laplace => {
            let u: f64 = rng.sample(Open01);
            if u < 0.5 {
                a * (2.0 * u).ln()
            } else {
                -a * (2.0 * (1.0 - u)).ln()
            }
        }
    }
}

fn unit_gamma(d: Distribution) -> Option<Gamma<f64>> {
    match d {
        Distribution::Gamma { shape } => Some(Gamma::new(shape, 1.0).expect("validated shape")),
        _ => None,
    }
}

fn draw_sum(
    d: Distribution,
    w: &[f64],
    repr: Representation,
    gamma: Option<&Gamma<f64>>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    match repr {
        Representation::Direct => w.iter().map(|&a| draw(d, a, gamma, rng)).sum(),
        Representation::GaussianMixture => {
            let v: f64 = w.iter().map(|&a| a * a * rng.sample::<f64, _>(Exp1)).sum();
            let g: f64 = rng.sample(StandardNormal);
            (2.0 * v).sqrt() * g
        }
    }
}

pub fn sample_sum(
    d: Distribution,
    w: &WeightVector,
    n: usize,
    seed: u64,
    representation: Representation,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    if representation == Representation::GaussianMixture && d != Distribution::Laplace {
        return Err(invalid(format!(
            "gaussian_mixture representation applies to laplace sums, not {}",
            d.name()
        )));
    }
    let gamma = unit_gamma(d);
    let chunks = run_chunks(n, Execution::Parallel, |i, len| {
        let mut rng = chunk_rng(seed, i);
        (0..len)
            .map(|_| draw_sum(d, w.as_slice(), representation, gamma.as_ref(), &mut rng))
            .collect::<Vec<_>>()
    });
    Ok(chunks.concat())
}

/// Running count, mean and centred second moment of one chunk.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    hits: u64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
        if x > 0.0 {
            self.hits += 1;
        }
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
            hits: self.hits + other.hits,
        }
    }

    fn variance(&self) -> f64 {
        if self.n > 1.0 {
            (self.m2 / (self.n - 1.0)).max(0.0)
        } else {
            0.0
        }
    }
}

fn check_common(w: &WeightVector, threshold: f64, n: usize) -> Result<()> {
    if n < 100 {
        return Err(invalid(format!("at least 100 samples required, got {n}")));
    }
    if !threshold.is_finite() {
        return Err(invalid(format!(
            "threshold must be finite, got {threshold}"
        )));
    }
    debug_assert!(!w.is_empty());
    Ok(())
}

/// Plain Monte Carlo estimate of `P(S > threshold)`.
pub fn mc_tail(
    d: Distribution,
    w: &WeightVector,
    threshold: f64,
    n: usize,
    seed: u64,
) -> Result<MCEstimate> {
    mc_tail_exec(d, w, threshold, n, seed, Execution::Parallel)
}

pub fn mc_tail_exec(
    d: Distribution,
    w: &WeightVector,
    threshold: f64,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<MCEstimate> {
    check_common(w, threshold, n)?;
    let gamma = unit_gamma(d);
    let hits: u64 = run_chunks(n, exec, |i, len| {
        let mut rng = chunk_rng(seed, i);
        (0..len)
            .filter(|_| {
                draw_sum(
                    d,
                    w.as_slice(),
                    Representation::Direct,
                    gamma.as_ref(),
                    &mut rng,
                ) > threshold
            })
            .count() as u64
    })
    .into_iter()
    .sum();
    let nf = n as f64;
    let p_hat = hits as f64 / nf;
    let stderr = (p_hat * (1.0 - p_hat) / nf).sqrt();
    let (ci_low, ci_high) = if hits < EXACT_CI_HITS {
        clopper_pearson(hits, n as u64, 0.05)
    } else {
        (
            (p_hat - Z95 * stderr).max(0.0),
            (p_hat + Z95 * stderr).min(1.0),
        )
    };
    Ok(MCEstimate {
        p_hat,
        stderr,
        ci_low,
        ci_high,
        n: n as u64,
        hits,
        method: Method::Plain,
        seed,
        tilt_theta: 0.0,
    })
}

/// Chernoff tilt for `threshold`, clamped into the moment generating
/// function's domain.
pub fn chernoff_tilt(d: Distribution, w: &WeightVector, threshold: f64) -> Result<f64> {
    let cgf = SumCgf::new(d, w);
    if threshold <= cgf.mean() {
        return Err(invalid(format!(
            "importance sampling needs a threshold above the mean {}, got {threshold}",
            cgf.mean()
        )));
    }
    let theta = cgf.saddle_point(threshold)?;
    Ok(theta.min(TILT_CLAMP / w.max()))
}

/// Importance-sampling estimate of `P(S > threshold)` under the Chernoff tilt.
pub fn is_tail(
    d: Distribution,
    w: &WeightVector,
    threshold: f64,
    n: usize,
    seed: u64,
) -> Result<MCEstimate> {
    check_common(w, threshold, n)?;
    let theta = chernoff_tilt(d, w, threshold)?;
    is_tail_with_tilt(d, w, threshold, n, seed, theta)
}

/// Importance sampling with a caller-chosen tilt `theta`.
pub fn is_tail_with_tilt(
    d: Distribution,
    w: &WeightVector,
    threshold: f64,
    n: usize,
    seed: u64,
    theta: f64,
) -> Result<MCEstimate> {
    is_tail_exec(d, w, threshold, n, seed, theta, Execution::Parallel)
}

fn check_tilt(d: Distribution, w: &WeightVector, theta: f64) -> Result<()> {
    if !theta.is_finite() {
        return Err(invalid(format!("tilt must be finite, got {theta}")));
    }
    for (i, &a) in w.as_slice().iter().enumerate() {
        let ta = if d == Distribution::Laplace {
            theta.abs() * a
        } else {
            theta * a
        };
        if ta >= 1.0 {
            return Err(invalid(format!(
                "tilt {theta} is outside the domain for weight a[{i}] = {a} (theta * a = {ta})"
            )));
        }
    }
    Ok(())
}

/// Likelihood-ratio sample for one tilted draw: `(S, log dP/dQ)` without the
/// common `K(theta)` offset.
fn draw_tilted(
    d: Distribution,
    w: &[f64],
    theta: f64,
    gamma: Option<&Gamma<f64>>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut s = 0.0;
    for &a in w {
        s += match d {
            Distribution::Exponential => a / (1.0 - theta * a) * rng.sample::<f64, _>(Exp1),
            Distribution::Gamma { .. } => {
                a / (1.0 - theta * a) * gamma.expect("gamma sampler").sample(rng)
            }
            Distribution::Laplace => {
                let ta = theta * a;
                let e: f64 = rng.sample(Exp1);
                let u: f64 = rng.random();
                if u < 0.5 * (1.0 + ta) {
                    a / (1.0 - ta) * e
                } else {
                    -a / (1.0 + ta) * e
                }
            }
        };
    }
    s
}

pub fn is_tail_exec(
    d: Distribution,
    w: &WeightVector,
    threshold: f64,
    n: usize,
    seed: u64,
    theta: f64,
    exec: Execution,
) -> Result<MCEstimate> {
    check_common(w, threshold, n)?;
    check_tilt(d, w, theta)?;
    let cgf = SumCgf::new(d, w);
    let k = cgf.value(theta);
    let gamma = unit_gamma(d);
    let stats = run_chunks(n, exec, |i, len| {
        let mut rng = chunk_rng(seed, i);
        let mut m = Moments::default();
        for _ in 0..len {
            let s = draw_tilted(d, w.as_slice(), theta, gamma.as_ref(), &mut rng);
            m.push(if s > threshold {
                (k - theta * s).exp()
            } else {
                0.0
            });
        }
        m
    });
    let m = stats.into_iter().fold(Moments::default(), Moments::merge);
    let p_hat = m.mean;
    let stderr = (m.variance() / m.n).sqrt();
    Ok(MCEstimate {
        p_hat,
        stderr,
        ci_low: (p_hat - Z95 * stderr).max(0.0),
        ci_high: (p_hat + Z95 * stderr).min(1.0),
        n: n as u64,
        hits: m.hits,
        method: Method::Tilted,
        seed,
        tilt_theta: theta,
    })
}

/// Sample mean and standard error of the likelihood ratio `dP/dQ` under the
/// tilted law. Should be one.
pub fn likelihood_ratio_mean(
    d: Distribution,
    w: &WeightVector,
    theta: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_tilt(d, w, theta)?;
    let k = SumCgf::new(d, w).value(theta);
    let gamma = unit_gamma(d);
    let stats = run_chunks(n, Execution::Parallel, |i, len| {
        let mut rng = chunk_rng(seed, i);
        let mut m = Moments::default();
        for _ in 0..len {
            let s = draw_tilted(d, w.as_slice(), theta, gamma.as_ref(), &mut rng);
            m.push((k - theta * s).exp());
        }
        m
    });
    let m = stats.into_iter().fold(Moments::default(), Moments::merge);
    Ok((m.mean, (m.variance() / m.n).sqrt()))
}

fn ln_binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    let (k, n) = (k as f64, n as f64);
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
        + k * p.ln()
        + (n - k) * (-p).ln_1p()
}

/// `P(Bin(n, p) <= k)` by direct summation; used only for small `k`.
fn binom_cdf(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    (0..=k.min(n))
        .map(|j| ln_binom_pmf(j, n, p).exp())
        .sum::<f64>()
        .min(1.0)
}

fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Exact two-sided Clopper–Pearson interval at level `1 - alpha`.
pub fn clopper_pearson(hits: u64, n: u64, alpha: f64) -> (f64, f64) {
    let half = 0.5 * alpha;
    let low = if hits == 0 {
        0.0
    } else {
        // P(Bin >= hits) = half  <=>  P(Bin <= hits - 1) = 1 - half
        bisect_decreasing(|p| binom_cdf(hits - 1, n, p), 1.0 - half)
    };
    let high = if hits >= n {
        1.0
    } else {
        bisect_decreasing(|p| binom_cdf(hits, n, p), half)
    };
    (low, high)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult> {
    if x.is_empty() || y.is_empty() {
        return Err(invalid("both samples must be non-empty"));
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0_f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    })
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
