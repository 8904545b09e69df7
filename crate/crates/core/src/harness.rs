//! Verification campaigns: certify bound sandwiches against the oracles and
//! run the property suite. Reports serialise to JSON or CSV.

use std::f64::consts::SQRT_2;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    gamma_lower, gamma_upper, janson_lower, janson_upper, laplace_lower, laplace_upper,
    moment_bounds, pz_bound, s_inequality_upper, BoundValue, MomentMode, EXP_KURTOSIS,
    P_GE_MEAN_RANGE,
};
use crate::error::{invalid, Error, Result};
use crate::montecarlo::is_tail;
use crate::oracle::{
    exact_tail, hypoexp_tail, laplace_abs_moment, laplace_tail, p_ge_mean, ExactSource,
};
use crate::special::{gaussian_tail, gaussian_tail_lower, gaussian_tail_lower_simple, h_closed};
use crate::weights::{weight_stats, Distribution, WeightVector};

/// Tolerance on sandwich comparisons for oracle-backed rows.
pub const ORACLE_TOL: f64 = 1e-12;
/// Samples used when a row falls back to importance sampling.
pub const FALLBACK_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichConfig {
    pub distribution: Distribution,
    pub instances: usize,
    pub n_range: (usize, usize),
    pub weight_range: (f64, f64),
    pub t_grid: Vec<f64>,
    pub seed: u64,
}

impl SandwichConfig {
    pub fn new(distribution: Distribution, instances: usize, t_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            distribution,
            instances,
            n_range: (1, 8),
            weight_range: (0.1, 10.0),
            t_grid,
            seed,
        }
    }
}

/// Random weight vector number `id`: `n` uniform on `n_range`, weights
/// log-uniform on `weight_range`. Each id reads its own substream.
pub fn random_instance(
    seed: u64,
    id: usize,
    n_range: (usize, usize),
    weight_range: (f64, f64),
) -> Result<WeightVector> {
    let (lo, hi) = n_range;
    let (wlo, whi) = weight_range;
    if lo == 0 || hi < lo {
        return Err(invalid(format!("bad instance size range {lo}..={hi}")));
    }
    if !(wlo > 0.0 && whi >= wlo && whi.is_finite()) {
        return Err(invalid(format!("bad weight range [{wlo}, {whi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    let n = rng.random_range(lo..=hi);
    let (l0, l1) = (wlo.ln(), whi.ln());
    let w = (0..n)
        .map(|_| (l0 + (l1 - l0) * rng.random::<f64>()).exp())
        .collect();
    WeightVector::new(w)
}

/// Default random instances used by the campaigns.
pub fn default_instances(seed: u64, count: usize) -> Vec<WeightVector> {
    (0..count)
        .map(|i| random_instance(seed, i, (1, 8), (0.1, 10.0)).expect("valid default ranges"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub instance: usize,
    pub dist: Distribution,
    pub n: usize,
    pub weights: WeightVector,
    pub t: f64,
    /// Threshold in absolute units.
    pub threshold: f64,
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
    pub slack_low: f64,
    pub slack_high: f64,
    pub tol: f64,
    pub pass: bool,
    pub source: ExactSource,
    /// Set when no exact value could be produced at all.
    pub error: Option<String>,
}

/// Threshold scale: `sigma` for Laplace sums and `E S` otherwise.
pub fn threshold_unit(d: Distribution, w: &WeightVector) -> f64 {
    let s = weight_stats(w, d);
    match d {
        Distribution::Laplace => s.sigma,
        _ => s.mean_s,
    }
}

/// Lower and upper sandwich bounds at `t` for law `d`.
pub fn sandwich_bounds(
    d: Distribution,
    w: &WeightVector,
    t: f64,
) -> Result<(BoundValue, BoundValue)> {
    let stats = weight_stats(w, d);
    match d {
        Distribution::Laplace => Ok((laplace_lower(t, &stats)?, laplace_upper(t, &stats)?)),
        Distribution::Exponential => Ok((janson_lower(t, &stats)?, janson_upper(t, &stats)?)),
        Distribution::Gamma { shape } => Ok((
            gamma_lower(t, &stats, shape)?,
            gamma_upper(t, &stats, shape)?,
        )),
    }
}

/// One sandwich row for a given instance and `t`.
pub fn sandwich_row(id: usize, d: Distribution, w: &WeightVector, t: f64) -> Result<SandwichRow> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(invalid(format!("sandwich t must lie in (1, inf), got {t}")));
    }
    let (lo, hi) = sandwich_bounds(d, w, t)?;
    let threshold = t * threshold_unit(d, w);
    let (exact, source, tol, error) = match exact_tail(d, w, threshold) {
        Ok(e) => (e.value, e.source, ORACLE_TOL, None),
        Err(oracle_err) => match is_tail(d, w, threshold, FALLBACK_SAMPLES, id as u64) {
            Ok(est) => (
                est.p_hat,
                ExactSource::ImportanceSampling,
                est.ci_high - est.ci_low,
                Some(oracle_err.to_string()),
            ),
            Err(mc_err) => (
                f64::NAN,
                ExactSource::ImportanceSampling,
                0.0,
                Some(format!("{oracle_err}; fallback: {mc_err}")),
            ),
        },
    };
    let slack_low = exact - lo.value;
    let slack_high = hi.value - exact;
    let pass = slack_low >= -tol && slack_high >= -tol;
    Ok(SandwichRow {
        instance: id,
        dist: d,
        n: w.len(),
        weights: w.clone(),
        t,
        threshold,
        lower: lo.value,
        exact,
        upper: hi.value,
        slack_low,
        slack_high,
        tol,
        pass,
        source,
        error,
    })
}

/// One row per (instance, t), ordered by instance id then grid position.
pub fn sandwich_report(config: &SandwichConfig) -> Result<Vec<SandwichRow>> {
    if let Some(&bad) = config
        .t_grid
        .iter()
        .find(|&&t| !(t > 1.0) || !t.is_finite())
    {
        return Err(invalid(format!("t grid must lie in (1, inf), got {bad}")));
    }
    let instances: Vec<WeightVector> = (0..config.instances)
        .map(|i| random_instance(config.seed, i, config.n_range, config.weight_range))
        .collect::<Result<_>>()?;
    sandwich_rows_for(config.distribution, &instances, &config.t_grid)
}

pub fn sandwich_rows_for(
    d: Distribution,
    instances: &[WeightVector],
    t_grid: &[f64],
) -> Result<Vec<SandwichRow>> {
    let per_instance: Vec<Result<Vec<SandwichRow>>> = instances
        .par_iter()
        .enumerate()
        .map(|(id, w)| t_grid.iter().map(|&t| sandwich_row(id, d, w, t)).collect())
        .collect();
    let mut rows = Vec::new();
    for r in per_instance {
        rows.extend(r?);
    }
    Ok(rows)
}

pub const CSV_COLUMNS: [&str; 9] = [
    "instance", "dist", "n", "t", "lower", "exact", "upper", "pass", "source",
];

/// 17 significant digits, enough for a lossless round trip.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_rows_json(rows: &[SandwichRow], out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(out, rows).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn write_rows_csv(rows: &[SandwichRow], out: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    wr.write_record(CSV_COLUMNS).map_err(io)?;
    for r in rows {
        wr.write_record([
            r.instance.to_string(),
            r.dist.to_string(),
            r.n.to_string(),
            fmt17(r.t),
            fmt17(r.lower),
            fmt17(r.exact),
            fmt17(r.upper),
            r.pass.to_string(),
            r.source.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub checks: usize,
    pub failures: usize,
    /// Smallest margin seen; negative means a violation.
    pub worst_margin: f64,
    pub witness: Option<String>,
}

impl PropertyCheck {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checks: 0,
            failures: 0,
            worst_margin: f64::INFINITY,
            witness: None,
        }
    }

    /// Records one check with `margin >= 0` meaning success.
    fn record(&mut self, margin: f64, witness: impl FnOnce() -> String) {
        self.checks += 1;
        let ok = margin >= 0.0;
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
        if !ok {
            self.failures += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    fn record_err(&mut self, e: Error, witness: String) {
        self.checks += 1;
        self.failures += 1;
        self.worst_margin = f64::NAN;
        if self.witness.is_none() {
            self.witness = Some(format!("{witness}: {e}"));
        }
    }

    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub properties: Vec<PropertyCheck>,
    pub pass: bool,
}

/// `P(sum a_i^2 Y_i >= sum a_i^2) >= 1 / (9 16^{1/3})` via the oracle.
pub fn check_pz_squared(instances: &[WeightVector]) -> PropertyCheck {
    let mut c = PropertyCheck::new("pz_squared_weights");
    let floor = pz_bound(EXP_KURTOSIS).expect("constant");
    for w in instances {
        let sq = w.squared();
        match p_ge_mean(Distribution::Exponential, &sq) {
            Ok(p) => c.record(p - floor, || format!("weights {w}: P = {p}")),
            Err(e) => c.record_err(e, format!("weights {w}")),
        }
    }
    c
}

/// `P(S >= E S)` within the open interval `(1/24, 23/24)`.
pub fn check_p_ge_interval(instances: &[WeightVector]) -> PropertyCheck {
    let mut c = PropertyCheck::new("p_ge_mean_interval");
    let (lo, hi) = P_GE_MEAN_RANGE;
    for w in instances {
        match p_ge_mean(Distribution::Exponential, w) {
            Ok(p) => c.record((p - lo).min(hi - p), || format!("weights {w}: P = {p}")),
            Err(e) => c.record_err(e, format!("weights {w}")),
        }
    }
    c
}

/// Both Gaussian tail lower bounds below the exact tail on a grid.
pub fn check_gaussian_tail() -> PropertyCheck {
    let mut c = PropertyCheck::new("gaussian_tail_lower");
    for i in 0..=400 {
        let u = i as f64 * 0.025;
        let exact = gaussian_tail(u);
        let lo = gaussian_tail_lower(u).expect("u >= 0");
        c.record(exact * (1.0 + 1e-12) - lo, || {
            format!("u = {u}: {lo} > {exact}")
        });
        if u >= 1.0 {
            let simple = gaussian_tail_lower_simple(u).expect("u >= 1");
            c.record(exact * (1.0 + 1e-12) - simple, || {
                format!("u = {u}: {simple} > {exact}")
            });
        }
    }
    c
}

/// `h(u) >= u^2/5` below `sqrt 2`, `h(u) >= u/4` above, and `h` increasing,
/// on `points` log-spaced values in `[1e-3, 1e3]`.
pub fn check_h_regimes(points: usize) -> PropertyCheck {
    let mut c = PropertyCheck::new("h_regimes");
    let mut prev = 0.0;
    for i in 0..points {
        let u = 10f64.powf(-3.0 + 6.0 * i as f64 / (points - 1).max(1) as f64);
        let h = h_closed(u).expect("u >= 0");
        let floor = if u < SQRT_2 { u * u / 5.0 } else { u / 4.0 };
        c.record(h - floor, || format!("u = {u}: h = {h} < {floor}"));
        c.record(h - prev, || format!("u = {u}: h not increasing"));
        prev = h;
    }
    c
}

/// `P(S >= u + v) >= exp(-v / a_1) P(S >= u)` on hypoexponential oracles.
pub fn check_decay_propagation(instances: &[WeightVector]) -> PropertyCheck {
    let mut c = PropertyCheck::new("decay_propagation");
    for w in instances {
        let a1 = w.max();
        let es: f64 = w.as_slice().iter().sum();
        for &uf in &[0.0, 0.5, 1.0, 2.0, 4.0] {
            for &vf in &[0.1, 1.0, 3.0] {
                let (u, v) = (uf * es, vf * a1);
                match (hypoexp_tail(w, u + v), hypoexp_tail(w, u)) {
                    (Ok(far), Ok(near)) => {
                        let rhs = (-v / a1).exp() * near;
                        c.record(far - rhs + ORACLE_TOL, || {
                            format!("weights {w}, u = {u}, v = {v}: {far} < {rhs}")
                        })
                    }
                    (Err(e), _) | (_, Err(e)) => c.record_err(e, format!("weights {w}")),
                }
            }
        }
    }
    c
}

/// `-log P(S > t sigma) / (alpha t)` within `[0.9, 1.1]` for Laplace sums.
pub fn asymptotic_ratio(w: &WeightVector, t: f64) -> Result<f64> {
    let s = weight_stats(w, Distribution::Laplace);
    let tail = laplace_tail(w, t * s.sigma)?;
    Ok(-tail.ln() / (s.alpha_sym * t))
}

pub fn check_asymptotic_order(instances: &[WeightVector], t: f64) -> PropertyCheck {
    let mut c = PropertyCheck::new("asymptotic_order");
    for w in instances {
        match asymptotic_ratio(w, t) {
            Ok(r) => c.record((r - 0.9).min(1.1 - r), || format!("weights {w}: ratio {r}")),
            Err(e) => c.record_err(e, format!("weights {w}")),
        }
    }
    c
}

/// `e^{-a t}` dominates the hypoexponential tail at `t E S` and stays below
/// `(23/24)^t`.
pub fn check_s_inequality(instances: &[WeightVector], t_grid: &[f64]) -> PropertyCheck {
    let mut c = PropertyCheck::new("s_inequality");
    for w in instances {
        let es: f64 = w.as_slice().iter().sum();
        let p = match p_ge_mean(Distribution::Exponential, w) {
            Ok(p) => p,
            Err(e) => {
                c.record_err(e, format!("weights {w}"));
                continue;
            }
        };
        for &t in t_grid {
            let bound = match s_inequality_upper(t, p) {
                Ok(b) => b.value,
                Err(e) => {
                    c.record_err(e, format!("weights {w}, t = {t}"));
                    continue;
                }
            };
            match hypoexp_tail(w, t * es) {
                Ok(exact) => {
                    c.record(bound - exact + ORACLE_TOL, || {
                        format!("weights {w}, t = {t}: bound {bound} < exact {exact}")
                    });
                    if p <= P_GE_MEAN_RANGE.1 {
                        let ceiling = P_GE_MEAN_RANGE.1.powf(t);
                        c.record(ceiling - bound, || {
                            format!("weights {w}, t = {t}: {bound} > (23/24)^t")
                        });
                    }
                }
                Err(e) => c.record_err(e, format!("weights {w}, t = {t}")),
            }
        }
    }
    c
}

/// Proof-derived moment bounds bracket `(E|S|^p)^{1/p}`.
pub fn check_moment_bracketing(instances: &[WeightVector], ps: &[f64]) -> PropertyCheck {
    let mut c = PropertyCheck::new("moment_bracketing");
    for w in instances {
        for &p in ps {
            let (b, m) = match (
                moment_bounds(p, w, MomentMode::ProofDerived),
                laplace_abs_moment(w, p),
            ) {
                (Ok(b), Ok(m)) => (b, m),
                (Err(e), _) | (_, Err(e)) => {
                    c.record_err(e, format!("weights {w}, p = {p}"));
                    continue;
                }
            };
            let norm = m.powf(1.0 / p);
            c.record((norm - b.lower).min(b.upper - norm), || {
                format!(
                    "weights {w}, p = {p}: {} <= {norm} <= {} fails",
                    b.lower, b.upper
                )
            });
        }
    }
    c
}

/// Runs every property on instances drawn from `seed`.
pub fn property_suite(seed: u64) -> SuiteReport {
    let fifty = default_instances(seed, 50);
    let twenty = &fifty[..20];
    let ten = &fifty[..10];
    let properties = vec![
        check_pz_squared(&fifty),
        check_gaussian_tail(),
        check_h_regimes(200),
        check_decay_propagation(twenty),
        check_p_ge_interval(&fifty),
        check_asymptotic_order(ten, 50.0),
        check_s_inequality(twenty, &[1.0, 1.5, 2.0, 3.0]),
        check_moment_bracketing(twenty, &[2.0, 3.0, 4.0, 6.0, 8.0]),
    ];
    let pass = properties.iter().all(PropertyCheck::pass);
    SuiteReport {
        seed,
        properties,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fixed_laplace_row() {
        let r = sandwich_row(0, Distribution::Laplace, &wv(&[2.0, 1.0]), 2.0).unwrap();
        assert!((r.lower - 4.176_047_273_190_601e-4).abs() < 1e-12);
        assert!((r.exact - 0.027_920_852_609_818_41).abs() < 1e-10);
        assert!((r.upper - 0.252_953_855_321_830_8).abs() < 1e-12);
        assert!(r.pass);
        assert_eq!(r.source, ExactSource::Mixture);
    }

    #[test]
    fn fixed_exponential_row() {
        let r = sandwich_row(0, Distribution::Exponential, &wv(&[2.0, 1.0]), 2.0).unwrap();
        assert!((r.lower - 0.027_361_666_207_966_27).abs() < 1e-12);
        assert!((r.exact - 0.097_095_384_559_061_53).abs() < 1e-12);
        assert!((r.upper - 0.315_553_698_656_390_2).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn empty_grid_and_bad_grid() {
        let cfg = SandwichConfig::new(Distribution::Laplace, 5, vec![], 1);
        assert!(sandwich_report(&cfg).unwrap().is_empty());
        let cfg = SandwichConfig::new(Distribution::Laplace, 5, vec![1.0], 1);
        assert!(sandwich_report(&cfg).is_err());
    }

    #[test]
    fn report_is_deterministic_and_ordered() {
        let cfg = SandwichConfig::new(Distribution::Exponential, 6, vec![1.5, 3.0], 42);
        let a = sandwich_report(&cfg).unwrap();
        let b = sandwich_report(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        assert!(a.windows(2).all(|p| p[0].instance <= p[1].instance));
        assert!(a.iter().all(|r| r.pass));
    }

    #[test]
    fn instances_respect_ranges() {
        for i in 0..200 {
            let w = random_instance(3, i, (1, 8), (0.1, 10.0)).unwrap();
            assert!((1..=8).contains(&w.len()));
            assert!(w.as_slice().iter().all(|&a| (0.1..=10.0).contains(&a)));
        }
        assert_eq!(
            random_instance(3, 7, (1, 8), (0.1, 10.0)).unwrap(),
            default_instances(3, 8)[7]
        );
        assert!(random_instance(3, 0, (0, 8), (0.1, 10.0)).is_err());
    }

    #[test]
    fn suite_examples() {
        let c = check_pz_squared(&[wv(&[2.0, 1.0])]);
        assert!(c.pass() && c.worst_margin > 0.0);
        let h1 = h_closed(1.0).unwrap();
        assert!((h1 - 0.225_987_155_913_497_33).abs() < 1e-15 && h1 >= 0.2);
        let r = asymptotic_ratio(&wv(&[1.0]), 50.0).unwrap();
        assert!((r - 1.009_802_581_434_685_5).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trips_values() {
        let rows =
            sandwich_rows_for(Distribution::Laplace, &[wv(&[2.0, 1.0, 0.3])], &[1.5, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf).unwrap();
        let mut rd = csv::Reader::from_reader(buf.as_slice());
        assert_eq!(
            rd.headers().unwrap().iter().collect::<Vec<_>>(),
            CSV_COLUMNS
        );
        for (rec, row) in rd.records().zip(&rows) {
            let rec = rec.unwrap();
            assert_eq!(
                rec[5].parse::<f64>().unwrap().to_bits(),
                row.exact.to_bits()
            );
            assert_eq!(
                rec[4].parse::<f64>().unwrap().to_bits(),
                row.lower.to_bits()
            );
        }
        let mut js = Vec::new();
        write_rows_json(&rows, &mut js).unwrap();
        let back: Vec<SandwichRow> = serde_json::from_slice(&js).unwrap();
        assert_eq!(back, rows);
    }
}
