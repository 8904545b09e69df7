//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr
//! (bypassing output capture) before asserting.

use std::io::Write;
use std::time::{Duration, Instant};

use tailsand::bounds::{moment_bounds, MomentMode};
use tailsand::harness::{
    check_asymptotic_order, check_moment_bracketing, check_p_ge_interval, check_pz_squared,
    check_s_inequality, default_instances, sandwich_row, sandwich_rows_for, PropertyCheck,
    SandwichRow,
};
use tailsand::montecarlo::{is_tail, ks_two_sample, mc_tail, sample_sum, Representation};
use tailsand::oracle::{
    cf_tail_inversion, hypoexp_mixture, laplace_mixture, laplace_tail, ExactSource,
};
use tailsand::special::{h_closed, h_sup};
use tailsand::{Distribution, WeightVector};

const T_GRID: [f64; 6] = [1.1, 1.5, 2.0, 3.0, 5.0, 10.0];

fn report(id: u32, pass: bool, detail: String) {
    let line = format!(
        "acceptance criterion {id:>2}: {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn wv(v: &[f64]) -> WeightVector {
    WeightVector::new(v.to_vec()).unwrap()
}

fn sandwich_summary(rows: &[SandwichRow]) -> (usize, f64, bool) {
    let failures = rows
        .iter()
        .filter(|r| !(r.slack_low >= -1e-12 && r.slack_high >= -1e-12))
        .count();
    let worst = rows
        .iter()
        .map(|r| r.slack_low.min(r.slack_high))
        .fold(f64::INFINITY, f64::min);
    let oracle_only = rows
        .iter()
        .all(|r| r.source != ExactSource::ImportanceSampling);
    (failures, worst, oracle_only)
}

fn property_line(id: u32, c: &PropertyCheck, extra: &str) {
    report(
        id,
        c.pass(),
        format!(
            "{}: {} checks, {} failures, worst margin {:.3e}{extra}{}",
            c.name,
            c.checks,
            c.failures,
            c.worst_margin,
            c.witness
                .as_ref()
                .map(|w| format!(", witness {w}"))
                .unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_01_laplace_sandwich() {
    let start = Instant::now();
    let instances = default_instances(101, 50);
    let rows = sandwich_rows_for(Distribution::Laplace, &instances, &T_GRID).unwrap();
    let elapsed = start.elapsed();
    let (failures, worst, oracle_only) = sandwich_summary(&rows);
    let pass =
        failures == 0 && oracle_only && rows.len() == 300 && elapsed < Duration::from_secs(10);
    report(
        1,
        pass,
        format!(
            "Laplace sandwich: {} rows, {failures} failures, worst slack {worst:.3e}, {:.2?}",
            rows.len(),
            elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_janson_sandwich() {
    let instances = default_instances(202, 50);
    let rows = sandwich_rows_for(Distribution::Exponential, &instances, &T_GRID).unwrap();
    let (failures, worst, oracle_only) = sandwich_summary(&rows);
    let fixed = sandwich_row(0, Distribution::Exponential, &wv(&[2.0, 1.0]), 2.0).unwrap();
    // recomputed reference values; the commonly quoted upper value 0.315552
    // is off in the sixth digit (see the decisions ledger)
    let reference = (0.027_361_666, 0.097_095_385, 0.315_553_699);
    let fixed_ok = (fixed.lower - reference.0).abs() <= 1e-6
        && (fixed.exact - reference.1).abs() <= 1e-6
        && (fixed.upper - reference.2).abs() <= 1e-6
        && (fixed.lower - 0.027362).abs() <= 1e-6
        && (fixed.exact - 0.097095).abs() <= 1e-6;
    let pass = failures == 0 && oracle_only && fixed_ok;
    report(
        2,
        pass,
        format!(
            "Janson sandwich: {} rows, {failures} failures, worst slack {worst:.3e}; (2,1), t=2: \
             ({:.6}, {:.6}, {:.6}) [quoted upper 0.315552, |diff| {:.2e}]",
            rows.len(),
            fixed.lower,
            fixed.exact,
            fixed.upper,
            (fixed.upper - 0.315552).abs()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_gamma_sandwich() {
    let start = Instant::now();
    let mut all = Vec::new();
    let mut cf_mismatch = 0;
    for (k, &shape) in [0.5, 1.0, 2.0].iter().enumerate() {
        let d = Distribution::Gamma { shape };
        let instances = default_instances(303 + k as u64, 10);
        let rows = sandwich_rows_for(d, &instances, &T_GRID).unwrap();
        cf_mismatch += rows
            .iter()
            .filter(|r| r.source != ExactSource::CfInversion)
            .count();
        all.extend(rows);
    }
    let elapsed = start.elapsed();
    let (failures, worst, _) = sandwich_summary(&all);
    let pass = failures == 0 && cf_mismatch == 0 && elapsed < Duration::from_secs(60);
    report(
        3,
        pass,
        format!(
            "gamma sandwich (shape 0.5, 1, 2): {} rows, {failures} failures, worst slack \
             {worst:.3e}, {cf_mismatch} rows not from inversion, {elapsed:.2?}",
            all.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_h_identity() {
    let mut worst_diff: f64 = 0.0;
    let mut regime_failures = 0;
    let mut prev = 0.0;
    for i in 0..200 {
        let u = 10f64.powf(-3.0 + 6.0 * i as f64 / 199.0);
        let closed = h_closed(u).unwrap();
        let sup = h_sup(u).unwrap().value;
        worst_diff = worst_diff.max((sup - closed).abs());
        let floor = if u < std::f64::consts::SQRT_2 {
            u * u / 5.0
        } else {
            u / 4.0
        };
        if closed < floor || closed < prev {
            regime_failures += 1;
        }
        prev = closed;
    }
    let pass = worst_diff <= 1e-10 && regime_failures == 0;
    report(
        4,
        pass,
        format!(
            "h identity: max |h_sup - h_closed| = {worst_diff:.3e} over 200 points, \
             {regime_failures} regime violations"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_oracle_cross_agreement() {
    let mut instances = default_instances(505, 14);
    let gap = 1e-6;
    instances.push(wv(&[1.0, 1.0 + gap]));
    instances.push(wv(&[2.0, 2.0 * (1.0 + gap), 0.5]));
    instances.push(wv(&[0.3, 0.3 * (1.0 + gap), 2.0]));
    instances.push(wv(&[5.0, 5.0 * (1.0 - gap), 1.0, 1.0 * (1.0 + gap)]));
    instances.push(wv(&[1.0, 1.0 + gap, 3.0, 0.2, 0.7]));
    instances.push(wv(&[4.0, 4.0 * (1.0 + gap), 0.9]));
    assert_eq!(instances.len(), 20);
    let mut worst: f64 = 0.0;
    let mut comparisons = 0;
    let mut witness = String::new();
    for w in &instances {
        let sum: f64 = w.as_slice().iter().sum();
        let sigma = (2.0 * w.as_slice().iter().map(|a| a * a).sum::<f64>()).sqrt();
        let hyp = hypoexp_mixture(w).unwrap();
        let lap = laplace_mixture(w).unwrap();
        for &f in &[0.25, 1.0, 1.5, 2.5, 4.0] {
            for (d, mix, thr) in [
                (Distribution::Exponential, &hyp, f * sum),
                (Distribution::Laplace, &lap, f * sigma),
            ] {
                let a = mix.tail(thr);
                let b = cf_tail_inversion(d, w, thr).unwrap();
                comparisons += 1;
                if (a - b).abs() > worst {
                    worst = (a - b).abs();
                    witness = format!("{d} weights {w} threshold {thr}");
                }
            }
        }
    }
    let pass = worst <= 1e-8;
    report(
        5,
        pass,
        format!(
            "mixture vs inversion: {comparisons} comparisons on 20 instances (6 near-confluent), \
             max |diff| {worst:.3e} at {witness}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_gaussian_mixture_ks() {
    let w = wv(&[2.0, 1.0, 0.5]);
    let mut pvals = Vec::new();
    for seed in [1u64, 2, 3] {
        let x = sample_sum(
            Distribution::Laplace,
            &w,
            100_000,
            seed,
            Representation::Direct,
        )
        .unwrap();
        let y = sample_sum(
            Distribution::Laplace,
            &w,
            100_000,
            seed + 1_000_000,
            Representation::GaussianMixture,
        )
        .unwrap();
        pvals.push(ks_two_sample(&x, &y).unwrap().p_value);
    }
    let pass = pvals.iter().all(|&p| p > 0.001);
    report(
        6,
        pass,
        format!("two-sample KS direct vs Gaussian mixture, p-values {pvals:.4?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_importance_sampling() {
    let w = wv(&[2.0, 1.0]);
    let thr = 5.0 * 10f64.sqrt();
    let exact = laplace_tail(&w, thr).unwrap();
    let is = is_tail(Distribution::Laplace, &w, thr, 100_000, 77).unwrap();
    let plain = mc_tail(Distribution::Laplace, &w, thr, 1_000_000, 78).unwrap();
    let is_ok = (is.p_hat - exact).abs() <= 4.0 * is.stderr && is.stderr / is.p_hat <= 0.02;
    let plain_ok = plain.ci_low <= exact && exact <= plain.ci_high;
    let pass = is_ok && plain_ok;
    report(
        7,
        pass,
        format!(
            "oracle {exact:.6e}; tilted {:.6e} +- {:.2e} (rel {:.4}); plain n=1e6 {:.3e} with 95% \
             CI [{:.3e}, {:.3e}] ({} hits)",
            is.p_hat,
            is.stderr,
            is.stderr / is.p_hat,
            plain.p_hat,
            plain.ci_low,
            plain.ci_high,
            plain.hits
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_moments() {
    let instances = default_instances(808, 20);
    let c = check_moment_bracketing(&instances, &[2.0, 3.0, 4.0, 6.0, 8.0]);
    let paper = moment_bounds(2.0, &wv(&[1.0]), MomentMode::Paper).unwrap();
    let exact = 2f64.sqrt();
    let counterexample = paper.lower > exact;
    property_line(
        8,
        &c,
        &format!(
            "; paper-constant counterexample p=2, n=1: lower {:.6} > exact {exact:.6} reproduced = \
             {counterexample}",
            paper.lower
        ),
    );
    assert!(c.pass() && c.checks == 100 && counterexample);
}

#[test]
fn criterion_09_paley_zygmund() {
    let instances = default_instances(909, 50);
    let pz = check_pz_squared(&instances);
    let interval = check_p_ge_interval(&instances);
    let pass = pz.pass() && interval.pass();
    report(
        9,
        pass,
        format!(
            "P(sum a^2 Y >= sum a^2) >= 0.044094 on {} instances (worst margin {:.3e}); P(S >= ES) \
             in (1/24, 23/24) on {} instances (worst margin {:.3e})",
            pz.checks, pz.worst_margin, interval.checks, interval.worst_margin
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_s_inequality() {
    let instances = default_instances(1010, 20);
    let c = check_s_inequality(&instances, &[1.0, 1.5, 2.0, 3.0]);
    property_line(10, &c, "");
    assert!(c.pass());
}

#[test]
fn criterion_11_asymptotic_order() {
    let instances = default_instances(1111, 10);
    let c = check_asymptotic_order(&instances, 50.0);
    property_line(
        11,
        &c,
        " (ratio -log tail / (alpha t) at t = 50 within [0.9, 1.1])",
    );
    assert!(c.pass());
}
