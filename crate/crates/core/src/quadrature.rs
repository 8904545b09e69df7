//! Globally adaptive Gauss–Kronrod (7/15) integration and Wynn's epsilon
//! algorithm, the two pieces behind the oscillatory inversion integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gk15 {
    pub value: f64,
    pub error: f64,
    /// Integral of `|f|`, used to set relative scales.
    pub abs_value: f64,
}

/// One 15-point Kronrod rule with the embedded 7-point Gauss error estimate.
pub fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Gk15 {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_value = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        kronrod += WGK[j] * (f1 + f2);
        abs_value += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Gk15 {
        value,
        error,
        abs_value: abs_value * half.abs(),
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    est: Gk15,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub abs_value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Integrate `f` over `[a, b]` until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |integral|)` or `max_evals` is spent.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_evals: usize,
) -> QuadResult {
    let first = gk15(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, est: first });
    let (mut value, mut error, mut abs_value) = (first.value, first.error, first.abs_value);
    loop {
        let tol = abs_tol.max(rel_tol * value.abs());
        if error <= tol {
            return QuadResult {
                value,
                error,
                abs_value,
                evaluations,
                converged: true,
            };
        }
        if evaluations + 30 > max_evals {
            return QuadResult {
                value,
                error,
                abs_value,
                evaluations,
                converged: false,
            };
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in double precision
            return QuadResult {
                value,
                error,
                abs_value,
                evaluations,
                converged: false,
            };
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        value += left.value + right.value - worst.est.value;
        abs_value += left.abs_value + right.abs_value - worst.est.abs_value;
        error += left.error + right.error - worst.est.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            est: right,
        });
        // resum to shed drift from the running updates
        if heap.len() % 64 == 0 {
            value = heap.iter().map(|p| p.est.value).sum();
            error = heap.iter().map(|p| p.est.error).sum();
        }
    }
}

/// Wynn's epsilon extrapolation of a sequence of partial sums. Returns the
/// last entry of the highest even column that could be formed.
pub fn wynn_epsilon(seq: &[f64]) -> f64 {
    let n = seq.len();
    if n < 3 {
        return *seq.last().unwrap_or(&0.0);
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur = seq.to_vec();
    let mut best = seq[n - 1];
    for k in 1..n {
        let len = n - k;
        let mut next = Vec::with_capacity(len);
        for j in 0..len {
            let diff = cur[j + 1] - cur[j];
            if diff == 0.0 || !diff.is_finite() {
                // column already converged
                return if k % 2 == 1 { cur[j + 1] } else { best };
            }
            next.push(prev[j + 1] + 1.0 / diff);
        }
        if k % 2 == 0 {
            let cand = next[len - 1];
            if cand.is_finite() {
                best = cand;
            }
        }
        prev = cur;
        cur = next;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = gk15(&mut |x: f64| x.powi(10) - 3.0 * x, 0.0, 2.0);
        let exact = 2f64.powi(11) / 11.0 - 6.0;
        assert!((r.value - exact).abs() < 1e-11);
    }

    #[test]
    fn adaptive_handles_peak() {
        let c = 1e-4;
        // int_0^1 c/(c^2 + x^2) dx = atan(1/c)
        let r = integrate(|x| c / (c * c + x * x), 0.0, 1.0, 1e-13, 1e-13, 200_000);
        assert!(r.converged);
        assert!((r.value - (1.0 / c).atan()).abs() < 1e-11);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // log 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let partial: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        let est = wynn_epsilon(&partial);
        assert!((est - 2f64.ln()).abs() < 1e-12, "{est}");
        assert!((partial[19] - 2f64.ln()).abs() > 1e-2);
    }

    #[test]
    fn wynn_converged_sequence() {
        assert_eq!(wynn_epsilon(&[1.0, 1.0, 1.0, 1.0]), 1.0);
        assert_eq!(wynn_epsilon(&[0.5]), 0.5);
    }
}
