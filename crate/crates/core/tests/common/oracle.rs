//! Reference solvers written independently of the library code.

use rand::Rng;

/// Minimum of ½‖g − y‖² over Σg = budget, lo ≤ g ≤ hi, by enumerating every
/// assignment of coordinates to {at lower, at upper, free}. Free coordinates
/// share one multiplier: g_i = y_i − λ.
pub fn brute_force_projection(y: &[f64], lo: &[f64], hi: &[f64], budget: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut g = vec![0.0; n];
        let mut free = Vec::new();
        let mut fixed_sum = 0.0;
        for i in 0..n {
            match c % 3 {
                0 => {
                    g[i] = lo[i];
                    fixed_sum += lo[i];
                }
                1 => {
                    g[i] = hi[i];
                    fixed_sum += hi[i];
                }
                _ => free.push(i),
            }
            c /= 3;
        }
        if free.is_empty() {
            if (fixed_sum - budget).abs() > 1e-9 {
                continue;
            }
        } else {
            let ys: f64 = free.iter().map(|&i| y[i]).sum();
            let lambda = (ys - (budget - fixed_sum)) / free.len() as f64;
            for &i in &free {
                g[i] = y[i] - lambda;
            }
        }
        if (0..n).any(|i| g[i] < lo[i] - 1e-12 || g[i] > hi[i] + 1e-12) {
            continue;
        }
        let obj: f64 = g.iter().zip(y).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(_, o)| obj < *o) {
            best = Some((g, obj));
        }
    }
    best.expect("feasible instance has an optimum")
}

/// Root of Σ clamp(y_i − λ, lo_i, hi_i) = budget by bisection to `tol` width.
pub fn bisection_lambda(y: &[f64], lo: &[f64], hi: &[f64], budget: f64, tol: f64) -> f64 {
    let phi = |l: f64| -> f64 {
        (0..y.len())
            .map(|i| (y[i] - l).clamp(lo[i], hi[i]))
            .sum::<f64>()
            - budget
    };
    let mut a = (0..y.len()).map(|i| y[i] - hi[i]).fold(f64::INFINITY, f64::min) - 1.0;
    let mut b = (0..y.len()).map(|i| y[i] - lo[i]).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if phi(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// A feasible instance: heterogeneous bounds, budget strictly inside
/// [Σ lo, Σ hi], proposal spread around and beyond the bounds.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let lo: Vec<f64> = (0..n).map(|_| rng.random_range(2.0..20.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(1.0..50.0)).collect();
    let (sl, sh): (f64, f64) = (lo.iter().sum(), hi.iter().sum());
    let budget = sl + rng.random_range(0.02..0.98) * (sh - sl);
    let y: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| rng.random_range(l - 30.0..h + 30.0))
        .collect();
    (y, lo, hi, budget)
}
