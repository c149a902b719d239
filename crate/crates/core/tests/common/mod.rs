#![allow(dead_code)]

//! Reference computations written independently of the library.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const GAMMA: f64 = 0.5772156649015329;

/// Kahan–Babuska sum.
pub fn ksum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + c
}

/// `[truncation, stage1, stage2, accumulated]` of the two-step expected error.
#[allow(clippy::too_many_arguments)]
pub fn two_step_terms(
    sing: &[f64],
    m: usize,
    n: usize,
    k: usize,
    t_l: usize,
    t_r: usize,
    sl: f64,
    sr: f64,
    sb: f64,
) -> [f64; 4] {
    let kk = k.min(sing.len());
    let trace: f64 = sing[..kk].iter().sum();
    let tail: f64 = sing[kk..].iter().map(|s| s * s).sum();
    let (m, n, k, t_l, t_r) = (m as f64, n as f64, k as f64, t_l as f64, t_r as f64);
    [sb * tail, sb * m * sl * trace / t_l, sb * n * sr * trace / t_r, sb * m * k * n * sl * sr / (t_l * t_r)]
}

pub fn baseline(m: usize, n: usize, se: f64, sb: f64) -> f64 {
    (m * n) as f64 * se * sb
}

pub fn fits_budget(m: usize, n: usize, k: usize, t_l: usize, t_r: usize) -> bool {
    t_l * m * k + t_r * n * k <= m * n
}

pub fn harmonic(lambda: f64, r: usize) -> Vec<f64> {
    (1..=r).map(|i| lambda / i as f64).collect()
}

/// Least-squares slope and intercept of `ln y` against `ln x`.
pub fn loglog_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Nonincreasing positive profile of length `r`.
pub fn random_profile(rng: &mut ChaCha8Rng, r: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..r).map(|_| rng.random_range(0.2..3.0)).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Random rank `k` with `m k + n k ≤ m n`, or `None` when even `k = 1` does not fit.
pub fn random_feasible_rank(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> Option<usize> {
    let k_cap = (1..=r).take_while(|&k| fits_budget(m, n, k, 1, 1)).last()?;
    Some(rng.random_range(1..=k_cap))
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
