//! Closed-form expected errors, budget-constrained parameter search, and
//! asymptotic bounds for harmonic singular-value profiles.
//!
//! All error expressions are expectations over the input `b` (zero mean,
//! covariance `σ_b² I`) and over the write noise, measured against the exact
//! full-matrix product `b A`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::DeviceParams;
use crate::schemes::NoiseSpec;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.5772156649015329;

/// Expected squared error of the baseline one-shot scheme: `m n σ_e² σ_b²`.
pub fn baseline_error_analytic(m: usize, n: usize, sigma_e_sq: f64, sigma_b_sq: f64) -> f64 {
    m as f64 * n as f64 * sigma_e_sq * sigma_b_sq
}

/// The four additive components of the two-step expected error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    /// `σ_b² Σ_{i>k} σ_i²`
    pub truncation: f64,
    /// `σ_b² (m σ_L² / t_L) Tr(Σ_k)`
    pub stage1_noise: f64,
    /// `σ_b² (n σ_R² / t_R) Tr(Σ_k)`
    pub stage2_noise: f64,
    /// `σ_b² m k n σ_L² σ_R² / (t_L t_R)`
    pub accumulated: f64,
    pub total: f64,
}

impl ErrorBreakdown {
    fn from_terms(truncation: f64, stage1_noise: f64, stage2_noise: f64, accumulated: f64) -> Self {
        Self {
            truncation,
            stage1_noise,
            stage2_noise,
            accumulated,
            total: truncation + stage1_noise + stage2_noise + accumulated,
        }
    }
}

/// Compensated (Neumaier) sum.
pub(crate) fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Expected squared error of the two-step scheme for singular values
/// `singulars` (descending), rank `k` and repetitions `(t_L, t_R)`.
///
/// `k` may exceed `singulars.len()` (up to `min(m, n)`); missing singular
/// values are treated as zero.
#[allow(clippy::too_many_arguments)]
pub fn two_step_error_analytic(
    singulars: &[f64],
    m: usize,
    n: usize,
    k: usize,
    t_l: usize,
    t_r: usize,
    noise: &NoiseSpec,
    sigma_b_sq: f64,
) -> Result<ErrorBreakdown> {
    if t_l == 0 || t_r == 0 {
        return Err(invalid("repetition counts t_L and t_R must be at least 1"));
    }
    if m == 0 || n == 0 {
        return Err(invalid("m and n must be positive"));
    }
    if k == 0 || k > m.min(n) {
        return Err(invalid(format!("k = {k} must lie in [1, min(m, n) = {}]", m.min(n))));
    }
    check_positive("sigma_b_sq", sigma_b_sq)?;

    let split = k.min(singulars.len());
    let trace = neumaier_sum(singulars[..split].iter().copied());
    let tail = neumaier_sum(singulars[split..].iter().rev().map(|s| s * s));

    let (mf, nf, kf) = (m as f64, n as f64, k as f64);
    let (tl, tr) = (t_l as f64, t_r as f64);
    let (sl, sr) = (noise.sigma_l_sq, noise.sigma_r_sq);
    Ok(ErrorBreakdown::from_terms(
        sigma_b_sq * tail,
        sigma_b_sq * (mf * sl / tl) * trace,
        sigma_b_sq * (nf * sr / tr) * trace,
        sigma_b_sq * mf * kf * nf * sl * sr / (tl * tr),
    ))
}

/// Memristor budget: `t_L m k + t_R n k ≤ m n`.
pub fn budget_feasible(m: usize, n: usize, k: usize, t_l: usize, t_r: usize) -> bool {
    let (m, n, k, t_l, t_r) = (m as u128, n as u128, k as u128, t_l as u128, t_r as u128);
    t_l * m * k + t_r * n * k <= m * n
}

/// Largest `t_L` that still leaves room for one `R` array.
fn max_t_l(m: usize, n: usize, k: usize) -> usize {
    let (m, n, k) = (m as u128, n as u128, k as u128);
    ((m * n).saturating_sub(n * k) / (m * k)) as usize
}

/// Largest `t_R` fitting next to `t_L` copies of `L`.
fn max_t_r(m: usize, n: usize, k: usize, t_l: usize) -> usize {
    let (m, n, k, t_l) = (m as u128, n as u128, k as u128, t_l as u128);
    ((m * n).saturating_sub(t_l * m * k) / (n * k)) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionChoice {
    pub t_l: usize,
    pub t_r: usize,
    pub breakdown: ErrorBreakdown,
}

/// Integer `(t_L, t_R)` minimizing the two-step expected error under the
/// memristor budget.
///
/// Enumerates every feasible `t_L`; for each, `t_R` is filled greedily to the
/// remaining budget, since the error is nonincreasing in `t_R`. Ties go to the
/// smaller `t_L`, then the smaller `t_R`.
pub fn optimize_repetitions(
    singulars: &[f64],
    m: usize,
    n: usize,
    k: usize,
    noise: &NoiseSpec,
    sigma_b_sq: f64,
) -> Result<RepetitionChoice> {
    if m == 0 || n == 0 || k == 0 {
        return Err(invalid("m, n and k must be positive"));
    }
    if !budget_feasible(m, n, k, 1, 1) {
        return Err(Error::Infeasible(format!(
            "rank k = {k} needs m*k + n*k = {} memristors, budget is m*n = {}",
            m * k + n * k,
            m * n
        )));
    }
    let eval = |t_l, t_r| two_step_error_analytic(singulars, m, n, k, t_l, t_r, noise, sigma_b_sq);

    let mut best: Option<RepetitionChoice> = None;
    for t_l in 1..=max_t_l(m, n, k) {
        let mut t_r = max_t_r(m, n, k, t_l);
        let mut breakdown = eval(t_l, t_r)?;
        // A flat tail (e.g. σ_R² = 0) would otherwise spend budget for nothing.
        while t_r > 1 {
            let smaller = eval(t_l, t_r - 1)?;
            if smaller.total > breakdown.total {
                break;
            }
            t_r -= 1;
            breakdown = smaller;
        }
        if best.is_none_or(|b| breakdown.total < b.breakdown.total) {
            best = Some(RepetitionChoice { t_l, t_r, breakdown });
        }
    }
    Ok(best.expect("t_L = 1 is always feasible here"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankChoice {
    pub k: usize,
    pub t_l: usize,
    pub t_r: usize,
    pub breakdown: ErrorBreakdown,
}

/// Rank `k ∈ [1, k_max]` (with optimized repetitions) minimizing the total
/// expected error. Infeasible ranks are skipped; ties go to the smaller `k`.
pub fn optimize_rank(
    singulars: &[f64],
    m: usize,
    n: usize,
    noise: &NoiseSpec,
    sigma_b_sq: f64,
    k_max: usize,
) -> Result<RankChoice> {
    if k_max == 0 || k_max > m.min(n) {
        return Err(invalid(format!("k_max = {k_max} must lie in [1, min(m, n) = {}]", m.min(n))));
    }
    let mut best: Option<RankChoice> = None;
    for k in 1..=k_max {
        let choice = match optimize_repetitions(singulars, m, n, k, noise, sigma_b_sq) {
            Ok(c) => c,
            Err(Error::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|b| choice.breakdown.total < b.breakdown.total) {
            best = Some(RankChoice { k, t_l: choice.t_l, t_r: choice.t_r, breakdown: choice.breakdown });
        }
    }
    best.ok_or_else(|| Error::Infeasible(format!("no rank in [1, {k_max}] fits the {m}x{n} budget")))
}

/// An exact quantity together with its closed-form upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub exact: f64,
    pub bound: f64,
}

/// `Σ_{i≤k} λ/i` and its bound `λ (ln k + γ + 1/(2k))`.
pub fn harmonic_trace(lambda: f64, k: usize) -> Result<BoundPair> {
    check_positive("lambda", lambda)?;
    if k == 0 {
        return Err(invalid("harmonic_trace needs k >= 1"));
    }
    let exact = lambda * neumaier_sum((1..=k).rev().map(|i| 1.0 / i as f64));
    let kf = k as f64;
    let bound = lambda * (kf.ln() + EULER_GAMMA + 1.0 / (2.0 * kf));
    Ok(BoundPair { exact, bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub exact: f64,
    /// `None` for `k = 0`, where the integral bound is undefined.
    pub bound: Option<f64>,
}

/// `Σ_{i=k+1}^{r} (λ/i)²` and its bound `λ² (1/k − 1/r)`.
pub fn tail_bound(lambda: f64, k: usize, r: usize) -> Result<TailBound> {
    check_positive("lambda", lambda)?;
    if k > r {
        return Err(invalid(format!("tail_bound needs k <= r, got k = {k}, r = {r}")));
    }
    let l2 = lambda * lambda;
    let exact = l2
        * neumaier_sum((k + 1..=r).rev().map(|i| {
            let x = 1.0 / i as f64;
            x * x
        }));
    let bound = (k > 0).then(|| if k == r { 0.0 } else { l2 * (1.0 / k as f64 - 1.0 / r as f64) });
    Ok(TailBound { exact, bound })
}

/// Scaling parameters for `r = c₂ n^α` and `k = c₁ r^β` on a harmonic profile `σ_i = λ/i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    pub alpha: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
}

impl AsymptoticParams {
    pub fn new(alpha: f64, beta: f64, c1: f64, c2: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("c1", c1), ("c2", c2)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        check_positive("lambda", lambda)?;
        Ok(Self { alpha, beta, c1, c2, lambda })
    }

    /// Real-valued `r = c₂ n^α`.
    pub fn rank_at(&self, n: usize) -> f64 {
        self.c2 * (n as f64).powf(self.alpha)
    }

    /// Real-valued `k = c₁ c₂^β n^{αβ}`.
    pub fn approx_rank_at(&self, n: usize) -> f64 {
        self.c1 * self.rank_at(n).powf(self.beta)
    }
}

/// The three groups of the asymptotic error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticTerms {
    pub truncation: f64,
    /// Both single-stage noise terms, carrying the `ln n` factor.
    pub stage: f64,
    pub accumulated: f64,
}

impl AsymptoticTerms {
    pub fn total(&self) -> f64 {
        self.truncation + self.stage + self.accumulated
    }
}

/// Term-by-term evaluation of the asymptotic bound for `m = n`, with real
/// (unfloored) `r` and `k`.
pub fn asymptotic_terms(
    n: usize,
    p: &AsymptoticParams,
    sigma_l_sq: f64,
    sigma_r_sq: f64,
    sigma_b_sq: f64,
) -> AsymptoticTerms {
    let nf = n as f64;
    let ab = p.alpha * p.beta;
    let k = p.c1 * p.c2.powf(p.beta) * nf.powf(ab);
    let r = p.c2 * nf.powf(p.alpha);
    let truncation = sigma_b_sq * p.lambda * p.lambda * (1.0 / k - 1.0 / r);
    let stage =
        sigma_b_sq * 4.0 * k * p.lambda * (sigma_l_sq + sigma_r_sq) * (ab * nf.ln() + 1.0 / (2.0 * k) + EULER_GAMMA);
    let accumulated = sigma_b_sq * 4.0 * k.powi(3) * sigma_l_sq * sigma_r_sq;
    AsymptoticTerms { truncation, stage, accumulated }
}

/// Asymptotic upper bound on the two-step error for a harmonic profile.
pub fn asymptotic_bound(n: usize, p: &AsymptoticParams, sigma_l_sq: f64, sigma_r_sq: f64, sigma_b_sq: f64) -> f64 {
    asymptotic_terms(n, p, sigma_l_sq, sigma_r_sq, sigma_b_sq).total()
}

/// Optimal rank exponent `β* = min(1, 1/(2α))` and the resulting error
/// growth exponent (`2 − α` below `α = 1/2`, `3/2` from there on).
pub fn optimal_beta(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let beta = (1.0 / (2.0 * alpha)).min(1.0);
    let exponent = if alpha < 0.5 { 2.0 - alpha } else { 1.5 };
    Ok((beta, exponent))
}

/// Largest harmonic scale `λ` whose matrices satisfy the magnitude
/// constraint for any rank: `√(6 m n ρ) / (π r_T)`.
pub fn lambda_max(m: usize, n: usize, dev: &DeviceParams) -> f64 {
    (6.0 * m as f64 * n as f64 * dev.rho()).sqrt() / (PI * dev.r_t())
}
