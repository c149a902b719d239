//! The two noisy computation schemes: one-shot baseline VMM and the
//! two-step low-rank VMM with per-stage repetition averaging.

use serde::{Deserialize, Serialize};

use crate::analysis::budget_feasible;
use crate::error::{invalid, Error, Result};
use crate::lowrank::LrFactors;
use crate::matrix::{DenseMatrix, RowVector};
use crate::rng::{Distribution, RandomStream};

/// Write-noise variances for the baseline array and for the `L` and `R` arrays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_e_sq: f64,
    pub sigma_l_sq: f64,
    pub sigma_r_sq: f64,
    pub dist: Distribution,
}

impl NoiseSpec {
    pub fn new(sigma_e_sq: f64, sigma_l_sq: f64, sigma_r_sq: f64, dist: Distribution) -> Result<Self> {
        for (name, v) in [("sigma_e_sq", sigma_e_sq), ("sigma_L_sq", sigma_l_sq), ("sigma_R_sq", sigma_r_sq)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be a nonnegative finite variance, got {v}")));
            }
        }
        Ok(Self { sigma_e_sq, sigma_l_sq, sigma_r_sq, dist })
    }

    /// Same variance on every array.
    pub fn uniform_variance(sigma_sq: f64, dist: Distribution) -> Result<Self> {
        Self::new(sigma_sq, sigma_sq, sigma_sq, dist)
    }

    pub fn noiseless() -> Self {
        Self { sigma_e_sq: 0.0, sigma_l_sq: 0.0, sigma_r_sq: 0.0, dist: Distribution::Gaussian }
    }
}

/// Full parameter set of one two-step execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    m: usize,
    n: usize,
    k: usize,
    t_l: usize,
    t_r: usize,
    noise: NoiseSpec,
    sigma_b_sq: f64,
}

impl SchemeConfig {
    pub fn new(
        m: usize,
        n: usize,
        k: usize,
        t_l: usize,
        t_r: usize,
        noise: NoiseSpec,
        sigma_b_sq: f64,
    ) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(invalid("m and n must be positive"));
        }
        if k == 0 || k > m.min(n) {
            return Err(invalid(format!("k = {k} must lie in [1, min(m, n) = {}]", m.min(n))));
        }
        if t_l == 0 || t_r == 0 {
            return Err(invalid("repetition counts t_L and t_R must be at least 1"));
        }
        if !(sigma_b_sq.is_finite() && sigma_b_sq > 0.0) {
            return Err(invalid(format!("sigma_b_sq must be positive, got {sigma_b_sq}")));
        }
        if !budget_feasible(m, n, k, t_l, t_r) {
            return Err(Error::Infeasible(format!(
                "t_L*m*k + t_R*n*k = {} exceeds m*n = {}",
                t_l * m * k + t_r * n * k,
                m * n
            )));
        }
        Ok(Self { m, n, k, t_l, t_r, noise, sigma_b_sq })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn t_l(&self) -> usize {
        self.t_l
    }
    pub fn t_r(&self) -> usize {
        self.t_r
    }
    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }
    pub fn sigma_b_sq(&self) -> f64 {
        self.sigma_b_sq
    }
}

/// i.i.d. zero-mean write-noise realization. A zero variance returns the
/// zero matrix without touching `rng`.
pub fn sample_noise(
    rows: usize,
    cols: usize,
    sigma_sq: f64,
    dist: Distribution,
    rng: &mut RandomStream,
) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(invalid("noise matrix dimensions must be positive"));
    }
    if !(sigma_sq.is_finite() && sigma_sq >= 0.0) {
        return Err(invalid(format!("noise variance must be nonnegative, got {sigma_sq}")));
    }
    let mut data = vec![0.0; rows * cols];
    if sigma_sq > 0.0 {
        rng.fill_zero_mean(&mut data, sigma_sq, dist);
    }
    Ok(DenseMatrix::from_vec_unchecked(rows, cols, data))
}

fn check_input(op: &'static str, b: &RowVector, rows: usize) -> Result<()> {
    if b.len() != rows {
        return Err(Error::DimensionMismatch {
            op,
            expected: format!("input of length {rows}"),
            found: format!("length {}", b.len()),
        });
    }
    Ok(())
}

/// One-shot noisy product `b (A + E)` with a fresh `E` of variance `σ_e²`.
pub fn baseline_noisy_vmm(
    b: &RowVector,
    a: &DenseMatrix,
    noise: &NoiseSpec,
    rng: &mut RandomStream,
) -> Result<RowVector> {
    check_input("baseline_noisy_vmm", b, a.rows())?;
    let mut scratch = vec![0.0; a.cols()];
    let mut out = vec![0.0; a.cols()];
    noisy_product_into(b.as_slice(), a, noise.sigma_e_sq, noise.dist, rng, &mut scratch, &mut out, None);
    Ok(RowVector::from_vec_unchecked(out))
}

/// Accumulates `x (W + E)` into `out`, drawing `E` row by row into `scratch`.
/// When `noise_sum` is given, the realization of `E` is added into it.
#[allow(clippy::too_many_arguments)]
fn noisy_product_into(
    x: &[f64],
    w: &DenseMatrix,
    sigma_sq: f64,
    dist: Distribution,
    rng: &mut RandomStream,
    scratch: &mut [f64],
    out: &mut [f64],
    mut noise_sum: Option<&mut [f64]>,
) {
    let cols = w.cols();
    for (j, &xj) in x.iter().enumerate() {
        let row = w.row(j);
        if sigma_sq > 0.0 {
            rng.fill_zero_mean(scratch, sigma_sq, dist);
            for ((o, &wv), &e) in out.iter_mut().zip(row).zip(scratch.iter()) {
                *o += xj * (wv + e);
            }
            if let Some(sum) = noise_sum.as_deref_mut() {
                for (s, &e) in sum[j * cols..(j + 1) * cols].iter_mut().zip(scratch.iter()) {
                    *s += e;
                }
            }
        } else {
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += xj * wv;
            }
        }
    }
}

/// Instrumented two-step output: the result plus the averaged noise
/// matrices `Ē_L` (`m × k`) and `Ē_R` (`k × n`) that produced it.
#[derive(Debug, Clone)]
pub struct TwoStepTrace {
    pub output: RowVector,
    pub mean_noise_l: DenseMatrix,
    pub mean_noise_r: DenseMatrix,
}

/// Two-step averaged product: stage 1 averages `b (L + E_L⁽ⁱ⁾)` over `t_L`
/// arrays, stage 2 averages `c_L (R + E_R⁽ʲ⁾)` over `t_R` arrays. Every
/// array gets its own fresh noise realization.
pub fn two_step_vmm(
    b: &RowVector,
    f: &LrFactors,
    t_l: usize,
    t_r: usize,
    noise: &NoiseSpec,
    rng: &mut RandomStream,
) -> Result<RowVector> {
    two_step_impl(b, f, t_l, t_r, noise, rng, false).map(|(out, _)| out)
}

/// [`two_step_vmm`] that also returns the averaged noise matrices, for
/// splitting the error into its per-source terms.
pub fn two_step_vmm_traced(
    b: &RowVector,
    f: &LrFactors,
    t_l: usize,
    t_r: usize,
    noise: &NoiseSpec,
    rng: &mut RandomStream,
) -> Result<TwoStepTrace> {
    let (output, means) = two_step_impl(b, f, t_l, t_r, noise, rng, true)?;
    let (mean_noise_l, mean_noise_r) = means.expect("tracing requested");
    Ok(TwoStepTrace { output, mean_noise_l, mean_noise_r })
}

fn two_step_impl(
    b: &RowVector,
    f: &LrFactors,
    t_l: usize,
    t_r: usize,
    noise: &NoiseSpec,
    rng: &mut RandomStream,
    trace: bool,
) -> Result<(RowVector, Option<(DenseMatrix, DenseMatrix)>)> {
    check_input("two_step_vmm", b, f.m())?;
    if t_l == 0 || t_r == 0 {
        return Err(invalid("repetition counts t_L and t_R must be at least 1"));
    }
    let (m, k, n) = (f.m(), f.k(), f.n());

    let mut sum_l = trace.then(|| vec![0.0; m * k]);
    let mut scratch = vec![0.0; k];
    let mut stage1 = vec![0.0; k];
    for _ in 0..t_l {
        noisy_product_into(
            b.as_slice(),
            f.l(),
            noise.sigma_l_sq,
            noise.dist,
            rng,
            &mut scratch,
            &mut stage1,
            sum_l.as_deref_mut(),
        );
    }
    let inv = 1.0 / t_l as f64;
    stage1.iter_mut().for_each(|x| *x *= inv);

    let mut sum_r = trace.then(|| vec![0.0; k * n]);
    let mut scratch = vec![0.0; n];
    let mut stage2 = vec![0.0; n];
    for _ in 0..t_r {
        noisy_product_into(
            &stage1,
            f.r(),
            noise.sigma_r_sq,
            noise.dist,
            rng,
            &mut scratch,
            &mut stage2,
            sum_r.as_deref_mut(),
        );
    }
    let inv = 1.0 / t_r as f64;
    stage2.iter_mut().for_each(|x| *x *= inv);

    let means = match (sum_l, sum_r) {
        (Some(sl), Some(sr)) => {
            let il = 1.0 / t_l as f64;
            let ir = 1.0 / t_r as f64;
            Some((
                DenseMatrix::from_vec_unchecked(m, k, sl.into_iter().map(|x| x * il).collect()),
                DenseMatrix::from_vec_unchecked(k, n, sr.into_iter().map(|x| x * ir).collect()),
            ))
        }
        _ => None,
    };
    Ok((RowVector::from_vec_unchecked(stage2), means))
}
