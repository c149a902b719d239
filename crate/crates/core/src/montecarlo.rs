//! Reproducible Monte Carlo estimation of expected computation errors.
//!
//! Every trial owns private random streams derived from
//! `(master_seed, trial_index, role)`, per-trial results land in a
//! trial-indexed buffer, and the reduction is a sequential sum in index
//! order. Results are therefore bit-identical for any number of lanes.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lowrank::LrFactors;
use crate::matrix::{vmm_slice, DenseMatrix, RowVector};
use crate::rng::{role, sample_input, RandomStream};
use crate::schemes::{baseline_noisy_vmm, two_step_vmm, two_step_vmm_traced, NoiseSpec, SchemeConfig};

/// Pass threshold on `|z|`.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeLabel {
    Baseline,
    TwoStep,
}

impl fmt::Display for SchemeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeLabel::Baseline => "baseline",
            SchemeLabel::TwoStep => "two_step",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialBatchResult {
    pub trials: usize,
    pub mean_sq_error: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    pub master_seed: u64,
    pub scheme_label: SchemeLabel,
}

/// How many trials to run, from which seed, on how many threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialPlan {
    pub trials: usize,
    pub master_seed: u64,
    /// `None` uses the ambient rayon pool.
    pub lanes: Option<usize>,
}

impl TrialPlan {
    pub fn new(trials: usize, master_seed: u64) -> Self {
        Self { trials, master_seed, lanes: None }
    }

    pub fn with_lanes(mut self, lanes: usize) -> Self {
        self.lanes = Some(lanes);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(invalid(format!("at least 2 trials are needed for a standard error, got {}", self.trials)));
        }
        if self.lanes == Some(0) {
            return Err(invalid("lane count must be positive"));
        }
        Ok(())
    }
}

/// Runs `trial(index)` for every index and returns the results in index order.
fn run_indexed<T, F>(plan: &TrialPlan, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    plan.validate()?;
    let work = || -> Result<Vec<T>> { (0..plan.trials as u64).into_par_iter().map(&trial).collect() };
    match plan.lanes {
        None => work(),
        Some(lanes) => rayon::ThreadPoolBuilder::new()
            .num_threads(lanes)
            .build()
            .map_err(|e| Error::NumericalFailure(format!("could not start {lanes} worker threads: {e}")))?
            .install(work),
    }
}

fn summarize(
    values: impl ExactSizeIterator<Item = f64> + Clone,
    plan: &TrialPlan,
    label: SchemeLabel,
) -> TrialBatchResult {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    TrialBatchResult {
        trials: plan.trials,
        mean_sq_error: mean,
        std_error: (var / n).sqrt(),
        master_seed: plan.master_seed,
        scheme_label: label,
    }
}

fn check_sigma_b(sigma_b_sq: f64) -> Result<()> {
    if sigma_b_sq.is_finite() && sigma_b_sq > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("sigma_b_sq must be positive, got {sigma_b_sq}")))
    }
}

/// Monte Carlo estimate of `E‖b (A + E) − b A‖²` for the baseline scheme.
/// Inputs are drawn from the same distribution family as the noise.
pub fn run_baseline_trials(
    a: &DenseMatrix,
    noise: &NoiseSpec,
    sigma_b_sq: f64,
    plan: &TrialPlan,
) -> Result<TrialBatchResult> {
    check_sigma_b(sigma_b_sq)?;
    let values = run_indexed(plan, |t| {
        let mut input_rng = RandomStream::child(plan.master_seed, t, role::INPUT);
        let mut noise_rng = RandomStream::child(plan.master_seed, t, role::NOISE);
        let b = sample_input(a.rows(), sigma_b_sq, noise.dist, &mut input_rng)?;
        let exact = RowVector::from_vec_unchecked(vmm_slice(b.as_slice(), a));
        let noisy = baseline_noisy_vmm(&b, a, noise, &mut noise_rng)?;
        Ok(noisy.distance_sq(&exact))
    })?;
    Ok(summarize(values.iter().copied(), plan, SchemeLabel::Baseline))
}

fn check_two_step_shapes(f: &LrFactors, a: &DenseMatrix, cfg: &SchemeConfig) -> Result<()> {
    let want = (cfg.m(), cfg.k(), cfg.n());
    let factors = (f.m(), f.k(), f.n());
    if factors != want || a.shape() != (cfg.m(), cfg.n()) {
        return Err(Error::DimensionMismatch {
            op: "run_two_step_trials",
            expected: format!("A {}x{}, L {}x{}, R {}x{}", want.0, want.2, want.0, want.1, want.1, want.2),
            found: format!("A {}x{}, L {}x{}, R {}x{}", a.rows(), a.cols(), f.m(), f.k(), f.k(), f.n()),
        });
    }
    Ok(())
}

/// Monte Carlo estimate of `E‖c'' − b A‖²` for the two-step scheme, where the
/// reference is always the full matrix `A`, never its truncation.
pub fn run_two_step_trials(
    f: &LrFactors,
    a: &DenseMatrix,
    cfg: &SchemeConfig,
    plan: &TrialPlan,
) -> Result<TrialBatchResult> {
    check_two_step_shapes(f, a, cfg)?;
    let noise = cfg.noise();
    let values = run_indexed(plan, |t| {
        let mut input_rng = RandomStream::child(plan.master_seed, t, role::INPUT);
        let mut noise_rng = RandomStream::child(plan.master_seed, t, role::NOISE);
        let b = sample_input(cfg.m(), cfg.sigma_b_sq(), noise.dist, &mut input_rng)?;
        let exact = RowVector::from_vec_unchecked(vmm_slice(b.as_slice(), a));
        let out = two_step_vmm(&b, f, cfg.t_l(), cfg.t_r(), noise, &mut noise_rng)?;
        Ok(out.distance_sq(&exact))
    })?;
    Ok(summarize(values.iter().copied(), plan, SchemeLabel::TwoStep))
}

/// Per-source split of the two-step error, each estimated from the same
/// trials. With `Ē_L`, `Ē_R` the averaged noise of each stage:
/// `c₁ = b (A_k − A)`, `c₂ = b Ē_L R`, `c₃ = b L Ē_R`, `c₄ = b Ē_L Ē_R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentBatch {
    pub total: TrialBatchResult,
    pub truncation: TrialBatchResult,
    pub stage1_noise: TrialBatchResult,
    pub stage2_noise: TrialBatchResult,
    pub accumulated: TrialBatchResult,
    /// `⟨c₂, c₃⟩`, which has zero expectation.
    pub stage_cross: TrialBatchResult,
}

/// Instrumented two-step run that records every error term per trial.
pub fn run_two_step_components(
    f: &LrFactors,
    a: &DenseMatrix,
    cfg: &SchemeConfig,
    plan: &TrialPlan,
) -> Result<ComponentBatch> {
    check_two_step_shapes(f, a, cfg)?;
    let noise = cfg.noise();
    let residual = f.product().sub(a)?;
    let values = run_indexed(plan, |t| {
        let mut input_rng = RandomStream::child(plan.master_seed, t, role::INPUT);
        let mut noise_rng = RandomStream::child(plan.master_seed, t, role::NOISE);
        let b = sample_input(cfg.m(), cfg.sigma_b_sq(), noise.dist, &mut input_rng)?;
        let bs = b.as_slice();
        let exact = RowVector::from_vec_unchecked(vmm_slice(bs, a));
        let tr = two_step_vmm_traced(&b, f, cfg.t_l(), cfg.t_r(), noise, &mut noise_rng)?;

        let c1 = vmm_slice(bs, &residual);
        let b_el = vmm_slice(bs, &tr.mean_noise_l);
        let c2 = vmm_slice(&b_el, f.r());
        let c3 = vmm_slice(&vmm_slice(bs, f.l()), &tr.mean_noise_r);
        let c4 = vmm_slice(&b_el, &tr.mean_noise_r);
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        let cross = c2.iter().zip(&c3).map(|(x, y)| x * y).sum::<f64>();
        Ok([tr.output.distance_sq(&exact), sq(&c1), sq(&c2), sq(&c3), sq(&c4), cross])
    })?;
    let col = |i: usize| summarize(values.iter().map(move |v| v[i]), plan, SchemeLabel::TwoStep);
    Ok(ComponentBatch {
        total: col(0),
        truncation: col(1),
        stage1_noise: col(2),
        stage2_noise: col(3),
        accumulated: col(4),
        stage_cross: col(5),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `(mean − analytic) / std_error`.
    pub z: f64,
    pub pass: bool,
    pub diagnostic: Option<String>,
}

/// z-score of a Monte Carlo estimate against an analytic value; passes when
/// `|z| ≤ 4`, or on an exact match when the standard error is zero.
pub fn compare(result: &TrialBatchResult, analytic: f64) -> Comparison {
    let diff = result.mean_sq_error - analytic;
    if result.std_error > 0.0 {
        let z = diff / result.std_error;
        return Comparison { z, pass: z.abs() <= Z_THRESHOLD, diagnostic: None };
    }
    if diff == 0.0 {
        Comparison { z: 0.0, pass: true, diagnostic: None }
    } else {
        Comparison {
            z: f64::INFINITY.copysign(diff),
            pass: false,
            diagnostic: Some(format!(
                "zero standard error but mean {} differs from analytic {analytic}",
                result.mean_sq_error
            )),
        }
    }
}
