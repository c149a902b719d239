//! Experiment drivers behind the command-line tool: rank sweeps, scaling
//! studies, matrix generation/validation and single-configuration Monte
//! Carlo checks, plus their CSV/JSON renderings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    asymptotic_bound, baseline_error_analytic, lambda_max, optimal_beta, optimize_rank, optimize_repetitions,
    two_step_error_analytic, AsymptoticParams, ErrorBreakdown,
};
use crate::config::{BetaSpec, ExperimentConfig};
use crate::error::{invalid, Error, Result};
use crate::lowrank::{factor_lr, svd, SvdResult};
use crate::matrix::{magnitude_check, DenseMatrix, DeviceParams, MagnitudeCheck};
use crate::matrixgen::harmonic_matrix;
use crate::montecarlo::{compare, run_baseline_trials, run_two_step_trials, Comparison, TrialBatchResult, TrialPlan};
use crate::rng::{child_seed, role, RandomStream};
use crate::schemes::SchemeConfig;

pub const SWEEP_SCHEMA: &str = "crossbar-lowrank sweep v1";
pub const SCALING_SCHEMA: &str = "crossbar-lowrank scaling v1";
pub const MC_SCHEMA: &str = "crossbar-lowrank mc v1";

/// Seed tag for per-rank Monte Carlo batches in a sweep.
const SWEEP_ROLE: u64 = 0x10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(invalid(format!("unknown format {other:?} (expected csv|json)"))),
        }
    }
}

/// The harmonic target matrix for a config: rank `r`, `σ_i = λ/i`, with
/// factors drawn from the config seed.
pub fn generate_target(cfg: &ExperimentConfig) -> Result<DenseMatrix> {
    let lambda = cfg.resolved_lambda()?;
    let mut rng = RandomStream::child(cfg.master_seed, 0, role::MATRIX);
    harmonic_matrix(cfg.m, cfg.n, cfg.r, lambda, &mut rng)
}

fn rank_singulars(s: &SvdResult) -> &[f64] {
    &s.singulars()[..s.rank()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub t_l: Option<usize>,
    pub t_r: Option<usize>,
    pub feasible: bool,
    pub analytic_total: Option<f64>,
    pub analytic_truncation: Option<f64>,
    pub analytic_stage1: Option<f64>,
    pub analytic_stage2: Option<f64>,
    pub analytic_accumulated: Option<f64>,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub baseline_analytic: f64,
    pub normalized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub k: usize,
    pub t_l: usize,
    pub t_r: usize,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub rows: Vec<SweepRow>,
    pub argmin: Option<SweepSummary>,
}

/// For each rank: optimize repetitions, evaluate the closed form and (when
/// `trials > 0`) estimate the same error by Monte Carlo.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let noise = cfg.noise()?;
    let a = generate_target(cfg)?;
    let s = svd(&a)?;
    let singulars = rank_singulars(&s);
    let baseline = baseline_error_analytic(cfg.m, cfg.n, cfg.sigma_e_sq, cfg.sigma_b_sq);

    let rows = cfg
        .ks()
        .into_par_iter()
        .map(|k| -> Result<SweepRow> {
            let mut row = SweepRow {
                k,
                t_l: None,
                t_r: None,
                feasible: false,
                analytic_total: None,
                analytic_truncation: None,
                analytic_stage1: None,
                analytic_stage2: None,
                analytic_accumulated: None,
                mc_mean: None,
                mc_stderr: None,
                baseline_analytic: baseline,
                normalized: None,
            };
            let choice = match optimize_repetitions(singulars, cfg.m, cfg.n, k, &noise, cfg.sigma_b_sq) {
                Ok(c) => c,
                Err(Error::Infeasible(_)) => return Ok(row),
                Err(e) => return Err(e),
            };
            let b = choice.breakdown;
            row.feasible = true;
            row.t_l = Some(choice.t_l);
            row.t_r = Some(choice.t_r);
            row.analytic_total = Some(b.total);
            row.analytic_truncation = Some(b.truncation);
            row.analytic_stage1 = Some(b.stage1_noise);
            row.analytic_stage2 = Some(b.stage2_noise);
            row.analytic_accumulated = Some(b.accumulated);
            row.normalized = Some(b.total / baseline);
            if cfg.trials > 0 {
                let f = factor_lr(&s, k)?;
                let scheme = SchemeConfig::new(cfg.m, cfg.n, k, choice.t_l, choice.t_r, noise, cfg.sigma_b_sq)?;
                let plan = TrialPlan::new(cfg.trials, child_seed(cfg.master_seed, k as u64, SWEEP_ROLE));
                let mc = run_two_step_trials(&f, &a, &scheme, &plan)?;
                row.mc_mean = Some(mc.mean_sq_error);
                row.mc_stderr = Some(mc.std_error);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let argmin = rows
        .iter()
        .filter_map(|r| Some((r, r.normalized?)))
        .fold(None::<(&SweepRow, f64)>, |best, (r, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((r, v)),
        })
        .map(|(r, v)| SweepSummary { k: r.k, t_l: r.t_l.unwrap_or(0), t_r: r.t_r.unwrap_or(0), normalized: v });

    Ok(SweepReport { schema: SWEEP_SCHEMA.into(), rows, argmin })
}

/// Ordinary least-squares fit of `ln y` against `ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(invalid("slope fit needs at least two points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(invalid("slope fit needs positive finite coordinates"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let len = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / len;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("slope fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(SlopeFit { slope, intercept, r_squared })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub r: usize,
    pub k: usize,
    pub t_l: usize,
    pub t_r: usize,
    pub lambda: f64,
    pub analytic_total: f64,
    pub analytic_truncation: f64,
    pub analytic_stage1: f64,
    pub analytic_stage2: f64,
    pub analytic_accumulated: f64,
    pub baseline_analytic: f64,
    pub asymptotic_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub schema: String,
    pub alpha: f64,
    pub beta: f64,
    /// Growth exponent predicted for the optimal rank exponent.
    pub predicted_exponent: f64,
    pub rows: Vec<ScalingRow>,
    pub two_step_fit: SlopeFit,
    pub baseline_fit: SlopeFit,
}

/// Square `n × n` harmonic targets with `r = ⌊c₂ n^α⌋`, `k = max(1, ⌊c₁ r^β⌋)`
/// and `λ` saturating the magnitude constraint; analytic errors only.
pub fn cmd_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    cfg.validate_scaling()?;
    let noise = cfg.noise()?;
    let dev = cfg.device()?;
    let (beta_opt, predicted_exponent) = optimal_beta(cfg.alpha)?;
    let beta = match cfg.beta {
        BetaSpec::Optimal => beta_opt,
        BetaSpec::Value(b) => b,
    };

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let row = scaling_row(n, cfg.alpha, beta, cfg.c1, cfg.c2, &noise, cfg.sigma_b_sq, &dev)?;
        rows.push(row);
    }
    let two_step_fit = fit_loglog_slope(&rows.iter().map(|r| (r.n as f64, r.analytic_total)).collect::<Vec<_>>())?;
    let baseline_fit = fit_loglog_slope(&rows.iter().map(|r| (r.n as f64, r.baseline_analytic)).collect::<Vec<_>>())?;
    Ok(ScalingReport {
        schema: SCALING_SCHEMA.into(),
        alpha: cfg.alpha,
        beta,
        predicted_exponent,
        rows,
        two_step_fit,
        baseline_fit,
    })
}

#[allow(clippy::too_many_arguments)]
fn scaling_row(
    n: usize,
    alpha: f64,
    beta: f64,
    c1: f64,
    c2: f64,
    noise: &crate::schemes::NoiseSpec,
    sigma_b_sq: f64,
    dev: &DeviceParams,
) -> Result<ScalingRow> {
    let lambda = lambda_max(n, n, dev);
    let params = AsymptoticParams::new(alpha, beta, c1, c2, lambda)?;
    let r = (params.rank_at(n).floor() as usize).clamp(1, n);
    let k = ((c1 * (r as f64).powf(beta)).floor() as usize).clamp(1, r);
    let singulars: Vec<f64> = (1..=r).map(|i| lambda / i as f64).collect();
    let choice = optimize_repetitions(&singulars, n, n, k, noise, sigma_b_sq)?;
    let b: ErrorBreakdown = choice.breakdown;
    Ok(ScalingRow {
        n,
        r,
        k,
        t_l: choice.t_l,
        t_r: choice.t_r,
        lambda,
        analytic_total: b.total,
        analytic_truncation: b.truncation,
        analytic_stage1: b.stage1_noise,
        analytic_stage2: b.stage2_noise,
        analytic_accumulated: b.accumulated,
        baseline_analytic: baseline_error_analytic(n, n, noise.sigma_e_sq, sigma_b_sq),
        asymptotic_bound: asymptotic_bound(n, &params, noise.sigma_l_sq, noise.sigma_r_sq, sigma_b_sq),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub singulars: Vec<f64>,
    pub frobenius_sq: f64,
    pub magnitude: MagnitudeReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeReport {
    pub satisfied: bool,
    pub total: f64,
    pub budget: f64,
}

impl From<MagnitudeCheck> for MagnitudeReport {
    fn from(c: MagnitudeCheck) -> Self {
        Self { satisfied: c.satisfied, total: c.total, budget: c.budget }
    }
}

pub fn cmd_validate(a: &DenseMatrix, dev: &DeviceParams) -> Result<ValidationReport> {
    let s = svd(a)?;
    Ok(ValidationReport {
        rows: a.rows(),
        cols: a.cols(),
        rank: s.rank(),
        singulars: s.singulars().to_vec(),
        frobenius_sq: a.frobenius_norm_sq(),
        magnitude: magnitude_check(a, dev).into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub scheme: String,
    pub k: Option<usize>,
    pub t_l: Option<usize>,
    pub t_r: Option<usize>,
    pub trials: usize,
    pub analytic: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub schema: String,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn mc_row(scheme: &str, k: Option<usize>, t: Option<(usize, usize)>, r: &TrialBatchResult, analytic: f64) -> McRow {
    let Comparison { z, pass, .. } = compare(r, analytic);
    McRow {
        scheme: scheme.into(),
        k,
        t_l: t.map(|t| t.0),
        t_r: t.map(|t| t.1),
        trials: r.trials,
        analytic,
        mc_mean: r.mean_sq_error,
        mc_stderr: r.std_error,
        z,
        pass,
    }
}

/// Monte Carlo versus closed form for both schemes on one configuration.
/// Unset `k`, `t_L`, `t_R` are chosen by the analytic optimizer.
pub fn cmd_mc(cfg: &ExperimentConfig, lanes: Option<usize>) -> Result<McReport> {
    cfg.validate()?;
    if cfg.trials < 2 {
        return Err(invalid("mc needs trials >= 2"));
    }
    let noise = cfg.noise()?;
    let a = generate_target(cfg)?;
    let s = svd(&a)?;
    let singulars = rank_singulars(&s);

    let k = match cfg.k {
        Some(k) => k,
        None => optimize_rank(singulars, cfg.m, cfg.n, &noise, cfg.sigma_b_sq, cfg.r)?.k,
    };
    let (t_l, t_r) = match (cfg.t_l, cfg.t_r) {
        (Some(l), Some(r)) => (l, r),
        _ => {
            let c = optimize_repetitions(singulars, cfg.m, cfg.n, k, &noise, cfg.sigma_b_sq)?;
            (cfg.t_l.unwrap_or(c.t_l), cfg.t_r.unwrap_or(c.t_r))
        }
    };
    let scheme = SchemeConfig::new(cfg.m, cfg.n, k, t_l, t_r, noise, cfg.sigma_b_sq)?;
    let analytic = two_step_error_analytic(singulars, cfg.m, cfg.n, k, t_l, t_r, &noise, cfg.sigma_b_sq)?;
    let f = factor_lr(&s, k)?;

    let mut plan = TrialPlan::new(cfg.trials, child_seed(cfg.master_seed, 0, role::NOISE));
    plan.lanes = lanes;
    let base = run_baseline_trials(&a, &noise, cfg.sigma_b_sq, &plan)?;
    let mut plan2 = TrialPlan::new(cfg.trials, child_seed(cfg.master_seed, 1, role::NOISE));
    plan2.lanes = lanes;
    let two = run_two_step_trials(&f, &a, &scheme, &plan2)?;

    let baseline_analytic = baseline_error_analytic(cfg.m, cfg.n, cfg.sigma_e_sq, cfg.sigma_b_sq);
    Ok(McReport {
        schema: MC_SCHEMA.into(),
        rows: vec![
            mc_row("baseline", None, None, &base, baseline_analytic),
            mc_row("two_step", Some(k), Some((t_l, t_r)), &two, analytic.total),
        ],
    })
}

fn csv_body<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    s.push('\n');
    Ok(s)
}

impl SweepReport {
    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => json_text(self),
            OutputFormat::Csv => {
                let mut out = format!("# {}\n", self.schema);
                out.push_str(&csv_body(&self.rows)?);
                if let Some(a) = &self.argmin {
                    out.push_str(&format!(
                        "# argmin k={} t_L={} t_R={} normalized={}\n",
                        a.k, a.t_l, a.t_r, a.normalized
                    ));
                }
                Ok(out)
            }
        }
    }
}

impl ScalingReport {
    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => json_text(self),
            OutputFormat::Csv => {
                let mut out = format!("# {}\n", self.schema);
                out.push_str(&csv_body(&self.rows)?);
                out.push_str(&format!(
                    "# alpha={} beta={} predicted_exponent={}\n",
                    self.alpha, self.beta, self.predicted_exponent
                ));
                out.push_str(&format!(
                    "# two_step slope={} intercept={} r_squared={}\n",
                    self.two_step_fit.slope, self.two_step_fit.intercept, self.two_step_fit.r_squared
                ));
                out.push_str(&format!(
                    "# baseline slope={} intercept={} r_squared={}\n",
                    self.baseline_fit.slope, self.baseline_fit.intercept, self.baseline_fit.r_squared
                ));
                Ok(out)
            }
        }
    }
}

impl McReport {
    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => json_text(self),
            OutputFormat::Csv => Ok(format!("# {}\n{}", self.schema, csv_body(&self.rows)?)),
        }
    }
}

impl ValidationReport {
    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => json_text(self),
            OutputFormat::Csv => {
                let mut out = String::new();
                out.push_str(&format!("rows={}\ncols={}\nrank={}\n", self.rows, self.cols, self.rank));
                let sv: Vec<String> = self.singulars.iter().map(|s| format!("{s:e}")).collect();
                out.push_str(&format!("singulars={}\n", sv.join(",")));
                out.push_str(&format!("frobenius_sq={}\n", self.frobenius_sq));
                out.push_str(&format!(
                    "magnitude_satisfied={}\nmagnitude_total={}\nmagnitude_budget={}\n",
                    self.magnitude.satisfied, self.magnitude.total, self.magnitude.budget
                ));
                Ok(out)
            }
        }
    }
}
