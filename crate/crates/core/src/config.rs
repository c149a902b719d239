//! Flat `key = value` experiment configuration.
//!
//! One pair per line, `#` starts a comment, keys are case-insensitive.
//! Every key has a default matching the 100×100, rank-16 harmonic setup
//! with all write-noise variances at 0.05 and `σ_b² = 3`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::lambda_max;
use crate::error::{invalid, Error, Result};
use crate::matrix::DeviceParams;
use crate::rng::Distribution;
use crate::schemes::NoiseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaSpec {
    Value(f64),
    /// Largest `λ` the magnitude constraint admits.
    Max,
}

impl fmt::Display for LambdaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaSpec::Value(v) => write!(f, "{v}"),
            LambdaSpec::Max => f.write_str("max"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KRange {
    All,
    List(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaSpec {
    Value(f64),
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub lambda: LambdaSpec,
    pub sigma_e_sq: f64,
    pub sigma_l_sq: f64,
    pub sigma_r_sq: f64,
    pub sigma_b_sq: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub dist: Distribution,
    pub rho: f64,
    pub r_t: f64,
    pub k_range: KRange,
    /// Fixed rank for `mc`; optimized when absent.
    pub k: Option<usize>,
    pub t_l: Option<usize>,
    pub t_r: Option<usize>,
    pub alpha: f64,
    pub beta: BetaSpec,
    pub c1: f64,
    pub c2: f64,
    pub n_grid: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 100,
            n: 100,
            r: 16,
            lambda: LambdaSpec::Value(10.0),
            sigma_e_sq: 0.05,
            sigma_l_sq: 0.05,
            sigma_r_sq: 0.05,
            sigma_b_sq: 3.0,
            trials: 10_000,
            master_seed: 0,
            dist: Distribution::Gaussian,
            rho: 1.0,
            r_t: 1.0,
            k_range: KRange::All,
            k: None,
            t_l: None,
            t_r: None,
            alpha: 1.0,
            beta: BetaSpec::Optimal,
            c1: 0.5,
            c2: 1.0,
            n_grid: (8..=13).map(|e| 1usize << e).collect(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse { line, msg: format!("invalid value {value:?} for {key}") })
}

fn parse_list(key: &str, value: &str, line: usize) -> Result<Vec<usize>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s, line))
        .collect()
}

impl ExperimentConfig {
    /// Parses a config file's text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, msg: format!("expected key=value, got {content:?}") })?;
            cfg.set(key.trim(), value.trim(), line)?;
        }
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies one `key = value` pair; `line` is used in error reports.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let k = key.to_ascii_lowercase();
        match k.as_str() {
            "m" => self.m = parse_num(&k, value, line)?,
            "n" => self.n = parse_num(&k, value, line)?,
            "r" => self.r = parse_num(&k, value, line)?,
            "lambda" => {
                self.lambda = if value.eq_ignore_ascii_case("max") {
                    LambdaSpec::Max
                } else {
                    LambdaSpec::Value(parse_num(&k, value, line)?)
                }
            }
            "sigma_e_sq" => self.sigma_e_sq = parse_num(&k, value, line)?,
            "sigma_l_sq" => self.sigma_l_sq = parse_num(&k, value, line)?,
            "sigma_r_sq" => self.sigma_r_sq = parse_num(&k, value, line)?,
            "sigma_b_sq" => self.sigma_b_sq = parse_num(&k, value, line)?,
            "trials" => self.trials = parse_num(&k, value, line)?,
            "master_seed" | "seed" => self.master_seed = parse_num(&k, value, line)?,
            "dist" => self.dist = value.parse().map_err(|e: Error| Error::Parse { line, msg: e.to_string() })?,
            "rho" => self.rho = parse_num(&k, value, line)?,
            "r_t" => self.r_t = parse_num(&k, value, line)?,
            "k_range" => {
                self.k_range = if value.eq_ignore_ascii_case("all") {
                    KRange::All
                } else {
                    KRange::List(parse_list(&k, value, line)?)
                }
            }
            "k" => self.k = Some(parse_num(&k, value, line)?),
            "t_l" => self.t_l = Some(parse_num(&k, value, line)?),
            "t_r" => self.t_r = Some(parse_num(&k, value, line)?),
            "alpha" => self.alpha = parse_num(&k, value, line)?,
            "beta" => {
                self.beta = if value.eq_ignore_ascii_case("optimal") {
                    BetaSpec::Optimal
                } else {
                    BetaSpec::Value(parse_num(&k, value, line)?)
                }
            }
            "c1" => self.c1 = parse_num(&k, value, line)?,
            "c2" => self.c2 = parse_num(&k, value, line)?,
            "n_grid" => self.n_grid = parse_list(&k, value, line)?,
            _ => return Err(Error::Parse { line, msg: format!("unknown key {key:?}") }),
        }
        Ok(())
    }

    pub fn device(&self) -> Result<DeviceParams> {
        DeviceParams::new(self.r_t, self.rho)
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.sigma_e_sq, self.sigma_l_sq, self.sigma_r_sq, self.dist)
    }

    pub fn resolved_lambda(&self) -> Result<f64> {
        Ok(match self.lambda {
            LambdaSpec::Value(v) => v,
            LambdaSpec::Max => lambda_max(self.m, self.n, &self.device()?),
        })
    }

    /// Ranks swept by `sweep`, ascending.
    pub fn ks(&self) -> Vec<usize> {
        match &self.k_range {
            KRange::All => (1..=self.r).collect(),
            KRange::List(v) => {
                let mut v = v.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }

    /// Checks the settings shared by every command.
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(invalid("m and n must be positive"));
        }
        if self.r == 0 || self.r > self.m.min(self.n) {
            return Err(invalid(format!("r = {} must lie in [1, min(m, n) = {}]", self.r, self.m.min(self.n))));
        }
        self.device()?;
        self.noise()?;
        let lambda = self.resolved_lambda()?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(self.sigma_b_sq.is_finite() && self.sigma_b_sq > 0.0) {
            return Err(invalid(format!("sigma_b_sq must be positive, got {}", self.sigma_b_sq)));
        }
        if self.trials == 1 {
            return Err(invalid("trials must be 0 (analytic only) or at least 2"));
        }
        if let KRange::List(v) = &self.k_range {
            if v.is_empty() {
                return Err(invalid("k_range list is empty"));
            }
            if let Some(bad) = v.iter().find(|&&k| k == 0 || k > self.r) {
                return Err(invalid(format!("k_range entry {bad} outside [1, r = {}]", self.r)));
            }
        }
        if let Some(k) = self.k {
            if k == 0 || k > self.r {
                return Err(invalid(format!("k = {k} outside [1, r = {}]", self.r)));
            }
        }
        if self.t_l == Some(0) || self.t_r == Some(0) {
            return Err(invalid("t_L and t_R must be at least 1"));
        }
        Ok(())
    }

    /// Extra checks for the scaling study.
    pub fn validate_scaling(&self) -> Result<()> {
        self.device()?;
        self.noise()?;
        if !(self.sigma_b_sq.is_finite() && self.sigma_b_sq > 0.0) {
            return Err(invalid(format!("sigma_b_sq must be positive, got {}", self.sigma_b_sq)));
        }
        for (name, v) in [("alpha", self.alpha), ("c1", self.c1), ("c2", self.c2)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if let BetaSpec::Value(b) = self.beta {
            if !(b > 0.0 && b <= 1.0) {
                return Err(invalid(format!("beta must lie in (0, 1], got {b}")));
            }
        }
        validate_grid(&self.n_grid)
    }
}

/// At least four strictly increasing, geometrically spaced sizes.
pub fn validate_grid(grid: &[usize]) -> Result<()> {
    if grid.len() < 4 {
        return Err(invalid(format!("n_grid needs at least 4 points, got {}", grid.len())));
    }
    if grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n_grid must be positive and strictly increasing"));
    }
    let ratio = grid[1] as f64 / grid[0] as f64;
    for w in grid.windows(2) {
        let q = w[1] as f64 / w[0] as f64;
        if (q - ratio).abs() > 1e-9 * ratio {
            return Err(invalid("n_grid must be geometrically spaced"));
        }
    }
    Ok(())
}
