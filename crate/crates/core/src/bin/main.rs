use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crossbar_lowrank::config::{ExperimentConfig, LambdaSpec};
use crossbar_lowrank::experiment::{cmd_mc, cmd_scaling, cmd_sweep, cmd_validate, generate_target, OutputFormat};
use crossbar_lowrank::{DenseMatrix, DeviceParams, Error};

#[derive(Parser)]
#[command(name = "crossbar-lowrank", version, about = "Noisy crossbar VMM: baseline vs low-rank two-step scheme")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// Worker threads (output does not depend on it)
    #[arg(long)]
    lanes: Option<usize>,
    /// Override a config key, e.g. --set k_range=1,2,3
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Rank sweep: analytic breakdown and Monte Carlo estimate per k
    Sweep(Common),
    /// Error growth over a geometric grid of matrix sizes (analytic only)
    Scaling(Common),
    /// Write a harmonic test matrix in the text matrix format
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        /// Harmonic scale, or "max"
        #[arg(long)]
        lambda: Option<String>,
    },
    /// Report dimensions, singular values, rank and the magnitude constraint
    Validate {
        matrix: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Single-configuration Monte Carlo versus closed form
    Mc(Common),
}

/// `Usage` covers bad flags and configuration (exit 2); everything else that
/// stops a run exits 1.
enum Failure {
    Usage(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Infeasible(_) | Error::Parse { .. } => usage(e),
            _ => Failure::Failed(e.to_string()),
        }
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::from_path(p).map_err(|e| match e {
            Error::Io(io) => Failure::Usage(format!("{}: {io}", p.display())),
            other => Failure::Usage(format!("{}: {other}", p.display())),
        })?,
        None => ExperimentConfig::default(),
    };
    for (i, kv) in c.set.iter().enumerate() {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim(), i + 1).map_err(usage)?;
    }
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn emit(c: &Common, text: &str) -> Result<(), Failure> {
    match &c.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Failed(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Failed(e.to_string())),
    }
}

fn format_of(c: &Common) -> OutputFormat {
    c.format.parse().expect("clap restricts the values")
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let common = match &cli.command {
        Command::Sweep(c) | Command::Scaling(c) | Command::Mc(c) => c,
        Command::Gen { common, .. } | Command::Validate { common, .. } => common,
    };
    if let Some(lanes) = common.lanes {
        if lanes == 0 {
            return Err(Failure::Usage("--lanes must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(lanes)
            .build_global()
            .map_err(|e| Failure::Failed(e.to_string()))?;
    }

    match &cli.command {
        Command::Sweep(c) => {
            let cfg = load_config(c)?;
            let report = cmd_sweep(&cfg)?;
            if let Some(a) = &report.argmin {
                eprintln!("argmin k={} t_L={} t_R={} normalized={:.6}", a.k, a.t_l, a.t_r, a.normalized);
            }
            emit(c, &report.render(format_of(c))?)?;
            Ok(true)
        }
        Command::Scaling(c) => {
            let cfg = load_config(c)?;
            let report = cmd_scaling(&cfg)?;
            emit(c, &report.render(format_of(c))?)?;
            Ok(true)
        }
        Command::Gen { common, m, n, r, lambda } => {
            let mut cfg = load_config(common)?;
            if let Some(m) = m {
                cfg.m = *m;
            }
            if let Some(n) = n {
                cfg.n = *n;
            }
            if let Some(r) = r {
                cfg.r = *r;
            }
            if let Some(l) = lambda {
                cfg.lambda = if l.eq_ignore_ascii_case("max") {
                    LambdaSpec::Max
                } else {
                    LambdaSpec::Value(l.parse().map_err(|_| Failure::Usage(format!("invalid lambda {l:?}")))?)
                };
            }
            cfg.validate().map_err(usage)?;
            let a = generate_target(&cfg)?;
            emit(common, &a.to_text())?;
            Ok(true)
        }
        Command::Validate { matrix, common } => {
            let cfg = load_config(common)?;
            let dev = DeviceParams::new(cfg.r_t, cfg.rho).map_err(usage)?;
            let a =
                DenseMatrix::read_path(matrix).map_err(|e| Failure::Failed(format!("{}: {e}", matrix.display())))?;
            let report = cmd_validate(&a, &dev)?;
            emit(common, &report.render(format_of(common))?)?;
            Ok(report.magnitude.satisfied)
        }
        Command::Mc(c) => {
            let cfg = load_config(c)?;
            let report = cmd_mc(&cfg, c.lanes)?;
            emit(c, &report.render(format_of(c))?)?;
            Ok(report.all_pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
