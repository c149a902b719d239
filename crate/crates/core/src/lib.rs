//! Simulation and analysis of noisy vector–matrix multiplication on
//! memristor crossbars.
//!
//! Two execution schemes are modelled:
//!
//! * the **baseline** one-shot scheme, which programs the full `m × n` target
//!   onto a single crossbar and computes `b (A + E)`;
//! * the **two-step** scheme, which factors the best rank-`k` approximation
//!   `A_k = L R`, programs `L` onto `t_L` replicated `m × k` arrays and `R`
//!   onto `t_R` replicated `k × n` arrays, and averages each stage.
//!
//! Closed-form expected errors live in [`analysis`], Monte Carlo estimators
//! in [`montecarlo`], and the experiment drivers behind the command-line tool
//! in [`experiment`].

pub mod analysis;
pub mod config;
pub mod error;
pub mod experiment;
pub mod lowrank;
pub mod matrix;
pub mod matrixgen;
pub mod montecarlo;
pub mod rng;
pub mod schemes;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, DeviceParams, RowVector};
pub use rng::{Distribution, RandomStream};
