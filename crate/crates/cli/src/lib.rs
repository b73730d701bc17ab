//! Command-line orchestration of the polarsim solvers: configuration files,
//! single runs, parameter sweeps, critical-mass bisection and output files.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod suite;
pub mod sweep;

pub use config::{parse_config, parse_config_str, Model, ResolvedConfig, RunConfig};
pub use error::CliError;
pub use runner::{run, RunResult};
pub use sweep::{bisect_critical_mass, sweep, Bisection, SweepParam, SweepRow};
