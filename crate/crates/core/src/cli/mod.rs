//! Configuration files and the runs behind the `mfg-lg` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_str, ConfigError, LqParams, ProblemConfig, RunConfig, Variant};
pub use run::{check, lq_errors, run_single, run_table_sweep, solve, CliError, LqErrors, RunSummary, Solved, SweepRow};
