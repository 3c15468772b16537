//! Config-driven experiment runner: Monte Carlo sweeps, bound reports and
//! the brute-force oracle check.

pub mod bounds;
pub mod config;
pub mod oracle;
pub mod sweep;

pub use bounds::{bounds_report, render_report};
pub use config::{parse_config, AlgorithmSpec, ExperimentConfig, NeighborhoodSize, OutputFormat, TopologySpec};
pub use oracle::{exhaustive_oracle, oracle_check, OracleReport};
pub use sweep::{render_rows, run_sweep, run_sweep_with_threads, write_rows, SweepKind, SweepRow, CSV_HEADER};
