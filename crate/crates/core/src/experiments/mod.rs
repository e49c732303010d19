//! Reproducible experiments: sample-complexity sweeps, concentration checks
//! and Monte-Carlo revenue estimates.

mod concentration;
mod config;
mod montecarlo;
mod sweep;

pub use concentration::{
    concentration_bound, concentration_experiment, run_concentration, ConcentrationConfig, ConcentrationResult, FunctionSpec,
};
pub use config::{
    config_hash, read_json_config, tool_version, Evaluation, ExperimentConfig, Instance, InstanceConfig, SeedList, SpaceSpec,
    SweepMode,
};
pub use montecarlo::{monte_carlo_revenue, Estimate};
pub use sweep::{benchmark, run_sweep, with_workers, SummaryRow, SweepResult, SweepRow, WORKERS_ENV};

#[cfg(test)]
mod tests;
