//! Analytical bound report for one configured ensemble.

use super::config::ExperimentConfig;
use super::sweep::generate_instance;
use crate::error::{Error, Result};
use crate::mac::{bound_report, BoundInputs, BoundReport, XiOptions};
use crate::rng::trial_seed;

/// Evaluates every bound on the trial-0 ensemble at the first configured L
/// and M, always with a shared measurement matrix.
pub fn bounds_report(config: &ExperimentConfig) -> Result<BoundReport> {
    let inst = generate_instance(config, config.l[0], config.m[0], true, trial_seed(config.seed, 0))?;
    bound_report(
        &inst.ensemble,
        &inst.meas,
        BoundInputs {
            delta0: config.delta0,
            slack_t: config.slack_t,
            gamma_c_min: config.gamma_c_min,
            xi: XiOptions {
                enumeration_cap: config.enumeration_cap,
                sample_pairs: config.xi_pairs,
                seed: config.seed,
            },
        },
    )
}

pub fn render_report(report: &BoundReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map(|s| s + "\n")
        .map_err(|e| Error::Runtime(format!("serializing report: {e}")))
}
