//! Scoring of recovered supports and Monte Carlo aggregation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Result};

/// Recovery algorithms known to the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Algorithm {
    /// Node 0 alone.
    Omp,
    Somp,
    Domp,
    Dcomp1,
    Dcomp1Nbhd,
    Dcomp2,
    MacOmp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Omp,
        Algorithm::Somp,
        Algorithm::Domp,
        Algorithm::Dcomp1,
        Algorithm::Dcomp1Nbhd,
        Algorithm::Dcomp2,
        Algorithm::MacOmp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Omp => "omp",
            Algorithm::Somp => "somp",
            Algorithm::Domp => "domp",
            Algorithm::Dcomp1 => "dcomp1",
            Algorithm::Dcomp1Nbhd => "dcomp1-nbhd",
            Algorithm::Dcomp2 => "dcomp2",
            Algorithm::MacOmp => "mac-omp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown algorithm tag '{s}'")))
    }
}

/// True when both index sets hold the same elements.
pub fn exact_recovery(estimated: &[usize], truth: &[usize]) -> bool {
    let a: BTreeSet<_> = estimated.iter().collect();
    let b: BTreeSet<_> = truth.iter().collect();
    a == b
}

/// `|estimated ∩ truth| / |truth|`.
pub fn support_fraction(estimated: &[usize], truth: &[usize]) -> Result<f64> {
    let truth: BTreeSet<_> = truth.iter().collect();
    if truth.is_empty() {
        return Err(invalid("true support is empty"));
    }
    let hits = estimated
        .iter()
        .collect::<BTreeSet<_>>()
        .intersection(&truth)
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Closed-form `(local, global)` scalar counts for one run.
///
/// `t_observed[l]` is node `l`'s iteration count and `neighborhoods[l]` its
/// neighbor count `|G_l|`.
pub fn table1_expected(
    algorithm: Algorithm,
    l_count: usize,
    k: usize,
    n: usize,
    neighborhoods: &[usize],
    t_observed: &[usize],
) -> Result<(u64, u64)> {
    let l = l_count as u64;
    let pairs = l * l.saturating_sub(1);
    let per_node = |lens: &[usize]| -> Result<()> {
        if lens.len() != l_count {
            return Err(invalid(format!("expected {l_count} per-node entries, got {}", lens.len())));
        }
        Ok(())
    };
    match algorithm {
        Algorithm::Somp => Ok((0, pairs * (k * n) as u64)),
        Algorithm::Domp => Ok((0, pairs * k as u64)),
        Algorithm::Dcomp1 | Algorithm::Dcomp1Nbhd => {
            per_node(neighborhoods)?;
            per_node(t_observed)?;
            let local = neighborhoods
                .iter()
                .zip(t_observed)
                .map(|(&g, &t)| (g * t) as u64)
                .sum();
            Ok((local, 0))
        }
        Algorithm::Dcomp2 => {
            per_node(neighborhoods)?;
            per_node(t_observed)?;
            let local = neighborhoods
                .iter()
                .zip(t_observed)
                .map(|(&g, &t)| (g * n * t) as u64)
                .sum();
            let global = t_observed.iter().map(|&t| (l_count - 1) as u64 * t as u64).sum();
            Ok((local, global))
        }
        Algorithm::Omp | Algorithm::MacOmp => Err(invalid(format!(
            "'{algorithm}' has no network communication count"
        ))),
    }
}

/// Outcome of one algorithm on one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub truth: Vec<usize>,
    pub per_node_support: Vec<Vec<usize>>,
    pub iterations: Vec<usize>,
    pub local_scalars: u64,
    pub global_scalars: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateStats {
    /// Exact-recovery rate, averaged over nodes then trials.
    pub p_d: f64,
    /// Binomial standard error `sqrt(p (1 - p) / trials)`.
    pub p_d_stderr: f64,
    pub fraction: f64,
    pub mean_iters: f64,
    pub iters_min: usize,
    pub iters_max: usize,
    pub local_scalars: f64,
    pub global_scalars: f64,
    /// Per-node exact-recovery rates, lowest and highest over nodes.
    pub node_p_d_min: f64,
    pub node_p_d_max: f64,
    pub trials: usize,
}

pub fn aggregate(records: &[TrialRecord]) -> Result<AggregateStats> {
    let first = records.first().ok_or_else(|| invalid("no trial records to aggregate"))?;
    let nodes = first.per_node_support.len();
    if nodes == 0 || records.iter().any(|r| r.per_node_support.len() != nodes || r.iterations.len() != nodes) {
        return Err(invalid("trial records disagree on node count"));
    }

    let mut node_hits = vec![0u64; nodes];
    let mut fraction_sum = 0.0;
    let mut iter_sum = 0u64;
    let mut iters_min = usize::MAX;
    let mut iters_max = 0;
    let mut local = 0u128;
    let mut global = 0u128;
    for r in records {
        for (hits, est) in node_hits.iter_mut().zip(&r.per_node_support) {
            *hits += exact_recovery(est, &r.truth) as u64;
            fraction_sum += support_fraction(est, &r.truth)?;
        }
        for &t in &r.iterations {
            iter_sum += t as u64;
            iters_min = iters_min.min(t);
            iters_max = iters_max.max(t);
        }
        local += r.local_scalars as u128;
        global += r.global_scalars as u128;
    }

    // Integer sums keep the result independent of record order.
    let trials = records.len() as f64;
    let node_trials = trials * nodes as f64;
    let p_d = node_hits.iter().sum::<u64>() as f64 / node_trials;
    let node_rates = node_hits.iter().map(|&h| h as f64 / trials);
    let (node_min, node_max) = node_rates.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
    Ok(AggregateStats {
        p_d,
        p_d_stderr: (p_d * (1.0 - p_d) / trials).sqrt(),
        fraction: exact_fraction_mean(records, nodes)?.unwrap_or(fraction_sum / node_trials),
        mean_iters: iter_sum as f64 / node_trials,
        iters_min,
        iters_max,
        local_scalars: local as f64 / trials,
        global_scalars: global as f64 / trials,
        node_p_d_min: node_min,
        node_p_d_max: node_max,
        trials: records.len(),
    })
}

/// Mean support fraction computed from integer hit counts when every truth
/// has the same size, so the value does not depend on summation order.
fn exact_fraction_mean(records: &[TrialRecord], nodes: usize) -> Result<Option<f64>> {
    let size = records[0].truth.len();
    if size == 0 {
        return Err(invalid("true support is empty"));
    }
    if records.iter().any(|r| r.truth.len() != size) {
        return Ok(None);
    }
    let mut hits = 0u64;
    for r in records {
        let truth: BTreeSet<_> = r.truth.iter().collect();
        for est in &r.per_node_support {
            hits += est.iter().collect::<BTreeSet<_>>().intersection(&truth).count() as u64;
        }
    }
    Ok(Some(hits as f64 / (records.len() * nodes * size) as f64))
}
