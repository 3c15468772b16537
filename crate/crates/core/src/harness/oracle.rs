//! Brute-force least-squares support search for small problems.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::config::ExperimentConfig;
use super::sweep::generate_instance;
use crate::combin::{binomial, for_each_combination};
use crate::decentralized::dcomp2;
use crate::error::{invalid, Error, Result};
use crate::greedy::{ls_residual, omp, somp};
use crate::metrics::exact_recovery;
use crate::network::Topology;
use crate::rng::trial_seed;

/// Largest number of candidate supports the oracle enumerates.
pub const ORACLE_CAP: u128 = 100_000;

/// Support of size `k` minimizing `Σ_l ‖y_l - P_U y_l‖`, ties to the
/// lexicographically first. Candidates with a singular Gram matrix are skipped.
pub fn exhaustive_oracle(
    observations: &[DVector<f64>],
    dictionaries: &[&DMatrix<f64>],
    k: usize,
) -> Result<Vec<usize>> {
    let first = dictionaries.first().ok_or_else(|| invalid("at least one node is required"))?;
    if observations.len() != dictionaries.len() {
        return Err(invalid("observation and dictionary counts differ"));
    }
    let n = first.ncols();
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= N, got k={k}, N={n}")));
    }
    let count = binomial(n, k).unwrap_or(u128::MAX);
    if count > ORACLE_CAP {
        return Err(Error::EnumerationTooLarge { count, cap: ORACLE_CAP });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut failure = None;
    for_each_combination(n, k, |support| {
        if failure.is_some() {
            return;
        }
        let mut total = 0.0;
        for (y, b) in observations.iter().zip(dictionaries) {
            match ls_residual(y, b, support) {
                Ok(r) => total += r.norm(),
                Err(Error::SingularProjection { .. }) => return,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            }
        }
        if best.as_ref().is_none_or(|(score, _)| total < *score) {
            best = Some((total, support.to_vec()));
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::Runtime("every candidate support was singular".into()))
}

/// Agreement counts from [`oracle_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub trials: usize,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub l_count: usize,
    /// OMP at node 0 against the single-node oracle.
    pub omp_matches: usize,
    /// S-OMP against the multi-node oracle.
    pub somp_matches: usize,
    /// DC-OMP 2 on a complete graph against S-OMP.
    pub dcomp2_matches: usize,
}

/// Compares the greedy estimators with the oracle on noiseless instances at
/// the first configured L and M.
pub fn oracle_check(config: &ExperimentConfig) -> Result<OracleReport> {
    let mut noiseless = config.clone();
    noiseless.sigma2 = 0.0;
    let (l, m) = (config.l[0], config.m[0]);
    let topology = Topology::complete(l)?;
    let mut report = OracleReport {
        trials: config.trials,
        n: config.n,
        k: config.k,
        m,
        l_count: l,
        omp_matches: 0,
        somp_matches: 0,
        dcomp2_matches: 0,
    };
    for t in 0..config.trials {
        let inst = generate_instance(&noiseless, l, m, config.mac_mode, trial_seed(config.seed, t as u64))?;
        let dicts: Vec<&DMatrix<f64>> = inst.meas.matrices.iter().collect();
        let y0 = &inst.obs.per_node[0];

        let single = exhaustive_oracle(std::slice::from_ref(y0), &dicts[..1], config.k)?;
        let omp_est = omp(y0, dicts[0], config.k)?;
        report.omp_matches += exact_recovery(&omp_est, &single) as usize;

        let joint = exhaustive_oracle(&inst.obs.per_node, &dicts, config.k)?;
        let somp_est = somp(&inst.obs, &inst.meas, config.k)?;
        report.somp_matches += exact_recovery(&somp_est, &joint) as usize;

        if l >= 2 {
            let dc = dcomp2(&inst.obs, &inst.meas, &topology, config.k)?;
            report.dcomp2_matches += dc.per_node_support.iter().all(|s| exact_recovery(s, &somp_est)) as usize;
        } else {
            report.dcomp2_matches += 1;
        }
    }
    Ok(report)
}
