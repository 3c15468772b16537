//! Monte Carlo sweeps over M, L or neighborhood size.
//!
//! Trial `t` of every sweep point and every algorithm draws from the seed
//! `trial_seed(master, t)`, so algorithms are compared on identical
//! supports, amplitudes, matrices and noise.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{AlgorithmSpec, ExperimentConfig, NeighborhoodSize, OutputFormat, TopologySpec};
use crate::decentralized::{dcomp1, dcomp2, domp_majority, somp_networked, FusionMode, RecoveryResult};
use crate::error::{invalid, Error, Result};
use crate::greedy::omp;
use crate::mac::mac_omp;
use crate::metrics::{aggregate, Algorithm, TrialRecord};
use crate::network::{build_topology, Topology, TopologyKind};
use crate::rng::{stream_rng, trial_seed, Stream};
use crate::sensing::{gen_signals, gen_support, measure, JointSparseEnsemble, MeasurementEnsemble, ObservationSet};

/// Largest share of failed trials tolerated at one sweep point.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Measurements per node, at the first configured L.
    M,
    /// Node count, at the first configured M.
    L,
    /// Ring neighborhood size, at the first configured L and M.
    Neighborhood,
    /// S-OMP against MAC-OMP on shared matrices, over M.
    MacCompare,
}

/// One output line. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_var: usize,
    pub algorithm: String,
    pub p_d: f64,
    pub p_d_stderr: f64,
    pub fraction: f64,
    pub mean_iters: f64,
    pub iters_min: usize,
    pub iters_max: usize,
    pub local_scalars: f64,
    pub global_scalars: f64,
    pub trials: usize,
    pub failed_trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub node_p_d_min: f64,
    #[serde(skip)]
    pub node_p_d_max: f64,
}

pub const CSV_HEADER: &str =
    "sweep_var,algorithm,p_d,p_d_stderr,fraction,mean_iters,iters_min,iters_max,local_scalars,global_scalars,trials,failed_trials,seed";

/// Problem size at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: usize,
    pub l_count: usize,
    pub m: usize,
    pub n0: Option<NeighborhoodSize>,
}

/// One Monte Carlo instance.
#[derive(Debug, Clone)]
pub struct TrialInstance {
    pub seed: u64,
    pub ensemble: JointSparseEnsemble,
    pub meas: MeasurementEnsemble,
    pub obs: ObservationSet,
}

/// Draws the instance for one trial seed.
pub fn generate_instance(
    config: &ExperimentConfig,
    l_count: usize,
    m: usize,
    shared_matrix: bool,
    seed: u64,
) -> Result<TrialInstance> {
    let support = gen_support(config.n, config.k, &mut stream_rng(seed, Stream::Support))?;
    let mut amp_rng = stream_rng(seed, Stream::Amplitudes);
    let ensemble = if config.identical_signals {
        let one = gen_signals(&support, config.n, 1, config.amp_low, config.amp_high, &mut amp_rng)?;
        JointSparseEnsemble::from_signals(vec![one.signals[0].clone(); l_count])?
    } else {
        gen_signals(&support, config.n, l_count, config.amp_low, config.amp_high, &mut amp_rng)?
    };
    let meas = MeasurementEnsemble::orthoprojectors(
        m,
        config.n,
        l_count,
        shared_matrix,
        config.sigma2,
        &mut stream_rng(seed, Stream::Matrices),
    )?;
    let obs = measure(&ensemble, &meas, &mut stream_rng(seed, Stream::Noise))?;
    Ok(TrialInstance {
        seed,
        ensemble,
        meas,
        obs,
    })
}

fn ring(n0: usize, l_count: usize) -> Result<Topology> {
    build_topology(TopologyKind::Ring { n0 }, l_count, &mut stream_rng(0, Stream::Topology))
}

/// Network an algorithm runs on at a given sweep point.
pub fn topology_for(
    spec: &AlgorithmSpec,
    config: &ExperimentConfig,
    point: &SweepPoint,
    seed: u64,
) -> Result<Topology> {
    let l = point.l_count;
    if l == 1 {
        return Topology::complete(1);
    }
    if spec.uses_neighborhoods() {
        if let Some(n0) = spec.n0.or(point.n0) {
            return ring(n0.resolve(l), l);
        }
    }
    match config.topology {
        TopologySpec::Complete => Topology::complete(l),
        TopologySpec::Ring => ring(config.n0[0].resolve(l), l),
        TopologySpec::Random => build_topology(
            TopologyKind::RandomConnected { p: config.edge_p },
            l,
            &mut stream_rng(seed, Stream::Topology),
        ),
    }
}

/// Runs one algorithm on one instance.
pub fn run_algorithm(
    spec: &AlgorithmSpec,
    instance: &TrialInstance,
    topology: &Topology,
    k: usize,
) -> Result<TrialRecord> {
    let TrialInstance { obs, meas, .. } = instance;
    let result = match spec.algorithm {
        Algorithm::Omp => single(omp(&obs.per_node[0], &meas.matrices[0], k)?, k),
        Algorithm::MacOmp => {
            if !meas.shared_matrix {
                return Err(invalid("mac-omp requires a shared measurement matrix"));
            }
            let z = obs.per_node.iter().skip(1).fold(obs.per_node[0].clone(), |acc: DVector<f64>, y| acc + y);
            single(mac_omp(&z, &meas.matrices[0], k)?, k)
        }
        Algorithm::Somp => somp_networked(obs, meas, topology, k)?,
        Algorithm::Domp => domp_majority(obs, meas, topology, k)?,
        Algorithm::Dcomp1 => dcomp1(obs, meas, topology, k, FusionMode::Full)?,
        Algorithm::Dcomp1Nbhd => dcomp1(obs, meas, topology, k, FusionMode::Neighborhood)?,
        Algorithm::Dcomp2 => dcomp2(obs, meas, topology, k)?,
    };
    Ok(TrialRecord {
        algorithm: spec.algorithm,
        truth: instance.ensemble.support.clone(),
        per_node_support: result.per_node_support,
        iterations: result.iterations,
        local_scalars: result.ledger.local_scalar_count,
        global_scalars: result.ledger.global_scalar_count,
        seed: instance.seed,
    })
}

/// Result for estimators that produce one support and send nothing.
fn single(support: Vec<usize>, k: usize) -> RecoveryResult {
    RecoveryResult {
        per_node_support: vec![support],
        iterations: vec![k],
        ledger: crate::network::MessageLedger::new(1),
        rounds: Vec::new(),
    }
}

/// Algorithms and sweep points for a sweep kind.
pub fn plan(config: &ExperimentConfig, kind: SweepKind) -> (Vec<AlgorithmSpec>, Vec<SweepPoint>, bool) {
    let l0 = config.l[0];
    let m0 = config.m[0];
    let over_m = |shared| {
        let points = config
            .m
            .iter()
            .map(|&m| SweepPoint {
                value: m,
                l_count: l0,
                m,
                n0: None,
            })
            .collect();
        (points, shared)
    };
    let (points, shared) = match kind {
        SweepKind::M => over_m(config.mac_mode),
        SweepKind::MacCompare => over_m(true),
        SweepKind::L => (
            config
                .l
                .iter()
                .map(|&l| SweepPoint {
                    value: l,
                    l_count: l,
                    m: m0,
                    n0: None,
                })
                .collect(),
            config.mac_mode,
        ),
        SweepKind::Neighborhood => (
            config
                .n0
                .iter()
                .map(|&n0| SweepPoint {
                    value: n0.resolve(l0),
                    l_count: l0,
                    m: m0,
                    n0: Some(n0),
                })
                .collect(),
            config.mac_mode,
        ),
    };
    let algorithms = if kind == SweepKind::MacCompare {
        vec![AlgorithmSpec::new(Algorithm::Somp), AlgorithmSpec::new(Algorithm::MacOmp)]
    } else {
        config.algorithms.clone()
    };
    (algorithms, points, shared)
}

/// Per-algorithm outcomes of one trial; `None` marks a singular projection.
fn run_trial(
    config: &ExperimentConfig,
    algorithms: &[AlgorithmSpec],
    point: &SweepPoint,
    shared: bool,
    trial: usize,
) -> Result<Vec<Option<TrialRecord>>> {
    let seed = trial_seed(config.seed, trial as u64);
    let instance = generate_instance(config, point.l_count, point.m, shared, seed)?;
    algorithms
        .iter()
        .map(|spec| {
            let topology = topology_for(spec, config, point, seed)?;
            match run_algorithm(spec, &instance, &topology, config.k) {
                Ok(r) => Ok(Some(r)),
                Err(Error::SingularProjection { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Runs the sweep on the current rayon pool. Rows come out ordered by
/// sweep point, then by algorithm as configured.
pub fn run_sweep(config: &ExperimentConfig, kind: SweepKind) -> Result<Vec<SweepRow>> {
    config
        .validate()
        .map_err(|(key, message)| Error::Config {
            line: 0,
            key: key.to_string(),
            message,
        })?;
    let (algorithms, points, shared) = plan(config, kind);
    let mut rows = Vec::new();
    for point in &points {
        let outcomes: Vec<Vec<Option<TrialRecord>>> = (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, &algorithms, point, shared, t))
            .collect::<Result<_>>()?;
        for (a, spec) in algorithms.iter().enumerate() {
            let records: Vec<TrialRecord> = outcomes.iter().filter_map(|o| o[a].clone()).collect();
            let failed = config.trials - records.len();
            if failed as f64 > MAX_FAILURE_RATE * config.trials as f64 {
                return Err(Error::Runtime(format!(
                    "{} of {} trials hit a singular projection for {} at sweep value {}",
                    failed,
                    config.trials,
                    spec.label(),
                    point.value
                )));
            }
            let stats = aggregate(&records)?;
            rows.push(SweepRow {
                sweep_var: point.value,
                algorithm: spec.label(),
                p_d: stats.p_d,
                p_d_stderr: stats.p_d_stderr,
                fraction: stats.fraction,
                mean_iters: stats.mean_iters,
                iters_min: stats.iters_min,
                iters_max: stats.iters_max,
                local_scalars: stats.local_scalars,
                global_scalars: stats.global_scalars,
                trials: stats.trials,
                failed_trials: failed,
                seed: config.seed,
                node_p_d_min: stats.node_p_d_min,
                node_p_d_max: stats.node_p_d_max,
            });
        }
    }
    Ok(rows)
}

/// [`run_sweep`] on a dedicated pool with `threads` workers.
pub fn run_sweep_with_threads(config: &ExperimentConfig, kind: SweepKind, threads: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Runtime(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(config, kind))
}

pub fn write_rows<W: Write>(rows: &[SweepRow], format: OutputFormat, out: W) -> Result<()> {
    let io = |e: String| Error::Runtime(format!("writing output: {e}"));
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            if rows.is_empty() {
                w.write_record(CSV_HEADER.split(',')).map_err(|e| io(e.to_string()))?;
            }
            for row in rows {
                w.serialize(row).map_err(|e| io(e.to_string()))?;
            }
            w.flush().map_err(|e| io(e.to_string()))
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows).map_err(|e| io(e.to_string()))?;
            writeln!(out).map_err(|e| io(e.to_string()))
        }
    }
}

/// Rows rendered in memory.
pub fn render_rows(rows: &[SweepRow], format: OutputFormat) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(rows, format, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Runtime(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn tiny() -> ExperimentConfig {
        parse_config("n=32\nk=2\nl=4\nm=8,12\ntrials=6\nseed=3\nalgorithms=omp,somp,domp,dcomp1,dcomp2@2").unwrap()
    }

    #[test]
    fn header_matches_schema() {
        let rows = run_sweep(&tiny(), SweepKind::M).unwrap();
        let csv = render_rows(&rows, OutputFormat::Csv).unwrap();
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().count(), 1 + 2 * 5);
        assert_eq!(render_rows(&[], OutputFormat::Csv).unwrap().trim_end(), CSV_HEADER);
        let json: serde_json::Value = serde_json::from_str(&render_rows(&rows, OutputFormat::Json).unwrap()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 10);
    }

    #[test]
    fn sweep_is_deterministic() {
        let a = render_rows(&run_sweep(&tiny(), SweepKind::M).unwrap(), OutputFormat::Csv).unwrap();
        let b = render_rows(&run_sweep_with_threads(&tiny(), SweepKind::M, 1).unwrap(), OutputFormat::Csv).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_rows_are_sane() {
        for row in run_sweep(&tiny(), SweepKind::M).unwrap() {
            assert!((0.0..=1.0).contains(&row.p_d));
            assert!(row.p_d <= row.fraction + 1e-12);
            assert_eq!(row.trials + row.failed_trials, 6);
            if row.algorithm == "domp" {
                assert_eq!((row.iters_min, row.iters_max), (2, 2));
                assert_eq!(row.global_scalars, (2 * 3 * 4) as f64);
            }
        }
    }

    #[test]
    fn other_sweep_kinds() {
        let mut c = tiny();
        c.l = vec![2, 4];
        c.algorithms = vec!["dcomp2@half".parse().unwrap(), "dcomp1-nbhd".parse().unwrap()];
        c.topology = TopologySpec::Ring;
        let rows = run_sweep(&c, SweepKind::L).unwrap();
        assert_eq!(rows.iter().map(|r| r.sweep_var).collect::<Vec<_>>(), vec![2, 2, 4, 4]);

        c.l = vec![6];
        c.n0 = vec![NeighborhoodSize::Fixed(2), NeighborhoodSize::Fixed(4)];
        let rows = run_sweep(&c, SweepKind::Neighborhood).unwrap();
        assert_eq!(rows.iter().map(|r| r.sweep_var).collect::<Vec<_>>(), vec![2, 2, 4, 4]);

        let rows = run_sweep(&tiny(), SweepKind::MacCompare).unwrap();
        assert_eq!(rows.iter().map(|r| r.algorithm.as_str()).collect::<Vec<_>>(), vec!["somp", "mac-omp", "somp", "mac-omp"]);
    }

    #[test]
    fn saturating_snr_recovers() {
        let mut c = tiny();
        c.m = vec![24];
        c.sigma2 = 0.0;
        for row in run_sweep(&c, SweepKind::M).unwrap() {
            if row.algorithm != "omp" {
                assert_eq!(row.p_d, 1.0, "{}", row.algorithm);
            }
        }
    }
}
