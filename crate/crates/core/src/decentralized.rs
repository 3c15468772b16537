//! Decentralized collaborative OMP.
//!
//! * DC-OMP 1 exchanges one proposed index per iteration and fuses by
//!   multiplicity, either over the whole network (`FusionMode::Full`) or
//!   over each node's one-hop neighborhood.
//! * DC-OMP 2 first sums correlation vectors over one-hop neighborhoods,
//!   then fuses the resulting proposals network-wide.
//! * D-OMP runs independent OMP at every node followed by one majority vote.
//!
//! All simulations are synchronous: every send of a round completes before
//! any node fuses. Nodes exclude their already-held indices from the argmax
//! so no node ever holds an index twice.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::greedy::{argmax_excluding, correlate, ls_residual, simultaneous};
use crate::network::{MessageLedger, Topology};
use crate::sensing::{MeasurementEnsemble, ObservationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Every node hears every proposal; requires a complete topology.
    Full,
    /// Each node hears only its one-hop neighbors.
    Neighborhood,
}

/// What happened in one synchronous round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionRound {
    pub iteration: usize,
    /// `None` for nodes that had already terminated.
    pub proposals: Vec<Option<usize>>,
    /// Multiset of proposals each node fused over (its own first).
    pub alpha_sets: Vec<Vec<usize>>,
    /// Indices each node admitted this round.
    pub fused: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    /// Estimated support per node, in admission order.
    pub per_node_support: Vec<Vec<usize>>,
    /// Rounds each node took before terminating.
    pub iterations: Vec<usize>,
    pub ledger: MessageLedger,
    pub rounds: Vec<FusionRound>,
}

impl RecoveryResult {
    /// True when every node ended with the same index set.
    pub fn consensus(&self) -> bool {
        let sorted = |s: &Vec<usize>| {
            let mut v = s.clone();
            v.sort_unstable();
            v
        };
        let first = sorted(&self.per_node_support[0]);
        self.per_node_support.iter().all(|s| sorted(s) == first)
    }
}

/// Occurrence count of each value, ascending by value.
fn counts(values: &[usize]) -> BTreeMap<usize, usize> {
    let mut map = BTreeMap::new();
    for &v in values {
        *map.entry(v).or_insert(0) += 1;
    }
    map
}

/// Network-wide index fusion.
///
/// Returns every proposal occurring at least twice (and not already held),
/// ascending. When no such value exists, every node falls back to the
/// proposal of the smallest node id that is not already held.
pub fn index_fusion_full(proposals: &[usize], already_selected: &[usize]) -> Vec<usize> {
    let repeated: Vec<usize> = counts(proposals)
        .into_iter()
        .filter(|&(v, c)| c >= 2 && !already_selected.contains(&v))
        .map(|(v, _)| v)
        .collect();
    if !repeated.is_empty() {
        return repeated;
    }
    proposals
        .iter()
        .find(|p| !already_selected.contains(p))
        .map(|&p| vec![p])
        .unwrap_or_default()
}

/// One-hop index fusion at a single node.
///
/// `α*` is the set of values occurring at least twice among `own` and
/// `received`, or `{own}` when all are distinct. If every index in `α*` is
/// already held the node keeps its own proposal; otherwise it takes the
/// not-yet-held part of `α*`. Result is ascending.
pub fn index_fusion_neighborhood(own: usize, received: &[usize], prior: &[usize]) -> Vec<usize> {
    let mut alpha = Vec::with_capacity(received.len() + 1);
    alpha.push(own);
    alpha.extend_from_slice(received);
    let repeated: Vec<usize> = counts(&alpha)
        .into_iter()
        .filter(|&(_, c)| c >= 2)
        .map(|(v, _)| v)
        .collect();
    let agreed = if repeated.is_empty() { vec![own] } else { repeated };
    let fresh: Vec<usize> = agreed.into_iter().filter(|v| !prior.contains(v)).collect();
    if fresh.is_empty() {
        vec![own]
    } else {
        fresh
    }
}

/// Keeps at most `room` candidates, preferring higher occurrence in `alpha`,
/// then a higher local score when `scores` is given, then the smaller index.
fn cap_admission(
    mut candidates: Vec<usize>,
    alpha: &[usize],
    scores: Option<&DVector<f64>>,
    room: usize,
) -> Vec<usize> {
    if candidates.len() <= room {
        return candidates;
    }
    let occurrence = counts(alpha);
    candidates.sort_by(|&a, &b| {
        let ca = occurrence.get(&a).copied().unwrap_or(0);
        let cb = occurrence.get(&b).copied().unwrap_or(0);
        cb.cmp(&ca)
            .then_with(|| match scores {
                Some(s) => s[b].total_cmp(&s[a]),
                None => std::cmp::Ordering::Equal,
            })
            .then_with(|| a.cmp(&b))
    });
    candidates.truncate(room);
    candidates
}

struct Checked<'a> {
    dicts: Vec<&'a DMatrix<f64>>,
    l_count: usize,
    n: usize,
}

fn check_inputs<'a>(
    obs: &ObservationSet,
    meas: &'a MeasurementEnsemble,
    topology: &Topology,
    k: usize,
) -> Result<Checked<'a>> {
    let l_count = meas.l_count();
    if obs.l_count() != l_count || topology.node_count() != l_count {
        return Err(invalid(format!(
            "node counts disagree: observations {}, matrices {}, topology {}",
            obs.l_count(),
            l_count,
            topology.node_count()
        )));
    }
    if k == 0 || k > meas.m || k > meas.n {
        return Err(invalid(format!(
            "sparsity must satisfy 1 <= k <= M, got k={k}, M={}",
            meas.m
        )));
    }
    if obs.per_node.iter().any(|y| y.len() != meas.m) {
        return Err(invalid("observation length does not match M"));
    }
    Ok(Checked {
        dicts: meas.matrices.iter().collect(),
        l_count,
        n: meas.n,
    })
}

struct NodeState {
    selected: Vec<usize>,
    residual: DVector<f64>,
    iterations: usize,
}

impl NodeState {
    fn start(y: &DVector<f64>) -> Self {
        Self {
            selected: Vec::new(),
            residual: y.clone(),
            iterations: 0,
        }
    }

    fn admit(&mut self, indices: &[usize], y: &DVector<f64>, b: &DMatrix<f64>) -> Result<()> {
        for &i in indices {
            assert!(!self.selected.contains(&i), "index {i} admitted twice");
            self.selected.push(i);
        }
        self.residual = ls_residual(y, b, &self.selected)?;
        self.iterations += 1;
        Ok(())
    }
}

fn finish(nodes: Vec<NodeState>, ledger: MessageLedger, rounds: Vec<FusionRound>) -> RecoveryResult {
    let (per_node_support, iterations) = nodes
        .into_iter()
        .map(|n| (n.selected, n.iterations))
        .unzip();
    RecoveryResult {
        per_node_support,
        iterations,
        ledger,
        rounds,
    }
}

/// DC-OMP 1: per-node OMP with one index exchanged per iteration.
pub fn dcomp1(
    obs: &ObservationSet,
    meas: &MeasurementEnsemble,
    topology: &Topology,
    k: usize,
    mode: FusionMode,
) -> Result<RecoveryResult> {
    let c = check_inputs(obs, meas, topology, k)?;
    if mode == FusionMode::Full && !topology.is_complete() {
        return Err(invalid("full-network fusion requires a complete topology"));
    }
    let mut nodes: Vec<NodeState> = obs.per_node.iter().map(NodeState::start).collect();
    let mut ledger = MessageLedger::new(c.l_count);
    let mut rounds = Vec::new();

    for iteration in 1.. {
        let active: Vec<bool> = nodes.iter().map(|s| s.selected.len() < k).collect();
        if !active.iter().any(|&a| a) {
            break;
        }

        // Phase I: local argmax.
        let mut proposals = vec![None; c.l_count];
        let mut scores = vec![None; c.l_count];
        for l in (0..c.l_count).filter(|&l| active[l]) {
            let s = correlate(&nodes[l].residual, c.dicts[l]);
            proposals[l] = argmax_excluding(&s, &nodes[l].selected);
            scores[l] = Some(s);
        }

        // Phase II: one index to each neighbor, then fuse.
        for l in (0..c.l_count).filter(|&l| active[l]) {
            ledger.send_local(topology, l, 1)?;
        }
        let mut alpha_sets = vec![Vec::new(); c.l_count];
        let mut fused = vec![Vec::new(); c.l_count];
        for l in (0..c.l_count).filter(|&l| active[l]) {
            let own = proposals[l].expect("active node proposes");
            let room = k - nodes[l].selected.len();
            let admitted = match mode {
                FusionMode::Full => {
                    let alpha: Vec<usize> = proposals.iter().flatten().copied().collect();
                    let cand = index_fusion_full(&alpha, &nodes[l].selected);
                    let admitted = cap_admission(cand, &alpha, None, room);
                    alpha_sets[l] = alpha;
                    admitted
                }
                FusionMode::Neighborhood => {
                    let received: Vec<usize> = topology
                        .neighbors(l)
                        .iter()
                        .filter_map(|&j| proposals[j])
                        .collect();
                    let cand = index_fusion_neighborhood(own, &received, &nodes[l].selected);
                    let mut alpha = vec![own];
                    alpha.extend_from_slice(&received);
                    let admitted = cap_admission(cand, &alpha, scores[l].as_ref(), room);
                    alpha_sets[l] = alpha;
                    admitted
                }
            };
            fused[l] = admitted;
        }

        for l in (0..c.l_count).filter(|&l| active[l]) {
            nodes[l].admit(&fused[l], &obs.per_node[l], c.dicts[l])?;
        }
        rounds.push(FusionRound {
            iteration,
            proposals,
            alpha_sets,
            fused,
        });
    }
    Ok(finish(nodes, ledger, rounds))
}

/// DC-OMP 2: one-hop correlation sums in Phase I, network-wide index
/// fusion in Phase II.
pub fn dcomp2(
    obs: &ObservationSet,
    meas: &MeasurementEnsemble,
    topology: &Topology,
    k: usize,
) -> Result<RecoveryResult> {
    let c = check_inputs(obs, meas, topology, k)?;
    let mut nodes: Vec<NodeState> = obs.per_node.iter().map(NodeState::start).collect();
    let mut ledger = MessageLedger::new(c.l_count);
    let mut rounds = Vec::new();
    // Summation order is fixed to ascending node id so that a complete
    // neighborhood reproduces the S-OMP score bit for bit.
    let neighborhoods: Vec<Vec<usize>> = (0..c.l_count)
        .map(|l| {
            let mut g: Vec<usize> = topology.neighbors(l).to_vec();
            g.push(l);
            g.sort_unstable();
            g
        })
        .collect();

    for iteration in 1.. {
        if nodes.iter().all(|s| s.selected.len() >= k) {
            break;
        }
        let f: Vec<DVector<f64>> = (0..c.l_count)
            .map(|l| correlate(&nodes[l].residual, c.dicts[l]))
            .collect();
        for l in 0..c.l_count {
            ledger.send_local(topology, l, c.n)?;
        }
        let mut proposals = vec![None; c.l_count];
        for l in 0..c.l_count {
            let g = neighborhoods[l]
                .iter()
                .fold(DVector::zeros(c.n), |acc, &j| acc + &f[j]);
            proposals[l] = argmax_excluding(&g, &nodes[l].selected);
        }
        for l in 0..c.l_count {
            ledger.send_global(topology, l, 1)?;
        }
        let alpha: Vec<usize> = proposals.iter().flatten().copied().collect();
        let mut fused = vec![Vec::new(); c.l_count];
        for l in 0..c.l_count {
            let room = k - nodes[l].selected.len();
            let cand = index_fusion_full(&alpha, &nodes[l].selected);
            fused[l] = cap_admission(cand, &alpha, None, room);
        }
        for l in 0..c.l_count {
            nodes[l].admit(&fused[l], &obs.per_node[l], c.dicts[l])?;
        }
        rounds.push(FusionRound {
            iteration,
            proposals,
            alpha_sets: vec![alpha; c.l_count],
            fused,
        });
    }
    Ok(finish(nodes, ledger, rounds))
}

/// Top-`k` indices by vote count; ties go to the smaller index.
pub fn majority_vote(estimates: &[Vec<usize>], k: usize) -> Vec<usize> {
    let votes = counts(&estimates.concat());
    let mut ranked: Vec<(usize, usize)> = votes.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(i, _)| i).collect()
}

/// D-OMP: independent OMP at every node, then a single majority-vote fusion
/// that every node adopts.
pub fn domp_majority(
    obs: &ObservationSet,
    meas: &MeasurementEnsemble,
    topology: &Topology,
    k: usize,
) -> Result<RecoveryResult> {
    let c = check_inputs(obs, meas, topology, k)?;
    let mut ledger = MessageLedger::new(c.l_count);
    let estimates = (0..c.l_count)
        .map(|l| simultaneous(std::slice::from_ref(&obs.per_node[l]), &[c.dicts[l]], k))
        .collect::<Result<Vec<_>>>()?;
    for l in 0..c.l_count {
        ledger.send_global(topology, l, k)?;
    }
    let fused = majority_vote(&estimates, k);
    Ok(RecoveryResult {
        per_node_support: vec![fused; c.l_count],
        iterations: vec![k; c.l_count],
        ledger,
        rounds: Vec::new(),
    })
}

/// S-OMP run at every node, accounting for each node shipping its length-N
/// correlation vector network-wide on every iteration.
pub fn somp_networked(
    obs: &ObservationSet,
    meas: &MeasurementEnsemble,
    topology: &Topology,
    k: usize,
) -> Result<RecoveryResult> {
    let c = check_inputs(obs, meas, topology, k)?;
    let support = simultaneous(&obs.per_node, &c.dicts, k)?;
    let mut ledger = MessageLedger::new(c.l_count);
    for _ in 0..k {
        for l in 0..c.l_count {
            ledger.send_global(topology, l, c.n)?;
        }
    }
    Ok(RecoveryResult {
        per_node_support: vec![support; c.l_count],
        iterations: vec![k; c.l_count],
        ledger,
        rounds: Vec::new(),
    })
}
