//! Undirected connected topologies and the message ledger used to account
//! for every scalar a simulated node transmits.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Retry cap for rejection sampling of connected random graphs.
pub const RANDOM_TOPOLOGY_RETRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopologyKind {
    /// Every node neighbors every other node.
    Complete,
    /// Circulant graph where every node has exactly `n0` neighbors.
    ///
    /// Even `n0` links each node to its `n0/2` nearest ids on either side.
    /// Odd `n0` (even node count only) adds the diametrically opposite node.
    Ring { n0: usize },
    /// Erdős–Rényi draws with edge probability `p`, redrawn until connected.
    RandomConnected { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology from undirected edges; rejects self-loops,
    /// out-of-range endpoints and disconnected graphs.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(invalid("topology needs at least one node"));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(invalid(format!("self-loop at node {a}")));
            }
            if a >= node_count || b >= node_count {
                return Err(invalid(format!("edge ({a}, {b}) out of range")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in &set {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let topo = Self {
            node_count,
            edges: set,
            adjacency,
        };
        if !topo.is_connected() {
            return Err(invalid("topology is not connected"));
        }
        Ok(topo)
    }

    pub fn complete(node_count: usize) -> Result<Self> {
        let edges = (0..node_count).flat_map(|a| (a + 1..node_count).map(move |b| (a, b)));
        Self::from_edges(node_count, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    /// Neighbor ids of `node`, ascending. Excludes `node` itself.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn neighborhood_sizes(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.adjacency.iter().all(|a| a.len() + 1 == self.node_count)
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.node_count
    }
}

pub fn build_topology<R: Rng + ?Sized>(
    kind: TopologyKind,
    l_count: usize,
    rng: &mut R,
) -> Result<Topology> {
    if l_count < 2 {
        return Err(invalid(format!("topology needs at least 2 nodes, got {l_count}")));
    }
    match kind {
        TopologyKind::Complete => Topology::complete(l_count),
        TopologyKind::Ring { n0 } => ring(n0, l_count),
        TopologyKind::RandomConnected { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid(format!("edge probability must lie in (0, 1], got {p}")));
            }
            for _ in 0..RANDOM_TOPOLOGY_RETRIES {
                let mut edges = Vec::new();
                for a in 0..l_count {
                    for b in a + 1..l_count {
                        if rng.random::<f64>() < p {
                            edges.push((a, b));
                        }
                    }
                }
                match Topology::from_edges(l_count, edges) {
                    Ok(t) => return Ok(t),
                    Err(Error::InvalidParameter(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(invalid(format!(
                "no connected graph with p={p} after {RANDOM_TOPOLOGY_RETRIES} draws"
            )))
        }
    }
}

fn ring(n0: usize, l_count: usize) -> Result<Topology> {
    if n0 == 0 || n0 >= l_count {
        return Err(invalid(format!("neighborhood size must satisfy 1 <= n0 < L, got n0={n0}, L={l_count}")));
    }
    if n0 % 2 == 1 && l_count % 2 == 1 {
        return Err(invalid(format!("odd neighborhood size {n0} needs an even node count, got {l_count}")));
    }
    let mut offsets: Vec<usize> = (1..=n0 / 2).collect();
    if n0 % 2 == 1 {
        offsets.push(l_count / 2);
    }
    let edges = (0..l_count).flat_map(|a| offsets.iter().map(move |&o| (a, (a + o) % l_count)));
    let topo = Topology::from_edges(l_count, edges)
        .map_err(|_| invalid(format!("ring with n0={n0}, L={l_count} is not connected")))?;
    debug_assert!(topo.adjacency.iter().all(|a| a.len() == n0));
    Ok(topo)
}

/// Scalars and point-to-point messages sent by one node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NodeCounts {
    pub local_scalars: u64,
    pub global_scalars: u64,
    pub local_messages: u64,
    pub global_messages: u64,
}

/// Transmission counts for one simulated run. Delivery is pairwise: a value
/// sent to `d` receivers counts `d` times.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MessageLedger {
    pub local_scalar_count: u64,
    pub global_scalar_count: u64,
    pub local_message_count: u64,
    pub global_message_count: u64,
    pub per_node_counts: Vec<NodeCounts>,
}

impl MessageLedger {
    pub fn new(node_count: usize) -> Self {
        Self {
            per_node_counts: vec![NodeCounts::default(); node_count],
            ..Self::default()
        }
    }

    /// One-hop send of `payload_len` scalars to every neighbor of `sender`.
    pub fn send_local(&mut self, topology: &Topology, sender: usize, payload_len: usize) -> Result<()> {
        let receivers = topology.degree(sender) as u64;
        let scalars = self.check(sender, payload_len)? * receivers;
        self.local_scalar_count += scalars;
        self.local_message_count += receivers;
        let node = &mut self.per_node_counts[sender];
        node.local_scalars += scalars;
        node.local_messages += receivers;
        Ok(())
    }

    /// Network-wide send of `payload_len` scalars to every other node.
    pub fn send_global(&mut self, topology: &Topology, sender: usize, payload_len: usize) -> Result<()> {
        let receivers = (topology.node_count() - 1) as u64;
        let scalars = self.check(sender, payload_len)? * receivers;
        self.global_scalar_count += scalars;
        self.global_message_count += receivers;
        let node = &mut self.per_node_counts[sender];
        node.global_scalars += scalars;
        node.global_messages += receivers;
        Ok(())
    }

    fn check(&self, sender: usize, payload_len: usize) -> Result<u64> {
        if payload_len == 0 {
            return Err(invalid("payload must hold at least one scalar"));
        }
        if sender >= self.per_node_counts.len() {
            return Err(invalid(format!("sender {sender} is not in the ledger")));
        }
        Ok(payload_len as u64)
    }
}
