//! Capacity-constrained clustering of the network onto crossbars.
//!
//! A cluster is what one crossbar hosts. Its *outputs* are the neurons mapped
//! to it; its *inputs* are the distinct presynaptic sources (inside or outside
//! the cluster) of those neurons. Both are bounded by the crossbar capacity
//! `m`, and so is every neuron's presynaptic degree. The objective is the
//! global spike cost: the sum, over synapses whose endpoints sit in different
//! clusters, of the presynaptic neuron's spike count.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pso::{self, PsoParams};
use crate::snn::{NeuronId, SnnNetwork, SpikeTrace};
use crate::Deadline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionAlgo {
    Greedy,
    Pso,
    /// Round-robin neuron-to-cluster assignment; stand-in for a load-balancing baseline.
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionParams {
    /// Crossbar capacity `m`.
    pub capacity: u32,
    /// Upper bound on the number of clusters (usually the crossbar count).
    pub max_clusters: Option<usize>,
}

impl PartitionParams {
    pub fn new(capacity: u32) -> Self {
        Self {
            capacity,
            max_clusters: None,
        }
    }

    pub fn with_max_clusters(mut self, k: usize) -> Self {
        self.max_clusters = Some(k);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredSnn {
    pub capacity: u32,
    /// Cluster id per neuron, ids dense in `0..clusters.len()`.
    pub cluster_of: Vec<usize>,
    /// Member neurons per cluster, ascending.
    pub clusters: Vec<Vec<NeuronId>>,
    /// Indices into the network's synapse list of inter-cluster synapses.
    pub global_synapses: Vec<usize>,
    pub global_spike_cost: u64,
}

impl ClusteredSnn {
    /// Builds the derived fields from a raw assignment. Cluster ids are
    /// compacted to `0..k` preserving their relative order.
    pub fn from_assignment(net: &SnnNetwork, trace: &SpikeTrace, capacity: u32, assignment: &[usize]) -> Self {
        let pairs: Vec<(NeuronId, NeuronId)> = net.synapses.iter().map(|s| (s.pre, s.post)).collect();
        Self::build(&pairs, trace, capacity, assignment)
    }

    /// Like [`ClusteredSnn::from_assignment`], taking connectivity from the
    /// trace's weight list (which mirrors the network's synapse order).
    pub fn from_trace_assignment(trace: &SpikeTrace, capacity: u32, assignment: &[usize]) -> Self {
        let pairs: Vec<(NeuronId, NeuronId)> = trace.weights.iter().map(|&(a, b, _)| (a, b)).collect();
        Self::build(&pairs, trace, capacity, assignment)
    }

    fn build(pairs: &[(NeuronId, NeuronId)], trace: &SpikeTrace, capacity: u32, assignment: &[usize]) -> Self {
        let mut ids: Vec<usize> = assignment.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let relabel: HashMap<usize, usize> = ids.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let cluster_of: Vec<usize> = assignment.iter().map(|c| relabel[c]).collect();
        let mut clusters = vec![Vec::new(); ids.len()];
        for (n, &c) in cluster_of.iter().enumerate() {
            clusters[c].push(n);
        }
        let global_synapses: Vec<usize> = pairs
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| cluster_of[a] != cluster_of[b])
            .map(|(k, _)| k)
            .collect();
        let global_spike_cost = global_synapses
            .iter()
            .map(|&k| trace.spike_count(pairs[k].0) as u64)
            .sum();
        Self {
            capacity,
            cluster_of,
            clusters,
            global_synapses,
            global_spike_cost,
        }
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Checks the capacity invariants against `net`.
    pub fn validate(&self, net: &SnnNetwork) -> Result<()> {
        let n = net.neuron_count();
        if self.cluster_of.len() != n {
            return Err(Error::MismatchedClustering(format!(
                "clustering covers {} neurons, network has {n}",
                self.cluster_of.len()
            )));
        }
        let k = self.clusters.len();
        if let Some(&c) = self.cluster_of.iter().find(|&&c| c >= k) {
            return Err(Error::MismatchedClustering(format!("cluster id {c} >= {k}")));
        }
        let m = self.capacity as usize;
        let pres = presynaptic(net);
        for (c, members) in self.clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::MismatchedClustering(format!("cluster {c} is empty")));
            }
            if members.iter().any(|&i| self.cluster_of[i] != c) {
                return Err(Error::MismatchedClustering(format!(
                    "cluster {c} member list disagrees with cluster_of"
                )));
            }
            if members.len() > m {
                return Err(Error::CapacityExceeded(format!(
                    "cluster {c} has {} outputs > {m}",
                    members.len()
                )));
            }
            let mut inputs: Vec<NeuronId> =
                members.iter().flat_map(|&i| pres[i].iter().copied()).collect();
            inputs.sort_unstable();
            inputs.dedup();
            if inputs.len() > m {
                return Err(Error::CapacityExceeded(format!(
                    "cluster {c} has {} inputs > {m}",
                    inputs.len()
                )));
            }
        }
        if self.clusters.iter().map(Vec::len).sum::<usize>() != n {
            return Err(Error::MismatchedClustering("clusters do not cover every neuron once".into()));
        }
        Ok(())
    }
}

/// Independent recomputation of the objective from an assignment.
pub fn global_spike_cost(net: &SnnNetwork, trace: &SpikeTrace, cluster_of: &[usize]) -> u64 {
    net.synapses
        .iter()
        .filter(|s| cluster_of[s.pre] != cluster_of[s.post])
        .map(|s| trace.spike_count(s.pre) as u64)
        .sum()
}

fn presynaptic(net: &SnnNetwork) -> Vec<Vec<NeuronId>> {
    let mut pres: Vec<Vec<NeuronId>> = vec![Vec::new(); net.neuron_count()];
    for s in &net.synapses {
        pres[s.post].push(s.pre);
    }
    for p in &mut pres {
        p.sort_unstable();
        p.dedup();
    }
    pres
}

/// Incremental bookkeeping of cluster occupancy and input sets.
#[derive(Clone)]
struct ClusterState<'a> {
    capacity: usize,
    pres: &'a [Vec<NeuronId>],
    cluster_of: Vec<Option<usize>>,
    members: Vec<usize>,
    /// Per cluster: source neuron -> number of members fed by it.
    sources: Vec<HashMap<NeuronId, u32>>,
}

impl<'a> ClusterState<'a> {
    fn new(n: usize, capacity: usize, pres: &'a [Vec<NeuronId>]) -> Self {
        Self {
            capacity,
            pres,
            cluster_of: vec![None; n],
            members: Vec::new(),
            sources: Vec::new(),
        }
    }

    fn clusters(&self) -> usize {
        self.members.len()
    }

    fn open(&mut self) -> usize {
        self.members.push(0);
        self.sources.push(HashMap::new());
        self.members.len() - 1
    }

    fn can_add(&self, i: NeuronId, c: usize) -> bool {
        if self.members[c] + 1 > self.capacity {
            return false;
        }
        let src = &self.sources[c];
        let fresh = self.pres[i].iter().filter(|p| !src.contains_key(p)).count();
        src.len() + fresh <= self.capacity
    }

    fn add(&mut self, i: NeuronId, c: usize) {
        debug_assert!(self.cluster_of[i].is_none());
        self.cluster_of[i] = Some(c);
        self.members[c] += 1;
        for &p in &self.pres[i] {
            *self.sources[c].entry(p).or_insert(0) += 1;
        }
    }

    fn remove(&mut self, i: NeuronId) {
        let c = self.cluster_of[i].take().expect("neuron is assigned");
        self.members[c] -= 1;
        for &p in &self.pres[i] {
            let e = self.sources[c].get_mut(&p).expect("source tracked");
            *e -= 1;
            if *e == 0 {
                self.sources[c].remove(&p);
            }
        }
    }

    /// Exchanges the clusters of `i` and `j` if both fit afterwards.
    fn try_swap(&mut self, i: NeuronId, j: NeuronId) -> bool {
        let (ci, cj) = (self.cluster_of[i].unwrap(), self.cluster_of[j].unwrap());
        self.remove(i);
        self.remove(j);
        if self.can_add(i, cj) {
            self.add(i, cj);
            if self.can_add(j, ci) {
                self.add(j, ci);
                return true;
            }
            self.remove(i);
        }
        self.add(i, ci);
        self.add(j, cj);
        false
    }

    fn assignment(&self) -> Vec<usize> {
        self.cluster_of.iter().map(|c| c.expect("all neurons assigned")).collect()
    }
}

fn check_feasible(net: &SnnNetwork, trace: &SpikeTrace, params: &PartitionParams) -> Result<Vec<Vec<NeuronId>>> {
    net.validate()?;
    if trace.neuron_count() != net.neuron_count() {
        return Err(Error::MismatchedClustering(format!(
            "trace has {} neurons, network has {}",
            trace.neuron_count(),
            net.neuron_count()
        )));
    }
    if params.capacity == 0 {
        return Err(Error::range("capacity", "must be at least 1"));
    }
    let m = params.capacity as usize;
    let pres = presynaptic(net);
    if let Some((i, p)) = pres.iter().enumerate().find(|(_, p)| p.len() > m) {
        return Err(Error::Infeasible(format!(
            "neuron {i} has {} presynaptic neurons but a crossbar accepts at most {m}; raise the capacity",
            p.len()
        )));
    }
    if let Some(k) = params.max_clusters {
        if net.neuron_count() > k * m {
            return Err(Error::Infeasible(format!(
                "{} neurons do not fit in {k} crossbars of {m}; raise the capacity or mesh size",
                net.neuron_count()
            )));
        }
    }
    Ok(pres)
}

fn bfs_order(net: &SnnNetwork) -> Vec<NeuronId> {
    let n = net.neuron_count();
    let mut adj: Vec<Vec<NeuronId>> = vec![Vec::new(); n];
    for s in &net.synapses {
        if s.pre != s.post {
            adj[s.pre].push(s.post);
            adj[s.post].push(s.pre);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order
}

/// Places neurons in `order`: current cluster first, then the lowest-id
/// feasible cluster, then a fresh one. `None` if the cluster limit is hit.
fn first_fit<'a>(
    n: usize,
    capacity: usize,
    pres: &'a [Vec<NeuronId>],
    order: &[NeuronId],
    max_clusters: Option<usize>,
) -> Option<ClusterState<'a>> {
    let mut st = ClusterState::new(n, capacity, pres);
    let mut current: Option<usize> = None;
    for &i in order {
        let target = match current.filter(|&c| st.can_add(i, c)) {
            Some(c) => c,
            None => match (0..st.clusters()).find(|&c| st.can_add(i, c)) {
                Some(c) => c,
                None => {
                    if max_clusters.is_some_and(|k| st.clusters() >= k) {
                        return None;
                    }
                    st.open()
                }
            },
        };
        st.add(i, target);
        current = Some(target);
    }
    Some(st)
}

/// Initial clustering: BFS order under capacity. If that exceeds the cluster
/// limit, packs constrained neurons (largest fan-in first) before
/// unconstrained ones, which fill the remaining slots.
fn seed_clusters<'a>(
    net: &SnnNetwork,
    pres: &'a [Vec<NeuronId>],
    params: &PartitionParams,
) -> Result<ClusterState<'a>> {
    let n = net.neuron_count();
    let m = params.capacity as usize;
    if let Some(st) = first_fit(n, m, pres, &bfs_order(net), params.max_clusters) {
        return Ok(st);
    }
    let mut order: Vec<NeuronId> = (0..n).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(pres[i].len()), i));
    if let Some(st) = first_fit(n, m, pres, &order, params.max_clusters) {
        return Ok(st);
    }
    let k = params.max_clusters.unwrap_or(n);
    backtrack_fit(n, m, k, pres, &order).ok_or_else(|| {
        Error::Infeasible(format!(
            "could not pack {n} neurons into {k} crossbars of capacity {m}; raise the capacity or mesh size"
        ))
    })
}

const BACKTRACK_BUDGET: usize = 1 << 18;

/// Depth-first search for any feasible packing into `k` clusters, giving up
/// after a fixed number of placements. Empty clusters are interchangeable,
/// so only the first one is ever tried.
fn backtrack_fit<'a>(
    n: usize,
    capacity: usize,
    k: usize,
    pres: &'a [Vec<NeuronId>],
    order: &[NeuronId],
) -> Option<ClusterState<'a>> {
    fn go(st: &mut ClusterState<'_>, order: &[NeuronId], depth: usize, used: usize, budget: &mut usize) -> bool {
        let Some(&i) = order.get(depth) else { return true };
        let limit = (used + 1).min(st.clusters());
        for c in 0..limit {
            if *budget == 0 {
                return false;
            }
            if !st.can_add(i, c) {
                continue;
            }
            *budget -= 1;
            st.add(i, c);
            if go(st, order, depth + 1, used.max(c + 1), budget) {
                return true;
            }
            st.remove(i);
        }
        false
    }
    let mut st = ClusterState::new(n, capacity, pres);
    for _ in 0..k {
        st.open();
    }
    let mut budget = BACKTRACK_BUDGET;
    go(&mut st, order, 0, 0, &mut budget).then_some(st)
}

struct Adjacency {
    out: Vec<Vec<NeuronId>>,
    inc: Vec<Vec<NeuronId>>,
}

impl Adjacency {
    fn new(net: &SnnNetwork) -> Self {
        let n = net.neuron_count();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for s in &net.synapses {
            if s.pre != s.post {
                out[s.pre].push(s.post);
                inc[s.post].push(s.pre);
            }
        }
        Self { out, inc }
    }

    /// Cost reduction from moving `i` out of `from` into `to`.
    fn gain(&self, spikes: &[u64], cluster_of: &[Option<usize>], i: NeuronId, from: usize, to: usize) -> i64 {
        let mut g = 0i64;
        for &j in &self.out[i] {
            let cj = cluster_of[j].unwrap();
            g += spikes[i] as i64 * ((cj != from) as i64 - (cj != to) as i64);
        }
        for &j in &self.inc[i] {
            let cj = cluster_of[j].unwrap();
            g += spikes[j] as i64 * ((cj != from) as i64 - (cj != to) as i64);
        }
        g
    }

    /// Spike weight of the synapses joining `i` and `j` in either direction.
    fn between(&self, spikes: &[u64], i: NeuronId, j: NeuronId) -> i64 {
        let fwd = self.out[i].iter().filter(|&&x| x == j).count() as i64 * spikes[i] as i64;
        let bwd = self.out[j].iter().filter(|&&x| x == i).count() as i64 * spikes[j] as i64;
        fwd + bwd
    }
}

#[derive(Debug, Clone)]
pub struct GreedyRun {
    pub clustering: ClusteredSnn,
    /// Cost of the seed clustering followed by the cost after each accepted move.
    pub cost_history: Vec<u64>,
}

/// Kernighan–Lin style refinement of a BFS seed clustering.
///
/// Each pass visits neurons by descending spike count and applies, per
/// neuron, the capacity-feasible move with the largest positive reduction
/// in global spike cost. When no single move helps (typically because the
/// target clusters are full), the neuron may instead swap places with a
/// neuron of another cluster. Passes repeat until one changes nothing.
pub fn partition_greedy(net: &SnnNetwork, trace: &SpikeTrace, params: &PartitionParams) -> Result<ClusteredSnn> {
    partition_greedy_traced(net, trace, params).map(|r| r.clustering)
}

pub fn partition_greedy_traced(
    net: &SnnNetwork,
    trace: &SpikeTrace,
    params: &PartitionParams,
) -> Result<GreedyRun> {
    let pres = check_feasible(net, trace, params)?;
    let mut st = seed_clusters(net, &pres, params)?;
    let adj = Adjacency::new(net);
    let spikes: Vec<u64> = trace.spikes.iter().map(|s| s.len() as u64).collect();
    let mut cost = global_spike_cost(net, trace, &st.assignment()) as i64;
    let mut history = vec![cost as u64];
    refine(&mut st, &adj, &spikes, &mut cost, &mut history);

    let clustering = ClusteredSnn::from_assignment(net, trace, params.capacity, &st.assignment());
    debug_assert_eq!(clustering.global_spike_cost, cost as u64);
    Ok(GreedyRun {
        clustering,
        cost_history: history,
    })
}

fn refine(st: &mut ClusterState<'_>, adj: &Adjacency, spikes: &[u64], cost: &mut i64, history: &mut Vec<u64>) {
    loop {
        hill_climb(st, adj, spikes, cost, history);
        let g = tentative_pass(st, adj, spikes);
        if g <= 0 {
            break;
        }
        *cost -= g;
        history.push(*cost as u64);
    }
}

fn hill_climb(st: &mut ClusterState<'_>, adj: &Adjacency, spikes: &[u64], cost: &mut i64, history: &mut Vec<u64>) {
    let n = st.cluster_of.len();
    let mut order: Vec<NeuronId> = (0..n).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(spikes[i]), i));
    loop {
        let mut changed = false;
        for &i in &order {
            let from = st.cluster_of[i].unwrap();
            let mut best: Option<(i64, usize)> = None;
            for to in 0..st.clusters() {
                if to == from || !st.can_add(i, to) {
                    continue;
                }
                let g = adj.gain(spikes, &st.cluster_of, i, from, to);
                if g > 0 && best.is_none_or(|(bg, _)| g > bg) {
                    best = Some((g, to));
                }
            }
            if let Some((g, to)) = best {
                st.remove(i);
                st.add(i, to);
                *cost -= g;
                history.push(*cost as u64);
                changed = true;
            } else if let Some((g, j)) = best_swap(st, adj, spikes, i, &[]) {
                st.try_swap(i, j);
                *cost -= g;
                history.push(*cost as u64);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Longest tentative sequence explored by one escape pass.
const ESCAPE_STEPS: usize = 32;

#[derive(Clone, Copy)]
enum Step {
    Move(NeuronId, usize),
    Swap(NeuronId, NeuronId),
}

/// One Kernighan–Lin pass out of a local optimum: repeatedly applies the best
/// move or swap among unlocked neurons, even at a loss, locking what moved.
/// Keeps the prefix with the largest total gain and returns that gain; the
/// state is left unchanged when no prefix gains.
fn tentative_pass(st: &mut ClusterState<'_>, adj: &Adjacency, spikes: &[u64]) -> i64 {
    let n = st.cluster_of.len();
    let start = st.clone();
    let mut locked = vec![false; n];
    let mut steps = Vec::new();
    let (mut total, mut best_total, mut best_len) = (0i64, 0i64, 0usize);
    for _ in 0..n.min(ESCAPE_STEPS) {
        let mut best: Option<(i64, Step)> = None;
        for i in (0..n).filter(|&i| !locked[i]) {
            let from = st.cluster_of[i].unwrap();
            for to in 0..st.clusters() {
                if to == from || !st.can_add(i, to) {
                    continue;
                }
                let g = adj.gain(spikes, &st.cluster_of, i, from, to);
                if best.is_none_or(|(bg, _)| g > bg) {
                    best = Some((g, Step::Move(i, to)));
                }
            }
        }
        for i in (0..n).filter(|&i| !locked[i]) {
            let floor = best.map(|(g, _)| g);
            if let Some((g, j)) = best_swap_above(st, adj, spikes, i, &locked, floor) {
                best = Some((g, Step::Swap(i, j)));
            }
        }
        let Some((g, step)) = best else { break };
        apply(st, step);
        match step {
            Step::Move(i, _) => locked[i] = true,
            Step::Swap(i, j) => {
                locked[i] = true;
                locked[j] = true;
            }
        }
        steps.push(step);
        total += g;
        if total > best_total {
            best_total = total;
            best_len = steps.len();
        }
    }
    *st = start;
    for &step in &steps[..best_len] {
        apply(st, step);
    }
    best_total
}

fn apply(st: &mut ClusterState<'_>, step: Step) {
    match step {
        Step::Move(i, to) => {
            st.remove(i);
            st.add(i, to);
        }
        Step::Swap(i, j) => {
            let ok = st.try_swap(i, j);
            debug_assert!(ok);
        }
    }
}

fn best_swap(
    st: &mut ClusterState<'_>,
    adj: &Adjacency,
    spikes: &[u64],
    i: NeuronId,
    locked: &[bool],
) -> Option<(i64, NeuronId)> {
    best_swap_above(st, adj, spikes, i, locked, Some(0))
}

/// Best feasible exchange of `i` with an unlocked neuron in another cluster
/// whose gain beats `floor`, lowest partner id on ties.
fn best_swap_above(
    st: &mut ClusterState<'_>,
    adj: &Adjacency,
    spikes: &[u64],
    i: NeuronId,
    locked: &[bool],
    floor: Option<i64>,
) -> Option<(i64, NeuronId)> {
    let ci = st.cluster_of[i].unwrap();
    let mut best: Option<(i64, NeuronId)> = None;
    for j in 0..st.cluster_of.len() {
        let cj = st.cluster_of[j].unwrap();
        if cj == ci || locked.get(j).copied().unwrap_or(false) {
            continue;
        }
        let g = adj.gain(spikes, &st.cluster_of, i, ci, cj) + adj.gain(spikes, &st.cluster_of, j, cj, ci)
            - 2 * adj.between(spikes, i, j);
        let bar = best.map(|(bg, _)| bg).or(floor);
        if bar.is_some_and(|b| g <= b) {
            continue;
        }
        if st.try_swap(i, j) {
            st.try_swap(i, j);
            best = Some((g, j));
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct PsoRun {
    pub clustering: ClusteredSnn,
    /// Global-best cost per iteration (index 0 = initial swarm).
    pub cost_history: Vec<u64>,
}

pub fn partition_pso(
    net: &SnnNetwork,
    trace: &SpikeTrace,
    params: &PartitionParams,
    pso_params: &PsoParams,
    seed: u64,
) -> Result<ClusteredSnn> {
    partition_pso_traced(net, trace, params, pso_params, seed, &Deadline::none()).map(|r| r.clustering)
}

/// PSO over per-neuron cluster scores.
///
/// A position holds one score per (neuron, cluster). Decoding visits neurons
/// in id order and puts each in its highest-scoring cluster that still has
/// room, falling back to the next-highest score. The BFS seed clustering and
/// its greedy refinement are injected as the first particles, so the swarm
/// always holds a feasible solution.
pub fn partition_pso_traced(
    net: &SnnNetwork,
    trace: &SpikeTrace,
    params: &PartitionParams,
    pso_params: &PsoParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<PsoRun> {
    let pres = check_feasible(net, trace, params)?;
    let n = net.neuron_count();
    let m = params.capacity as usize;
    let seed_state = seed_clusters(net, &pres, params)?;
    let k = params.max_clusters.unwrap_or(seed_state.clusters()).max(seed_state.clusters());
    if n == 0 {
        return Ok(PsoRun {
            clustering: ClusteredSnn::from_assignment(net, trace, params.capacity, &[]),
            cost_history: vec![0],
        });
    }

    let decode = |pos: &[f64]| -> Option<Vec<usize>> {
        let mut st = ClusterState::new(n, m, &pres);
        for _ in 0..k {
            st.open();
        }
        let mut ranked: Vec<usize> = Vec::with_capacity(k);
        for i in 0..n {
            let scores = &pos[i * k..(i + 1) * k];
            ranked.clear();
            ranked.extend(0..k);
            ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            let c = ranked.iter().copied().find(|&c| st.can_add(i, c))?;
            st.add(i, c);
        }
        Some(st.assignment())
    };
    let fitness = |pos: &[f64]| match decode(pos) {
        Some(a) => global_spike_cost(net, trace, &a) as f64,
        None => f64::INFINITY,
    };

    let one_hot = |assignment: Vec<usize>| {
        let mut pos = vec![0.0; n * k];
        for (i, c) in assignment.into_iter().enumerate() {
            pos[i * k + c] = 1.0;
        }
        pos
    };
    let adj = Adjacency::new(net);
    let spikes: Vec<u64> = trace.spikes.iter().map(|s| s.len() as u64).collect();
    let mut refined = seed_state.clone();
    let mut cost = global_spike_cost(net, trace, &refined.assignment()) as i64;
    refine(&mut refined, &adj, &spikes, &mut cost, &mut Vec::new());
    let injected = [one_hot(seed_state.assignment()), one_hot(refined.assignment())];
    let out = pso::minimize(n * k, pso_params, seed, &injected, deadline, fitness)?;
    let assignment = decode(&out.best_position).expect("global best is feasible");
    Ok(PsoRun {
        clustering: ClusteredSnn::from_assignment(net, trace, params.capacity, &assignment),
        cost_history: out.history.iter().map(|&f| f as u64).collect(),
    })
}

/// Random feasible assignment: neurons in shuffled order, each into a
/// uniformly chosen cluster with room among `max_clusters` (or the minimum
/// count `ceil(n / m)` plus slack when unbounded).
pub fn partition_random(
    net: &SnnNetwork,
    trace: &SpikeTrace,
    params: &PartitionParams,
    seed: u64,
) -> Result<ClusteredSnn> {
    let pres = check_feasible(net, trace, params)?;
    let n = net.neuron_count();
    let m = params.capacity as usize;
    let k = params.max_clusters.unwrap_or_else(|| n.div_ceil(m).max(1) + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..256 {
        let mut order: Vec<NeuronId> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut st = ClusterState::new(n, m, &pres);
        for _ in 0..k {
            st.open();
        }
        let mut ok = true;
        for &i in &order {
            let feasible: Vec<usize> = (0..k).filter(|&c| st.can_add(i, c)).collect();
            if feasible.is_empty() {
                ok = false;
                break;
            }
            st.add(i, feasible[rng.gen_range(0..feasible.len())]);
        }
        if ok {
            return Ok(ClusteredSnn::from_assignment(net, trace, params.capacity, &st.assignment()));
        }
    }
    // Input limits are tight: scramble a feasible seed with random moves.
    let mut st = seed_clusters(net, &pres, params)?;
    while st.clusters() < k {
        st.open();
    }
    let k = st.clusters();
    for _ in 0..50 * n {
        let i = rng.gen_range(0..n);
        let to = rng.gen_range(0..k);
        let from = st.cluster_of[i].unwrap();
        if to == from {
            continue;
        }
        st.remove(i);
        if st.can_add(i, to) {
            st.add(i, to);
            continue;
        }
        st.add(i, from);
        let partners: Vec<NeuronId> = (0..n).filter(|&j| st.cluster_of[j] == Some(to)).collect();
        if let Some(&j) = partners.choose(&mut rng) {
            st.try_swap(i, j);
        }
    }
    Ok(ClusteredSnn::from_assignment(net, trace, params.capacity, &st.assignment()))
}

/// Round-robin baseline: neuron `i` goes to cluster `i mod k` or the next one
/// around the ring with room, for the smallest workable `k`.
pub fn partition_round_robin(net: &SnnNetwork, trace: &SpikeTrace, params: &PartitionParams) -> Result<ClusteredSnn> {
    let pres = check_feasible(net, trace, params)?;
    let n = net.neuron_count();
    let m = params.capacity as usize;
    let lo = n.div_ceil(m).max(1);
    let hi = params.max_clusters.unwrap_or(n.max(1)).max(lo);
    'k: for k in lo..=hi {
        let mut st = ClusterState::new(n, m, &pres);
        for _ in 0..k {
            st.open();
        }
        for i in 0..n {
            match (0..k).map(|d| (i + d) % k).find(|&c| st.can_add(i, c)) {
                Some(c) => st.add(i, c),
                None => continue 'k,
            }
        }
        return Ok(ClusteredSnn::from_assignment(net, trace, params.capacity, &st.assignment()));
    }
    Err(Error::Infeasible(format!(
        "round-robin assignment of {n} neurons does not fit {hi} clusters of capacity {m}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{LifParams, NeuronModel, SpikeSchedule, Synapse};

    fn lif() -> NeuronModel {
        NeuronModel::Lif(LifParams {
            tau_m: 10.0,
            v_rest: -65.0,
            v_thresh: -50.0,
            v_reset: -65.0,
            t_refrac: 1.0,
            bias: 0.0,
        })
    }

    fn chain() -> (SnnNetwork, SpikeTrace) {
        let net = SnnNetwork::new(
            vec![NeuronModel::SpikeSource(SpikeSchedule::Times(vec![1.0, 2.0])), lif()],
            vec![Synapse { pre: 0, post: 1, weight: 1.0, delay: 1 }],
        );
        let trace = SpikeTrace {
            spikes: vec![vec![1, 2], vec![]],
            weights: vec![(0, 1, 1.0)],
            duration: 5,
        };
        (net, trace)
    }

    #[test]
    fn chain_lands_in_one_cluster() {
        let (net, trace) = chain();
        let c = partition_greedy(&net, &trace, &PartitionParams::new(2)).unwrap();
        assert_eq!(c.cluster_count(), 1);
        assert_eq!(c.global_spike_cost, 0);
        c.validate(&net).unwrap();
    }

    #[test]
    fn fanin_above_capacity_is_infeasible() {
        let mut neurons = vec![lif()];
        let mut synapses = vec![];
        for i in 1..=3 {
            neurons.push(NeuronModel::SpikeSource(SpikeSchedule::Times(vec![])));
            synapses.push(Synapse { pre: i, post: 0, weight: 1.0, delay: 1 });
        }
        let net = SnnNetwork::new(neurons, synapses);
        let trace = SpikeTrace::empty(4, 10);
        assert!(matches!(
            partition_greedy(&net, &trace, &PartitionParams::new(2)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn too_few_clusters_is_infeasible() {
        let net = SnnNetwork::new(vec![lif(); 5], vec![]);
        let trace = SpikeTrace::empty(5, 10);
        let p = PartitionParams::new(2).with_max_clusters(2);
        assert!(matches!(partition_greedy(&net, &trace, &p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn pso_single_cluster_costs_nothing() {
        let (net, trace) = chain();
        let pso = PsoParams { swarm_size: 3, iterations: 5, w: 2.0, c1: 0.0, c2: 4.0 };
        let c = partition_pso(&net, &trace, &PartitionParams::new(2).with_max_clusters(1), &pso, 9).unwrap();
        assert_eq!(c.global_spike_cost, 0);
    }

    #[test]
    fn round_robin_spreads_neurons() {
        let net = SnnNetwork::new(vec![lif(); 4], vec![]);
        let trace = SpikeTrace::empty(4, 10);
        let c = partition_round_robin(&net, &trace, &PartitionParams::new(2)).unwrap();
        assert_eq!(c.cluster_of, vec![0, 1, 0, 1]);
    }
}
