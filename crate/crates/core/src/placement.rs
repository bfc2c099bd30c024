//! Cluster-to-crossbar placement on the mesh.
//!
//! Cost model: every packet from cluster A to cluster B travels
//! `manhattan(A, B)` hops, so the hop cost of a placement is the
//! packet-weighted sum of inter-cluster distances. A spike sends one packet
//! per distinct destination cluster. The PSO search encodes a
//! placement as a priority ("random key") per crossbar.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::HardwareConfig;
use crate::error::{Error, Result};
use crate::mesh::{Coord, Mesh};
use crate::noc;
use crate::partition::ClusteredSnn;
use crate::pso::{self, PsoParams};
use crate::snn::SpikeTrace;
use crate::Deadline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementAlgo {
    Pso,
    Identity,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub mesh: Mesh,
    /// Crossbar coordinate per cluster.
    pub crossbar_of: Vec<Coord>,
}

impl Placement {
    /// Cluster `k` on the `k`-th crossbar in row-major order.
    pub fn identity(clusters: usize, mesh: Mesh) -> Result<Self> {
        check_fits(clusters, mesh)?;
        Ok(Self {
            mesh,
            crossbar_of: (0..clusters).map(|k| mesh.coord(k)).collect(),
        })
    }

    pub fn random(clusters: usize, mesh: Mesh, seed: u64) -> Result<Self> {
        check_fits(clusters, mesh)?;
        let mut slots: Vec<usize> = (0..mesh.len()).collect();
        slots.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self {
            mesh,
            crossbar_of: slots[..clusters].iter().map(|&i| mesh.coord(i)).collect(),
        })
    }

    pub fn crossbar_index(&self, cluster: usize) -> usize {
        self.mesh.index(self.crossbar_of[cluster])
    }

    /// Checks bounds and injectivity, and that it covers `clusters` clusters.
    pub fn validate(&self, clusters: usize) -> Result<()> {
        if self.crossbar_of.len() != clusters {
            return Err(Error::MismatchedClustering(format!(
                "placement covers {} clusters, clustering has {clusters}",
                self.crossbar_of.len()
            )));
        }
        let mut used = vec![None; self.mesh.len()];
        for (k, &c) in self.crossbar_of.iter().enumerate() {
            if !self.mesh.contains(c) {
                return Err(Error::InvalidPlacement(format!(
                    "cluster {k} at {c} lies outside the {}x{} mesh",
                    self.mesh.width, self.mesh.height
                )));
            }
            let slot = &mut used[self.mesh.index(c)];
            if let Some(other) = *slot {
                return Err(Error::InvalidPlacement(format!(
                    "clusters {other} and {k} share crossbar {c}"
                )));
            }
            *slot = Some(k);
        }
        Ok(())
    }
}

fn check_fits(clusters: usize, mesh: Mesh) -> Result<()> {
    if clusters > mesh.len() {
        return Err(Error::Infeasible(format!(
            "{clusters} clusters need more than the {} crossbars of a {}x{} mesh",
            mesh.len(),
            mesh.width,
            mesh.height
        )));
    }
    Ok(())
}

/// Spikes carried between each ordered pair of distinct clusters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterTraffic {
    pub clusters: usize,
    /// `(from, to, spikes)`, sorted, `from != to`, `spikes > 0`.
    pub edges: Vec<(usize, usize, u64)>,
}

impl ClusterTraffic {
    /// Packets each cluster sends to each other cluster: one per presynaptic
    /// spike and distinct destination cluster, as the interconnect carries them.
    pub fn from_trace(cluster_of: &[usize], clusters: usize, trace: &SpikeTrace) -> Result<Self> {
        if cluster_of.len() != trace.neuron_count() {
            return Err(Error::MismatchedClustering(format!(
                "clustering covers {} neurons, trace has {}",
                cluster_of.len(),
                trace.neuron_count()
            )));
        }
        let mut targets: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(pre, post, _) in &trace.weights {
            if cluster_of[pre] != cluster_of[post] {
                targets.insert((pre, cluster_of[post]));
            }
        }
        let mut acc: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (pre, to) in targets {
            let s = trace.spike_count(pre) as u64;
            if s > 0 {
                *acc.entry((cluster_of[pre], to)).or_insert(0) += s;
            }
        }
        Ok(Self {
            clusters,
            edges: acc.into_iter().map(|((a, b), s)| (a, b, s)).collect(),
        })
    }

    pub fn for_clustering(c: &ClusteredSnn, trace: &SpikeTrace) -> Result<Self> {
        Self::from_trace(&c.cluster_of, c.cluster_count(), trace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopCost {
    /// Σ packets(A→B) · hops(A, B) over inter-cluster edges.
    pub total: u64,
    /// Largest hop count of any single inter-cluster edge.
    pub max_edge_hops: u32,
    /// Longest source-to-sink route through the cluster graph, in segments.
    pub max_route_segments: u32,
}

/// Analytic hop cost of `placement` for `clustering` under `trace`.
pub fn hop_cost(placement: &Placement, clustering: &ClusteredSnn, trace: &SpikeTrace) -> Result<HopCost> {
    placement.validate(clustering.cluster_count())?;
    let traffic = ClusterTraffic::for_clustering(clustering, trace)?;
    Ok(hop_cost_of(placement, &traffic))
}

pub fn hop_cost_of(placement: &Placement, traffic: &ClusterTraffic) -> HopCost {
    let hops = |a: usize, b: usize| placement.crossbar_of[a].manhattan(placement.crossbar_of[b]);
    let total = traffic.edges.iter().map(|&(a, b, s)| s * hops(a, b) as u64).sum();
    let max_edge_hops = traffic.edges.iter().map(|&(a, b, _)| hops(a, b)).max().unwrap_or(0);
    HopCost {
        total,
        max_edge_hops,
        max_route_segments: longest_route(traffic, hops),
    }
}

/// Longest path through the cluster graph with hop-weighted edges.
///
/// Recurrent groups (strongly connected components) are collapsed; each one
/// contributes its longest internal edge once.
fn longest_route(traffic: &ClusterTraffic, hops: impl Fn(usize, usize) -> u32) -> u32 {
    let k = traffic.clusters;
    if k == 0 {
        return 0;
    }
    let mut adj = vec![Vec::new(); k];
    for &(a, b, _) in &traffic.edges {
        adj[a].push(b);
    }
    let (comp, ncomp) = tarjan_scc(&adj);
    let mut inner = vec![0u32; ncomp];
    let mut dag: Vec<Vec<(usize, u32)>> = vec![Vec::new(); ncomp];
    for &(a, b, _) in &traffic.edges {
        let h = hops(a, b);
        if comp[a] == comp[b] {
            inner[comp[a]] = inner[comp[a]].max(h);
        } else {
            dag[comp[a]].push((comp[b], h));
        }
    }
    // Tarjan emits components in reverse topological order: sinks first.
    let mut best = vec![0u32; ncomp];
    for c in 0..ncomp {
        let tail = dag[c].iter().map(|&(d, h)| h + best[d]).max().unwrap_or(0);
        best[c] = inner[c] + tail;
    }
    best.into_iter().max().unwrap_or(0)
}

fn tarjan_scc(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        comp: Vec<usize>,
        next_index: usize,
        next_comp: usize,
    }
    fn visit(s: &mut State<'_>, v: usize) {
        s.index[v] = Some(s.next_index);
        s.low[v] = s.next_index;
        s.next_index += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for i in 0..s.adj[v].len() {
            let w = s.adj[v][i];
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                _ => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            loop {
                let w = s.stack.pop().unwrap();
                s.on_stack[w] = false;
                s.comp[w] = s.next_comp;
                if w == v {
                    break;
                }
            }
            s.next_comp += 1;
        }
    }
    let n = adj.len();
    let mut s = State {
        adj,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        comp: vec![0; n],
        next_index: 0,
        next_comp: 0,
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    (s.comp, s.next_comp)
}

/// Periodic re-scoring of the best particles on the cycle-accurate simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refinement {
    pub top_k: usize,
    pub every: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Self { top_k: 3, every: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementOptions {
    pub pso: PsoParams,
    /// Weight of the latency proxy (hop cost).
    pub alpha: f64,
    /// Weight of the energy proxy (hop cost × router hop energy).
    pub beta: f64,
    pub refine: Option<Refinement>,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        Self {
            pso: PsoParams::default(),
            alpha: 1.0,
            beta: 1.0,
            refine: None,
        }
    }
}

fn decode_keys(keys: &[f64], clusters: usize, mesh: Mesh) -> Placement {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    Placement {
        mesh,
        crossbar_of: order[..clusters].iter().map(|&i| mesh.coord(i)).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct PsoPlacement {
    pub placement: Placement,
    /// Global-best analytic fitness per iteration (index 0 = initial swarm).
    pub fitness_history: Vec<f64>,
}

/// PSO placement minimizing `alpha * hop_cost + beta * hop_cost * e_router_hop`.
///
/// The identity placement is injected as the first particle, so the result
/// never costs more than identity. With `options.refine` set, the `top_k`
/// particles every `every` iterations are replayed through
/// [`noc::simulate_hw`] and the candidate with the lowest simulated
/// `alpha * total_latency + beta * energy` is returned instead.
pub fn place_pso(
    clustering: &ClusteredSnn,
    hw: &HardwareConfig,
    trace: &SpikeTrace,
    options: &PlacementOptions,
    seed: u64,
) -> Result<Placement> {
    place_pso_traced(clustering, hw, trace, options, seed, &Deadline::none()).map(|r| r.placement)
}

pub fn place_pso_traced(
    clustering: &ClusteredSnn,
    hw: &HardwareConfig,
    trace: &SpikeTrace,
    options: &PlacementOptions,
    seed: u64,
    deadline: &Deadline,
) -> Result<PsoPlacement> {
    let traffic = ClusterTraffic::for_clustering(clustering, trace)?;
    let mut rescore = |p: &Placement| -> Result<f64> {
        deadline.check()?;
        let log = noc::simulate_hw(trace, clustering, p, hw)?;
        let total_latency: u64 = log.spike_packets().map(|pk| pk.latency()).sum();
        Ok(options.alpha * total_latency as f64 + options.beta * noc::energy(&log, hw))
    };
    place_pso_traffic(&traffic, hw, options, seed, deadline, Some(&mut rescore))
}

/// PSO placement from cluster traffic alone. `rescore` evaluates refinement
/// candidates (lower is better) and is required when `options.refine` is set.
pub fn place_pso_traffic(
    traffic: &ClusterTraffic,
    hw: &HardwareConfig,
    options: &PlacementOptions,
    seed: u64,
    deadline: &Deadline,
    rescore: Option<&mut dyn FnMut(&Placement) -> Result<f64>>,
) -> Result<PsoPlacement> {
    hw.validate()?;
    let mesh = hw.mesh();
    let k = traffic.clusters;
    check_fits(k, mesh)?;
    let refine = options.refine.filter(|r| r.top_k > 0 && r.every > 0);
    if refine.is_some() && rescore.is_none() {
        return Err(Error::range("refine", "refinement needs a spike trace to simulate"));
    }
    let scale = options.alpha + options.beta * hw.energy.e_router_hop;
    let fitness = |keys: &[f64]| scale * hop_cost_of(&decode_keys(keys, k, mesh), traffic).total as f64;

    let n = mesh.len();
    let identity_keys: Vec<f64> = (0..n).map(|j| 1.0 - j as f64 / n as f64).collect();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let observe = |iter: usize, swarm: pso::SwarmView<'_>| {
        let Some(r) = refine else { return };
        if iter % r.every != 0 {
            return;
        }
        let mut idx: Vec<usize> = (0..swarm.fitness.len()).collect();
        idx.sort_by(|&a, &b| swarm.fitness[a].total_cmp(&swarm.fitness[b]).then(a.cmp(&b)));
        for &i in idx.iter().take(r.top_k) {
            candidates.push(swarm.positions[i].to_vec());
        }
    };
    let out = pso::minimize_observed(n, &options.pso, seed, &[identity_keys], deadline, fitness, observe)?;
    let mut placement = decode_keys(&out.best_position, k, mesh);

    if let (Some(_), Some(rescore)) = (refine, rescore) {
        candidates.push(out.best_position.clone());
        let mut seen: HashSet<Vec<Coord>> = HashSet::new();
        let mut best: Option<(f64, Placement)> = None;
        for keys in &candidates {
            let p = decode_keys(keys, k, mesh);
            if !seen.insert(p.crossbar_of.clone()) {
                continue;
            }
            let score = rescore(&p)?;
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, p));
            }
        }
        if let Some((_, p)) = best {
            placement = p;
        }
    }
    Ok(PsoPlacement {
        placement,
        fitness_history: out.history,
    })
}

/// Binary neuron-by-crossbar matrix: entry (i, j) is 1 iff neuron i is
/// mapped to crossbar j (row-major crossbar index). Unused crossbars keep
/// all-zero columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingMatrix {
    pub neurons: usize,
    pub crossbars: usize,
    data: Vec<u8>,
}

impl MappingMatrix {
    pub fn get(&self, neuron: usize, crossbar: usize) -> u8 {
        self.data[neuron * self.crossbars + crossbar]
    }

    pub fn row(&self, neuron: usize) -> &[u8] {
        &self.data[neuron * self.crossbars..(neuron + 1) * self.crossbars]
    }

    pub fn row_sums(&self) -> Vec<u32> {
        (0..self.neurons)
            .map(|i| self.row(i).iter().map(|&b| b as u32).sum())
            .collect()
    }

    /// Neurons with a 1 in column `crossbar`.
    pub fn column_support(&self, crossbar: usize) -> Vec<usize> {
        (0..self.neurons).filter(|&i| self.get(i, crossbar) == 1).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.neurons).map(|i| self.row(i).to_vec()).collect()
    }

    /// Every row sums to 1 and each used column is exactly one cluster's neuron set.
    pub fn check(&self, clustering: &ClusteredSnn, placement: &Placement) -> Result<()> {
        if let Some(i) = self.row_sums().iter().position(|&s| s != 1) {
            return Err(Error::InvalidPlacement(format!("mapping row {i} does not sum to 1")));
        }
        for (k, members) in clustering.clusters.iter().enumerate() {
            if &self.column_support(placement.crossbar_index(k)) != members {
                return Err(Error::InvalidPlacement(format!(
                    "crossbar column of cluster {k} does not match its neuron set"
                )));
            }
        }
        Ok(())
    }
}

pub fn to_mapping_matrix(clustering: &ClusteredSnn, placement: &Placement) -> Result<MappingMatrix> {
    placement.validate(clustering.cluster_count())?;
    let neurons = clustering.cluster_of.len();
    let crossbars = placement.mesh.len();
    let mut data = vec![0u8; neurons * crossbars];
    for (i, &c) in clustering.cluster_of.iter().enumerate() {
        data[i * crossbars + placement.crossbar_index(c)] = 1;
    }
    let m = MappingMatrix {
        neurons,
        crossbars,
        data,
    };
    m.check(clustering, placement)?;
    Ok(m)
}
