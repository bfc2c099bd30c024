//! Cycle-accurate mesh interconnect between crossbars.
//!
//! Each router has five input FIFOs (one per neighbor plus the local
//! injection port), each `buffer_depth` packets deep, and an unbounded
//! source queue in front of the local port. Every cycle:
//!
//! 1. packets whose injection cycle has come enter their source queue, and
//!    each source queue moves one packet into its local FIFO if it has room;
//! 2. every FIFO head computes its admissible directions and picks one via
//!    the selection strategy (or the ejection port at its destination);
//! 3. each output port grants one request, round robin over input ports,
//!    provided the downstream FIFO had room at the start of the cycle.
//!
//! A packet moves at most one hop per cycle, so an uncontended packet
//! arrives `hops` cycles after injection and is handed to the crossbar
//! `crossbar_latency` cycles after ejection. Spikes are single-flit packets;
//! a spike bound for several neurons on one crossbar travels as one packet
//! and fans out inside the crossbar.

pub mod routing;

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{HardwareConfig, RoutingAlgo, Selection};
use crate::error::{Error, Result};
use crate::mesh::{Coord, Direction, Mesh};
use crate::partition::ClusteredSnn;
use crate::placement::Placement;
use crate::snn::{NeuronId, SpikeTrace};
use crate::Deadline;

pub use routing::admissible_dirs;

const LOCAL_PORT: usize = 4;
const EJECT_PORT: usize = 4;
const PORTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketKind {
    /// Delivered inside the source crossbar; never enters the interconnect.
    Local,
    /// Spike routed over the mesh.
    Global,
    /// Synthetic traffic sharing the mesh with spikes.
    Background,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub kind: PacketKind,
    pub src_neuron: Option<NeuronId>,
    pub dst_cluster: Option<usize>,
    pub src: Coord,
    pub dst: Coord,
    /// Per-(source neuron, destination cluster) sequence number.
    pub seq: u64,
    pub inject_cycle: u64,
    pub deliver_cycle: u64,
    pub hops: u32,
}

impl PacketRecord {
    pub fn latency(&self) -> u64 {
        self.deliver_cycle - self.inject_cycle
    }
}

/// One spike arrival at a destination neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub cycle: u64,
    pub src: NeuronId,
    pub seq: u64,
    /// Cycle at which the spike left its source.
    pub sent_cycle: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryLog {
    pub packets: Vec<PacketRecord>,
    /// Per destination neuron, in delivery order.
    pub delivered: Vec<Vec<Delivery>>,
    /// Per source neuron: cycles at which it fired.
    pub sent: Vec<Vec<u64>>,
    /// Per neuron: distinct postsynaptic targets.
    pub fanout: Vec<u32>,
    /// `max(window_cycles, last delivery + 1)`.
    pub total_cycles: u64,
    /// Trace duration in cycles; rate windows for both logs.
    pub window_cycles: u64,
    pub cycles_per_timestep: u32,
}

impl DeliveryLog {
    /// Local and global spike packets (background traffic excluded).
    pub fn spike_packets(&self) -> impl Iterator<Item = &PacketRecord> {
        self.packets.iter().filter(|p| p.kind != PacketKind::Background)
    }

    pub fn background_packets(&self) -> impl Iterator<Item = &PacketRecord> {
        self.packets.iter().filter(|p| p.kind == PacketKind::Background)
    }

    /// Per destination neuron: `(step, src)` arrivals, rounding sub-step
    /// delivery cycles up to the next model step.
    pub fn delivered_steps(&self) -> Vec<Vec<(u32, NeuronId)>> {
        let cpt = self.cycles_per_timestep as u64;
        self.delivered
            .iter()
            .map(|ds| {
                ds.iter()
                    .map(|d| (d.cycle.div_ceil(cpt).min(u32::MAX as u64) as u32, d.src))
                    .collect()
            })
            .collect()
    }
}

/// A packet handed to the raw mesh simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub cycle: u64,
    pub src: Coord,
    pub dst: Coord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshOutcome {
    pub deliver_cycle: u64,
    pub hops: u32,
}

#[derive(Debug, Clone, Default)]
pub struct MeshRun {
    /// Delivery per injection, same order as the input.
    pub outcomes: Vec<MeshOutcome>,
    /// Hop directions per injection when route recording was requested.
    pub routes: Option<Vec<Vec<Direction>>>,
}

#[derive(Debug, Clone, Default)]
pub struct MeshOptions {
    pub record_routes: bool,
    pub deadline: Deadline,
}

struct InFlight {
    src: Coord,
    dst: Coord,
    ready_at: u64,
    hops: u32,
}

/// Runs raw packets through the mesh of `hw` until all are delivered.
pub fn simulate_mesh(hw: &HardwareConfig, injections: &[Injection], opts: &MeshOptions) -> Result<MeshRun> {
    hw.validate()?;
    let mesh = hw.mesh();
    for (k, inj) in injections.iter().enumerate() {
        if !mesh.contains(inj.src) || !mesh.contains(inj.dst) {
            return Err(Error::range(
                format!("injection[{k}]"),
                format!("{} -> {} outside the mesh", inj.src, inj.dst),
            ));
        }
    }
    let mut order: Vec<usize> = (0..injections.len()).collect();
    order.sort_by_key(|&k| (injections[k].cycle, k));

    let n = mesh.len();
    let depth = hw.buffer_depth as usize;
    let mut fifos: Vec<[VecDeque<usize>; PORTS]> = (0..n).map(|_| Default::default()).collect();
    let mut source_q: Vec<VecDeque<usize>> = vec![VecDeque::new(); n];
    let mut rr = vec![[0usize; PORTS]; n];
    let mut packets: Vec<InFlight> = injections
        .iter()
        .map(|i| InFlight {
            src: i.src,
            dst: i.dst,
            ready_at: 0,
            hops: 0,
        })
        .collect();
    let mut outcomes: Vec<Option<MeshOutcome>> = vec![None; injections.len()];
    let mut routes: Option<Vec<Vec<Direction>>> = opts.record_routes.then(|| vec![Vec::new(); injections.len()]);
    let mut rng = ChaCha8Rng::seed_from_u64(hw.seed);

    let stall_limit = hw.mesh_w as u64 * hw.mesh_h as u64 * hw.buffer_depth as u64 * 8;
    let mut stalled = 0u64;
    let mut next = 0usize;
    let mut in_network = 0usize;
    let mut delivered = 0usize;
    let mut t = 0u64;
    let mut iterations = 0u64;
    let mut occupancy = vec![[0usize; PORTS]; n];
    let mut requests: Vec<[Option<usize>; PORTS]> = vec![[None; PORTS]; n];

    while delivered < injections.len() {
        if in_network == 0 {
            // idle: jump to the next injection
            t = t.max(injections[order[next]].cycle);
        }
        iterations += 1;
        if iterations % 4096 == 0 {
            opts.deadline.check()?;
        }
        while next < order.len() && injections[order[next]].cycle <= t {
            let k = order[next];
            source_q[mesh.index(injections[k].src)].push_back(k);
            in_network += 1;
            next += 1;
        }
        for r in 0..n {
            if fifos[r][LOCAL_PORT].len() < depth {
                if let Some(k) = source_q[r].pop_front() {
                    packets[k].ready_at = t;
                    fifos[r][LOCAL_PORT].push_back(k);
                }
            }
        }

        for r in 0..n {
            for p in 0..PORTS {
                occupancy[r][p] = fifos[r][p].len();
            }
        }

        // route computation: request[r][input port] = output port
        for r in 0..n {
            let cur = mesh.coord(r);
            for p in 0..PORTS {
                requests[r][p] = None;
                let Some(&k) = fifos[r][p].front() else { continue };
                let pk = &packets[k];
                if pk.ready_at > t {
                    continue;
                }
                if pk.dst == cur {
                    requests[r][p] = Some(EJECT_PORT);
                    continue;
                }
                let congested = hw.routing == RoutingAlgo::DyAD && is_congested(&mesh, &occupancy, cur, hw);
                let dirs = admissible_dirs(hw.routing, pk.src, cur, pk.dst, congested);
                let dir = select(hw.selection, &dirs, &mesh, &occupancy, cur, &mut rng);
                requests[r][p] = Some(dir.index());
            }
        }

        // arbitration and traversal
        let mut moved = 0usize;
        for r in 0..n {
            let cur = mesh.coord(r);
            for out in 0..PORTS {
                let start = rr[r][out];
                let Some(winner) = (0..PORTS)
                    .map(|i| (start + i) % PORTS)
                    .find(|&p| requests[r][p] == Some(out))
                else {
                    continue;
                };
                let downstream = if out == EJECT_PORT {
                    None
                } else {
                    let dir = Direction::ALL[out];
                    let nb = mesh.neighbor(cur, dir).expect("minimal routing stays inside the mesh");
                    let nb_idx = mesh.index(nb);
                    let in_port = dir.opposite().index();
                    if occupancy[nb_idx][in_port] >= depth {
                        continue;
                    }
                    Some((nb_idx, in_port, dir))
                };
                rr[r][out] = (winner + 1) % PORTS;
                let k = fifos[r][winner].pop_front().expect("requesting port has a head");
                moved += 1;
                match downstream {
                    None => {
                        outcomes[k] = Some(MeshOutcome {
                            deliver_cycle: t + hw.crossbar_latency as u64,
                            hops: packets[k].hops,
                        });
                        in_network -= 1;
                        delivered += 1;
                    }
                    Some((nb_idx, in_port, dir)) => {
                        let pk = &mut packets[k];
                        pk.hops += 1;
                        pk.ready_at = t + 1;
                        fifos[nb_idx][in_port].push_back(k);
                        if let Some(rt) = routes.as_mut() {
                            rt[k].push(dir);
                        }
                    }
                }
            }
        }

        if moved == 0 && in_network > 0 {
            stalled += 1;
            if stalled >= stall_limit {
                return Err(Error::DeadlockDetected {
                    cycle: t,
                    stalled,
                    in_flight: in_network,
                });
            }
        } else {
            stalled = 0;
        }
        t += 1;
    }

    Ok(MeshRun {
        outcomes: outcomes.into_iter().map(|o| o.expect("all delivered")).collect(),
        routes,
    })
}

fn is_congested(mesh: &Mesh, occupancy: &[[usize; PORTS]], cur: Coord, hw: &HardwareConfig) -> bool {
    Direction::ALL.iter().any(|&d| {
        mesh.neighbor(cur, d).is_some_and(|nb| {
            let occ = occupancy[mesh.index(nb)][d.opposite().index()];
            occ as f64 / hw.buffer_depth as f64 > hw.dyad_threshold
        })
    })
}

fn select(
    strategy: Selection,
    dirs: &[Direction],
    mesh: &Mesh,
    occupancy: &[[usize; PORTS]],
    cur: Coord,
    rng: &mut ChaCha8Rng,
) -> Direction {
    if dirs.len() == 1 {
        return dirs[0];
    }
    match strategy {
        Selection::First => dirs[0],
        Selection::BufferLevel => *dirs
            .iter()
            .min_by_key(|&&d| {
                let nb = mesh.neighbor(cur, d).expect("productive direction has a neighbor");
                occupancy[mesh.index(nb)][d.opposite().index()]
            })
            .expect("non-empty"),
        Selection::Random => dirs[rng.gen_range(0..dirs.len())],
    }
}

/// Synthetic uniform-random traffic: every node injects with probability
/// `rate` per cycle, to a uniformly chosen other node.
pub fn uniform_random_traffic(mesh: Mesh, rate: f64, cycles: u64, seed: u64) -> Vec<Injection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mesh.len();
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    for cycle in 0..cycles {
        for s in 0..n {
            if rng.gen::<f64>() < rate {
                let mut d = rng.gen_range(0..n - 1);
                if d >= s {
                    d += 1;
                }
                out.push(Injection {
                    cycle,
                    src: mesh.coord(s),
                    dst: mesh.coord(d),
                });
            }
        }
    }
    out
}

/// Background packet injected alongside the spike traffic.
pub type BackgroundPacket = Injection;

#[derive(Debug, Clone, Default)]
pub struct HwSimOptions {
    pub background: Vec<BackgroundPacket>,
    pub deadline: Deadline,
}

struct SpikeEvent {
    neuron: NeuronId,
    cluster: usize,
    seq: u64,
    cycle: u64,
}

struct Fanout {
    own: Vec<usize>,
    /// Destination cluster -> member neurons receiving from this neuron.
    by_cluster: Vec<BTreeMap<usize, Vec<NeuronId>>>,
}

fn check_consistent(trace: &SpikeTrace, clustering: &ClusteredSnn, placement: &Placement) -> Result<()> {
    if trace.neuron_count() != clustering.cluster_of.len() {
        return Err(Error::CapacityExceeded(format!(
            "trace has {} neurons but the mapping covers {}",
            trace.neuron_count(),
            clustering.cluster_of.len()
        )));
    }
    if let Some(&c) = clustering.cluster_of.iter().find(|&&c| c >= clustering.cluster_count()) {
        return Err(Error::MismatchedClustering(format!("cluster id {c} out of range")));
    }
    placement.validate(clustering.cluster_count())
}

fn fanout(trace: &SpikeTrace, clustering: &ClusteredSnn) -> Fanout {
    let mut by_cluster: Vec<BTreeMap<usize, Vec<NeuronId>>> = vec![BTreeMap::new(); trace.neuron_count()];
    for (pre, posts) in trace.targets().into_iter().enumerate() {
        for post in posts {
            by_cluster[pre].entry(clustering.cluster_of[post]).or_default().push(post);
        }
    }
    Fanout {
        own: clustering.cluster_of.clone(),
        by_cluster,
    }
}

/// Spike events `(neuron, destination cluster)` in (step, neuron, cluster) order.
fn spike_events(trace: &SpikeTrace, fan: &Fanout, cycles_per_timestep: u32) -> Vec<SpikeEvent> {
    let mut firing: Vec<(u32, NeuronId)> = trace
        .spikes
        .iter()
        .enumerate()
        .flat_map(|(i, ts)| ts.iter().map(move |&t| (t, i)))
        .collect();
    firing.sort_unstable();
    let mut seq: BTreeMap<(NeuronId, usize), u64> = BTreeMap::new();
    let mut out = Vec::new();
    for (t, i) in firing {
        for &c in fan.by_cluster[i].keys() {
            let s = seq.entry((i, c)).or_insert(0);
            out.push(SpikeEvent {
                neuron: i,
                cluster: c,
                seq: *s,
                cycle: t as u64 * cycles_per_timestep as u64,
            });
            *s += 1;
        }
    }
    out
}

fn assemble(
    trace: &SpikeTrace,
    fan: &Fanout,
    packets: Vec<PacketRecord>,
    cycles_per_timestep: u32,
) -> DeliveryLog {
    let mut delivered: Vec<Vec<Delivery>> = vec![Vec::new(); trace.neuron_count()];
    for p in packets.iter().filter(|p| p.kind != PacketKind::Background) {
        let (src, c) = (p.src_neuron.unwrap(), p.dst_cluster.unwrap());
        for &post in &fan.by_cluster[src][&c] {
            delivered[post].push(Delivery {
                cycle: p.deliver_cycle,
                src,
                seq: p.seq,
                sent_cycle: p.inject_cycle,
            });
        }
    }
    for d in &mut delivered {
        d.sort_by_key(|x| (x.cycle, x.sent_cycle, x.src, x.seq));
    }
    let window_cycles = trace.duration as u64 * cycles_per_timestep as u64;
    let last = packets.iter().map(|p| p.deliver_cycle + 1).max().unwrap_or(0);
    let sent = trace
        .spikes
        .iter()
        .map(|ts| ts.iter().map(|&t| t as u64 * cycles_per_timestep as u64).collect())
        .collect();
    let fanout = fan
        .by_cluster
        .iter()
        .map(|m| m.values().map(|v| v.len() as u32).sum())
        .collect();
    DeliveryLog {
        packets,
        delivered,
        sent,
        fanout,
        total_cycles: window_cycles.max(last),
        window_cycles,
        cycles_per_timestep,
    }
}

/// Replays `trace` through the interconnect described by `hw`.
pub fn simulate_hw(
    trace: &SpikeTrace,
    clustering: &ClusteredSnn,
    placement: &Placement,
    hw: &HardwareConfig,
) -> Result<DeliveryLog> {
    simulate_hw_with(trace, clustering, placement, hw, &HwSimOptions::default())
}

pub fn simulate_hw_with(
    trace: &SpikeTrace,
    clustering: &ClusteredSnn,
    placement: &Placement,
    hw: &HardwareConfig,
    opts: &HwSimOptions,
) -> Result<DeliveryLog> {
    hw.validate()?;
    check_consistent(trace, clustering, placement)?;
    if placement.mesh != hw.mesh() {
        return Err(Error::InvalidPlacement(format!(
            "placement mesh {}x{} differs from hardware mesh {}x{}",
            placement.mesh.width, placement.mesh.height, hw.mesh_w, hw.mesh_h
        )));
    }
    let fan = fanout(trace, clustering);
    let events = spike_events(trace, &fan, hw.cycles_per_timestep);

    let mut records = Vec::with_capacity(events.len() + opts.background.len());
    let mut injections = Vec::new();
    let mut routed = Vec::new();
    for ev in &events {
        let src = placement.crossbar_of[fan.own[ev.neuron]];
        let dst = placement.crossbar_of[ev.cluster];
        let local = ev.cluster == fan.own[ev.neuron];
        records.push(PacketRecord {
            kind: if local { PacketKind::Local } else { PacketKind::Global },
            src_neuron: Some(ev.neuron),
            dst_cluster: Some(ev.cluster),
            src,
            dst,
            seq: ev.seq,
            inject_cycle: ev.cycle,
            deliver_cycle: ev.cycle + hw.crossbar_latency as u64,
            hops: 0,
        });
        if !local {
            routed.push(records.len() - 1);
            injections.push(Injection { cycle: ev.cycle, src, dst });
        }
    }
    for bg in &opts.background {
        records.push(PacketRecord {
            kind: PacketKind::Background,
            src_neuron: None,
            dst_cluster: None,
            src: bg.src,
            dst: bg.dst,
            seq: 0,
            inject_cycle: bg.cycle,
            deliver_cycle: bg.cycle,
            hops: 0,
        });
        routed.push(records.len() - 1);
        injections.push(*bg);
    }

    let run = simulate_mesh(
        hw,
        &injections,
        &MeshOptions {
            record_routes: false,
            deadline: opts.deadline,
        },
    )?;
    for (&r, o) in routed.iter().zip(&run.outcomes) {
        records[r].deliver_cycle = o.deliver_cycle;
        records[r].hops = o.hops;
    }
    Ok(assemble(trace, &fan, records, hw.cycles_per_timestep))
}

/// Zero-latency reference: every destination receives each spike in the
/// cycle it was sent.
pub fn ideal_network_sim(
    trace: &SpikeTrace,
    clustering: &ClusteredSnn,
    placement: &Placement,
    cycles_per_timestep: u32,
) -> Result<DeliveryLog> {
    check_consistent(trace, clustering, placement)?;
    if cycles_per_timestep == 0 {
        return Err(Error::range("cycles_per_timestep", "must be at least 1"));
    }
    let fan = fanout(trace, clustering);
    let records = spike_events(trace, &fan, cycles_per_timestep)
        .into_iter()
        .map(|ev| PacketRecord {
            kind: if ev.cluster == fan.own[ev.neuron] {
                PacketKind::Local
            } else {
                PacketKind::Global
            },
            src_neuron: Some(ev.neuron),
            dst_cluster: Some(ev.cluster),
            src: placement.crossbar_of[fan.own[ev.neuron]],
            dst: placement.crossbar_of[ev.cluster],
            seq: ev.seq,
            inject_cycle: ev.cycle,
            deliver_cycle: ev.cycle,
            hops: 0,
        })
        .collect();
    Ok(assemble(trace, &fan, records, cycles_per_timestep))
}

/// Interconnect plus crossbar energy of the spike traffic in `log` (pJ).
pub fn energy(log: &DeliveryLog, hw: &HardwareConfig) -> f64 {
    let e = &hw.energy;
    let hops: u64 = log.spike_packets().map(|p| p.hops as u64).sum();
    let crossbar_spikes = log.spike_packets().count() as f64;
    hops as f64 * (e.e_router_hop + e.e_link) + crossbar_spikes * e.e_crossbar_spike
}

/// Routers plus crossbars.
pub fn area_units(hw: &HardwareConfig) -> u64 {
    2 * hw.mesh_w as u64 * hw.mesh_h as u64
}
