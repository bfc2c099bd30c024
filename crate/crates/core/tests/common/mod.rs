#![allow(dead_code)]

use neurosim_core::snn::{IzhikevichParams, LifParams, SpikeSchedule};
use neurosim_core::placement::{ClusterTraffic, Placement};
use neurosim_core::{Coord, Mesh, NeuronModel, SnnNetwork, SpikeTrace, Synapse};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn lif(v_thresh: f64) -> LifParams {
    LifParams {
        tau_m: 10.0,
        v_rest: -65.0,
        v_thresh,
        v_reset: -65.0,
        t_refrac: 2.0,
        bias: 0.0,
    }
}

pub fn source(times: &[f64]) -> NeuronModel {
    NeuronModel::SpikeSource(SpikeSchedule::Times(times.to_vec()))
}

pub fn poisson(rate_hz: f64) -> NeuronModel {
    NeuronModel::SpikeSource(SpikeSchedule::Poisson { rate_hz })
}

pub const COINCIDENCE_WEIGHT: f64 = 25.0;
pub const COINCIDENCE_THRESHOLD: f64 = -48.0;

/// Three spike sources (ids 0..3) each driving one LIF neuron (id 3). The
/// output fires only when all three inputs arrive within a few ms.
pub fn coincidence_net(input_times: [f64; 3]) -> SnnNetwork {
    let mut neurons: Vec<NeuronModel> = input_times.iter().map(|&t| source(&[t])).collect();
    neurons.push(NeuronModel::Lif(lif(COINCIDENCE_THRESHOLD)));
    let synapses = (0..3)
        .map(|pre| Synapse {
            pre,
            post: 3,
            weight: COINCIDENCE_WEIGHT,
            delay: 1,
        })
        .collect();
    SnnNetwork::new(neurons, synapses)
}

/// Random recurrent network: `sources` Poisson inputs followed by `neurons`
/// LIF/Izhikevich cells. Every cell draws at most `max_fanin` presynaptic
/// partners.
pub fn random_net(seed: u64, sources: usize, neurons: usize, max_fanin: usize) -> SnnNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sources + neurons;
    let mut models: Vec<NeuronModel> = (0..sources).map(|_| poisson(rng.gen_range(20.0..120.0))).collect();
    for _ in 0..neurons {
        models.push(if rng.gen_bool(0.5) {
            NeuronModel::Lif(lif(-50.0))
        } else {
            NeuronModel::Izhikevich(IzhikevichParams::regular_spiking())
        });
    }
    let mut synapses = Vec::new();
    for post in sources..n {
        if n < 2 {
            break;
        }
        let k = rng.gen_range(1..=max_fanin.min(n - 1));
        let mut pres: Vec<usize> = (0..n).filter(|&p| p != post).collect();
        pres.shuffle(&mut rng);
        for &pre in &pres[..k] {
            synapses.push(Synapse {
                pre,
                post,
                weight: rng.gen_range(4.0..30.0),
                delay: rng.gen_range(1..=3),
            });
        }
    }
    SnnNetwork::new(models, synapses)
}

/// Two fully connected feedforward layers of 18: Poisson inputs (0..18)
/// into LIF cells (18..36).
pub fn two_layer_18(rate_hz: f64) -> SnnNetwork {
    let mut neurons: Vec<NeuronModel> = (0..18).map(|_| poisson(rate_hz)).collect();
    neurons.extend((0..18).map(|_| NeuronModel::Lif(lif(-50.0))));
    let mut synapses = Vec::new();
    for pre in 0..18 {
        for post in 18..36 {
            synapses.push(Synapse {
                pre,
                post,
                weight: 3.0,
                delay: 1,
            });
        }
    }
    SnnNetwork::new(neurons, synapses)
}

/// Sparse 784-100-10 feedforward net with random weights. Hidden cells see
/// 6 random inputs, output cells see 8 random hidden cells.
pub fn mlp_894(seed: u64, rate_hz: f64) -> SnnNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_in, n_hidden, n_out) = (784usize, 100usize, 10usize);
    let mut neurons: Vec<NeuronModel> = (0..n_in).map(|_| poisson(rate_hz)).collect();
    neurons.extend((0..n_hidden + n_out).map(|_| NeuronModel::Lif(lif(-50.0))));
    let mut synapses = Vec::new();
    let inputs: Vec<usize> = (0..n_in).collect();
    for h in 0..n_hidden {
        for &pre in inputs.choose_multiple(&mut rng, 6) {
            synapses.push(Synapse {
                pre,
                post: n_in + h,
                weight: rng.gen_range(5.0..25.0),
                delay: 1,
            });
        }
    }
    let hidden: Vec<usize> = (n_in..n_in + n_hidden).collect();
    for o in 0..n_out {
        for &pre in hidden.choose_multiple(&mut rng, 8) {
            synapses.push(Synapse {
                pre,
                post: n_in + n_hidden + o,
                weight: rng.gen_range(5.0..25.0),
                delay: 1,
            });
        }
    }
    SnnNetwork::new(neurons, synapses)
}

/// Checks one hop sequence against minimality and the turn rules of `algo`.
/// Returns a description of the first violation.
pub fn route_violation(
    algo: neurosim_core::RoutingAlgo,
    src: neurosim_core::Coord,
    dst: neurosim_core::Coord,
    route: &[neurosim_core::Direction],
) -> Option<String> {
    use neurosim_core::Direction::{East, North, South, West};
    use neurosim_core::RoutingAlgo::*;
    if route.len() as u32 != src.manhattan(dst) {
        return Some(format!("{} hops for distance {}", route.len(), src.manhattan(dst)));
    }
    let mut cur = src;
    for (k, &d) in route.iter().enumerate() {
        let next = cur.step(d);
        if next.manhattan(dst) >= cur.manhattan(dst) {
            return Some(format!("hop {k} ({d:?}) at {cur} is not productive"));
        }
        if k > 0 {
            let prev = route[k - 1];
            let vertical = |x| x == North || x == South;
            let turn = match algo {
                XY => vertical(prev) && !vertical(d),
                WestFirst => prev != West && d == West,
                NorthLast => prev == North && d != North,
                // the turn happens at `cur`, the node the previous hop reached
                OddEven | DyAD => {
                    (prev == East && vertical(d) && cur.x % 2 == 0) || (vertical(prev) && d == West && cur.x % 2 == 1)
                }
            };
            if turn {
                return Some(format!("prohibited {prev:?}->{d:?} turn at {cur}"));
            }
        }
        cur = next;
    }
    (cur != dst).then(|| format!("route ends at {cur}"))
}

/// Output spike counts `(ideal, hardware)` for the coincidence net on a 6x6
/// mesh. Inputs 0 and 1 share the output's crossbar at (0,0); input 2 sits
/// on the far corner. With `burst`, background packets queue at input 2's
/// router just before its spike is sent.
pub fn coincidence_on_hardware(burst: usize) -> (usize, usize) {
    use neurosim_core::noc::{self, HwSimOptions, Injection};
    use neurosim_core::partition::ClusteredSnn;
    use neurosim_core::placement::Placement;
    use neurosim_core::{dse, snn, Coord, HardwareConfig, Mesh, RoutingAlgo};

    let net = coincidence_net([17.0, 18.0, 19.0]);
    let trace = snn::simulate_software(&net, 80, 0).unwrap();
    let clustering = ClusteredSnn::from_assignment(&net, &trace, 4, &[0, 0, 1, 0]);
    let mut hw = HardwareConfig::new(6, 6, 4, RoutingAlgo::XY);
    hw.cycles_per_timestep = 10;
    let placement = Placement {
        mesh: Mesh::new(6, 6),
        crossbar_of: vec![Coord::new(0, 0), Coord::new(5, 5)],
    };
    let background = (0..burst)
        .map(|_| Injection {
            cycle: 185,
            src: Coord::new(5, 5),
            dst: Coord::new(0, 5),
        })
        .collect();
    let opts = HwSimOptions {
        background,
        ..HwSimOptions::default()
    };
    let hw_log = noc::simulate_hw_with(&trace, &clustering, &placement, &hw, &opts).unwrap();
    let ideal_log = noc::ideal_network_sim(&trace, &clustering, &placement, 10).unwrap();
    let acc = dse::accuracy_proxy(&net, &trace, &hw_log, &ideal_log).unwrap();
    assert_eq!(acc.output_neurons, vec![3]);
    (acc.ideal_spikes[0], acc.hw_spikes[0])
}

// --- partition oracles ---

/// A network of LIF cells plus a synthetic trace with the given spike counts.
pub fn instance(n: usize, edges: &[(usize, usize)], spikes: &[usize]) -> (SnnNetwork, SpikeTrace) {
    let neurons = vec![NeuronModel::Lif(lif(-50.0)); n];
    let synapses = edges
        .iter()
        .map(|&(pre, post)| Synapse {
            pre,
            post,
            weight: 1.0,
            delay: 1,
        })
        .collect();
    let net = SnnNetwork::new(neurons, synapses);
    let duration = spikes.iter().copied().max().unwrap_or(0) as u32 + 1;
    let trace = SpikeTrace {
        spikes: spikes.iter().map(|&k| (0..k as u32).collect()).collect(),
        weights: edges.iter().map(|&(a, b)| (a, b, 1.0)).collect(),
        duration,
    };
    (net, trace)
}

pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, cap: usize, density: f64) -> (SnnNetwork, SpikeTrace) {
    let mut edges = Vec::new();
    for post in 0..n {
        let mut fanin = 0;
        for pre in 0..n {
            if pre != post && fanin < cap && rng.gen_bool(density) {
                edges.push((pre, post));
                fanin += 1;
            }
        }
    }
    let spikes: Vec<usize> = (0..n).map(|_| rng.gen_range(0..20)).collect();
    instance(n, &edges, &spikes)
}

/// Capacity check written from the definition: at most `cap` members, at
/// most `cap` distinct presynaptic sources per cluster.
pub fn feasible(net: &SnnNetwork, cap: usize, assignment: &[usize]) -> bool {
    let k = assignment.iter().max().map_or(0, |&c| c + 1);
    (0..k).all(|c| {
        let members = assignment.iter().filter(|&&a| a == c).count();
        let mut sources: Vec<usize> = net
            .synapses
            .iter()
            .filter(|s| assignment[s.post] == c)
            .map(|s| s.pre)
            .collect();
        sources.sort_unstable();
        sources.dedup();
        members <= cap && sources.len() <= cap
    })
}

pub fn cost(net: &SnnNetwork, trace: &SpikeTrace, assignment: &[usize]) -> u64 {
    net.synapses
        .iter()
        .filter(|s| assignment[s.pre] != assignment[s.post])
        .map(|s| trace.spikes[s.pre].len() as u64)
        .sum()
}

/// Optimum over all assignments into at most two clusters.
pub fn enumerate_two(net: &SnnNetwork, trace: &SpikeTrace, cap: usize) -> Option<u64> {
    let n = net.neuron_count();
    (0u32..1 << n)
        .map(|mask| (0..n).map(|i| (mask >> i & 1) as usize).collect::<Vec<_>>())
        .filter(|a| feasible(net, cap, a))
        .map(|a| cost(net, trace, &a))
        .min()
}

// --- placement oracles ---

pub fn traffic(clusters: usize, edges: &[(usize, usize, u64)]) -> ClusterTraffic {
    let mut edges = edges.to_vec();
    edges.sort_unstable();
    ClusterTraffic { clusters, edges }
}

pub fn at(mesh: Mesh, coords: &[(u32, u32)]) -> Placement {
    Placement {
        mesh,
        crossbar_of: coords.iter().map(|&(x, y)| Coord::new(x, y)).collect(),
    }
}

/// Hop cost straight from its definition.
pub fn weighted_hops(t: &ClusterTraffic, coords: &[Coord]) -> u64 {
    t.edges
        .iter()
        .map(|&(a, b, s)| {
            let (p, q) = (coords[a], coords[b]);
            s * (p.x.abs_diff(q.x) + p.y.abs_diff(q.y)) as u64
        })
        .sum()
}

/// Minimum hop cost over every injective placement of `t.clusters` clusters.
pub fn enumerate_optimum(t: &ClusterTraffic, mesh: Mesh) -> u64 {
    fn go(t: &ClusterTraffic, mesh: Mesh, chosen: &mut Vec<Coord>, best: &mut u64) {
        if chosen.len() == t.clusters {
            *best = (*best).min(weighted_hops(t, chosen));
            return;
        }
        for i in 0..mesh.len() {
            let c = mesh.coord(i);
            if !chosen.contains(&c) {
                chosen.push(c);
                go(t, mesh, chosen, best);
                chosen.pop();
            }
        }
    }
    let mut best = u64::MAX;
    go(t, mesh, &mut Vec::new(), &mut best);
    best
}
