//! Spiking network model and the clock-driven software simulator.
//!
//! Time advances in fixed 1 ms steps with forward Euler integration. Synapses
//! are current based: a presynaptic spike at step `t` adds the synaptic weight
//! to the postsynaptic input current at step `t + delay`, and that current
//! decays exponentially with `tau_syn`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NeuronId = usize;

pub const DEFAULT_TAU_SYN_MS: f64 = 5.0;

/// Membrane potential at which an Izhikevich neuron emits a spike (mV).
pub const IZHIKEVICH_PEAK_MV: f64 = 30.0;
const IZHIKEVICH_V0: f64 = -65.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IzhikevichParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Constant injected current.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub bias: f64,
}

impl IzhikevichParams {
    /// Regular-spiking cortical cell.
    pub fn regular_spiking() -> Self {
        Self {
            a: 0.02,
            b: 0.2,
            c: -65.0,
            d: 8.0,
            bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane time constant (ms).
    pub tau_m: f64,
    pub v_rest: f64,
    pub v_thresh: f64,
    pub v_reset: f64,
    /// Refractory period (ms).
    pub t_refrac: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub bias: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpikeSchedule {
    /// Explicit spike times in ms; fractional times round up to the next step.
    Times(Vec<f64>),
    /// Independent Bernoulli draws per step with probability `rate_hz * 1 ms`.
    Poisson { rate_hz: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NeuronModel {
    Izhikevich(IzhikevichParams),
    Lif(LifParams),
    SpikeSource(SpikeSchedule),
}

impl NeuronModel {
    pub fn is_source(&self) -> bool {
        matches!(self, NeuronModel::SpikeSource(_))
    }

    fn validate(&self, id: NeuronId) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNetwork(format!("neuron {id}: {msg}")));
        match self {
            NeuronModel::Izhikevich(p) => {
                if ![p.a, p.b, p.c, p.d, p.bias].iter().all(|x| x.is_finite()) {
                    return bad("non-finite Izhikevich parameter".into());
                }
                if p.a <= 0.0 {
                    return bad(format!("Izhikevich a must be > 0, got {}", p.a));
                }
            }
            NeuronModel::Lif(p) => {
                if ![p.tau_m, p.v_rest, p.v_thresh, p.v_reset, p.t_refrac, p.bias]
                    .iter()
                    .all(|x| x.is_finite())
                {
                    return bad("non-finite LIF parameter".into());
                }
                if p.tau_m <= 0.0 {
                    return bad(format!("LIF tau_m must be > 0, got {}", p.tau_m));
                }
                if p.v_thresh <= p.v_reset {
                    return bad(format!(
                        "LIF v_thresh ({}) must exceed v_reset ({})",
                        p.v_thresh, p.v_reset
                    ));
                }
                if p.t_refrac < 0.0 {
                    return bad("LIF t_refrac must be >= 0".into());
                }
            }
            NeuronModel::SpikeSource(SpikeSchedule::Times(times)) => {
                if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
                    return bad(format!("schedule time {t} is not a non-negative number"));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("schedule times must be strictly increasing".into());
                }
                let steps: Vec<u32> = times.iter().map(|t| t.ceil() as u32).collect();
                if steps.windows(2).any(|w| w[1] == w[0]) {
                    return bad("schedule times collide after rounding up to 1 ms steps".into());
                }
            }
            NeuronModel::SpikeSource(SpikeSchedule::Poisson { rate_hz }) => {
                if !rate_hz.is_finite() || *rate_hz < 0.0 || *rate_hz > 1000.0 {
                    return bad(format!("Poisson rate must lie in [0, 1000] Hz, got {rate_hz}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Synapse {
    pub pre: NeuronId,
    pub post: NeuronId,
    pub weight: f64,
    /// Transmission delay in steps, at least 1.
    pub delay: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynapseMode {
    #[default]
    #[serde(rename = "CUBA")]
    Cuba,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnnNetwork {
    pub neurons: Vec<NeuronModel>,
    pub synapses: Vec<Synapse>,
    pub synapse_mode: SynapseMode,
    /// Synaptic current decay constant (ms).
    pub tau_syn: f64,
    pub allow_self_loops: bool,
}

impl Default for SnnNetwork {
    fn default() -> Self {
        Self {
            neurons: Vec::new(),
            synapses: Vec::new(),
            synapse_mode: SynapseMode::Cuba,
            tau_syn: DEFAULT_TAU_SYN_MS,
            allow_self_loops: false,
        }
    }
}

impl SnnNetwork {
    pub fn new(neurons: Vec<NeuronModel>, synapses: Vec<Synapse>) -> Self {
        Self {
            neurons,
            synapses,
            ..Self::default()
        }
    }

    pub fn neuron_count(&self) -> usize {
        self.neurons.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_syn.is_finite() && self.tau_syn > 0.0) {
            return Err(Error::InvalidNetwork(format!(
                "tau_syn must be > 0, got {}",
                self.tau_syn
            )));
        }
        for (id, n) in self.neurons.iter().enumerate() {
            n.validate(id)?;
        }
        let n = self.neurons.len();
        for (k, s) in self.synapses.iter().enumerate() {
            if s.pre >= n || s.post >= n {
                return Err(Error::InvalidNetwork(format!(
                    "synapse {k} ({} -> {}) references a neuron outside 0..{n}",
                    s.pre, s.post
                )));
            }
            if s.pre == s.post && !self.allow_self_loops {
                return Err(Error::InvalidNetwork(format!(
                    "synapse {k} is a self-loop on neuron {} and self-loops are disabled",
                    s.pre
                )));
            }
            if s.delay < 1 {
                return Err(Error::InvalidNetwork(format!("synapse {k} has delay 0")));
            }
            if !s.weight.is_finite() {
                return Err(Error::InvalidNetwork(format!("synapse {k} has a non-finite weight")));
            }
            if self.neurons[s.post].is_source() {
                return Err(Error::InvalidNetwork(format!(
                    "synapse {k} targets spike source {}",
                    s.post
                )));
            }
        }
        Ok(())
    }

    /// Presynaptic in-degree per neuron (parallel synapses count once).
    pub fn fanin(&self) -> Vec<usize> {
        let mut pres: Vec<Vec<NeuronId>> = vec![Vec::new(); self.neurons.len()];
        for s in &self.synapses {
            pres[s.post].push(s.pre);
        }
        pres.into_iter()
            .map(|mut p| {
                p.sort_unstable();
                p.dedup();
                p.len()
            })
            .collect()
    }
}

/// Spike times and synaptic weights of a finished software run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrace {
    /// Per-neuron strictly increasing spike steps, each in `[0, duration)`.
    pub spikes: Vec<Vec<u32>>,
    /// `(pre, post, weight)` for every synapse, in network order.
    pub weights: Vec<(NeuronId, NeuronId, f64)>,
    pub duration: u32,
}

impl SpikeTrace {
    pub fn empty(neurons: usize, duration: u32) -> Self {
        Self {
            spikes: vec![Vec::new(); neurons],
            weights: Vec::new(),
            duration,
        }
    }

    pub fn neuron_count(&self) -> usize {
        self.spikes.len()
    }

    pub fn spike_count(&self, neuron: NeuronId) -> usize {
        self.spikes[neuron].len()
    }

    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }

    /// Distinct postsynaptic targets per neuron, ascending.
    pub fn targets(&self) -> Vec<Vec<NeuronId>> {
        let mut out: Vec<Vec<NeuronId>> = vec![Vec::new(); self.spikes.len()];
        for &(pre, post, _) in &self.weights {
            out[pre].push(post);
        }
        for t in &mut out {
            t.sort_unstable();
            t.dedup();
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (i, times) in self.spikes.iter().enumerate() {
            if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::schema(
                    format!("spikes[{i}][{}]", k + 1),
                    "spike times must be strictly increasing",
                ));
            }
            if let Some(k) = times.iter().position(|&t| t >= self.duration) {
                return Err(Error::schema(
                    format!("spikes[{i}][{k}]"),
                    format!("spike time {} outside [0, {})", times[k], self.duration),
                ));
            }
        }
        let n = self.spikes.len();
        for (k, &(pre, post, w)) in self.weights.iter().enumerate() {
            if pre >= n || post >= n {
                return Err(Error::schema(
                    format!("weights[{k}]"),
                    format!("({pre}, {post}) references a neuron outside 0..{n}"),
                ));
            }
            if !w.is_finite() {
                return Err(Error::schema(format!("weights[{k}]"), "weight is not finite"));
            }
        }
        Ok(())
    }
}

enum State {
    Izhikevich { v: f64, u: f64, p: IzhikevichParams },
    Lif { v: f64, refractory: u32, p: LifParams },
    Source,
}

impl State {
    fn new(model: &NeuronModel) -> Self {
        match model {
            NeuronModel::Izhikevich(p) => State::Izhikevich {
                v: IZHIKEVICH_V0,
                u: p.b * IZHIKEVICH_V0,
                p: *p,
            },
            NeuronModel::Lif(p) => State::Lif {
                v: p.v_rest,
                refractory: 0,
                p: *p,
            },
            NeuronModel::SpikeSource(_) => State::Source,
        }
    }

    /// Advances one 1 ms step with synaptic input `i_syn`; returns whether it fired.
    fn step(&mut self, i_syn: f64) -> Option<bool> {
        match self {
            State::Izhikevich { v, u, p } => {
                let current = i_syn + p.bias;
                let dv = 0.04 * *v * *v + 5.0 * *v + 140.0 - *u + current;
                let du = p.a * (p.b * *v - *u);
                *v += dv;
                *u += du;
                if !(v.is_finite() && u.is_finite()) {
                    return None;
                }
                if *v >= IZHIKEVICH_PEAK_MV {
                    *v = p.c;
                    *u += p.d;
                    return Some(true);
                }
                Some(false)
            }
            State::Lif { v, refractory, p } => {
                if *refractory > 0 {
                    *refractory -= 1;
                    *v = p.v_reset;
                    return Some(false);
                }
                *v += (p.v_rest - *v + i_syn + p.bias) / p.tau_m;
                if !v.is_finite() {
                    return None;
                }
                if *v >= p.v_thresh {
                    *v = p.v_reset;
                    *refractory = p.t_refrac.ceil() as u32;
                    return Some(true);
                }
                Some(false)
            }
            State::Source => Some(false),
        }
    }
}

/// Shared integration loop. `source_spike(id, t)` decides whether spike
/// source `id` fires at step `t`; `external` lists extra current arrivals
/// `(step, post, weight)` sorted by step; they join that step's arriving
/// synaptic current in list order. When `recurrent` is false, spikes
/// are not propagated along synapses (inputs come only from `external`).
fn integrate(
    net: &SnnNetwork,
    duration: u32,
    mut source_spike: impl FnMut(NeuronId, u32) -> bool,
    external: &[(u32, NeuronId, f64)],
    recurrent: bool,
) -> Result<SpikeTrace> {
    let n = net.neurons.len();
    let mut states: Vec<State> = net.neurons.iter().map(State::new).collect();
    let mut outgoing: Vec<Vec<(NeuronId, f64, u32)>> = vec![Vec::new(); n];
    let mut max_delay = 1u32;
    for s in &net.synapses {
        outgoing[s.pre].push((s.post, s.weight, s.delay));
        max_delay = max_delay.max(s.delay);
    }
    let ring = max_delay as usize + 1;
    let mut pending = vec![vec![0.0f64; n]; ring];
    let mut i_syn = vec![0.0f64; n];
    let decay = (-1.0 / net.tau_syn).exp();
    let mut spikes: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut ext = external.iter().peekable();

    for t in 0..duration {
        let slot = t as usize % ring;
        while let Some(&&(at, post, w)) = ext.peek() {
            if at > t {
                break;
            }
            if at == t {
                pending[slot][post] += w;
            }
            ext.next();
        }
        for (cur, arriving) in i_syn.iter_mut().zip(pending[slot].iter_mut()) {
            *cur = *cur * decay + *arriving;
            *arriving = 0.0;
        }
        for id in 0..n {
            let fired = match states[id] {
                State::Source => source_spike(id, t),
                ref mut st => st
                    .step(i_syn[id])
                    .ok_or(Error::NonFiniteState { neuron: id, step: t })?,
            };
            if fired {
                spikes[id].push(t);
                if recurrent {
                    for &(post, w, delay) in &outgoing[id] {
                        pending[(t as usize + delay as usize) % ring][post] += w;
                    }
                }
            }
        }
    }

    Ok(SpikeTrace {
        spikes,
        weights: net.synapses.iter().map(|s| (s.pre, s.post, s.weight)).collect(),
        duration,
    })
}

/// Runs the network for `duration` steps (1 step = 1 ms).
///
/// Poisson sources draw from a ChaCha8 stream seeded with `seed`, in neuron
/// order within each step, so a fixed `(net, duration, seed)` always yields
/// the same trace.
pub fn simulate_software(net: &SnnNetwork, duration: u32, seed: u64) -> Result<SpikeTrace> {
    if duration < 1 {
        return Err(Error::range("duration", "must be at least 1 step"));
    }
    net.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schedules = source_schedules(net);
    let mut cursor = vec![0usize; net.neurons.len()];
    let source_spike = |id: NeuronId, t: u32| match &net.neurons[id] {
        NeuronModel::SpikeSource(SpikeSchedule::Poisson { rate_hz }) => {
            rng.gen::<f64>() < rate_hz / 1000.0
        }
        _ => {
            let steps = &schedules[id];
            let c = &mut cursor[id];
            if *c < steps.len() && steps[*c] == t {
                *c += 1;
                true
            } else {
                false
            }
        }
    };
    integrate(net, duration, source_spike, &[], true)
}

fn source_schedules(net: &SnnNetwork) -> Vec<Vec<u32>> {
    net.neurons
        .iter()
        .map(|n| match n {
            NeuronModel::SpikeSource(SpikeSchedule::Times(ts)) => {
                ts.iter().map(|t| t.ceil() as u32).collect()
            }
            _ => Vec::new(),
        })
        .collect()
}

/// Re-runs every non-source neuron open loop, driven by externally supplied
/// presynaptic spike arrivals instead of the network's own spikes.
///
/// `delivered[i]` lists `(step, pre)` pairs: the step at which a spike of
/// `pre` reached neuron `i`. Each such arrival injects the weight of every
/// `pre -> i` synapse after that synapse's delay, exactly as a spike emitted
/// at `step` would in [`simulate_software`]. Spike sources replay their spikes
/// from `reference`. Replaying zero-latency deliveries reproduces `reference`.
pub fn replay_delivered(
    net: &SnnNetwork,
    reference: &SpikeTrace,
    delivered: &[Vec<(u32, NeuronId)>],
) -> Result<SpikeTrace> {
    net.validate()?;
    let n = net.neurons.len();
    if reference.neuron_count() != n || delivered.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if reference.neuron_count() != n {
                reference.neuron_count()
            } else {
                delivered.len()
            },
        });
    }
    let mut syn: HashMap<(NeuronId, NeuronId), Vec<usize>> = HashMap::new();
    for (k, s) in net.synapses.iter().enumerate() {
        syn.entry((s.pre, s.post)).or_default().push(k);
    }
    let duration = reference.duration;
    // (arrival, emission step, pre, synapse index) reproduces the order in
    // which the forward run accumulates a step's incoming current
    let mut arrivals = Vec::new();
    for (post, list) in delivered.iter().enumerate() {
        for &(step, pre) in list {
            for &k in syn.get(&(pre, post)).into_iter().flatten() {
                let at = step as u64 + net.synapses[k].delay as u64;
                if at < duration as u64 {
                    arrivals.push((at as u32, step, pre, k));
                }
            }
        }
    }
    arrivals.sort_unstable();
    let external: Vec<(u32, NeuronId, f64)> = arrivals
        .into_iter()
        .map(|(at, _, _, k)| (at, net.synapses[k].post, net.synapses[k].weight))
        .collect();
    let mut cursor = vec![0usize; n];
    let source_spike = |id: NeuronId, t: u32| {
        let steps = &reference.spikes[id];
        let c = &mut cursor[id];
        if *c < steps.len() && steps[*c] == t {
            *c += 1;
            true
        } else {
            false
        }
    };
    integrate(net, duration, source_spike, &external, false)
}
