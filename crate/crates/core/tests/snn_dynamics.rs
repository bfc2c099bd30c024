mod common;

use neurosim_core::snn::{self, IzhikevichParams};
use neurosim_core::{NeuronModel, SnnNetwork, Synapse};
use proptest::prelude::*;

/// Izhikevich equations integrated with forward Euler at step `dt` ms under
/// constant current; returns spike times in ms.
fn izhikevich_oracle(p: IzhikevichParams, current: f64, duration_ms: f64, dt: f64) -> Vec<f64> {
    let (mut v, mut u) = (-65.0f64, p.b * -65.0);
    let steps = (duration_ms / dt).round() as usize;
    let mut out = Vec::new();
    for k in 0..steps {
        let dv = 0.04 * v * v + 5.0 * v + 140.0 - u + current;
        let du = p.a * (p.b * v - u);
        v += dt * dv;
        u += dt * du;
        if v >= 30.0 {
            out.push(k as f64 * dt);
            v = p.c;
            u += p.d;
        }
    }
    out
}

/// Scalar LIF driven by CUBA synapses with unit delay arrivals, written
/// without reference to the library.
fn lif_oracle(arrivals: &[(u32, f64)], thresh: f64, duration: u32) -> Vec<u32> {
    let decay = (-1.0f64 / 5.0).exp();
    let (mut v, mut i, mut refractory) = (-65.0f64, 0.0f64, 0u32);
    let mut out = Vec::new();
    for t in 0..duration {
        let arriving: f64 = arrivals.iter().filter(|a| a.0 == t).map(|a| a.1).sum();
        i = i * decay + arriving;
        if refractory > 0 {
            refractory -= 1;
            v = -65.0;
            continue;
        }
        v += (-65.0 - v + i) / 10.0;
        if v >= thresh {
            out.push(t);
            v = -65.0;
            refractory = 2;
        }
    }
    out
}

fn isis(times: &[u32]) -> Vec<u32> {
    times.windows(2).map(|w| w[1] - w[0]).collect()
}

#[test]
fn regular_spiking_cell_matches_dense_oracle() {
    let p = IzhikevichParams {
        bias: 10.0,
        ..IzhikevichParams::regular_spiking()
    };
    let net = SnnNetwork::new(vec![NeuronModel::Izhikevich(p)], vec![]);
    let trace = snn::simulate_software(&net, 1000, 0).unwrap();
    let spikes = &trace.spikes[0];
    assert!(spikes.len() >= 5, "{} spikes", spikes.len());

    let tail = &isis(spikes)[1..];
    let (lo, hi) = (tail.iter().min().unwrap(), tail.iter().max().unwrap());
    assert!(hi - lo <= 1, "steady-state ISIs spread over {lo}..{hi}");

    let dense = izhikevich_oracle(p, 10.0, 1000.0, 0.1);
    let dense_isi: Vec<f64> = dense.windows(2).map(|w| w[1] - w[0]).collect();
    let dense_tail = dense_isi[dense_isi.len() - 5..].iter().sum::<f64>() / 5.0;
    let ours_tail = tail.iter().map(|&x| x as f64).sum::<f64>() / tail.len() as f64;
    // first-order Euler at 1 ms against the 0.1 ms reference
    assert!(
        (ours_tail - dense_tail).abs() / dense_tail < 0.10,
        "steady ISI {ours_tail} vs dense {dense_tail}"
    );
    let (n_ours, n_dense) = (spikes.len() as f64, dense.len() as f64);
    assert!((n_ours - n_dense).abs() / n_dense < 0.15, "{n_ours} vs {n_dense} spikes");
}

#[test]
fn library_euler_matches_scalar_euler_at_one_ms() {
    let p = IzhikevichParams {
        bias: 10.0,
        ..IzhikevichParams::regular_spiking()
    };
    let net = SnnNetwork::new(vec![NeuronModel::Izhikevich(p)], vec![]);
    let ours = snn::simulate_software(&net, 1000, 0).unwrap().spikes[0].clone();
    let oracle: Vec<u32> = izhikevich_oracle(p, 10.0, 1000.0, 1.0).iter().map(|&t| t as u32).collect();
    assert_eq!(ours, oracle);
}

#[test]
fn source_replays_its_schedule() {
    let net = SnnNetwork::new(vec![common::source(&[1.0, 3.0, 5.0])], vec![]);
    assert_eq!(snn::simulate_software(&net, 10, 0).unwrap().spikes[0], vec![1, 3, 5]);
}

#[test]
fn fractional_schedule_times_round_up() {
    let net = SnnNetwork::new(vec![common::source(&[0.2, 3.0, 4.5])], vec![]);
    assert_eq!(snn::simulate_software(&net, 10, 0).unwrap().spikes[0], vec![1, 3, 5]);
}

#[test]
fn coincident_inputs_fire_the_output_once() {
    let trace = snn::simulate_software(&common::coincidence_net([17.0, 18.0, 19.0]), 60, 0).unwrap();
    assert_eq!(trace.spikes[3], vec![22]);
    let oracle = lif_oracle(
        &[(18, 25.0), (19, 25.0), (20, 25.0)],
        common::COINCIDENCE_THRESHOLD,
        60,
    );
    assert_eq!(trace.spikes[3], oracle);
}

#[test]
fn delaying_one_input_silences_the_output() {
    for late in [29.0, 39.0, 49.0] {
        let trace = snn::simulate_software(&common::coincidence_net([17.0, 18.0, late]), 80, 0).unwrap();
        assert!(trace.spikes[3].is_empty(), "third input at {late} still fired");
    }
}

#[test]
fn poisson_counts_stay_within_five_sigma() {
    for (k, rate) in [5.0, 20.0, 80.0, 300.0].into_iter().enumerate() {
        let net = SnnNetwork::new(vec![common::poisson(rate)], vec![]);
        let count = snn::simulate_software(&net, 10_000, 7 + k as u64).unwrap().spikes[0].len() as f64;
        let mean = rate * 10.0;
        assert!((count - mean).abs() <= 5.0 * mean.sqrt(), "rate {rate}: {count} spikes");
    }
}

#[test]
fn zero_rate_poisson_never_fires() {
    let net = SnnNetwork::new(vec![common::poisson(0.0)], vec![]);
    assert_eq!(snn::simulate_software(&net, 1000, 1).unwrap().total_spikes(), 0);
}

#[test]
fn dangling_synapse_is_invalid() {
    let net = SnnNetwork::new(
        vec![NeuronModel::Lif(common::lif(-50.0))],
        vec![Synapse {
            pre: 0,
            post: 4,
            weight: 1.0,
            delay: 1,
        }],
    );
    assert!(matches!(
        snn::simulate_software(&net, 10, 0),
        Err(neurosim_core::Error::InvalidNetwork(_))
    ));
}

proptest! {
    #[test]
    fn networks_without_drive_stay_silent(seed in any::<u64>(), n in 1usize..30) {
        // recurrent cells, no sources, no bias
        let net = common::random_net(seed, 0, n, 4);
        prop_assert_eq!(snn::simulate_software(&net, 300, seed).unwrap().total_spikes(), 0);
    }

    #[test]
    fn output_never_precedes_its_earliest_input(a in 0u32..60, b in 0u32..60, c in 0u32..60) {
        let times = [a, b, c];
        let net = common::coincidence_net(times.map(f64::from));
        let trace = snn::simulate_software(&net, 100, 0).unwrap();
        let earliest = *times.iter().min().unwrap();
        for &t in &trace.spikes[3] {
            prop_assert!(t >= earliest + 1);
        }
    }

    #[test]
    fn identical_seeds_give_identical_traces(seed in any::<u64>()) {
        let net = common::random_net(seed, 5, 15, 4);
        let a = snn::simulate_software(&net, 200, seed).unwrap();
        let b = snn::simulate_software(&net, 200, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn traces_satisfy_their_invariants(seed in any::<u64>()) {
        let net = common::random_net(seed, 4, 12, 5);
        let t = snn::simulate_software(&net, 150, seed).unwrap();
        prop_assert!(t.validate().is_ok());
        prop_assert_eq!(t.weights.len(), net.synapses.len());
    }

    #[test]
    fn replaying_ideal_arrivals_reproduces_the_trace(seed in any::<u64>()) {
        let net = common::random_net(seed, 4, 16, 6);
        let trace = snn::simulate_software(&net, 200, seed).unwrap();
        let targets = trace.targets();
        let mut delivered = vec![Vec::new(); net.neuron_count()];
        for (pre, times) in trace.spikes.iter().enumerate() {
            for &t in times {
                for &post in &targets[pre] {
                    delivered[post].push((t, pre));
                }
            }
        }
        prop_assert_eq!(snn::replay_delivered(&net, &trace, &delivered).unwrap(), trace);
    }
}
