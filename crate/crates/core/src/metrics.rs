//! Hardware and model statistics computed from a hardware delivery log and
//! its zero-latency reference.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::config::HardwareConfig;
use crate::error::{Error, Result};
use crate::noc::{self, Delivery, DeliveryLog, PacketKind};
use crate::snn::NeuronId;

/// Mean inter-spike interval: Σ_{i=2..K} (t_i − t_{i−1}) / (K − 1).
pub fn avg_isi(spike_times: &[u64]) -> Result<f64> {
    let k = spike_times.len();
    if k < 2 {
        return Err(Error::InsufficientSpikes(k));
    }
    let sum: f64 = spike_times.windows(2).map(|w| w[1] as f64 - w[0] as f64).sum();
    Ok(sum / (k - 1) as f64)
}

/// Mean squared deviation between expected and actual per-source arrival
/// rates at one neuron: Σ_j (F_j − F̂_j)² / n.
pub fn spike_disorder(expected: &[f64], actual: &[f64]) -> Result<f64> {
    if expected.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: expected.len(),
            found: actual.len(),
        });
    }
    if expected.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    let sum: f64 = expected.iter().zip(actual).map(|(f, g)| (f - g) * (f - g)).sum();
    Ok(sum / expected.len() as f64)
}

/// Pairs of spikes at the same destination neuron whose hardware delivery
/// order inverts their reference order, summed over neurons.
pub fn disorder_pair_count(hw: &DeliveryLog, ideal: &DeliveryLog) -> Result<u64> {
    if hw.delivered.len() != ideal.delivered.len() {
        return Err(Error::DimensionMismatch {
            expected: ideal.delivered.len(),
            found: hw.delivered.len(),
        });
    }
    let mut total = 0u64;
    for (neuron, (h, i)) in hw.delivered.iter().zip(&ideal.delivered).enumerate() {
        let mut pairs = join_by_spike(neuron, h, i)?;
        pairs.sort_unstable();
        let mut hw_order: Vec<u64> = pairs.into_iter().map(|(_, hw)| hw).collect();
        total += count_inversions(&mut hw_order);
    }
    Ok(total)
}

/// `(reference cycle, hardware cycle)` per spike, matched on (src, seq).
fn join_by_spike(neuron: NeuronId, hw: &[Delivery], ideal: &[Delivery]) -> Result<Vec<(u64, u64)>> {
    if hw.len() != ideal.len() {
        return Err(Error::MismatchedClustering(format!(
            "neuron {neuron} received {} spikes in hardware and {} in the reference",
            hw.len(),
            ideal.len()
        )));
    }
    let reference: HashMap<(NeuronId, u64), u64> = ideal.iter().map(|d| ((d.src, d.seq), d.cycle)).collect();
    hw.iter()
        .map(|d| {
            reference
                .get(&(d.src, d.seq))
                .map(|&r| (r, d.cycle))
                .ok_or_else(|| {
                    Error::MismatchedClustering(format!(
                        "neuron {neuron}: spike ({}, {}) missing from the reference log",
                        d.src, d.seq
                    ))
                })
        })
        .collect()
}

/// Number of pairs i < j with v[i] > v[j] (merge sort).
fn count_inversions(v: &mut [u64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut a, mut b) = (0, mid);
    while a < mid && b < n {
        if v[a] <= v[b] {
            merged.push(v[a]);
            a += 1;
        } else {
            merged.push(v[b]);
            inv += (mid - a) as u64;
            b += 1;
        }
    }
    merged.extend_from_slice(&v[a..mid]);
    merged.extend_from_slice(&v[b..n]);
    v.copy_from_slice(&merged);
    inv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareMetrics {
    pub avg_latency: Option<f64>,
    pub max_latency: Option<u64>,
    /// `[latency, count]` pairs, ascending latency.
    pub latency_histogram: Vec<(u64, u64)>,
    /// Spike packets handed to crossbars (local plus routed).
    pub delivered: u64,
    pub local_deliveries: u64,
    pub routed_packets: u64,
    pub background_packets: u64,
    pub total_cycles: u64,
    /// Delivered spike packets per cycle.
    pub throughput: f64,
    /// pJ.
    pub energy: f64,
    pub area_units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronIsi {
    pub neuron: NeuronId,
    /// Of the neuron's own firing times, in cycles.
    pub source: Option<f64>,
    /// As delivered by the hardware, averaged over the neuron's targets.
    pub delivered_hw: Option<f64>,
    /// As delivered by the zero-latency reference.
    pub delivered_ideal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub avg_isi_per_neuron: Vec<NeuronIsi>,
    /// Mean of the per-neuron source-side ISIs.
    pub avg_isi_source: Option<f64>,
    /// Mean of the per-neuron hardware delivery-side ISIs.
    pub avg_isi_delivered: Option<f64>,
    /// Mean over neurons of |delivered_hw − delivered_ideal|.
    pub isi_distortion: Option<f64>,
    /// Neurons left out of ISI averages for having fewer than 2 spikes.
    pub isi_excluded_neurons: u64,
    /// `[|Δ interval| in cycles, count]` over consecutive deliveries of each
    /// (source, target) stream.
    pub isi_distortion_histogram: Vec<(u64, u64)>,
    /// Mean over receiving neurons of the per-source rate deviation.
    pub disorder: Option<f64>,
    pub disorder_pair_count: u64,
    pub fanout: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwReport {
    pub hardware: HardwareMetrics,
    pub model: ModelMetrics,
    /// Reasons for absent metrics.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl HwReport {
    /// Internal-consistency findings that do not make the report unusable.
    pub fn consistency_warnings(&self) -> Vec<String> {
        let h = &self.hardware;
        let mut out = Vec::new();
        if h.total_cycles > 0 {
            let expect = h.delivered as f64 / h.total_cycles as f64;
            if (h.throughput - expect).abs() > 1e-12 * expect.abs().max(1.0) {
                out.push(format!(
                    "hardware.throughput is {} but delivered/total_cycles = {expect}",
                    h.throughput
                ));
            }
        }
        out
    }
}

fn histogram(values: impl Iterator<Item = u64>) -> Vec<(u64, u64)> {
    let mut h: BTreeMap<u64, u64> = BTreeMap::new();
    for v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h.into_iter().collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Per (source, target) stream: delivery cycles in delivery order.
fn streams(log: &DeliveryLog) -> BTreeMap<(NeuronId, NeuronId), Vec<u64>> {
    let mut out: BTreeMap<(NeuronId, NeuronId), Vec<u64>> = BTreeMap::new();
    for (target, ds) in log.delivered.iter().enumerate() {
        for d in ds {
            out.entry((d.src, target)).or_default().push(d.cycle);
        }
    }
    for v in out.values_mut() {
        v.sort_unstable();
    }
    out
}

fn delivered_isi(streams: &BTreeMap<(NeuronId, NeuronId), Vec<u64>>, neurons: usize) -> Vec<Option<f64>> {
    let mut acc = vec![(0.0f64, 0usize); neurons];
    for (&(src, _), cycles) in streams {
        if let Ok(isi) = avg_isi(cycles) {
            acc[src].0 += isi;
            acc[src].1 += 1;
        }
    }
    acc.into_iter().map(|(s, n)| (n > 0).then(|| s / n as f64)).collect()
}

fn rate_disorder(hw: &DeliveryLog, ideal: &DeliveryLog) -> Result<Option<f64>> {
    let window = ideal.window_cycles.max(1) as f64;
    let mut per_neuron = Vec::new();
    for (h, i) in hw.delivered.iter().zip(&ideal.delivered) {
        let mut counts: BTreeMap<NeuronId, (u64, u64)> = BTreeMap::new();
        for d in i {
            counts.entry(d.src).or_default().0 += (d.cycle < ideal.window_cycles) as u64;
        }
        for d in h {
            counts.entry(d.src).or_default().1 += (d.cycle < ideal.window_cycles) as u64;
        }
        if counts.is_empty() {
            continue;
        }
        let expected: Vec<f64> = counts.values().map(|c| c.0 as f64 / window).collect();
        let actual: Vec<f64> = counts.values().map(|c| c.1 as f64 / window).collect();
        per_neuron.push(spike_disorder(&expected, &actual)?);
    }
    Ok(mean(per_neuron.into_iter()))
}

/// Assembles the hardware report. Rates for the disorder metric count
/// deliveries inside the reference window `[0, duration · cycles_per_timestep)`.
pub fn build_report(hw_log: &DeliveryLog, ideal_log: &DeliveryLog, hw: &HardwareConfig) -> Result<HwReport> {
    let n = ideal_log.delivered.len();
    if hw_log.delivered.len() != n || hw_log.window_cycles != ideal_log.window_cycles {
        return Err(Error::MismatchedClustering(
            "hardware and reference logs describe different runs".into(),
        ));
    }
    let mut notes = Vec::new();

    let latencies: Vec<u64> = hw_log.spike_packets().map(|p| p.latency()).collect();
    let delivered = latencies.len() as u64;
    let avg_latency = mean(latencies.iter().map(|&l| l as f64));
    if avg_latency.is_none() {
        notes.push("avg_latency/max_latency: no spike was delivered".to_string());
    }
    let hardware = HardwareMetrics {
        avg_latency,
        max_latency: latencies.iter().copied().max(),
        latency_histogram: histogram(latencies.iter().copied()),
        delivered,
        local_deliveries: hw_log.spike_packets().filter(|p| p.kind == PacketKind::Local).count() as u64,
        routed_packets: hw_log.spike_packets().filter(|p| p.kind == PacketKind::Global).count() as u64,
        background_packets: hw_log.background_packets().count() as u64,
        total_cycles: hw_log.total_cycles,
        throughput: if hw_log.total_cycles > 0 {
            delivered as f64 / hw_log.total_cycles as f64
        } else {
            0.0
        },
        energy: noc::energy(hw_log, hw),
        area_units: noc::area_units(hw),
    };

    let hw_streams = streams(hw_log);
    let ideal_streams = streams(ideal_log);
    let hw_isi = delivered_isi(&hw_streams, n);
    let ideal_isi = delivered_isi(&ideal_streams, n);
    let per_neuron: Vec<NeuronIsi> = (0..n)
        .map(|i| NeuronIsi {
            neuron: i,
            source: avg_isi(&ideal_log.sent[i]).ok(),
            delivered_hw: hw_isi[i],
            delivered_ideal: ideal_isi[i],
        })
        .collect();
    let diffs: Vec<f64> = per_neuron
        .iter()
        .filter_map(|x| Some((x.delivered_hw? - x.delivered_ideal?).abs()))
        .collect();
    let excluded = per_neuron.iter().filter(|x| x.source.is_none()).count() as u64;
    let isi_distortion = mean(diffs.iter().copied());
    if isi_distortion.is_none() {
        notes.push("isi_distortion: no neuron delivered at least 2 spikes in both logs".to_string());
    }
    let mut interval_diffs = Vec::new();
    for (key, h) in &hw_streams {
        if let Some(i) = ideal_streams.get(key) {
            for (hw_w, id_w) in h.windows(2).zip(i.windows(2)) {
                interval_diffs.push((hw_w[1] - hw_w[0]).abs_diff(id_w[1] - id_w[0]));
            }
        }
    }
    let disorder = rate_disorder(hw_log, ideal_log)?;
    if disorder.is_none() {
        notes.push("disorder: no neuron received any spike".to_string());
    }

    let model = ModelMetrics {
        avg_isi_source: mean(per_neuron.iter().filter_map(|x| x.source)),
        avg_isi_delivered: mean(per_neuron.iter().filter_map(|x| x.delivered_hw)),
        avg_isi_per_neuron: per_neuron,
        isi_distortion,
        isi_excluded_neurons: excluded,
        isi_distortion_histogram: histogram(interval_diffs.into_iter()),
        disorder,
        disorder_pair_count: disorder_pair_count(hw_log, ideal_log)?,
        fanout: hw_log.fanout.clone(),
    };
    Ok(HwReport { hardware, model, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isi_examples() {
        assert_eq!(avg_isi(&[2, 4, 6]).unwrap(), 2.0);
        assert_eq!(avg_isi(&[0, 10]).unwrap(), 10.0);
        assert!((avg_isi(&[1, 2, 4, 8]).unwrap() - 7.0 / 3.0).abs() < 1e-15);
        assert!(matches!(avg_isi(&[5]), Err(Error::InsufficientSpikes(1))));
    }

    #[test]
    fn disorder_examples() {
        assert_eq!(spike_disorder(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(spike_disorder(&[2.0], &[0.0]).unwrap(), 4.0);
        assert_eq!(spike_disorder(&[1.0, 3.0], &[2.0, 1.0]).unwrap(), 2.5);
        assert!(matches!(
            spike_disorder(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(spike_disorder(&[], &[]).is_err());
    }

    #[test]
    fn inversions() {
        assert_eq!(count_inversions(&mut [3, 2, 1]), 3);
        assert_eq!(count_inversions(&mut [1, 1, 1]), 0);
        assert_eq!(count_inversions(&mut [2, 1, 3]), 1);
    }
}
