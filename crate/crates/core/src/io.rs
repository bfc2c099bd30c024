//! On-disk formats: the network description, the hardware configuration, the
//! cluster file, and the three pipeline artifacts (`snn.sw.out` spike trace,
//! `snn.map.out` mapping, `snn.hw.out` report).
//!
//! Every file is UTF-8 JSON carrying `"version": "v1"`. Generated artifacts
//! must state the version; hand-written inputs (network, hardware config)
//! may omit it. Readers validate every invariant and report the offending
//! field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{EnergyTable, HardwareConfig, RoutingAlgo, Selection};
use crate::error::{Error, Result};
use crate::mesh::{Coord, Mesh};
use crate::metrics::HwReport;
use crate::partition::ClusteredSnn;
use crate::placement::{ClusterTraffic, Placement};
use crate::snn::{
    IzhikevichParams, LifParams, NeuronModel, SnnNetwork, SpikeSchedule, SpikeTrace, Synapse, SynapseMode,
    DEFAULT_TAU_SYN_MS,
};

pub const FORMAT_VERSION: &str = "v1";

pub const TRACE_FILE: &str = "snn.sw.out";
pub const MAPPING_FILE: &str = "snn.map.out";
pub const REPORT_FILE: &str = "snn.hw.out";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_error(doc: &str, e: serde_json::Error) -> Error {
    Error::Schema {
        field: doc.to_string(),
        line: Some(e.line()),
        message: e.to_string(),
    }
}

fn parse<T: DeserializeOwned>(doc: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| json_error(doc, e))
}

fn from_value<T: DeserializeOwned>(field: &str, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::schema(field, e.to_string()))
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

fn check_version(v: Option<&str>, required: bool) -> Result<()> {
    match v {
        Some(FORMAT_VERSION) => Ok(()),
        Some(other) => Err(Error::Version {
            found: other.to_string(),
        }),
        None if required => Err(Error::schema("version", "missing format version")),
        None => Ok(()),
    }
}

// --- network description ---------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<String>,
    neurons: Vec<NeuronDoc>,
    #[serde(default)]
    synapses: Vec<Synapse>,
    #[serde(default)]
    synapse_mode: SynapseMode,
    #[serde(default = "default_tau_syn")]
    tau_syn: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_self_loops: bool,
}

fn default_tau_syn() -> f64 {
    DEFAULT_TAU_SYN_MS
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NeuronDoc {
    id: usize,
    kind: String,
    #[serde(default)]
    params: Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate_hz: Option<f64>,
}

fn neuron_from_doc(k: usize, doc: NeuronDoc) -> Result<NeuronModel> {
    let field = format!("neurons[{k}].params");
    match doc.kind.as_str() {
        "Izhikevich" => Ok(NeuronModel::Izhikevich(from_value::<IzhikevichParams>(&field, doc.params)?)),
        "LIF" => Ok(NeuronModel::Lif(from_value::<LifParams>(&field, doc.params)?)),
        "SpikeSource" => {
            let s: ScheduleDoc = from_value(&field, doc.params)?;
            match (s.schedule, s.rate_hz) {
                (Some(times), None) => Ok(NeuronModel::SpikeSource(SpikeSchedule::Times(times))),
                (None, Some(rate_hz)) => Ok(NeuronModel::SpikeSource(SpikeSchedule::Poisson { rate_hz })),
                _ => Err(Error::schema(field, "SpikeSource needs exactly one of \"schedule\" or \"rate_hz\"")),
            }
        }
        other => Err(Error::schema(
            format!("neurons[{k}].kind"),
            format!("unknown neuron kind {other:?} (expected Izhikevich, LIF or SpikeSource)"),
        )),
    }
}

fn neuron_to_doc(id: usize, n: &NeuronModel) -> NeuronDoc {
    let (kind, params) = match n {
        NeuronModel::Izhikevich(p) => ("Izhikevich", serde_json::to_value(p)),
        NeuronModel::Lif(p) => ("LIF", serde_json::to_value(p)),
        NeuronModel::SpikeSource(SpikeSchedule::Times(t)) => (
            "SpikeSource",
            serde_json::to_value(ScheduleDoc {
                schedule: Some(t.clone()),
                rate_hz: None,
            }),
        ),
        NeuronModel::SpikeSource(SpikeSchedule::Poisson { rate_hz }) => (
            "SpikeSource",
            serde_json::to_value(ScheduleDoc {
                schedule: None,
                rate_hz: Some(*rate_hz),
            }),
        ),
    };
    NeuronDoc {
        id,
        kind: kind.to_string(),
        params: params.expect("neuron parameters serialize"),
    }
}

pub fn parse_network(text: &str) -> Result<SnnNetwork> {
    let doc: NetworkDoc = parse("network", text)?;
    check_version(doc.version.as_deref(), false)?;
    let n = doc.neurons.len();
    let mut slots: Vec<Option<NeuronModel>> = vec![None; n];
    for (k, nd) in doc.neurons.into_iter().enumerate() {
        let id = nd.id;
        if id >= n {
            return Err(Error::schema(
                format!("neurons[{k}].id"),
                format!("id {id} outside the dense range 0..{n}"),
            ));
        }
        if slots[id].is_some() {
            return Err(Error::schema(format!("neurons[{k}].id"), format!("duplicate id {id}")));
        }
        slots[id] = Some(neuron_from_doc(k, nd)?);
    }
    let net = SnnNetwork {
        neurons: slots.into_iter().map(|s| s.expect("ids are dense")).collect(),
        synapses: doc.synapses,
        synapse_mode: doc.synapse_mode,
        tau_syn: doc.tau_syn,
        allow_self_loops: doc.allow_self_loops,
    };
    net.validate().map_err(|e| match e {
        Error::InvalidNetwork(msg) => Error::schema("network", msg),
        e => e,
    })?;
    Ok(net)
}

pub fn network_to_string(net: &SnnNetwork) -> String {
    to_pretty(&NetworkDoc {
        version: Some(FORMAT_VERSION.to_string()),
        neurons: net.neurons.iter().enumerate().map(|(i, n)| neuron_to_doc(i, n)).collect(),
        synapses: net.synapses.clone(),
        synapse_mode: net.synapse_mode,
        tau_syn: net.tau_syn,
        allow_self_loops: net.allow_self_loops,
    })
}

pub fn read_network(path: &Path) -> Result<SnnNetwork> {
    parse_network(&read_text(path)?)
}

pub fn write_network(net: &SnnNetwork, path: &Path) -> Result<()> {
    write_text(path, &network_to_string(net))
}

// --- spike trace (snn.sw.out) -------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    version: Option<String>,
    duration: u32,
    spikes: Vec<Vec<u32>>,
    weights: Vec<(usize, usize, f64)>,
}

pub fn trace_to_string(t: &SpikeTrace) -> String {
    to_pretty(&TraceDoc {
        version: Some(FORMAT_VERSION.to_string()),
        duration: t.duration,
        spikes: t.spikes.clone(),
        weights: t.weights.clone(),
    })
}

pub fn parse_trace(text: &str) -> Result<SpikeTrace> {
    let doc: TraceDoc = parse("trace", text)?;
    check_version(doc.version.as_deref(), true)?;
    let t = SpikeTrace {
        spikes: doc.spikes,
        weights: doc.weights,
        duration: doc.duration,
    };
    t.validate()?;
    Ok(t)
}

pub fn write_trace(t: &SpikeTrace, path: &Path) -> Result<()> {
    write_text(path, &trace_to_string(t))
}

pub fn read_trace(path: &Path) -> Result<SpikeTrace> {
    parse_trace(&read_text(path)?)
}

// --- hardware configuration ---------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HwDoc {
    version: Option<String>,
    mesh_w: u32,
    mesh_h: u32,
    crossbar_capacity: u32,
    routing: RoutingAlgo,
    #[serde(default)]
    selection: Option<Selection>,
    buffer_depth: Option<u32>,
    cycles_per_timestep: Option<u32>,
    dyad_threshold: Option<f64>,
    crossbar_latency: Option<u32>,
    packet_size: Option<u32>,
    energy: Option<EnergyTable>,
    energy_file: Option<PathBuf>,
    seed: Option<u64>,
}

/// Parses a hardware configuration. `base_dir` resolves a relative
/// `energy_file`.
pub fn parse_hw_config(text: &str, base_dir: Option<&Path>) -> Result<HardwareConfig> {
    let doc: HwDoc = parse("hardware config", text)?;
    check_version(doc.version.as_deref(), false)?;
    let mut hw = HardwareConfig::new(doc.mesh_w, doc.mesh_h, doc.crossbar_capacity, doc.routing);
    if let Some(v) = doc.selection {
        hw.selection = v;
    }
    if let Some(v) = doc.buffer_depth {
        hw.buffer_depth = v;
    }
    if let Some(v) = doc.cycles_per_timestep {
        hw.cycles_per_timestep = v;
    }
    if let Some(v) = doc.dyad_threshold {
        hw.dyad_threshold = v;
    }
    if let Some(v) = doc.crossbar_latency {
        hw.crossbar_latency = v;
    }
    if let Some(v) = doc.packet_size {
        hw.packet_size = v;
    }
    if let Some(v) = doc.seed {
        hw.seed = v;
    }
    match (doc.energy, doc.energy_file) {
        (Some(_), Some(_)) => {
            return Err(Error::schema("energy", "give either \"energy\" or \"energy_file\", not both"));
        }
        (Some(e), None) => hw.energy = e,
        (None, Some(p)) => {
            let p = match base_dir {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            };
            hw.energy = parse("energy_file", &read_text(&p)?)?;
        }
        (None, None) => {}
    }
    hw.validate()?;
    Ok(hw)
}

pub fn read_hw_config(path: &Path) -> Result<HardwareConfig> {
    parse_hw_config(&read_text(path)?, path.parent())
}

pub fn hw_config_to_string(hw: &HardwareConfig) -> String {
    let mut v = serde_json::to_value(hw).expect("config serializes");
    v.as_object_mut()
        .expect("object")
        .insert("version".into(), Value::String(FORMAT_VERSION.into()));
    to_pretty(&v)
}

pub fn write_hw_config(hw: &HardwareConfig, path: &Path) -> Result<()> {
    write_text(path, &hw_config_to_string(hw))
}

// --- clusters -------------------------------------------------------------------

/// Partitioner output: the clustering plus the inter-cluster traffic that
/// placement optimizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClustersFile {
    pub capacity: u32,
    pub cluster_of: Vec<usize>,
    pub global_spike_cost: u64,
    pub traffic: ClusterTraffic,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClustersDoc {
    version: Option<String>,
    capacity: u32,
    clusters: usize,
    cluster_of: Vec<usize>,
    global_spike_cost: u64,
    cluster_traffic: Vec<(usize, usize, u64)>,
}

impl ClustersFile {
    pub fn new(c: &ClusteredSnn, trace: &SpikeTrace) -> Result<Self> {
        Ok(Self {
            capacity: c.capacity,
            cluster_of: c.cluster_of.clone(),
            global_spike_cost: c.global_spike_cost,
            traffic: ClusterTraffic::for_clustering(c, trace)?,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.traffic.clusters
    }
}

pub fn clusters_to_string(c: &ClustersFile) -> String {
    to_pretty(&ClustersDoc {
        version: Some(FORMAT_VERSION.into()),
        capacity: c.capacity,
        clusters: c.traffic.clusters,
        cluster_of: c.cluster_of.clone(),
        global_spike_cost: c.global_spike_cost,
        cluster_traffic: c.traffic.edges.clone(),
    })
}

fn check_dense(field: &str, cluster_of: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    for (i, &c) in cluster_of.iter().enumerate() {
        if c >= k {
            return Err(Error::schema(format!("{field}[{i}]"), format!("cluster {c} >= {k}")));
        }
        seen[c] = true;
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(Error::schema(field, format!("cluster {c} has no neurons")));
    }
    Ok(())
}

pub fn parse_clusters(text: &str) -> Result<ClustersFile> {
    let doc: ClustersDoc = parse("clusters", text)?;
    check_version(doc.version.as_deref(), true)?;
    check_dense("cluster_of", &doc.cluster_of, doc.clusters)?;
    for (k, &(a, b, _)) in doc.cluster_traffic.iter().enumerate() {
        if a >= doc.clusters || b >= doc.clusters || a == b {
            return Err(Error::schema(
                format!("cluster_traffic[{k}]"),
                "edge must join two distinct existing clusters",
            ));
        }
    }
    Ok(ClustersFile {
        capacity: doc.capacity,
        cluster_of: doc.cluster_of,
        global_spike_cost: doc.global_spike_cost,
        traffic: ClusterTraffic {
            clusters: doc.clusters,
            edges: doc.cluster_traffic,
        },
    })
}

pub fn write_clusters(c: &ClustersFile, path: &Path) -> Result<()> {
    write_text(path, &clusters_to_string(c))
}

pub fn read_clusters(path: &Path) -> Result<ClustersFile> {
    parse_clusters(&read_text(path)?)
}

// --- mapping (snn.map.out) ------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingFile {
    pub capacity: u32,
    pub mesh: Mesh,
    /// Cluster per neuron.
    pub cluster_of: Vec<usize>,
    /// Crossbar coordinate per cluster.
    pub crossbar_of: Vec<Coord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingDoc {
    version: Option<String>,
    mesh_w: u32,
    mesh_h: u32,
    capacity: u32,
    cluster_of: Vec<usize>,
    crossbar_of: Vec<(u32, u32)>,
}

impl MappingFile {
    pub fn new(c: &ClusteredSnn, p: &Placement) -> Self {
        Self {
            capacity: c.capacity,
            mesh: p.mesh,
            cluster_of: c.cluster_of.clone(),
            crossbar_of: p.crossbar_of.clone(),
        }
    }

    pub fn placement(&self) -> Placement {
        Placement {
            mesh: self.mesh,
            crossbar_of: self.crossbar_of.clone(),
        }
    }

    /// Rebuilds the clustering against `trace`, which must cover exactly the mapped neurons.
    pub fn clustering(&self, trace: &SpikeTrace) -> Result<ClusteredSnn> {
        if trace.neuron_count() != self.cluster_of.len() {
            return Err(Error::schema(
                "cluster_of",
                format!(
                    "mapping covers {} neurons but the trace has {}",
                    self.cluster_of.len(),
                    trace.neuron_count()
                ),
            ));
        }
        Ok(ClusteredSnn::from_trace_assignment(trace, self.capacity, &self.cluster_of))
    }

    fn validate(&self) -> Result<()> {
        if self.mesh.width == 0 || self.mesh.height == 0 {
            return Err(Error::range("mesh_w/mesh_h", "mesh dimensions must be positive"));
        }
        check_dense("cluster_of", &self.cluster_of, self.crossbar_of.len())?;
        self.placement().validate(self.crossbar_of.len()).map_err(|e| match e {
            Error::InvalidPlacement(msg) => Error::schema("crossbar_of", msg),
            e => e,
        })
    }
}

pub fn mapping_to_string(m: &MappingFile) -> String {
    to_pretty(&MappingDoc {
        version: Some(FORMAT_VERSION.into()),
        mesh_w: m.mesh.width,
        mesh_h: m.mesh.height,
        capacity: m.capacity,
        cluster_of: m.cluster_of.clone(),
        crossbar_of: m.crossbar_of.iter().map(|c| (c.x, c.y)).collect(),
    })
}

pub fn parse_mapping(text: &str) -> Result<MappingFile> {
    let doc: MappingDoc = parse("mapping", text)?;
    check_version(doc.version.as_deref(), true)?;
    let m = MappingFile {
        capacity: doc.capacity,
        mesh: Mesh::new(doc.mesh_w, doc.mesh_h),
        cluster_of: doc.cluster_of,
        crossbar_of: doc.crossbar_of.into_iter().map(|(x, y)| Coord::new(x, y)).collect(),
    };
    m.validate()?;
    Ok(m)
}

pub fn write_mapping(m: &MappingFile, path: &Path) -> Result<()> {
    write_text(path, &mapping_to_string(m))
}

pub fn read_mapping(path: &Path) -> Result<MappingFile> {
    parse_mapping(&read_text(path)?)
}

// --- report (snn.hw.out) --------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ReportDoc {
    version: Option<String>,
    #[serde(flatten)]
    report: HwReport,
}

pub fn report_to_string(r: &HwReport) -> String {
    to_pretty(&ReportDoc {
        version: Some(FORMAT_VERSION.into()),
        report: r.clone(),
    })
}

/// Parses a report, returning it with any consistency warnings.
pub fn parse_report(text: &str) -> Result<(HwReport, Vec<String>)> {
    let raw: Value = parse("report", text)?;
    let obj = raw
        .as_object()
        .ok_or_else(|| Error::schema("report", "expected a JSON object"))?;
    check_version(obj.get("version").and_then(Value::as_str), true)?;
    for section in ["hardware", "model"] {
        if !obj.contains_key(section) {
            return Err(Error::schema(section, "missing section"));
        }
    }
    let doc: ReportDoc = parse("report", text)?;
    let r = doc.report;
    let mass: u64 = r.hardware.latency_histogram.iter().map(|&(_, c)| c).sum();
    if mass != r.hardware.delivered {
        return Err(Error::schema(
            "hardware.latency_histogram",
            format!("histogram mass {mass} differs from delivered count {}", r.hardware.delivered),
        ));
    }
    let warnings = r.consistency_warnings();
    Ok((r, warnings))
}

pub fn write_report(r: &HwReport, path: &Path) -> Result<()> {
    write_text(path, &report_to_string(r))
}

pub fn read_report(path: &Path) -> Result<(HwReport, Vec<String>)> {
    parse_report(&read_text(path)?)
}
