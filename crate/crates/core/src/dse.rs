//! End-to-end pipeline and design-space sweeps.
//!
//! A pipeline run takes a network through software simulation, partitioning,
//! placement, the cycle-accurate interconnect and the zero-latency reference,
//! and reports both. A sweep runs many independent pipeline points on a
//! bounded thread pool and ranks them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::HardwareConfig;
use crate::error::{Error, Result};
use crate::io::{self, ClustersFile, MappingFile};
use crate::metrics::{build_report, HwReport};
use crate::noc::{self, DeliveryLog, HwSimOptions, Injection};
use crate::partition::{self, ClusteredSnn, PartitionAlgo, PartitionParams};
use crate::placement::{self, Placement, PlacementAlgo, PlacementOptions};
use crate::pso::PsoParams;
use crate::snn::{self, NeuronId, SnnNetwork, SpikeTrace};
use crate::Deadline;

pub const DEFAULT_DURATION_MS: u32 = 1000;
pub const DEFAULT_POINT_TIMEOUT: Duration = Duration::from_secs(300);

/// Everything besides the network that determines one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub hw: HardwareConfig,
    pub partition_algo: PartitionAlgo,
    pub placement_algo: PlacementAlgo,
    pub duration: u32,
    /// Used by every randomized stage.
    pub seed: u64,
    pub partition_pso: PsoParams,
    pub placement: PlacementOptions,
    /// Synthetic packets sharing the interconnect with the spike traffic.
    pub background: Vec<Injection>,
}

impl PipelineSpec {
    pub fn new(hw: HardwareConfig, duration: u32, seed: u64) -> Self {
        Self {
            hw,
            partition_algo: PartitionAlgo::Greedy,
            placement_algo: PlacementAlgo::Pso,
            duration,
            seed,
            partition_pso: PsoParams::default(),
            placement: PlacementOptions::default(),
            background: Vec::new(),
        }
    }
}

/// Output-spike comparison after re-simulating the network on delivered
/// spikes: the hardware delivery times against the zero-latency ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyProxy {
    /// Non-source neurons without outgoing synapses (all non-source neurons
    /// if every neuron projects somewhere).
    pub output_neurons: Vec<NeuronId>,
    pub ideal_spikes: Vec<usize>,
    pub hw_spikes: Vec<usize>,
    /// Sum over output neurons of |hw − ideal| spike counts.
    pub spike_count_diff: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub trace: SpikeTrace,
    pub clustering: ClusteredSnn,
    pub placement: Placement,
    pub mapping: MappingFile,
    pub hw_log: DeliveryLog,
    pub ideal_log: DeliveryLog,
    pub report: HwReport,
    pub accuracy: AccuracyProxy,
}

pub fn output_neurons(net: &SnnNetwork) -> Vec<NeuronId> {
    let mut projects = vec![false; net.neuron_count()];
    for s in &net.synapses {
        projects[s.pre] = true;
    }
    let candidates: Vec<NeuronId> = (0..net.neuron_count()).filter(|&i| !net.neurons[i].is_source()).collect();
    let sinks: Vec<NeuronId> = candidates.iter().copied().filter(|&i| !projects[i]).collect();
    if sinks.is_empty() {
        candidates
    } else {
        sinks
    }
}

pub fn accuracy_proxy(
    net: &SnnNetwork,
    trace: &SpikeTrace,
    hw_log: &DeliveryLog,
    ideal_log: &DeliveryLog,
) -> Result<AccuracyProxy> {
    let hw_run = snn::replay_delivered(net, trace, &hw_log.delivered_steps())?;
    let ideal_run = snn::replay_delivered(net, trace, &ideal_log.delivered_steps())?;
    let outputs = output_neurons(net);
    let ideal_spikes: Vec<usize> = outputs.iter().map(|&i| ideal_run.spike_count(i)).collect();
    let hw_spikes: Vec<usize> = outputs.iter().map(|&i| hw_run.spike_count(i)).collect();
    let spike_count_diff = ideal_spikes.iter().zip(&hw_spikes).map(|(&a, &b)| a.abs_diff(b) as u64).sum();
    Ok(AccuracyProxy {
        output_neurons: outputs,
        ideal_spikes,
        hw_spikes,
        spike_count_diff,
    })
}

pub fn partition_with(
    algo: PartitionAlgo,
    net: &SnnNetwork,
    trace: &SpikeTrace,
    params: &PartitionParams,
    pso: &PsoParams,
    seed: u64,
    deadline: &Deadline,
) -> Result<ClusteredSnn> {
    match algo {
        PartitionAlgo::Greedy => partition::partition_greedy(net, trace, params),
        PartitionAlgo::Pso => partition::partition_pso_traced(net, trace, params, pso, seed, deadline).map(|r| r.clustering),
        PartitionAlgo::RoundRobin => partition::partition_round_robin(net, trace, params),
    }
}

/// Places `clustering`. With a trace, PSO refinement (if configured) can
/// re-score candidates on the interconnect simulator.
pub fn place_with(
    algo: PlacementAlgo,
    clusters: &ClustersFile,
    hw: &HardwareConfig,
    options: &PlacementOptions,
    seed: u64,
    deadline: &Deadline,
    refine_on: Option<(&ClusteredSnn, &SpikeTrace)>,
) -> Result<Placement> {
    let k = clusters.cluster_count();
    match algo {
        PlacementAlgo::Identity => Placement::identity(k, hw.mesh()),
        PlacementAlgo::Random => Placement::random(k, hw.mesh(), seed),
        PlacementAlgo::Pso => match refine_on {
            Some((c, t)) if options.refine.is_some() => {
                placement::place_pso_traced(c, hw, t, options, seed, deadline).map(|r| r.placement)
            }
            _ => {
                let opts = PlacementOptions { refine: None, ..*options };
                placement::place_pso_traffic(&clusters.traffic, hw, &opts, seed, deadline, None).map(|r| r.placement)
            }
        },
    }
}

/// Runs every stage on `net`. Errors carry the label of the failing stage.
pub fn run_pipeline(net: &SnnNetwork, spec: &PipelineSpec, deadline: &Deadline) -> Result<PipelineResult> {
    let hw = &spec.hw;
    hw.validate().map_err(|e| e.in_stage("config"))?;
    net.validate().map_err(|e| e.in_stage("config"))?;

    let trace = snn::simulate_software(net, spec.duration, spec.seed).map_err(|e| e.in_stage("simulate"))?;
    log::info!("simulated {} spikes over {} ms", trace.total_spikes(), trace.duration);

    let params = PartitionParams::new(hw.crossbar_capacity).with_max_clusters(hw.crossbars());
    let clustering = partition_with(
        spec.partition_algo,
        net,
        &trace,
        &params,
        &spec.partition_pso,
        spec.seed,
        deadline,
    )
    .map_err(|e| e.in_stage("partition"))?;
    log::info!(
        "{} clusters, global spike cost {}",
        clustering.cluster_count(),
        clustering.global_spike_cost
    );

    let clusters = ClustersFile::new(&clustering, &trace).map_err(|e| e.in_stage("partition"))?;
    let placement = place_with(
        spec.placement_algo,
        &clusters,
        hw,
        &spec.placement,
        spec.seed,
        deadline,
        Some((&clustering, &trace)),
    )
    .map_err(|e| e.in_stage("place"))?;
    placement::to_mapping_matrix(&clustering, &placement)
        .and_then(|m| m.check(&clustering, &placement))
        .map_err(|e| e.in_stage("place"))?;
    let mapping = MappingFile::new(&clustering, &placement);

    let opts = HwSimOptions {
        background: spec.background.clone(),
        deadline: *deadline,
    };
    let hw_log = noc::simulate_hw_with(&trace, &clustering, &placement, hw, &opts).map_err(|e| e.in_stage("hwsim"))?;
    let ideal_log = noc::ideal_network_sim(&trace, &clustering, &placement, hw.cycles_per_timestep)
        .map_err(|e| e.in_stage("hwsim"))?;
    let report = build_report(&hw_log, &ideal_log, hw).map_err(|e| e.in_stage("report"))?;
    let accuracy = accuracy_proxy(net, &trace, &hw_log, &ideal_log).map_err(|e| e.in_stage("report"))?;

    Ok(PipelineResult {
        trace,
        clustering,
        placement,
        mapping,
        hw_log,
        ideal_log,
        report,
        accuracy,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `snn.sw.out`, `snn.map.out` and `snn.hw.out` into `dir`.
pub fn write_artifacts(result: &PipelineResult, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    io::write_trace(&result.trace, &dir.join(io::TRACE_FILE))?;
    io::write_mapping(&result.mapping, &dir.join(io::MAPPING_FILE))?;
    io::write_report(&result.report, &dir.join(io::REPORT_FILE))
}

// --- sweeps -------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    Energy,
    AvgLatency,
    IsiDistortion,
    Disorder,
    Composite,
}

impl std::str::FromStr for RankKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "energy" => Ok(RankKey::Energy),
            "avg_latency" => Ok(RankKey::AvgLatency),
            "isi_distortion" => Ok(RankKey::IsiDistortion),
            "disorder" => Ok(RankKey::Disorder),
            "composite" => Ok(RankKey::Composite),
            _ => Err(format!(
                "unknown rank key {s:?} (energy, avg_latency, isi_distortion, disorder, composite)"
            )),
        }
    }
}

/// Weights of the composite rank. Each metric is divided by its largest
/// value among the successful points before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositeWeights {
    pub energy: f64,
    pub avg_latency: f64,
    pub isi_distortion: f64,
    pub disorder: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        Self {
            energy: 1.0,
            avg_latency: 1.0,
            isi_distortion: 1.0,
            disorder: 1.0,
        }
    }
}

/// One grid entry as written in the grid file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Hardware config fields, merged over the sweep's base config.
    #[serde(default)]
    pub hw: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_algo: Option<PartitionAlgo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement_algo: Option<PlacementAlgo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_pso: Option<PsoParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<PlacementOptions>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub background: Vec<Injection>,
}

/// A grid file is either a bare list of points or an object with the list
/// under `points` plus sweep-wide settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridDoc {
    List(Vec<GridPoint>),
    Full(GridFile),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default)]
    pub version: Option<String>,
    /// Base hardware config every point's `hw` is merged over.
    #[serde(default)]
    pub base_hw: Value,
    #[serde(default)]
    pub composite_weights: CompositeWeights,
    pub points: Vec<GridPoint>,
}

pub fn parse_grid(text: &str) -> Result<GridFile> {
    let doc: GridDoc = serde_json::from_str(text).map_err(|e| Error::Schema {
        field: "grid".into(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let grid = match doc {
        GridDoc::List(points) => GridFile {
            points,
            ..GridFile::default()
        },
        GridDoc::Full(g) => g,
    };
    if let Some(v) = grid.version.as_deref() {
        if v != io::FORMAT_VERSION {
            return Err(Error::Version { found: v.into() });
        }
    }
    if grid.points.is_empty() {
        return Err(Error::schema("points", "grid has no points"));
    }
    Ok(grid)
}

pub fn read_grid(path: &Path) -> Result<GridFile> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_grid(&text)
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, o) if !o.is_null() => *b = o.clone(),
        _ => {}
    }
}

/// Sweep-wide settings.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Worker threads; points run concurrently up to this many.
    pub jobs: usize,
    pub seed: u64,
    pub duration: u32,
    pub rank_by: RankKey,
    pub weights: CompositeWeights,
    pub point_timeout: Option<Duration>,
    /// Base hardware config (JSON object), overridden per point.
    pub base_hw: Value,
    /// Directory for resolving relative `energy_file` paths.
    pub base_dir: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            seed: 0,
            duration: DEFAULT_DURATION_MS,
            rank_by: RankKey::Energy,
            weights: CompositeWeights::default(),
            point_timeout: Some(DEFAULT_POINT_TIMEOUT),
            base_hw: Value::Null,
            base_dir: None,
        }
    }
}

/// Resolves a grid point against the sweep options.
pub fn point_spec(point: &GridPoint, opts: &SweepOptions) -> Result<PipelineSpec> {
    let mut hw_json = if opts.base_hw.is_null() {
        Value::Object(Default::default())
    } else {
        opts.base_hw.clone()
    };
    merge(&mut hw_json, &point.hw);
    let hw = io::parse_hw_config(&hw_json.to_string(), opts.base_dir.as_deref())?;
    let mut spec = PipelineSpec::new(hw, point.duration.unwrap_or(opts.duration), point.seed.unwrap_or(opts.seed));
    if let Some(a) = point.partition_algo {
        spec.partition_algo = a;
    }
    if let Some(a) = point.placement_algo {
        spec.placement_algo = a;
    }
    if let Some(p) = point.partition_pso {
        spec.partition_pso = p;
    }
    if let Some(p) = point.placement {
        spec.placement = p;
    }
    spec.background = point.background.clone();
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub name: String,
    pub stage: Option<String>,
    pub message: String,
}

impl From<&Error> for PointError {
    fn from(e: &Error) -> Self {
        Self {
            name: e.name().to_string(),
            stage: e.stage().map(str::to_string),
            message: e.root().to_string(),
        }
    }
}

/// One evaluated grid point. `report` is present iff the pipeline completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsePoint {
    /// Position in the grid.
    pub index: usize,
    pub label: String,
    pub hw: Option<HardwareConfig>,
    pub partition_algo: Option<PartitionAlgo>,
    pub placement_algo: Option<PlacementAlgo>,
    pub duration: Option<u32>,
    pub seed: Option<u64>,
    pub clusters: Option<usize>,
    pub report: Option<HwReport>,
    pub accuracy: Option<AccuracyProxy>,
    pub error: Option<PointError>,
    /// Value of the ranking key (lower is better); absent for failures.
    pub rank_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PointRun {
    pub point: DsePoint,
    pub result: Option<PipelineResult>,
    pub wall_time: Duration,
}

fn run_point(net: &SnnNetwork, index: usize, gp: &GridPoint, opts: &SweepOptions) -> PointRun {
    let start = Instant::now();
    let label = gp.label.clone().unwrap_or_else(|| format!("p{index}"));
    let mut point = DsePoint {
        index,
        label,
        hw: None,
        partition_algo: None,
        placement_algo: None,
        duration: None,
        seed: None,
        clusters: None,
        report: None,
        accuracy: None,
        error: None,
        rank_value: None,
    };
    let spec = match point_spec(gp, opts) {
        Ok(s) => s,
        Err(e) => {
            point.error = Some((&e.in_stage("config")).into());
            return PointRun {
                point,
                result: None,
                wall_time: start.elapsed(),
            };
        }
    };
    point.hw = Some(spec.hw.clone());
    point.partition_algo = Some(spec.partition_algo);
    point.placement_algo = Some(spec.placement_algo);
    point.duration = Some(spec.duration);
    point.seed = Some(spec.seed);
    let deadline = opts.point_timeout.map_or_else(Deadline::none, Deadline::after);
    let result = match run_pipeline(net, &spec, &deadline) {
        Ok(r) => {
            point.clusters = Some(r.clustering.cluster_count());
            point.report = Some(r.report.clone());
            point.accuracy = Some(r.accuracy.clone());
            Some(r)
        }
        Err(e) => {
            log::warn!("point {} failed: {e}", point.label);
            point.error = Some((&e).into());
            None
        }
    };
    PointRun {
        point,
        result,
        wall_time: start.elapsed(),
    }
}

fn metric(r: &HwReport, key: RankKey) -> Option<f64> {
    match key {
        RankKey::Energy => Some(r.hardware.energy),
        RankKey::AvgLatency => r.hardware.avg_latency,
        RankKey::IsiDistortion => r.model.isi_distortion,
        RankKey::Disorder => r.model.disorder,
        RankKey::Composite => None,
    }
}

/// Fills `rank_value` and sorts: ascending value, then grid index. Points
/// without a value (failures, undefined metrics) go last.
pub fn rank(points: &mut [DsePoint], key: RankKey, weights: &CompositeWeights) {
    let parts = [
        (RankKey::Energy, weights.energy),
        (RankKey::AvgLatency, weights.avg_latency),
        (RankKey::IsiDistortion, weights.isi_distortion),
        (RankKey::Disorder, weights.disorder),
    ];
    let scale: Vec<f64> = parts
        .iter()
        .map(|&(k, _)| {
            points
                .iter()
                .filter_map(|p| p.report.as_ref().and_then(|r| metric(r, k)))
                .fold(0.0f64, |a, v| a.max(v.abs()))
        })
        .collect();
    for p in points.iter_mut() {
        p.rank_value = p.report.as_ref().and_then(|r| match key {
            RankKey::Composite => Some(
                parts
                    .iter()
                    .zip(&scale)
                    .map(|(&(k, w), &s)| {
                        let v = metric(r, k).unwrap_or(0.0);
                        if s > 0.0 {
                            w * v / s
                        } else {
                            0.0
                        }
                    })
                    .sum(),
            ),
            k => metric(r, k),
        });
    }
    points.sort_by(|a, b| match (a.rank_value, b.rank_value) {
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Ranked, best first.
    pub ranked: Vec<DsePoint>,
    /// Grid order.
    pub runs: Vec<PointRun>,
}

/// Evaluates every grid point on a pool of `opts.jobs` threads. Results do
/// not depend on the pool size.
pub fn sweep(net: &SnnNetwork, points: &[GridPoint], opts: &SweepOptions) -> Result<SweepOutcome> {
    if points.is_empty() {
        return Err(Error::schema("points", "grid has no points"));
    }
    net.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::range("jobs", e.to_string()))?;
    let runs: Vec<PointRun> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, gp)| run_point(net, i, gp, opts))
            .collect()
    });
    let mut ranked: Vec<DsePoint> = runs.iter().map(|r| r.point.clone()).collect();
    rank(&mut ranked, opts.rank_by, &opts.weights);
    Ok(SweepOutcome { ranked, runs })
}

pub const SUMMARY_COLUMNS: [&str; 20] = [
    "rank",
    "index",
    "label",
    "status",
    "routing",
    "mesh_w",
    "mesh_h",
    "crossbar_capacity",
    "partition_algo",
    "placement_algo",
    "clusters",
    "rank_value",
    "energy",
    "avg_latency",
    "max_latency",
    "throughput",
    "isi_distortion",
    "disorder",
    "output_spike_diff",
    "error",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn algo_name<T: Serialize>(v: Option<T>) -> String {
    v.and_then(|a| serde_json::to_value(a).ok())
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn summary_csv(ranked: &[DsePoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::schema("summary.csv", e.to_string());
    w.write_record(SUMMARY_COLUMNS).map_err(csv_err)?;
    for (rank, p) in ranked.iter().enumerate() {
        let r = p.report.as_ref();
        let hw = p.hw.as_ref();
        w.write_record([
            (rank + 1).to_string(),
            p.index.to_string(),
            p.label.clone(),
            if p.report.is_some() { "ok" } else { "failed" }.to_string(),
            opt(hw.map(|h| h.routing)),
            opt(hw.map(|h| h.mesh_w)),
            opt(hw.map(|h| h.mesh_h)),
            opt(hw.map(|h| h.crossbar_capacity)),
            algo_name(p.partition_algo),
            algo_name(p.placement_algo),
            opt(p.clusters),
            opt(p.rank_value),
            opt(r.map(|r| r.hardware.energy)),
            opt(r.and_then(|r| r.hardware.avg_latency)),
            opt(r.and_then(|r| r.hardware.max_latency)),
            opt(r.map(|r| r.hardware.throughput)),
            opt(r.and_then(|r| r.model.isi_distortion)),
            opt(r.and_then(|r| r.model.disorder)),
            opt(p.accuracy.as_ref().map(|a| a.spike_count_diff)),
            p.error
                .as_ref()
                .map(|e| format!("{}: {}", e.name, e.message))
                .unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::schema("summary.csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Serialize)]
struct RankedDoc<'a> {
    version: &'static str,
    rank_by: RankKey,
    points: &'a [DsePoint],
}

#[derive(Serialize)]
struct Timing<'a> {
    index: usize,
    label: &'a str,
    wall_time: f64,
}

fn point_dir_name(p: &DsePoint) -> String {
    let clean: String = p
        .label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{:03}-{clean}", p.index)
}

/// Writes `ranked.json`, `summary.csv`, `timings.json` and per-point
/// artifacts under `points/`. Everything except `timings.json` is a pure
/// function of the inputs.
pub fn write_sweep(outcome: &SweepOutcome, rank_by: RankKey, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let doc = RankedDoc {
        version: io::FORMAT_VERSION,
        rank_by,
        points: &outcome.ranked,
    };
    let mut ranked = serde_json::to_string_pretty(&doc).expect("ranked results serialize");
    ranked.push('\n');
    write_file(&dir.join("ranked.json"), &ranked)?;
    write_file(&dir.join("summary.csv"), &summary_csv(&outcome.ranked)?)?;
    let timings: Vec<Timing<'_>> = outcome
        .runs
        .iter()
        .map(|r| Timing {
            index: r.point.index,
            label: &r.point.label,
            wall_time: r.wall_time.as_secs_f64(),
        })
        .collect();
    write_file(
        &dir.join("timings.json"),
        &serde_json::to_string_pretty(&timings).expect("timings serialize"),
    )?;
    for run in &outcome.runs {
        if let Some(res) = &run.result {
            write_artifacts(res, &dir.join("points").join(point_dir_name(&run.point)))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RoutingAlgo;

    #[test]
    fn merge_overrides_nested_fields() {
        let mut base = serde_json::json!({"mesh_w": 2, "energy": {"e_link": 1.0, "e_router_hop": 1.0}});
        merge(&mut base, &serde_json::json!({"mesh_w": 3, "energy": {"e_link": 0.25}}));
        assert_eq!(base["mesh_w"], 3);
        assert_eq!(base["energy"]["e_link"], 0.25);
        assert_eq!(base["energy"]["e_router_hop"], 1.0);
    }

    #[test]
    fn grid_accepts_list_or_object() {
        let g = parse_grid(r#"[{"hw": {"mesh_w": 2}}]"#).unwrap();
        assert_eq!(g.points.len(), 1);
        let g = parse_grid(r#"{"base_hw": {"mesh_w": 2}, "points": [{}, {"label": "b"}]}"#).unwrap();
        assert_eq!(g.points[1].label.as_deref(), Some("b"));
        assert!(parse_grid("[]").is_err());
    }

    #[test]
    fn rank_keys_parse() {
        assert_eq!("avg_latency".parse::<RankKey>(), Ok(RankKey::AvgLatency));
        assert!("speed".parse::<RankKey>().is_err());
    }

    #[test]
    fn failed_points_rank_last() {
        let hw = HardwareConfig::new(1, 1, 4, RoutingAlgo::XY);
        let mk = |index, energy: Option<f64>| DsePoint {
            index,
            label: format!("p{index}"),
            hw: Some(hw.clone()),
            partition_algo: None,
            placement_algo: None,
            duration: None,
            seed: None,
            clusters: None,
            report: energy.map(|e| {
                let mut r: HwReport = serde_json::from_value(serde_json::json!({
                    "hardware": {"avg_latency": null, "max_latency": null, "latency_histogram": [],
                        "delivered": 0, "local_deliveries": 0, "routed_packets": 0, "background_packets": 0,
                        "total_cycles": 1, "throughput": 0.0, "energy": 0.0, "area_units": 2},
                    "model": {"avg_isi_per_neuron": [], "avg_isi_source": null, "avg_isi_delivered": null,
                        "isi_distortion": null, "isi_excluded_neurons": 0, "isi_distortion_histogram": [],
                        "disorder": null, "disorder_pair_count": 0, "fanout": []}
                }))
                .unwrap();
                r.hardware.energy = e;
                r
            }),
            accuracy: None,
            error: None,
            rank_value: None,
        };
        let mut pts = vec![mk(0, None), mk(1, Some(5.0)), mk(2, Some(3.0)), mk(3, Some(5.0))];
        rank(&mut pts, RankKey::Energy, &CompositeWeights::default());
        let order: Vec<usize> = pts.iter().map(|p| p.index).collect();
        assert_eq!(order, vec![2, 1, 3, 0]);
        rank(&mut pts, RankKey::Composite, &CompositeWeights::default());
        assert_eq!(pts[0].index, 2);
        assert!((pts[1].rank_value.unwrap() - 1.0).abs() < 1e-12);
    }
}
