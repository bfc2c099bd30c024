use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use neurosim_core::dse::{self, RankKey, SweepOptions};
use neurosim_core::error::ErrorClass;
use neurosim_core::io::{self, ClustersFile, MappingFile};
use neurosim_core::metrics::HwReport;
use neurosim_core::noc::{self, HwSimOptions, Injection};
use neurosim_core::partition::{ClusteredSnn, PartitionAlgo, PartitionParams};
use neurosim_core::placement::{PlacementAlgo, PlacementOptions, Refinement};
use neurosim_core::pso::PsoParams;
use neurosim_core::{metrics, snn, Deadline, Error, Result, SpikeTrace};

#[derive(Parser)]
#[command(name = "neurosim", version, about = "Spiking neural network to neuromorphic hardware co-simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the network in software and write the spike trace.
    Simulate(SimulateArgs),
    /// Cluster neurons into crossbar-sized groups.
    Partition(PartitionArgs),
    /// Assign clusters to mesh crossbars and write the mapping.
    Place(PlaceArgs),
    /// Replay a trace through the cycle-accurate interconnect and write the report.
    Hwsim(HwsimArgs),
    /// Sweep hardware and mapping choices and rank the results.
    Dse(DseArgs),
    /// Summarize a hardware report.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Network description (JSON).
    #[arg(long)]
    net: PathBuf,
    /// Simulated time in ms (1 ms steps).
    #[arg(long)]
    duration: u32,
    /// Seed for Poisson sources.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output spike trace.
    #[arg(long, default_value = io::TRACE_FILE)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionChoice {
    Greedy,
    Pso,
    RoundRobin,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    net: PathBuf,
    /// Spike trace from `simulate`.
    #[arg(long)]
    trace: PathBuf,
    /// Crossbar capacity (max inputs, outputs and fan-in per neuron).
    #[arg(long)]
    capacity: u32,
    #[arg(long, value_enum, default_value = "greedy")]
    algo: PartitionChoice,
    /// Upper bound on the number of clusters.
    #[arg(long)]
    max_clusters: Option<usize>,
    /// PSO swarm size.
    #[arg(long, default_value_t = PsoParams::default().swarm_size)]
    swarm: usize,
    /// PSO iterations.
    #[arg(long, default_value_t = PsoParams::default().iterations)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output clusters file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlaceChoice {
    Pso,
    Identity,
    Random,
}

#[derive(Args)]
struct PlaceArgs {
    /// Clusters file from `partition`.
    #[arg(long)]
    clusters: PathBuf,
    /// Hardware configuration (JSON).
    #[arg(long)]
    hw: PathBuf,
    #[arg(long, value_enum, default_value = "pso")]
    algo: PlaceChoice,
    /// Latency weight of the PSO fitness.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Energy weight of the PSO fitness.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// PSO swarm size.
    #[arg(long, default_value_t = PsoParams::default().swarm_size)]
    swarm: usize,
    /// PSO iterations.
    #[arg(long, default_value_t = PsoParams::default().iterations)]
    iterations: usize,
    /// Spike trace; with --refine-top-k, PSO candidates are re-scored on the interconnect simulator.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Candidates re-scored per refinement round (needs --trace).
    #[arg(long, requires = "trace")]
    refine_top_k: Option<usize>,
    /// Iterations between refinement rounds.
    #[arg(long, default_value_t = Refinement::default().every)]
    refine_every: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output mapping.
    #[arg(long, default_value = io::MAPPING_FILE)]
    out: PathBuf,
}

#[derive(Args)]
struct HwsimArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Mapping from `place`.
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    hw: PathBuf,
    /// Background packets (JSON list of {cycle, src:{x,y}, dst:{x,y}}).
    #[arg(long)]
    background: Option<PathBuf>,
    /// Overrides the hardware config seed (random selection strategy).
    #[arg(long)]
    seed: Option<u64>,
    /// Output report.
    #[arg(long, default_value = io::REPORT_FILE)]
    out: PathBuf,
}

#[derive(Args)]
struct DseArgs {
    #[arg(long)]
    net: PathBuf,
    /// Grid file: a JSON list of points, or {"base_hw", "composite_weights", "points"}.
    #[arg(long)]
    grid: PathBuf,
    /// Base hardware configuration the points override.
    #[arg(long)]
    hw: Option<PathBuf>,
    /// energy, avg_latency, isi_distortion, disorder or composite.
    #[arg(long, default_value = "energy")]
    rank_by: RankKey,
    /// Points evaluated concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Default simulated time per point, in ms.
    #[arg(long, default_value_t = dse::DEFAULT_DURATION_MS)]
    duration: u32,
    /// Per-point wall-clock limit in seconds (0 disables).
    #[arg(long, default_value_t = dse::DEFAULT_POINT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Args)]
struct ReportArgs {
    /// Report file (snn.hw.out).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Directory for histogram data files.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Accepted for uniformity; reports are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn write_out(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn pso_params(swarm: usize, iterations: usize) -> PsoParams {
    PsoParams {
        swarm_size: swarm,
        iterations,
        ..PsoParams::default()
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let net = io::read_network(&a.net)?;
    let trace = snn::simulate_software(&net, a.duration, a.seed)?;
    log::info!("{} spikes", trace.total_spikes());
    write_out(&a.out, &io::trace_to_string(&trace))
}

fn partition(a: PartitionArgs) -> Result<()> {
    let net = io::read_network(&a.net)?;
    let trace = io::read_trace(&a.trace)?;
    if trace.neuron_count() != net.neuron_count() {
        return Err(Error::schema(
            "spikes",
            format!("trace has {} neurons, network has {}", trace.neuron_count(), net.neuron_count()),
        ));
    }
    let mut params = PartitionParams::new(a.capacity);
    if let Some(k) = a.max_clusters {
        params = params.with_max_clusters(k);
    }
    let algo = match a.algo {
        PartitionChoice::Greedy => PartitionAlgo::Greedy,
        PartitionChoice::Pso => PartitionAlgo::Pso,
        PartitionChoice::RoundRobin => PartitionAlgo::RoundRobin,
    };
    let pso = pso_params(a.swarm, a.iterations);
    let c = dse::partition_with(algo, &net, &trace, &params, &pso, a.seed, &Deadline::none())?;
    log::info!("{} clusters, global spike cost {}", c.cluster_count(), c.global_spike_cost);
    write_out(&a.out, &io::clusters_to_string(&ClustersFile::new(&c, &trace)?))
}

fn place(a: PlaceArgs) -> Result<()> {
    let clusters = io::read_clusters(&a.clusters)?;
    let hw = io::read_hw_config(&a.hw)?;
    let algo = match a.algo {
        PlaceChoice::Pso => PlacementAlgo::Pso,
        PlaceChoice::Identity => PlacementAlgo::Identity,
        PlaceChoice::Random => PlacementAlgo::Random,
    };
    let options = PlacementOptions {
        pso: pso_params(a.swarm, a.iterations),
        alpha: a.alpha,
        beta: a.beta,
        refine: a.refine_top_k.map(|top_k| Refinement {
            top_k,
            every: a.refine_every,
        }),
    };
    let trace = a.trace.as_deref().map(io::read_trace).transpose()?;
    let clustering = trace.as_ref().map(|t| clusters_for_trace(&clusters, t)).transpose()?;
    let refine_on = clustering.as_ref().zip(trace.as_ref());
    let p = dse::place_with(algo, &clusters, &hw, &options, a.seed, &Deadline::none(), refine_on)?;
    let mapping = MappingFile {
        capacity: clusters.capacity,
        mesh: hw.mesh(),
        cluster_of: clusters.cluster_of.clone(),
        crossbar_of: p.crossbar_of,
    };
    write_out(&a.out, &io::mapping_to_string(&mapping))
}

fn clusters_for_trace(clusters: &ClustersFile, trace: &SpikeTrace) -> Result<ClusteredSnn> {
    if trace.neuron_count() != clusters.cluster_of.len() {
        return Err(Error::schema(
            "cluster_of",
            format!(
                "clusters cover {} neurons but the trace has {}",
                clusters.cluster_of.len(),
                trace.neuron_count()
            ),
        ));
    }
    Ok(ClusteredSnn::from_trace_assignment(trace, clusters.capacity, &clusters.cluster_of))
}

fn hwsim(a: HwsimArgs) -> Result<()> {
    let trace = io::read_trace(&a.trace)?;
    let mapping = io::read_mapping(&a.mapping)?;
    let mut hw = io::read_hw_config(&a.hw)?;
    if let Some(s) = a.seed {
        hw.seed = s;
    }
    if mapping.mesh != hw.mesh() {
        return Err(Error::schema(
            "mesh_w/mesh_h",
            format!(
                "mapping targets a {}x{} mesh but the hardware is {}x{}",
                mapping.mesh.width, mapping.mesh.height, hw.mesh_w, hw.mesh_h
            ),
        ));
    }
    let clustering = mapping.clustering(&trace)?;
    let placement = mapping.placement();
    let background: Vec<Injection> = match &a.background {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| Error::Io { path: p.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| Error::Schema {
                field: "background".into(),
                line: Some(e.line()),
                message: e.to_string(),
            })?
        }
        None => Vec::new(),
    };
    let opts = HwSimOptions {
        background,
        deadline: Deadline::none(),
    };
    let hw_log = noc::simulate_hw_with(&trace, &clustering, &placement, &hw, &opts)?;
    let ideal = noc::ideal_network_sim(&trace, &clustering, &placement, hw.cycles_per_timestep)?;
    let report = metrics::build_report(&hw_log, &ideal, &hw)?;
    write_out(&a.out, &io::report_to_string(&report))
}

fn run_dse(a: DseArgs) -> Result<()> {
    let net = io::read_network(&a.net)?;
    let grid = dse::read_grid(&a.grid)?;
    let mut base_hw = grid.base_hw.clone();
    if let Some(p) = &a.hw {
        let text = fs::read_to_string(p).map_err(|source| Error::Io { path: p.clone(), source })?;
        let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Schema {
            field: "hw".into(),
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        if let Some(o) = v.as_object_mut() {
            o.remove("version");
        }
        if !base_hw.is_null() {
            return Err(Error::schema("base_hw", "give the base hardware either in the grid or via --hw"));
        }
        base_hw = v;
    }
    if !(a.timeout.is_finite() && a.timeout >= 0.0) {
        return Err(Error::range("timeout", "must be a non-negative number of seconds"));
    }
    let opts = SweepOptions {
        jobs: a.jobs,
        seed: a.seed,
        duration: a.duration,
        rank_by: a.rank_by,
        weights: grid.composite_weights,
        point_timeout: (a.timeout > 0.0).then(|| Duration::from_secs_f64(a.timeout)),
        base_hw,
        base_dir: a.grid.parent().map(Path::to_path_buf),
    };
    let outcome = dse::sweep(&net, &grid.points, &opts)?;
    dse::write_sweep(&outcome, a.rank_by, &a.out)?;
    let failed = outcome.ranked.iter().filter(|p| p.report.is_none()).count();
    if failed > 0 {
        log::warn!("{failed} of {} points failed", outcome.ranked.len());
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

fn summary_rows(r: &HwReport) -> Vec<(&'static str, String)> {
    let h = &r.hardware;
    let m = &r.model;
    vec![
        ("avg_latency", fmt_opt(h.avg_latency)),
        ("max_latency", h.max_latency.map_or_else(|| "n/a".into(), |v| v.to_string())),
        ("delivered", h.delivered.to_string()),
        ("local_deliveries", h.local_deliveries.to_string()),
        ("routed_packets", h.routed_packets.to_string()),
        ("background_packets", h.background_packets.to_string()),
        ("total_cycles", h.total_cycles.to_string()),
        ("throughput", format!("{:.6}", h.throughput)),
        ("energy", format!("{:.6}", h.energy)),
        ("area_units", h.area_units.to_string()),
        ("avg_isi_source", fmt_opt(m.avg_isi_source)),
        ("avg_isi_delivered", fmt_opt(m.avg_isi_delivered)),
        ("isi_distortion", fmt_opt(m.isi_distortion)),
        ("isi_excluded_neurons", m.isi_excluded_neurons.to_string()),
        ("disorder", fmt_opt(m.disorder)),
        ("disorder_pair_count", m.disorder_pair_count.to_string()),
    ]
}

fn write_plots(r: &HwReport, dir: &Path) -> Result<()> {
    let mut lat = String::from("# latency_cycles count\n");
    for (l, c) in &r.hardware.latency_histogram {
        writeln!(lat, "{l} {c}").unwrap();
    }
    write_out(&dir.join("latency_histogram.dat"), &lat)?;
    let mut isi = String::from("# abs_interval_difference_cycles count\n");
    for (d, c) in &r.model.isi_distortion_histogram {
        writeln!(isi, "{d} {c}").unwrap();
    }
    write_out(&dir.join("isi_distortion_histogram.dat"), &isi)?;
    let mut per = String::from("# neuron isi_source isi_delivered_hw isi_delivered_ideal\n");
    let col = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| v.to_string());
    for n in &r.model.avg_isi_per_neuron {
        writeln!(
            per,
            "{} {} {} {}",
            n.neuron,
            col(n.source),
            col(n.delivered_hw),
            col(n.delivered_ideal)
        )
        .unwrap();
    }
    write_out(&dir.join("isi_per_neuron.dat"), &per)
}

fn report(a: ReportArgs) -> Result<()> {
    let (r, warnings) = io::read_report(&a.input)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let out = match a.format {
        Format::Json => io::report_to_string(&r),
        Format::Csv => {
            let mut s = String::from("metric,value\n");
            for (k, v) in summary_rows(&r) {
                writeln!(s, "{k},{v}").unwrap();
            }
            s
        }
        Format::Table => {
            let rows = summary_rows(&r);
            let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            let mut s = String::new();
            for (k, v) in rows {
                writeln!(s, "{k:<width$}  {v}").unwrap();
            }
            for n in &r.notes {
                writeln!(s, "note: {n}").unwrap();
            }
            s
        }
    };
    print!("{out}");
    if let Some(dir) = &a.plot {
        write_plots(&r, dir)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NEUROSIM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (stage, result) = match cli.command {
        Command::Simulate(a) => ("simulate", simulate(a)),
        Command::Partition(a) => ("partition", partition(a)),
        Command::Place(a) => ("place", place(a)),
        Command::Hwsim(a) => ("hwsim", hwsim(a)),
        Command::Dse(a) => ("dse", run_dse(a)),
        Command::Report(a) => ("report", report(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let stage = e.stage().unwrap_or(stage);
            eprintln!("error[{}] stage={stage}: {}", e.name(), e.root());
            match e.class() {
                ErrorClass::Validation => ExitCode::from(2),
                ErrorClass::Simulation => ExitCode::from(3),
            }
        }
    }
}
