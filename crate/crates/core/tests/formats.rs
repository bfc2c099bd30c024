mod common;

use std::fs;

use neurosim_core::dse::{self, PipelineSpec};
use neurosim_core::io::{self, ClustersFile, MappingFile};
use neurosim_core::{Deadline, Error, HardwareConfig, RoutingAlgo, Selection, SpikeTrace};
use proptest::prelude::*;
use serde_json::Value;

fn trace_strategy() -> impl Strategy<Value = SpikeTrace> {
    (1u32..500, 0usize..8).prop_flat_map(|(duration, n)| {
        let spikes = prop::collection::vec(prop::collection::btree_set(0..duration, 0..20), n)
            .prop_map(|v| v.into_iter().map(|s| s.into_iter().collect()).collect::<Vec<Vec<u32>>>());
        let weights = if n == 0 {
            Just(Vec::new()).boxed()
        } else {
            prop::collection::vec((0..n, 0..n, -1e3f64..1e3), 0..12).boxed()
        };
        (spikes, weights).prop_map(move |(spikes, weights)| SpikeTrace {
            spikes,
            weights,
            duration,
        })
    })
}

fn sample_report() -> neurosim_core::metrics::HwReport {
    let net = common::random_net(3, 4, 12, 4);
    let spec = PipelineSpec::new(HardwareConfig::new(3, 3, 6, RoutingAlgo::XY), 150, 3);
    dse::run_pipeline(&net, &spec, &Deadline::none()).unwrap().report
}

proptest! {
    #[test]
    fn traces_round_trip(t in trace_strategy()) {
        let text = io::trace_to_string(&t);
        prop_assert_eq!(io::parse_trace(&text).unwrap(), t);
    }

    #[test]
    fn networks_round_trip(seed in any::<u64>(), sources in 0usize..5, cells in 0usize..12) {
        let net = common::random_net(seed, sources, cells, 4);
        let text = io::network_to_string(&net);
        prop_assert_eq!(io::parse_network(&text).unwrap(), net);
    }

    #[test]
    fn mappings_round_trip(seed in any::<u64>()) {
        let net = common::random_net(seed, 3, 10, 3);
        let spec = PipelineSpec::new(HardwareConfig::new(3, 3, 5, RoutingAlgo::XY), 100, seed);
        let r = dse::run_pipeline(&net, &spec, &Deadline::none()).unwrap();
        let text = io::mapping_to_string(&r.mapping);
        let back = io::parse_mapping(&text).unwrap();
        prop_assert_eq!(back.clustering(&r.trace).unwrap(), r.clustering.clone());
        prop_assert_eq!(back, r.mapping);
        let clusters = ClustersFile::new(&r.clustering, &r.trace).unwrap();
        prop_assert_eq!(io::parse_clusters(&io::clusters_to_string(&clusters)).unwrap(), clusters);
    }
}

#[test]
fn empty_trace_is_a_valid_file() {
    let t = SpikeTrace::empty(0, 5);
    let text = io::trace_to_string(&t);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["spikes"], serde_json::json!([]));
    assert_eq!(v["weights"], serde_json::json!([]));
    assert_eq!(io::parse_trace(&text).unwrap(), t);
}

#[test]
fn trace_file_layout() {
    let t = SpikeTrace {
        spikes: vec![vec![1, 3], vec![]],
        weights: vec![(0, 1, 0.5)],
        duration: 10,
    };
    let v: Value = serde_json::from_str(&io::trace_to_string(&t)).unwrap();
    assert_eq!(v["version"], "v1");
    assert_eq!(v["spikes"], serde_json::json!([[1, 3], []]));
    assert_eq!(v["weights"], serde_json::json!([[0, 1, 0.5]]));
}

#[test]
fn trace_files_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(io::TRACE_FILE);
    let t = SpikeTrace {
        spikes: vec![vec![1, 3]],
        weights: vec![(0, 0, 2.0)],
        duration: 4,
    };
    io::write_trace(&t, &path).unwrap();
    assert_eq!(io::read_trace(&path).unwrap(), t);
}

#[test]
fn spike_at_or_after_duration_is_rejected() {
    let e = io::parse_trace(r#"{"version":"v1","duration":5,"spikes":[[1,5]],"weights":[]}"#).unwrap_err();
    assert!(matches!(e, Error::Schema { ref field, .. } if field == "spikes[0][1]"), "{e}");
}

#[test]
fn missing_file_is_an_io_error() {
    let e = io::read_trace(std::path::Path::new("/nonexistent/snn.sw.out")).unwrap_err();
    assert_eq!(e.name(), "IoError");
}

#[test]
fn energy_table_can_live_in_its_own_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("energy.json"),
        r#"{"e_router_hop": 3.0, "e_link": 0.25, "e_crossbar_spike": 1.5}"#,
    )
    .unwrap();
    let cfg = dir.path().join("hw.json");
    fs::write(
        &cfg,
        r#"{"mesh_w": 2, "mesh_h": 2, "crossbar_capacity": 8, "routing": "OddEven",
            "selection": "BufferLevel", "energy_file": "energy.json"}"#,
    )
    .unwrap();
    let hw = io::read_hw_config(&cfg).unwrap();
    assert_eq!(hw.energy.e_router_hop, 3.0);
    assert_eq!(hw.energy.e_link, 0.25);
    assert_eq!(hw.selection, Selection::BufferLevel);
    assert_eq!(hw.routing, RoutingAlgo::OddEven);
}

#[test]
fn inline_energy_and_energy_file_conflict() {
    let e = io::parse_hw_config(
        r#"{"mesh_w":2,"mesh_h":2,"crossbar_capacity":8,"routing":"XY",
            "energy":{"e_router_hop":1,"e_link":1,"e_crossbar_spike":1},"energy_file":"x.json"}"#,
        None,
    )
    .unwrap_err();
    assert!(matches!(e, Error::Schema { .. }));
}

#[test]
fn hardware_config_rejects_out_of_range_values() {
    let base = r#"{"mesh_w":2,"mesh_h":2,"crossbar_capacity":8,"routing":"XY""#;
    for (extra, field) in [
        (r#","dyad_threshold":0"#, "dyad_threshold"),
        (r#","dyad_threshold":1.5"#, "dyad_threshold"),
        (r#","cycles_per_timestep":0"#, "cycles_per_timestep"),
        (r#","energy":{"e_router_hop":-1,"e_link":0,"e_crossbar_spike":0}"#, "energy.e_router_hop"),
    ] {
        let e = io::parse_hw_config(&format!("{base}{extra}}}"), None).unwrap_err();
        match e {
            Error::Range { field: f, .. } => assert_eq!(f, field),
            other => panic!("{extra}: {other}"),
        }
    }
    let e = io::parse_hw_config(&format!(r#"{base},"routing_algo":"XY"}}"#), None).unwrap_err();
    assert!(matches!(e, Error::Schema { .. }), "unknown field: {e}");
}

#[test]
fn hardware_config_round_trips() {
    let mut hw = HardwareConfig::new(4, 3, 16, RoutingAlgo::DyAD);
    hw.dyad_threshold = 0.75;
    hw.seed = 11;
    assert_eq!(io::parse_hw_config(&io::hw_config_to_string(&hw), None).unwrap(), hw);
}

#[test]
fn network_file_accepts_every_neuron_kind() {
    let text = r#"{
        "version": "v1",
        "neurons": [
            {"id": 2, "kind": "Izhikevich", "params": {"a": 0.02, "b": 0.2, "c": -65, "d": 8}},
            {"id": 0, "kind": "SpikeSource", "params": {"schedule": [1, 3, 5]}},
            {"id": 1, "kind": "SpikeSource", "params": {"rate_hz": 40}},
            {"id": 3, "kind": "LIF", "params": {"tau_m": 10, "v_rest": -65, "v_thresh": -50, "v_reset": -65, "t_refrac": 2}}
        ],
        "synapses": [{"pre": 0, "post": 2, "weight": 5.0, "delay": 1}],
        "synapse_mode": "CUBA"
    }"#;
    let net = io::parse_network(text).unwrap();
    assert_eq!(net.neuron_count(), 4);
    assert!(net.neurons[0].is_source() && net.neurons[1].is_source());
    assert_eq!(net.tau_syn, 5.0);
}

#[test]
fn network_file_errors_name_the_field() {
    let e = io::parse_network(r#"{"neurons":[{"id":0,"kind":"SpikeSource","params":{}}]}"#).unwrap_err();
    assert!(matches!(e, Error::Schema { ref field, .. } if field == "neurons[0].params"), "{e}");
    let e = io::parse_network(r#"{"neurons":[{"id":3,"kind":"SpikeSource","params":{"rate_hz":1}}]}"#).unwrap_err();
    assert!(matches!(e, Error::Schema { ref field, .. } if field == "neurons[0].id"), "{e}");
    let e = io::parse_network(r#"{"version":"v0","neurons":[]}"#).unwrap_err();
    assert!(matches!(e, Error::Version { .. }));
    let e = io::parse_network(
        r#"{"neurons":[{"id":0,"kind":"SpikeSource","params":{"rate_hz":1}}],
            "synapses":[{"pre":0,"post":1,"weight":1,"delay":1}]}"#,
    )
    .unwrap_err();
    assert!(matches!(e, Error::Schema { .. }), "{e}");
}

#[test]
fn mapping_must_be_injective_and_inside_the_mesh() {
    let good = MappingFile {
        capacity: 4,
        mesh: neurosim_core::Mesh::new(2, 2),
        cluster_of: vec![0, 1, 1],
        crossbar_of: vec![neurosim_core::Coord::new(0, 0), neurosim_core::Coord::new(1, 1)],
    };
    assert!(io::parse_mapping(&io::mapping_to_string(&good)).is_ok());

    let mut shared = good.clone();
    shared.crossbar_of[1] = shared.crossbar_of[0];
    assert!(matches!(io::parse_mapping(&io::mapping_to_string(&shared)), Err(Error::Schema { .. })));

    let mut outside = good.clone();
    outside.crossbar_of[1] = neurosim_core::Coord::new(2, 0);
    assert!(matches!(io::parse_mapping(&io::mapping_to_string(&outside)), Err(Error::Schema { .. })));

    let mut empty_cluster = good.clone();
    empty_cluster.cluster_of = vec![0, 0, 0];
    assert!(matches!(
        io::parse_mapping(&io::mapping_to_string(&empty_cluster)),
        Err(Error::Schema { .. })
    ));

    let text = io::mapping_to_string(&good).replace("\"version\": \"v1\"", "\"version\": \"v9\"");
    assert!(matches!(io::parse_mapping(&text), Err(Error::Version { .. })));
}

#[test]
fn reports_round_trip() {
    let r = sample_report();
    let (back, warnings) = io::parse_report(&io::report_to_string(&r)).unwrap();
    assert_eq!(back, r);
    assert!(warnings.is_empty(), "{warnings:?}");
}

#[test]
fn report_without_model_section_is_rejected() {
    let mut v: Value = serde_json::from_str(&io::report_to_string(&sample_report())).unwrap();
    v.as_object_mut().unwrap().remove("model");
    let e = io::parse_report(&v.to_string()).unwrap_err();
    assert!(matches!(e, Error::Schema { ref field, .. } if field == "model"), "{e}");
}

#[test]
fn report_histogram_mass_must_match_deliveries() {
    let mut v: Value = serde_json::from_str(&io::report_to_string(&sample_report())).unwrap();
    let delivered = v["hardware"]["delivered"].as_u64().unwrap();
    v["hardware"]["delivered"] = Value::from(delivered + 1);
    let e = io::parse_report(&v.to_string()).unwrap_err();
    assert!(matches!(e, Error::Schema { ref field, .. } if field == "hardware.latency_histogram"), "{e}");
}

#[test]
fn inconsistent_throughput_is_a_warning() {
    let r = sample_report();
    let mut v: Value = serde_json::from_str(&io::report_to_string(&r)).unwrap();
    v["hardware"]["throughput"] = Value::from(r.hardware.throughput * 2.0 + 1.0);
    let (_, warnings) = io::parse_report(&v.to_string()).unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].contains("throughput"));
}
