//! Hardware/software co-simulation of spiking neural networks.
//!
//! The pipeline runs an SNN in software ([`snn`]), cuts it into
//! crossbar-sized clusters ([`partition`]), places the clusters on a mesh
//! ([`placement`]), replays the spike trace through a cycle-accurate model of
//! the interconnect ([`noc`]) and compares the delivered spikes against an
//! ideal zero-latency network ([`metrics`]). [`dse`] sweeps hardware and
//! mapping choices over that pipeline.

pub mod config;
pub mod dse;
pub mod error;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod noc;
pub mod partition;
pub mod placement;
pub mod pso;
pub mod snn;

use std::time::{Duration, Instant};

pub use config::{EnergyTable, HardwareConfig, RoutingAlgo, Selection};
pub use error::{Error, Result};
pub use mesh::{Coord, Direction, Mesh};
pub use snn::{NeuronId, NeuronModel, SnnNetwork, SpikeTrace, Synapse};

/// Optional wall-clock limit checked by long-running loops.
#[derive(Debug, Clone, Copy, Default)]
pub struct Deadline {
    at: Option<(Instant, Duration)>,
}

impl Deadline {
    pub fn none() -> Self {
        Self { at: None }
    }

    pub fn after(limit: Duration) -> Self {
        Self {
            at: Some((Instant::now() + limit, limit)),
        }
    }

    pub fn check(&self) -> Result<()> {
        match self.at {
            Some((at, limit)) if Instant::now() >= at => Err(Error::Timeout(limit.as_secs_f64())),
            _ => Ok(()),
        }
    }
}

/// Derives an independent sub-seed (splitmix64 finalizer over `seed ^ stream`).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
