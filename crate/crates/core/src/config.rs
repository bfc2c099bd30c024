//! Hardware configuration: mesh geometry, crossbar capacity, router and
//! timing parameters, and the per-event energy table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoutingAlgo {
    XY,
    WestFirst,
    NorthLast,
    OddEven,
    DyAD,
}

impl RoutingAlgo {
    pub const ALL: [RoutingAlgo; 5] = [
        RoutingAlgo::XY,
        RoutingAlgo::WestFirst,
        RoutingAlgo::NorthLast,
        RoutingAlgo::OddEven,
        RoutingAlgo::DyAD,
    ];
}

impl std::fmt::Display for RoutingAlgo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Selection {
    /// First admissible direction in W, E, N, S order.
    #[default]
    First,
    /// Least-occupied downstream input buffer, ties broken by `First` order.
    BufferLevel,
    /// Seeded uniform choice.
    Random,
}

/// Energy per event, in pJ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyTable {
    /// Per packet per router traversal.
    pub e_router_hop: f64,
    /// Per packet per link traversal.
    pub e_link: f64,
    /// Per spike delivered into a crossbar.
    pub e_crossbar_spike: f64,
}

impl Default for EnergyTable {
    fn default() -> Self {
        Self {
            e_router_hop: 1.0,
            e_link: 0.5,
            e_crossbar_spike: 2.0,
        }
    }
}

pub const DEFAULT_BUFFER_DEPTH: u32 = 4;
pub const DEFAULT_CYCLES_PER_TIMESTEP: u32 = 100;
pub const DEFAULT_DYAD_THRESHOLD: f64 = 0.5;
pub const DEFAULT_CROSSBAR_LATENCY: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    pub mesh_w: u32,
    pub mesh_h: u32,
    /// Max inputs = max outputs = max presynaptic connections per output neuron.
    pub crossbar_capacity: u32,
    pub buffer_depth: u32,
    /// Interconnect cycles per 1 ms model step.
    pub cycles_per_timestep: u32,
    pub routing: RoutingAlgo,
    pub selection: Selection,
    /// Occupancy fraction above which DyAD treats a neighbor as congested.
    pub dyad_threshold: f64,
    /// Fixed latency of a local (intra-crossbar) delivery, in cycles.
    pub crossbar_latency: u32,
    /// Flits per packet; spikes are single-flit.
    pub packet_size: u32,
    pub energy: EnergyTable,
    pub seed: u64,
}

impl HardwareConfig {
    pub fn new(mesh_w: u32, mesh_h: u32, crossbar_capacity: u32, routing: RoutingAlgo) -> Self {
        Self {
            mesh_w,
            mesh_h,
            crossbar_capacity,
            buffer_depth: DEFAULT_BUFFER_DEPTH,
            cycles_per_timestep: DEFAULT_CYCLES_PER_TIMESTEP,
            routing,
            selection: Selection::First,
            dyad_threshold: DEFAULT_DYAD_THRESHOLD,
            crossbar_latency: DEFAULT_CROSSBAR_LATENCY,
            packet_size: 1,
            energy: EnergyTable::default(),
            seed: 0,
        }
    }

    pub fn mesh(&self) -> Mesh {
        Mesh::new(self.mesh_w, self.mesh_h)
    }

    pub fn crossbars(&self) -> usize {
        self.mesh().len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh_w == 0 || self.mesh_h == 0 {
            return Err(Error::range("mesh_w/mesh_h", "mesh dimensions must be positive"));
        }
        if self.mesh_w.checked_mul(self.mesh_h).is_none_or(|n| n > 1 << 20) {
            return Err(Error::range("mesh_w/mesh_h", "mesh has too many routers"));
        }
        if self.crossbar_capacity == 0 {
            return Err(Error::range("crossbar_capacity", "must be at least 1"));
        }
        if self.buffer_depth == 0 {
            return Err(Error::range("buffer_depth", "must be at least 1"));
        }
        if self.cycles_per_timestep == 0 {
            return Err(Error::range("cycles_per_timestep", "must be at least 1"));
        }
        if !(self.dyad_threshold > 0.0 && self.dyad_threshold <= 1.0) {
            return Err(Error::range(
                "dyad_threshold",
                format!("must lie in (0, 1], got {}", self.dyad_threshold),
            ));
        }
        if self.packet_size != 1 {
            return Err(Error::range("packet_size", "spike packets are single-flit (1)"));
        }
        let e = &self.energy;
        for (name, v) in [
            ("energy.e_router_hop", e.e_router_hop),
            ("energy.e_link", e.e_link),
            ("energy.e_crossbar_spike", e.e_crossbar_spike),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::range(name, format!("must be a finite value >= 0, got {v}")));
            }
        }
        Ok(())
    }
}
