//! Seeded scenario generation.
//!
//! Nodes are placed uniformly in the deployment area with a ChaCha8 stream seeded from the
//! caller's seed, and a bidirectional link joins every pair closer than the maximum link
//! distance. Hardware profiles cycle through [`MCU_PROFILES`] in node-id order.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    Area, BusinessProcess, IoTLink, IoTNode, NodeId, PhysicalNetwork, Position, Scenario, ServiceRequest,
    VirtualLink, VirtualNode, VnodeKind,
};

/// Processor profile of an IoT node.
#[derive(Clone, Debug, PartialEq)]
pub struct McuProfile {
    pub name: &'static str,
    pub clock_mhz: f64,
    pub idle_mw: f64,
    pub max_mw: f64,
    pub ram_kb: f64,
}

/// Processors of the reference deployment. RAM sizes are the parts' datasheet SRAM.
pub const MCU_PROFILES: [McuProfile; 5] = [
    McuProfile { name: "MSP430F1", clock_mhz: 8.0, idle_mw: 1.0, max_mw: 8.0, ram_kb: 2.0 },
    McuProfile { name: "MSP430FR5", clock_mhz: 16.0, idle_mw: 1.0, max_mw: 14.0, ram_kb: 2.0 },
    McuProfile { name: "MSP430FR6", clock_mhz: 16.0, idle_mw: 1.0, max_mw: 20.0, ram_kb: 2.0 },
    McuProfile { name: "MSP430F5", clock_mhz: 25.0, idle_mw: 1.0, max_mw: 14.0, ram_kb: 8.0 },
    McuProfile { name: "MSP432P4", clock_mhz: 48.0, idle_mw: 1.0, max_mw: 16.0, ram_kb: 64.0 },
];

/// Node and link parameters used by [`generate_topology`].
#[derive(Clone, Debug)]
pub struct GeneratorDefaults {
    pub profiles: Vec<McuProfile>,
    /// nJ/bit, converted to mW per kb/s on ingestion.
    pub energy_per_bit_nj: f64,
    /// pJ/bit/m², converted to mW per kb/s per m² on ingestion.
    pub amplifier_pj_per_m2: f64,
    /// kb/s
    pub traffic_capacity: f64,
    /// mW
    pub idle_net_power: f64,
    /// Zones form a `cols x rows` grid over the area, named `z0`, `z1`, ... row-major.
    pub zone_grid: (u32, u32),
    /// Probability that a node offers each function. Every function ends up offered by at
    /// least one node.
    pub functions: Vec<(String, f64)>,
}

impl Default for GeneratorDefaults {
    fn default() -> Self {
        GeneratorDefaults {
            profiles: MCU_PROFILES.to_vec(),
            energy_per_bit_nj: 50.0,
            amplifier_pj_per_m2: 255.0,
            traffic_capacity: 250.0,
            idle_net_power: 1.0,
            zone_grid: (2, 2),
            functions: vec![
                ("sense".into(), 0.5),
                ("actuate".into(), 0.4),
                ("process".into(), 0.6),
                ("store".into(), 0.3),
            ],
        }
    }
}

/// nJ/bit to mW per kb/s.
pub(crate) fn nj_per_bit_to_mw_per_kbps(nj: f64) -> f64 {
    nj * 1e-3
}

/// pJ/bit/m² to mW per kb/s per m².
pub(crate) fn pj_per_bit_m2_to_mw_per_kbps_m2(pj: f64) -> f64 {
    pj * 1e-6
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerateError {
    #[error("at least 2 nodes are required, got {0}")]
    TooFewNodes(usize),
    #[error("area dimensions and link distance must be positive")]
    BadGeometry,
    #[error("seed {seed} produced a disconnected network; retry with another seed")]
    Disconnected { seed: u64 },
    #[error("no hardware profiles given")]
    NoProfiles,
}

fn zone_of(p: Position, area: Area, (cols, rows): (u32, u32)) -> String {
    let cols = cols.max(1);
    let rows = rows.max(1);
    let cx = ((p.x / area.width * cols as f64) as u32).min(cols - 1);
    let cy = ((p.y / area.height * rows as f64) as u32).min(rows - 1);
    format!("z{}", cy * cols + cx)
}

/// Generates a connected unit-disk network. Deterministic for a fixed seed.
pub fn generate_topology(
    seed: u64,
    n_nodes: usize,
    area: Area,
    max_link_distance: f64,
    defaults: &GeneratorDefaults,
) -> Result<PhysicalNetwork, GenerateError> {
    if n_nodes < 2 {
        return Err(GenerateError::TooFewNodes(n_nodes));
    }
    if !(area.width > 0.0 && area.height > 0.0 && max_link_distance > 0.0) {
        return Err(GenerateError::BadGeometry);
    }
    if defaults.profiles.is_empty() {
        return Err(GenerateError::NoProfiles);
    }
    let epb = nj_per_bit_to_mw_per_kbps(defaults.energy_per_bit_nj);
    let amp = pj_per_bit_m2_to_mw_per_kbps_m2(defaults.amplifier_pj_per_m2);
    log::debug!(
        "energy per bit {} nJ/bit -> {epb} mW/(kb/s); amplifier {} pJ/bit/m2 -> {amp} mW/(kb/s)/m2",
        defaults.energy_per_bit_nj,
        defaults.amplifier_pj_per_m2
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Position> = (0..n_nodes)
        .map(|_| Position {
            x: rng.random::<f64>() * area.width,
            y: rng.random::<f64>() * area.height,
        })
        .collect();

    let mut functions: Vec<BTreeSet<String>> = (0..n_nodes)
        .map(|_| {
            defaults
                .functions
                .iter()
                .filter(|(_, p)| rng.random::<f64>() < *p)
                .map(|(f, _)| f.clone())
                .collect()
        })
        .collect();
    for (k, (function, _)) in defaults.functions.iter().enumerate() {
        if !functions.iter().any(|fs| fs.contains(function)) {
            functions[k % n_nodes].insert(function.clone());
        }
    }

    let nodes: Vec<IoTNode> = positions
        .iter()
        .zip(functions)
        .enumerate()
        .map(|(i, (&position, functions))| {
            let profile = &defaults.profiles[i % defaults.profiles.len()];
            IoTNode {
                id: NodeId(i as u32),
                position,
                zone: zone_of(position, area, defaults.zone_grid),
                functions,
                mcu_capacity: profile.clock_mhz,
                ram_capacity: profile.ram_kb,
                idle_cpu_power: profile.idle_mw,
                max_cpu_power: profile.max_mw,
                idle_net_power: defaults.idle_net_power,
                traffic_capacity: defaults.traffic_capacity,
            }
        })
        .collect();

    let mut links = Vec::new();
    for i in 0..n_nodes {
        for j in 0..n_nodes {
            if i == j {
                continue;
            }
            let d = positions[i].distance(positions[j]);
            if d <= max_link_distance {
                links.push(IoTLink {
                    from: NodeId(i as u32),
                    to: NodeId(j as u32),
                    distance: d,
                    energy_per_bit: epb,
                    amplifier_factor: amp,
                });
            }
        }
    }

    let network = PhysicalNetwork::new(area, max_link_distance, nodes, links);
    if !network.is_connected() {
        return Err(GenerateError::Disconnected { seed });
    }
    Ok(network)
}

/// Shape of generated business processes: `sensor -> controller -> actuator` chains.
#[derive(Clone, Debug)]
pub struct RequestDefaults {
    /// kb/s range of the sensor-to-controller demand.
    pub sensing_demand: (f64, f64),
    /// kb/s range of the controller-to-actuator demand.
    pub control_demand: (f64, f64),
    /// MHz ranges for sensor/actuator and controller.
    pub edge_mcu: (f64, f64),
    pub controller_mcu: (f64, f64),
    /// kB
    pub ram: (f64, f64),
}

impl Default for RequestDefaults {
    fn default() -> Self {
        RequestDefaults {
            sensing_demand: (5.0, 30.0),
            control_demand: (2.0, 10.0),
            edge_mcu: (0.5, 2.0),
            controller_mcu: (1.0, 4.0),
            ram: (0.1, 0.5),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    // Quarter-unit grid keeps generated files readable.
    let v = lo + rng.random::<f64>() * (hi - lo);
    (v * 4.0).round() / 4.0
}

/// Generates `n_bps` sense-process-actuate business processes whose sensors and actuators
/// are pinned to zones that contain a node offering the function.
pub fn generate_request(
    seed: u64,
    network: &PhysicalNetwork,
    n_bps: usize,
    defaults: &RequestDefaults,
) -> ServiceRequest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_b9);
    let zones_with = |function: &str| -> Vec<String> {
        let set: BTreeSet<&str> = network
            .nodes()
            .iter()
            .filter(|n| n.provides(function))
            .map(|n| n.zone.as_str())
            .collect();
        set.into_iter().map(String::from).collect()
    };
    let sense_zones = zones_with("sense");
    let actuate_zones = zones_with("actuate");
    let pick_zone = |rng: &mut ChaCha8Rng, zones: &[String]| -> Option<String> {
        if zones.is_empty() {
            None
        } else {
            Some(zones[rng.random_range(0..zones.len())].clone())
        }
    };

    let bps = (0..n_bps)
        .map(|i| {
            let sensor = VirtualNode {
                id: "sensor".into(),
                function: "sense".into(),
                zone: pick_zone(&mut rng, &sense_zones),
                mcu: draw(&mut rng, defaults.edge_mcu),
                ram: draw(&mut rng, defaults.ram).max(0.25),
                kind: VnodeKind::Sensor,
            };
            let controller = VirtualNode {
                id: "controller".into(),
                function: "process".into(),
                zone: None,
                mcu: draw(&mut rng, defaults.controller_mcu),
                ram: draw(&mut rng, defaults.ram).max(0.25),
                kind: VnodeKind::Controller,
            };
            let actuator = VirtualNode {
                id: "actuator".into(),
                function: "actuate".into(),
                zone: pick_zone(&mut rng, &actuate_zones),
                mcu: draw(&mut rng, defaults.edge_mcu),
                ram: draw(&mut rng, defaults.ram).max(0.25),
                kind: VnodeKind::Actuator,
            };
            let links = vec![
                VirtualLink {
                    from: "sensor".into(),
                    to: "controller".into(),
                    demand: draw(&mut rng, defaults.sensing_demand),
                },
                VirtualLink {
                    from: "controller".into(),
                    to: "actuator".into(),
                    demand: draw(&mut rng, defaults.control_demand),
                },
            ];
            BusinessProcess { id: format!("bp{i}"), nodes: vec![sensor, controller, actuator], links }
        })
        .collect();
    ServiceRequest { bps }
}

/// A generated network with `n_bps` generated business processes on it and the default
/// latency table.
pub fn generate_scenario(
    seed: u64,
    n_nodes: usize,
    n_bps: usize,
    area: Area,
    max_link_distance: f64,
) -> Result<Scenario, GenerateError> {
    let network = generate_topology(seed, n_nodes, area, max_link_distance, &GeneratorDefaults::default())?;
    let services = generate_request(seed, &network, n_bps, &RequestDefaults::default());
    Ok(Scenario::new(network, services))
}
