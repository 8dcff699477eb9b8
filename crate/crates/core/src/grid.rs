//! Static network description and the topology queries the planner relies on.
//!
//! A [`Grid`] is validated once at construction and never mutated afterwards;
//! energization status during a run lives in [`crate::dpf::SystemState`].

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::LoadPoint;
use crate::resources::GeneratorUnit;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Bus number as it appears in the case file.
    BusId,
    "B"
);
id_type!(
    /// Generator unit number.
    UnitId,
    "Gen"
);
id_type!(
    /// Load point number.
    LoadId,
    "L"
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    /// Voltage magnitude setpoint in per-unit.
    pub nominal_voltage: f64,
    pub energized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub resistance: f64,
    pub reactance: f64,
    /// Total line charging susceptance, split evenly between both ends.
    pub shunt_susceptance: f64,
    pub in_service: bool,
}

impl Line {
    pub fn other_end(&self, bus: BusId) -> Option<BusId> {
        if self.from_bus == bus {
            Some(self.to_bus)
        } else if self.to_bus == bus {
            Some(self.from_bus)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("no path from {from} to {to}")]
    Unreachable { from: BusId, to: BusId },
    #[error("no black-start bus given")]
    NoBlackStartBus,
    #[error("no bus is energized")]
    NothingEnergized,
}

/// A violated construction invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("bus {bus} nominal voltage {value} outside [0.9, 1.1]")]
    NominalVoltage { bus: BusId, value: f64 },
    #[error("line {0}-{1} connects a bus to itself")]
    SelfLoop(BusId, BusId),
    #[error("line {0}-{1} has zero reactance")]
    ZeroReactance(BusId, BusId),
    #[error("{what} references missing bus {bus}")]
    DanglingReference { what: String, bus: BusId },
    #[error("duplicate generator id {0}")]
    DuplicateUnit(UnitId),
    #[error("duplicate load id {0}")]
    DuplicateLoad(LoadId),
    #[error("generator {unit}: {reason}")]
    InvalidUnit { unit: UnitId, reason: String },
    #[error("load {load}: {reason}")]
    InvalidLoad { load: LoadId, reason: String },
    #[error("in-service network is not connected (bus {0} cannot be reached)")]
    Disconnected(BusId),
    #[error("base MVA must be positive, got {0}")]
    BaseMva(f64),
}

/// Buses, lines, generation and load of one restoration study.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    base_mva: f64,
    buses: BTreeMap<BusId, Bus>,
    lines: Vec<Line>,
    generators: BTreeMap<UnitId, GeneratorUnit>,
    loads: BTreeMap<LoadId, LoadPoint>,
    adjacency: BTreeMap<BusId, Vec<BusId>>,
}

impl Grid {
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        lines: Vec<Line>,
        generators: Vec<GeneratorUnit>,
        loads: Vec<LoadPoint>,
    ) -> Result<Self, ValidationError> {
        if !(base_mva > 0.0 && base_mva.is_finite()) {
            return Err(ValidationError::BaseMva(base_mva));
        }
        let mut bus_map = BTreeMap::new();
        for bus in buses {
            if !(0.9..=1.1).contains(&bus.nominal_voltage) {
                return Err(ValidationError::NominalVoltage { bus: bus.id, value: bus.nominal_voltage });
            }
            let id = bus.id;
            if bus_map.insert(id, bus).is_some() {
                return Err(ValidationError::DuplicateBus(id));
            }
        }

        let mut adjacency: BTreeMap<BusId, Vec<BusId>> = bus_map.keys().map(|&id| (id, Vec::new())).collect();
        for line in &lines {
            for end in [line.from_bus, line.to_bus] {
                if !bus_map.contains_key(&end) {
                    return Err(ValidationError::DanglingReference {
                        what: format!("line {}-{}", line.from_bus, line.to_bus),
                        bus: end,
                    });
                }
            }
            if line.from_bus == line.to_bus {
                return Err(ValidationError::SelfLoop(line.from_bus, line.to_bus));
            }
            if line.reactance == 0.0 {
                return Err(ValidationError::ZeroReactance(line.from_bus, line.to_bus));
            }
            if line.in_service {
                adjacency.get_mut(&line.from_bus).unwrap().push(line.to_bus);
                adjacency.get_mut(&line.to_bus).unwrap().push(line.from_bus);
            }
        }
        for neighbors in adjacency.values_mut() {
            neighbors.sort_unstable();
            neighbors.dedup();
        }

        let mut gen_map = BTreeMap::new();
        for unit in generators {
            if !bus_map.contains_key(&unit.bus) {
                return Err(ValidationError::DanglingReference {
                    what: format!("generator {}", unit.id),
                    bus: unit.bus,
                });
            }
            unit.validate().map_err(|reason| ValidationError::InvalidUnit { unit: unit.id, reason })?;
            let id = unit.id;
            if gen_map.insert(id, unit).is_some() {
                return Err(ValidationError::DuplicateUnit(id));
            }
        }

        let mut load_map = BTreeMap::new();
        for load in loads {
            if !bus_map.contains_key(&load.bus) {
                return Err(ValidationError::DanglingReference {
                    what: format!("load {}", load.id),
                    bus: load.bus,
                });
            }
            load.validate().map_err(|reason| ValidationError::InvalidLoad { load: load.id, reason })?;
            let id = load.id;
            if load_map.insert(id, load).is_some() {
                return Err(ValidationError::DuplicateLoad(id));
            }
        }

        Ok(Grid { base_mva, buses: bus_map, lines, generators: gen_map, loads: load_map, adjacency })
    }

    /// Checks that every bus is reachable over in-service lines. Case
    /// ingestion requires this; hand-built grids may skip it to study
    /// isolated sections.
    pub fn check_connected(&self) -> Result<(), ValidationError> {
        if let Some(&first) = self.buses.keys().next() {
            let reached = self.bfs_hops(first);
            if let Some(&missing) = self.buses.keys().find(|id| !reached.contains_key(id)) {
                return Err(ValidationError::Disconnected(missing));
            }
        }
        Ok(())
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> impl Iterator<Item = &Bus> {
        self.buses.values()
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.get(&id)
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn generators(&self) -> impl Iterator<Item = &GeneratorUnit> {
        self.generators.values()
    }

    pub fn unit(&self, id: UnitId) -> Option<&GeneratorUnit> {
        self.generators.get(&id)
    }

    pub fn loads(&self) -> impl Iterator<Item = &LoadPoint> {
        self.loads.values()
    }

    pub fn load(&self, id: LoadId) -> Option<&LoadPoint> {
        self.loads.get(&id)
    }

    /// Neighbors over in-service lines, ascending by id.
    pub fn neighbors(&self, bus: BusId) -> &[BusId] {
        self.adjacency.get(&bus).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn black_start_buses(&self) -> BTreeSet<BusId> {
        self.generators.values().filter(|u| u.black_start).map(|u| u.bus).collect()
    }

    fn require_bus(&self, id: BusId) -> Result<(), GridError> {
        if self.buses.contains_key(&id) {
            Ok(())
        } else {
            Err(GridError::UnknownBus(id))
        }
    }

    fn bfs_hops(&self, source: BusId) -> BTreeMap<BusId, usize> {
        let mut dist = BTreeMap::from([(source, 0usize)]);
        let mut queue = VecDeque::from([source]);
        while let Some(bus) = queue.pop_front() {
            let d = dist[&bus];
            for &next in self.neighbors(bus) {
                if let Entry::Vacant(slot) = dist.entry(next) {
                    slot.insert(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }
}

/// Shortest-path edge count between two buses over in-service lines,
/// ignoring energization. `Ok(None)` means no path exists.
pub fn hop_distance(grid: &Grid, from_bus: BusId, to_bus: BusId) -> Result<Option<usize>, GridError> {
    grid.require_bus(from_bus)?;
    grid.require_bus(to_bus)?;
    Ok(grid.bfs_hops(from_bus).get(&to_bus).copied())
}

/// Distance term of the compound load score: hops to the nearest
/// black-start bus, clamped below at 1.
pub fn load_distance(
    grid: &Grid,
    load_bus: BusId,
    black_start_buses: &BTreeSet<BusId>,
) -> Result<u32, GridError> {
    grid.require_bus(load_bus)?;
    if black_start_buses.is_empty() {
        return Err(GridError::NoBlackStartBus);
    }
    for &bus in black_start_buses {
        grid.require_bus(bus)?;
    }
    let hops = grid.bfs_hops(load_bus);
    let nearest = black_start_buses.iter().filter_map(|b| hops.get(b).map(|&d| (d, *b))).min();
    match nearest {
        Some((d, _)) => Ok((d as u32).max(1)),
        None => Err(GridError::Unreachable { from: load_bus, to: *black_start_buses.iter().next().unwrap() }),
    }
}

/// Hops from the energized set to `target` (0 when already energized).
pub fn hops_from_energized(
    grid: &Grid,
    energized: &BTreeSet<BusId>,
    target: BusId,
) -> Result<Option<usize>, GridError> {
    grid.require_bus(target)?;
    if energized.is_empty() {
        return Err(GridError::NothingEnergized);
    }
    let hops = grid.bfs_hops(target);
    Ok(energized.iter().filter_map(|b| hops.get(b).copied()).min())
}

/// De-energized buses to switch on, in order, so that `target` joins the
/// energized subgraph. The target itself is the last element; an energized
/// target yields an empty path.
///
/// Among equally short routes the walk always steps to the lowest-numbered
/// next bus, starting from the lowest-numbered energized bus at minimum range.
pub fn energization_path(
    grid: &Grid,
    energized: &BTreeSet<BusId>,
    target: BusId,
) -> Result<Vec<BusId>, GridError> {
    grid.require_bus(target)?;
    if energized.is_empty() {
        return Err(GridError::NothingEnergized);
    }
    if energized.contains(&target) {
        return Ok(Vec::new());
    }

    // Distances to target, expanding only through de-energized buses.
    let mut dist = BTreeMap::from([(target, 0usize)]);
    let mut queue = VecDeque::from([target]);
    while let Some(bus) = queue.pop_front() {
        if energized.contains(&bus) {
            continue;
        }
        let d = dist[&bus];
        for &next in grid.neighbors(bus) {
            if let Entry::Vacant(slot) = dist.entry(next) {
                slot.insert(d + 1);
                queue.push_back(next);
            }
        }
    }

    let start = energized.iter().filter_map(|b| dist.get(b).map(|&d| (d, *b))).min();
    let Some((mut remaining, mut current)) = start else {
        return Err(GridError::Unreachable { from: *energized.iter().next().unwrap(), to: target });
    };

    let mut path = Vec::with_capacity(remaining);
    while remaining > 0 {
        let next = grid
            .neighbors(current)
            .iter()
            .copied()
            .find(|b| !energized.contains(b) && dist.get(b) == Some(&(remaining - 1)))
            .expect("distance labels are consistent");
        path.push(next);
        current = next;
        remaining -= 1;
    }
    Ok(path)
}
