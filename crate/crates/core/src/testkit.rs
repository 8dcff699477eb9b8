//! Small fixtures for unit tests.

use crate::grid::{Bus, BusId, Grid, Line, LoadId, UnitId};
use crate::planner::LoadPoint;
use crate::resources::{GeneratorUnit, UnitKind};

pub fn line(from: u32, to: u32, r: f64, x: f64) -> Line {
    Line {
        from_bus: BusId(from),
        to_bus: BusId(to),
        resistance: r,
        reactance: x,
        shunt_susceptance: 0.0,
        in_service: true,
    }
}

pub fn thermal(id: u32, bus: u32, p_max: f64, droop_k: f64, black_start: bool) -> GeneratorUnit {
    GeneratorUnit {
        id: UnitId(id),
        bus: BusId(bus),
        kind: UnitKind::Thermal,
        p_min: 0.0,
        p_max,
        q_min: -500.0,
        q_max: 500.0,
        droop_k,
        black_start,
        cranking_power: if black_start { 0.0 } else { 0.05 * p_max },
        startup_hot_minutes: 30.0,
        startup_cold_minutes: 120.0,
        hot_window_minutes: 60.0,
        online: false,
    }
}

pub fn load(id: u32, bus: u32, p: f64, alpha: f64) -> LoadPoint {
    LoadPoint {
        id: LoadId(id),
        bus: BusId(bus),
        p,
        q: 0.2 * p,
        alpha,
        k_lp: 0.015 * p,
        k_lq: 0.003 * p,
        connected: false,
    }
}

pub fn grid(n_bus: u32, lines: Vec<Line>, units: Vec<GeneratorUnit>, loads: Vec<LoadPoint>) -> Grid {
    let buses = (1..=n_bus).map(|i| Bus { id: BusId(i), nominal_voltage: 1.0, energized: false }).collect();
    Grid::new(100.0, buses, lines, units, loads).unwrap()
}

pub fn chain(n_bus: u32) -> Vec<Line> {
    (1..n_bus).map(|i| line(i, i + 1, 0.001, 0.01)).collect()
}
