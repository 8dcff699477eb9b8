//! Dynamic power flow: a steady-state AC power flow over the energized
//! subgraph with the system frequency deviation Δf as an extra unknown.
//!
//! Generator output follows `P_set - K_G·Δf` and load demand follows
//! `P_L + K_Lp·Δf` (reactive: `Q_L - K_Lq·Δf`), all coefficients in absolute
//! MW (MVar) per Hz. Summing the active balance over all buses gives
//! `Δf = P_acc / (ΣK_G + ΣK_Lp)` with `P_acc = ΣP_set - ΣP_L - P_loss`.

pub mod newton;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BusId, Grid, LoadId, UnitId};
pub use newton::DpfProblem;

/// Largest admissible |Δf|, Hz.
pub const MAX_FREQUENCY_DEVIATION_HZ: f64 = 1.0;
/// Largest admissible |V - V_nominal|, per-unit.
pub const MAX_VOLTAGE_DEVIATION_PU: f64 = 0.05;
/// Load fluctuation applied at the adverse extreme before a pick-up.
pub const DEFAULT_FLUCTUATION: f64 = 0.10;

const LIMIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DpfError {
    #[error("no online unit provides frequency response")]
    NoFrequencyAnchor,
    #[error("power flow did not converge in {iterations} iterations (mismatch {mismatch:e} pu)")]
    Diverged { iterations: usize, mismatch: f64 },
    #[error("singular Jacobian")]
    SingularJacobian,
    #[error("no bus is energized")]
    NothingEnergized,
    #[error("energized bus {0} is not connected to the rest of the island")]
    Islanded(BusId),
    #[error("equipment on de-energized bus {0}")]
    Deenergized(BusId),
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("unknown generator {0}")]
    UnknownUnit(UnitId),
    #[error("unknown load {0}")]
    UnknownLoad(LoadId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitDispatch {
    /// Active power, MW. In a [`SystemState`] this is the governor setpoint
    /// at Δf = 0; in a [`DpfSolution`] it is the frequency-corrected output.
    pub p: f64,
    /// Reactive power, MVar.
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadDemand {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusVoltage {
    pub magnitude: f64,
    pub angle: f64,
}

/// Everything that changes while the system is being restored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub energized_buses: BTreeSet<BusId>,
    pub online_units: BTreeMap<UnitId, UnitDispatch>,
    pub restored_loads: BTreeMap<LoadId, LoadDemand>,
    pub voltages: BTreeMap<BusId, BusVoltage>,
    pub delta_f: f64,
    pub t_minutes: f64,
}

/// Frequency sensitivities of the equipment in one state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyCoefficients {
    pub k_g: BTreeMap<UnitId, f64>,
    pub k_lp: BTreeMap<LoadId, f64>,
    pub k_lq: BTreeMap<LoadId, f64>,
}

impl FrequencyCoefficients {
    pub fn for_state(grid: &Grid, state: &SystemState) -> Self {
        let mut out = FrequencyCoefficients::default();
        for id in state.online_units.keys() {
            if let Some(u) = grid.unit(*id) {
                out.k_g.insert(*id, u.droop_k);
            }
        }
        for id in state.restored_loads.keys() {
            if let Some(l) = grid.load(*id) {
                out.k_lp.insert(*id, l.k_lp);
                out.k_lq.insert(*id, l.k_lq);
            }
        }
        out
    }

    /// ΣK_G + ΣK_Lp, the denominator relating Δf to the acceleration power.
    pub fn active_total(&self) -> f64 {
        self.k_g.values().sum::<f64>() + self.k_lp.values().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpfSolution {
    pub voltages: BTreeMap<BusId, BusVoltage>,
    pub delta_f: f64,
    /// Scheduled generation minus scheduled load minus losses, MW.
    pub p_acc: f64,
    pub losses: f64,
    /// Remaining (MW, MVar) imbalance per energized bus.
    pub per_bus_mismatch: BTreeMap<BusId, (f64, f64)>,
    /// Frequency-corrected output of each online unit.
    pub unit_outputs: BTreeMap<UnitId, UnitDispatch>,
    pub converged: bool,
    pub iterations: usize,
}

impl DpfSolution {
    /// Signed deviations from nominal voltage, (min, max).
    pub fn voltage_deviation_range(&self, grid: &Grid) -> (f64, f64) {
        self.voltages
            .iter()
            .map(|(id, v)| v.magnitude - grid.bus(*id).map_or(1.0, |b| b.nominal_voltage))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpfOptions {
    /// Convergence threshold on the largest per-unit mismatch.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for DpfOptions {
    fn default() -> Self {
        DpfOptions { tolerance: 1e-10, max_iterations: 50 }
    }
}

pub fn solve_dpf(grid: &Grid, state: &SystemState) -> Result<DpfSolution, DpfError> {
    solve_dpf_with(grid, state, &DpfOptions::default())
}

pub fn solve_dpf_with(
    grid: &Grid,
    state: &SystemState,
    options: &DpfOptions,
) -> Result<DpfSolution, DpfError> {
    let problem = DpfProblem::new(grid, state)?;
    let outcome = newton::solve(&problem, options.tolerance, options.max_iterations)?;
    let base = grid.base_mva();
    let (vm, va, delta_f) = problem.unpack(&outcome.x);
    let (pc, qc) = problem.injections(&vm, &va);
    let (_, q_sched) = problem.scheduled(delta_f);

    let voltages = problem
        .buses
        .iter()
        .enumerate()
        .map(|(i, &b)| (b, BusVoltage { magnitude: vm[i], angle: va[i] }))
        .collect();
    let losses = pc.iter().sum::<f64>() * base;
    let scheduled_gen: f64 = state.online_units.values().map(|d| d.p).sum();
    let scheduled_load: f64 = state.restored_loads.values().map(|d| d.p).sum();

    let mut per_bus_mismatch = BTreeMap::new();
    let mut q_row = problem.buses.len();
    for (i, &bus) in problem.buses.iter().enumerate() {
        let dq = if problem.pv[i] {
            0.0
        } else {
            q_row += 1;
            outcome.residual[q_row - 1] * base
        };
        per_bus_mismatch.insert(bus, (outcome.residual[i] * base, dq));
    }

    // Reactive output per generator bus: network injection plus local load,
    // shared among the bus's units by reactive range.
    let mut unit_outputs = BTreeMap::new();
    for (i, &bus) in problem.buses.iter().enumerate() {
        if !problem.pv[i] {
            continue;
        }
        let local_q_load = -q_sched[i] * base;
        let q_total = qc[i] * base + local_q_load;
        let units: Vec<_> = state
            .online_units
            .iter()
            .filter_map(|(id, d)| grid.unit(*id).filter(|u| u.bus == bus).map(|u| (u, d)))
            .collect();
        let range_total: f64 = units.iter().map(|(u, _)| u.q_max - u.q_min).sum();
        for (unit, dispatch) in &units {
            let share = if range_total > 0.0 {
                (unit.q_max - unit.q_min) / range_total
            } else {
                1.0 / units.len() as f64
            };
            unit_outputs
                .insert(unit.id, UnitDispatch { p: dispatch.p - unit.droop_k * delta_f, q: q_total * share });
        }
    }

    Ok(DpfSolution {
        voltages,
        delta_f,
        p_acc: scheduled_gen - scheduled_load - losses,
        losses,
        per_bus_mismatch,
        unit_outputs,
        converged: true,
        iterations: outcome.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    FrequencyLimit { delta_f: f64 },
    VoltageLimit { bus: BusId, deviation: f64 },
    ActivePowerLimit { unit: UnitId, p: f64 },
    ReactivePowerLimit { unit: UnitId, q: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::FrequencyLimit { delta_f } => write!(f, "frequency deviation {delta_f:.3} Hz"),
            Violation::VoltageLimit { bus, deviation } => {
                write!(f, "voltage deviation {deviation:+.4} pu at {bus}")
            }
            Violation::ActivePowerLimit { unit, p } => write!(f, "{unit} active output {p:.2} MW"),
            Violation::ReactivePowerLimit { unit, q } => {
                write!(f, "{unit} reactive output {q:.2} MVar")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepVerdict {
    Accept,
    Reject(Violation),
}

/// Frequency, voltage, then generator active and reactive limits; the first
/// violation found is reported.
pub fn check_step(grid: &Grid, state_after: &SystemState, solution: &DpfSolution) -> StepVerdict {
    if !(solution.delta_f.abs() < MAX_FREQUENCY_DEVIATION_HZ) {
        return StepVerdict::Reject(Violation::FrequencyLimit { delta_f: solution.delta_f });
    }
    for (&bus, v) in &solution.voltages {
        let nominal = grid.bus(bus).map_or(1.0, |b| b.nominal_voltage);
        let deviation = v.magnitude - nominal;
        if !(deviation.abs() < MAX_VOLTAGE_DEVIATION_PU) {
            return StepVerdict::Reject(Violation::VoltageLimit { bus, deviation });
        }
    }
    for (&id, out) in &solution.unit_outputs {
        let Some(unit) = grid.unit(id) else { continue };
        if !unit.p_admissible(out.p, state_after.t_minutes) {
            return StepVerdict::Reject(Violation::ActivePowerLimit { unit: id, p: out.p });
        }
    }
    for (&id, out) in &solution.unit_outputs {
        let Some(unit) = grid.unit(id) else { continue };
        if out.q < unit.q_min - LIMIT_TOLERANCE || out.q > unit.q_max + LIMIT_TOLERANCE {
            return StepVerdict::Reject(Violation::ReactivePowerLimit { unit: id, q: out.q });
        }
    }
    StepVerdict::Accept
}

/// Demand at the adverse extreme of the assumed fluctuation band.
pub fn worst_case_fluctuation(load_p: f64, load_q: f64, fraction: f64) -> (f64, f64) {
    (load_p * (1.0 + fraction), load_q * (1.0 + fraction))
}

/// Acceleration power from scheduled totals, MW.
pub fn acceleration_power(generation: f64, load: f64, losses: f64) -> f64 {
    generation - load - losses
}

/// Steady-state frequency deviation under proportional primary control.
pub fn frequency_deviation(p_acc: f64, k_total: f64) -> f64 {
    p_acc / k_total
}
