//! Restoration sequencing.
//!
//! Loads are valued by their compound score `ω·α·C + (1-ω)·C/d` and packed
//! greedily into the generation capacity restored so far. Every pick-up is
//! validated by a dynamic power flow at the worst-case demand before it is
//! committed; when nothing more fits, the nearest non-black-start unit is
//! cranked and the loop resumes.

mod engine;
mod oracle;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dpf::{DpfOptions, SystemState, Violation, DEFAULT_FLUCTUATION};
use crate::grid::{BusId, Grid, GridError, LoadId, UnitId};
pub use engine::start_next_unit;
pub use oracle::{oracle_best_sequence, ORACLE_MAX_LOADS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub id: LoadId,
    pub bus: BusId,
    /// Capacity C, MW.
    pub p: f64,
    pub q: f64,
    /// Importance α in [0, 1].
    pub alpha: f64,
    /// Active demand sensitivity, MW per Hz.
    pub k_lp: f64,
    /// Reactive demand sensitivity, MVar per Hz.
    pub k_lq: f64,
    pub connected: bool,
}

impl LoadPoint {
    pub(crate) fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(self.p >= 0.0 && self.p.is_finite()) {
            return Err(format!("p {} must be non-negative", self.p));
        }
        if !self.q.is_finite() {
            return Err(format!("q {} is not finite", self.q));
        }
        if !(self.k_lp >= 0.0 && self.k_lq >= 0.0) {
            return Err("frequency coefficients must be non-negative".into());
        }
        if self.connected {
            return Err("loads start disconnected after a blackout".into());
        }
        Ok(())
    }
}

/// Blend between load importance (ω = 1) and proximity to black-start
/// resources (ω = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    omega: f64,
}

impl ScoreWeights {
    pub fn new(omega: f64) -> Result<Self, PlanError> {
        if (0.0..=1.0).contains(&omega) {
            Ok(ScoreWeights { omega })
        } else {
            Err(PlanError::InvalidOmega(omega))
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Clock advance for each Energize and PickUp action.
    pub switch_minutes: f64,
    /// Demand fluctuation applied at its adverse extreme when checking a pick-up.
    pub fluctuation: f64,
    /// Rank candidates by score per MW instead of raw score.
    pub score_per_mw: bool,
    pub dpf: DpfOptions,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            switch_minutes: 5.0,
            fluctuation: DEFAULT_FLUCTUATION,
            score_per_mw: false,
            dpf: DpfOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no black-start unit in the case")]
    NoBlackStart,
    #[error("omega {0} outside [0, 1]")]
    InvalidOmega(f64),
    #[error("no startable unit is reachable or crankable")]
    NoUnitAvailable,
    #[error("{loads} loads exceed the exhaustive search limit of {max}")]
    TooLarge { loads: usize, max: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target")]
pub enum ActionKind {
    BlackStart(UnitId),
    Energize(BusId),
    PickUp(LoadId),
    StartUnit(UnitId),
}

impl ActionKind {
    pub fn verb(&self) -> &'static str {
        match self {
            ActionKind::BlackStart(_) => "BlackStart",
            ActionKind::Energize(_) => "Energize",
            ActionKind::PickUp(_) => "PickUp",
            ActionKind::StartUnit(_) => "StartUnit",
        }
    }

    /// Bus the action takes place at.
    pub fn bus(&self, grid: &Grid) -> Option<BusId> {
        match *self {
            ActionKind::BlackStart(u) | ActionKind::StartUnit(u) => grid.unit(u).map(|u| u.bus),
            ActionKind::Energize(b) => Some(b),
            ActionKind::PickUp(l) => grid.load(l).map(|l| l.bus),
        }
    }
}

/// System condition right after an action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub delta_f: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub dv_min: f64,
    pub dv_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationAction {
    pub kind: ActionKind,
    /// Minutes since the blackout at which the action completes.
    pub t_minutes: f64,
    pub diagnostics: Option<Diagnostics>,
    /// The state the diagnostics were solved on.
    pub checked_state: Option<SystemState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum UnservedReason {
    Rejected(Violation),
    PowerFlowFailed,
    InsufficientCapacity { demand: f64, available: f64 },
    Unreachable,
}

impl std::fmt::Display for UnservedReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UnservedReason::Rejected(v) => write!(f, "rejected: {v}"),
            UnservedReason::PowerFlowFailed => write!(f, "power flow failed"),
            UnservedReason::InsufficientCapacity { demand, available } => {
                write!(f, "needs {demand:.2} MW, {available:.2} MW available")
            }
            UnservedReason::Unreachable => write!(f, "unreachable"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnservedLoad {
    pub load: LoadId,
    #[serde(flatten)]
    pub reason: UnservedReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub load: LoadId,
    pub bus: BusId,
    /// Ranking key.
    pub score: f64,
    /// Worst-case demand, MW.
    pub demand: f64,
}

/// One greedy decision, kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub candidates: Vec<Candidate>,
    pub available_mw: f64,
    pub chosen: Option<LoadId>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationPlan {
    pub omega: f64,
    pub actions: Vec<RestorationAction>,
    pub total_minutes: f64,
    pub unserved_loads: Vec<UnservedLoad>,
    /// Sum of compound scores of the loads picked up.
    pub total_score: f64,
    pub selections: Vec<SelectionRecord>,
}

impl RestorationPlan {
    pub fn picked_loads(&self) -> Vec<LoadId> {
        self.actions
            .iter()
            .filter_map(|a| match a.kind {
                ActionKind::PickUp(l) => Some(l),
                _ => None,
            })
            .collect()
    }

    /// Buses of picked-up loads, in pick-up order.
    pub fn pickup_buses(&self, grid: &Grid) -> Vec<BusId> {
        self.picked_loads().into_iter().filter_map(|l| grid.load(l).map(|l| l.bus)).collect()
    }

    pub fn served_mw(&self, grid: &Grid) -> f64 {
        self.picked_loads().iter().filter_map(|l| grid.load(*l)).map(|l| l.p).fold(0.0, |a, b| a + b)
    }
}

/// `ω·α·C + (1-ω)·C/d` with C the load's MW capacity.
pub fn compound_score(load: &LoadPoint, d: u32, weights: ScoreWeights) -> f64 {
    let w = weights.omega;
    let c = load.p;
    w * load.alpha * c + (1.0 - w) * c / f64::from(d.max(1))
}

/// Highest-scoring candidate whose demand fits in `available_mw`. Equal
/// scores go to the lower bus, then the lower load id.
pub fn greedy_select(candidates: &[Candidate], available_mw: f64) -> Option<LoadId> {
    candidates
        .iter()
        .filter(|c| c.demand <= available_mw + 1e-9)
        .min_by(|a, b| b.score.total_cmp(&a.score).then(a.bus.cmp(&b.bus)).then(a.load.cmp(&b.load)))
        .map(|c| c.load)
}

pub fn plan_restoration(
    grid: &Grid,
    weights: ScoreWeights,
    config: &PlannerConfig,
) -> Result<RestorationPlan, PlanError> {
    let mut engine = engine::Engine::new(grid, weights, config)?;
    engine.black_start()?;
    engine.run_greedy();
    Ok(engine.into_plan())
}

/// One independent plan per ω, returned in ascending ω order.
pub fn sweep_omega(
    grid: &Grid,
    omegas: &[f64],
    config: &PlannerConfig,
) -> Result<Vec<(f64, RestorationPlan)>, PlanError> {
    let mut weights = omegas.iter().map(|&w| ScoreWeights::new(w)).collect::<Result<Vec<_>, _>>()?;
    weights.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    weights.par_iter().map(|w| plan_restoration(grid, *w, config).map(|p| (w.omega, p))).collect()
}

pub(crate) fn black_start_buses(grid: &Grid) -> Result<BTreeSet<BusId>, PlanError> {
    let buses = grid.black_start_buses();
    if buses.is_empty() {
        Err(PlanError::NoBlackStart)
    } else {
        Ok(buses)
    }
}
