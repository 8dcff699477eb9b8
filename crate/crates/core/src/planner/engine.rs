use std::collections::{BTreeMap, BTreeSet};

use super::{
    black_start_buses, compound_score, greedy_select, ActionKind, Candidate, Diagnostics, PlanError,
    PlannerConfig, RestorationAction, RestorationPlan, ScoreWeights, SelectionRecord, UnservedLoad,
    UnservedReason,
};
use crate::dpf::{
    check_step, solve_dpf_with, worst_case_fluctuation, DpfSolution, LoadDemand, StepVerdict, SystemState,
    UnitDispatch,
};
use crate::grid::{
    energization_path, hops_from_energized, load_distance, BusId, Grid, GridError, LoadId, UnitId,
};
use crate::resources::startup_duration;

const REBALANCE_ROUNDS: usize = 20;
const BALANCE_TOLERANCE_MW: f64 = 1e-9;

/// Generation capacity not yet committed to restored demand, MW.
pub(crate) fn headroom(grid: &Grid, state: &SystemState) -> f64 {
    let capacity: f64 = state
        .online_units
        .keys()
        .filter_map(|id| grid.unit(*id))
        .map(|u| u.capacity_at(state.t_minutes))
        .sum();
    let demand: f64 = state.restored_loads.values().map(|d| d.p).sum();
    capacity - demand
}

/// The offline non-black-start unit closest to the energized subgraph whose
/// cranking power fits the current headroom. Ties go to the lower unit id.
pub fn start_next_unit(grid: &Grid, state: &SystemState) -> Result<UnitId, PlanError> {
    if state.energized_buses.is_empty() {
        return Err(GridError::NothingEnergized.into());
    }
    let spare = headroom(grid, state);
    grid.generators()
        .filter(|u| !u.black_start && !state.online_units.contains_key(&u.id))
        .filter(|u| u.cranking_power <= spare + 1e-9)
        .filter_map(|u| {
            hops_from_energized(grid, &state.energized_buses, u.bus).ok().flatten().map(|hops| (hops, u.id))
        })
        .min()
        .map(|(_, id)| id)
        .ok_or(PlanError::NoUnitAvailable)
}

fn diagnostics(grid: &Grid, solution: &DpfSolution) -> Diagnostics {
    let (dv_min, dv_max) = solution.voltage_deviation_range(grid);
    let (v_min, v_max) = solution
        .voltages
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.magnitude), hi.max(v.magnitude)));
    Diagnostics { delta_f: solution.delta_f, v_min, v_max, dv_min, dv_max }
}

fn absorb_solution(state: &mut SystemState, solution: &DpfSolution) {
    state.voltages = solution.voltages.clone();
    state.delta_f = solution.delta_f;
    for (id, out) in &solution.unit_outputs {
        if let Some(d) = state.online_units.get_mut(id) {
            d.q = out.q;
        }
    }
}

/// Mutable planning run shared by the greedy loop and the exhaustive oracle.
#[derive(Debug, Clone)]
pub(crate) struct Engine<'a> {
    pub(crate) grid: &'a Grid,
    config: &'a PlannerConfig,
    weights: ScoreWeights,
    pub(crate) state: SystemState,
    actions: Vec<RestorationAction>,
    pub(crate) scores: BTreeMap<LoadId, f64>,
    unreachable: BTreeSet<LoadId>,
    last_reason: BTreeMap<LoadId, UnservedReason>,
    selections: Vec<SelectionRecord>,
    pub(crate) total_score: f64,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(
        grid: &'a Grid,
        weights: ScoreWeights,
        config: &'a PlannerConfig,
    ) -> Result<Self, PlanError> {
        let bs_buses = black_start_buses(grid)?;
        let mut scores = BTreeMap::new();
        let mut unreachable = BTreeSet::new();
        for load in grid.loads() {
            match load_distance(grid, load.bus, &bs_buses) {
                Ok(d) => {
                    scores.insert(load.id, compound_score(load, d, weights));
                }
                Err(GridError::Unreachable { .. }) => {
                    unreachable.insert(load.id);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(Engine {
            grid,
            config,
            weights,
            state: SystemState::default(),
            actions: Vec::new(),
            scores,
            unreachable,
            last_reason: BTreeMap::new(),
            selections: Vec::new(),
            total_score: 0.0,
        })
    }

    fn push(&mut self, kind: ActionKind, diagnostics: Option<(Diagnostics, SystemState)>) {
        let (diagnostics, checked_state) = match diagnostics {
            Some((d, s)) => (Some(d), Some(s)),
            None => (None, None),
        };
        self.actions.push(RestorationAction {
            kind,
            t_minutes: self.state.t_minutes,
            diagnostics,
            checked_state,
        });
    }

    fn energize(&mut self, bus: BusId) {
        self.state.t_minutes += self.config.switch_minutes;
        self.state.energized_buses.insert(bus);
        self.push(ActionKind::Energize(bus), None);
    }

    /// Brings every self-starting unit online at t = 0, then energizes the
    /// shortest corridors joining their islands into one.
    pub(crate) fn black_start(&mut self) -> Result<(), PlanError> {
        let units: Vec<_> = self.grid.generators().filter(|u| u.black_start).map(|u| (u.id, u.bus)).collect();
        for (id, bus) in units {
            self.state.online_units.insert(id, UnitDispatch { p: 0.0, q: 0.0 });
            self.state.energized_buses.insert(bus);
            self.push(ActionKind::BlackStart(id), None);
        }

        loop {
            let island = self.main_island();
            let others: Vec<BusId> =
                self.state.energized_buses.iter().copied().filter(|b| !island.contains(b)).collect();
            if others.is_empty() {
                break;
            }
            let mut best: Option<Vec<BusId>> = None;
            for target in others {
                if let Ok(path) = energization_path(self.grid, &island, target) {
                    if best.as_ref().is_none_or(|b| path.len() < b.len()) {
                        best = Some(path);
                    }
                }
            }
            let Some(mut path) = best else {
                let stray = self.state.energized_buses.iter().find(|b| !island.contains(b)).copied();
                return Err(GridError::Unreachable {
                    from: *island.iter().next().unwrap(),
                    to: stray.unwrap(),
                }
                .into());
            };
            path.pop();
            for bus in path {
                if !self.state.energized_buses.contains(&bus) {
                    self.energize(bus);
                }
            }
        }

        if let Some(d) = self.rebalance() {
            let last = self.actions.last_mut().expect("black start emitted actions");
            last.diagnostics = Some(d.0);
            last.checked_state = Some(d.1);
        }
        Ok(())
    }

    fn main_island(&self) -> BTreeSet<BusId> {
        let energized = &self.state.energized_buses;
        let Some(&start) = energized.iter().next() else {
            return BTreeSet::new();
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(bus) = stack.pop() {
            for &next in self.grid.neighbors(bus) {
                if energized.contains(&next) && seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        seen
    }

    /// Re-dispatches online units to cover served demand plus losses, shares
    /// proportional to each unit's output range. Returns the diagnostics of
    /// the balanced state, if the power flow solves.
    fn rebalance(&mut self) -> Option<(Diagnostics, SystemState)> {
        let t = self.state.t_minutes;
        let bounds: Vec<(UnitId, f64, f64)> = self
            .state
            .online_units
            .keys()
            .map(|&id| {
                let (lo, hi) = self.grid.unit(id).and_then(|u| u.p_bounds_at(t)).unwrap_or((0.0, 0.0));
                (id, lo, hi)
            })
            .collect();
        let lo_sum: f64 = bounds.iter().map(|b| b.1).sum();
        let span: f64 = bounds.iter().map(|b| b.2 - b.1).sum();
        let demand: f64 = self.state.restored_loads.values().map(|d| d.p).sum();

        let mut losses = 0.0;
        let mut last = None;
        for _ in 0..REBALANCE_ROUNDS {
            let share = if span > 0.0 { ((demand + losses - lo_sum) / span).clamp(0.0, 1.0) } else { 0.0 };
            for &(id, lo, hi) in &bounds {
                if let Some(d) = self.state.online_units.get_mut(&id) {
                    d.p = lo + share * (hi - lo);
                }
            }
            let Ok(solution) = solve_dpf_with(self.grid, &self.state, &self.config.dpf) else {
                return None;
            };
            let saturated = share == 0.0 || share == 1.0;
            let done = solution.p_acc.abs() < BALANCE_TOLERANCE_MW || saturated;
            losses = solution.losses;
            last = Some(solution);
            if done {
                break;
            }
        }
        let solution = last?;
        let checked = self.state.clone();
        absorb_solution(&mut self.state, &solution);
        Some((diagnostics(self.grid, &solution), checked))
    }

    pub(crate) fn available_mw(&self) -> f64 {
        headroom(self.grid, &self.state)
    }

    fn worst_case(&self, load: LoadId) -> LoadDemand {
        let l = self.grid.load(load).expect("load ids come from the grid");
        let (p, q) = worst_case_fluctuation(l.p, l.q, self.config.fluctuation);
        LoadDemand { p, q }
    }

    /// Energizes the route to `load`, connects it at worst-case demand and
    /// validates the result. Nothing is committed on failure.
    pub(crate) fn try_pickup(&mut self, load: LoadId) -> Result<(), UnservedReason> {
        let demand = self.worst_case(load);
        let available = self.available_mw();
        if demand.p > available + 1e-9 {
            return Err(UnservedReason::InsufficientCapacity { demand: demand.p, available });
        }
        let bus = self.grid.load(load).expect("known load").bus;
        let path = energization_path(self.grid, &self.state.energized_buses, bus)
            .map_err(|_| UnservedReason::Unreachable)?;

        let mut trial = self.state.clone();
        trial.energized_buses.extend(path.iter().copied());
        trial.restored_loads.insert(load, demand);
        trial.t_minutes += self.config.switch_minutes * (path.len() + 1) as f64;

        let solution = solve_dpf_with(self.grid, &trial, &self.config.dpf)
            .map_err(|_| UnservedReason::PowerFlowFailed)?;
        if let StepVerdict::Reject(v) = check_step(self.grid, &trial, &solution) {
            return Err(UnservedReason::Rejected(v));
        }

        for b in path {
            self.energize(b);
        }
        let checked = trial.clone();
        self.state = trial;
        absorb_solution(&mut self.state, &solution);
        self.push(ActionKind::PickUp(load), Some((diagnostics(self.grid, &solution), checked)));
        self.total_score += self.scores[&load];
        self.last_reason.remove(&load);
        self.rebalance();
        Ok(())
    }

    /// Cranks the next unit, energizing its route first.
    pub(crate) fn start_unit(&mut self) -> Result<UnitId, PlanError> {
        let id = start_next_unit(self.grid, &self.state)?;
        let unit = self.grid.unit(id).expect("chosen from grid");
        let path = energization_path(self.grid, &self.state.energized_buses, unit.bus)?;
        for b in path {
            self.energize(b);
        }
        let duration = startup_duration(unit, self.state.t_minutes).unwrap_or(0.0);
        self.state.t_minutes += duration;
        self.state.online_units.insert(id, UnitDispatch { p: 0.0, q: 0.0 });
        let diag = self.rebalance();
        self.push(ActionKind::StartUnit(id), diag);
        Ok(id)
    }

    pub(crate) fn remaining_loads(&self) -> Vec<LoadId> {
        self.scores.keys().copied().filter(|id| !self.state.restored_loads.contains_key(id)).collect()
    }

    fn candidate(&self, load: LoadId) -> Candidate {
        let l = self.grid.load(load).expect("known load");
        let score = self.scores[&load];
        let key = if self.config.score_per_mw {
            if l.p > 0.0 {
                score / l.p
            } else {
                0.0
            }
        } else {
            score
        };
        Candidate { load, bus: l.bus, score: key, demand: self.worst_case(load).p }
    }

    pub(crate) fn run_greedy(&mut self) {
        // Loads rejected since the last unit start.
        let mut excluded: BTreeSet<LoadId> = BTreeSet::new();
        loop {
            let remaining = self.remaining_loads();
            if remaining.is_empty() {
                break;
            }
            let mut candidates: Vec<Candidate> =
                remaining.iter().filter(|id| !excluded.contains(id)).map(|&id| self.candidate(id)).collect();

            let mut progressed = false;
            loop {
                let available = self.available_mw();
                let chosen = greedy_select(&candidates, available);
                let mut record = SelectionRecord {
                    candidates: candidates.clone(),
                    available_mw: available,
                    chosen,
                    accepted: false,
                };
                let Some(load) = chosen else {
                    for c in &candidates {
                        self.last_reason.insert(
                            c.load,
                            UnservedReason::InsufficientCapacity { demand: c.demand, available },
                        );
                    }
                    self.selections.push(record);
                    break;
                };
                match self.try_pickup(load) {
                    Ok(()) => {
                        record.accepted = true;
                        self.selections.push(record);
                        progressed = true;
                        break;
                    }
                    Err(reason) => {
                        self.selections.push(record);
                        self.last_reason.insert(load, reason);
                        excluded.insert(load);
                        candidates.retain(|c| c.load != load);
                    }
                }
            }
            if progressed {
                continue;
            }
            match self.start_unit() {
                Ok(_) => excluded.clear(),
                Err(_) => break,
            }
        }
    }

    pub(crate) fn into_plan(self) -> RestorationPlan {
        let available = self.available_mw();
        let mut unserved: Vec<UnservedLoad> = self
            .unreachable
            .iter()
            .map(|&load| UnservedLoad { load, reason: UnservedReason::Unreachable })
            .collect();
        for load in self.remaining_loads() {
            let reason = self.last_reason.get(&load).copied().unwrap_or_else(|| {
                UnservedReason::InsufficientCapacity { demand: self.worst_case(load).p, available }
            });
            unserved.push(UnservedLoad { load, reason });
        }
        unserved.sort_by_key(|u| u.load);
        RestorationPlan {
            omega: self.weights.omega(),
            total_minutes: self.state.t_minutes,
            actions: self.actions,
            unserved_loads: unserved,
            total_score: self.total_score,
            selections: self.selections,
        }
    }
}
