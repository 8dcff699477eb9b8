//! Blackout restoration planning.
//!
//! The planner sequences black-start, bus energization, load pick-up and
//! unit startup actions. Loads are ranked by a compound score that blends
//! their importance with their electrical distance from the black-start
//! resources, and every pick-up is checked with a power flow that carries
//! the system frequency deviation as an unknown.
//!
//! Modules, bottom up:
//! - [`grid`]: network description and hop-distance queries
//! - [`resources`]: thermal, CHP and wind unit models
//! - [`dpf`]: frequency-augmented power flow and step limits
//! - [`planner`]: scoring, greedy sequencing, exhaustive oracle
//! - [`case`] and [`report`]: case-file ingestion and plan reports

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod case;
pub mod dpf;
pub mod grid;
pub mod planner;
pub mod report;
pub mod resources;
#[cfg(test)]
mod testkit;

pub use case::{load_case, parse_case, CaseError, CaseFile};
pub use dpf::{
    check_step, solve_dpf, worst_case_fluctuation, DpfError, DpfSolution, StepVerdict, SystemState,
};
pub use grid::{energization_path, hop_distance, load_distance, BusId, Grid, GridError, LoadId, UnitId};
pub use planner::{
    compound_score, greedy_select, oracle_best_sequence, plan_restoration, start_next_unit, sweep_omega,
    LoadPoint, PlanError, PlannerConfig, RestorationPlan, ScoreWeights,
};
pub use report::{run_plan, run_sweep, Overrides, PlanReport};
pub use resources::{chp_contains, chp_max_electric, startup_duration, wind_available, GeneratorUnit};
