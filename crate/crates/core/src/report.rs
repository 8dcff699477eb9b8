//! Plan execution from a case file and report rendering.
//!
//! The machine format is the JSON form of [`PlanReport`]. Each row that
//! carries diagnostics also carries the system state they were solved on,
//! so every Δf can be re-derived from the case and the report alone.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{CaseError, CaseFile};
use crate::dpf::SystemState;
use crate::grid::{BusId, Grid, LoadId};
use crate::planner::{
    plan_restoration, sweep_omega, ActionKind, Diagnostics, PlanError, RestorationPlan, ScoreWeights,
    UnservedLoad,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error("planning failed: {0}")]
    Plan(#[from] PlanError),
}

/// Command-line adjustments applied on top of the case's `[planner]` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub omega: Option<f64>,
    pub seed: Option<u64>,
    pub switch_minutes: Option<f64>,
    pub fluctuation: Option<f64>,
}

impl Overrides {
    fn apply(&self, case: &CaseFile) -> Result<CaseFile, RunError> {
        if let Some(w) = self.omega {
            if !(0.0..=1.0).contains(&w) {
                return Err(RunError::Usage(format!("--omega {w} is outside [0, 1]")));
            }
        }
        if let Some(f) = self.fluctuation {
            if !(0.0..=1.0).contains(&f) {
                return Err(RunError::Usage(format!("--fluctuation {f} is outside [0, 1]")));
            }
        }
        if let Some(s) = self.switch_minutes {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(RunError::Usage(format!("--switch-minutes {s} must be non-negative")));
            }
        }
        let mut case = case.clone();
        let p = &mut case.planner;
        p.omega = self.omega.unwrap_or(p.omega);
        p.seed = self.seed.unwrap_or(p.seed);
        p.switch_minutes = self.switch_minutes.unwrap_or(p.switch_minutes);
        p.fluctuation = self.fluctuation.unwrap_or(p.fluctuation);
        Ok(case)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: usize,
    pub kind: String,
    pub target: String,
    pub bus: Option<BusId>,
    pub t_minutes: f64,
    pub diagnostics: Option<Diagnostics>,
    pub checked_state: Option<SystemState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub omega: f64,
    pub total_minutes: f64,
    pub served_mw: f64,
    pub unserved_mw: f64,
    pub served_loads: Vec<LoadId>,
    pub unserved_loads: Vec<UnservedLoad>,
    pub total_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSection {
    pub rows: Vec<ReportRow>,
    pub summary: PlanSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub omega: f64,
    pub sequence: Vec<BusId>,
    pub formatted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub plans: Vec<PlanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
    /// Non-fatal notes such as dropped duplicate ω values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl PlanReport {
    pub fn all_served(&self) -> bool {
        self.plans.iter().all(|p| p.summary.unserved_loads.is_empty())
    }

    pub fn to_machine(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_machine(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for section in &self.plans {
            render_section(&mut out, section);
        }
        if let Some(sweep) = &self.sweep {
            let _ = writeln!(out, "Restoration sequence by control variable");
            let _ = writeln!(out, "{:>5}  actions", "omega");
            for row in sweep {
                let _ = writeln!(out, "{:>5.2}  {}", row.omega, row.formatted);
            }
        }
        out
    }
}

fn fmt_opt(v: Option<f64>, width: usize, precision: usize) -> String {
    match v {
        Some(x) => format!("{x:>width$.precision$}"),
        None => format!("{:>width$}", "-"),
    }
}

fn render_section(out: &mut String, section: &PlanSection) {
    let s = &section.summary;
    let _ = writeln!(out, "Restoration plan, omega = {:.2}", s.omega);
    let _ = writeln!(
        out,
        "{:>3}  {:<10}  {:<6}  {:>4}  {:>8}  {:>8}  {:>7}  {:>7}",
        "#", "action", "target", "bus", "t [min]", "df [Hz]", "V min", "V max"
    );
    for row in &section.rows {
        let d = row.diagnostics;
        let _ = writeln!(
            out,
            "{:>3}  {:<10}  {:<6}  {:>4}  {:>8.1}  {}  {}  {}",
            row.index,
            row.kind,
            row.target,
            row.bus.map_or("-".to_string(), |b| b.to_string()),
            row.t_minutes,
            fmt_opt(d.map(|d| d.delta_f), 8, 4),
            fmt_opt(d.map(|d| d.v_min), 7, 4),
            fmt_opt(d.map(|d| d.v_max), 7, 4),
        );
    }
    let _ = writeln!(
        out,
        "total {:.1} min, served {:.2} MW ({} loads), unserved {:.2} MW",
        s.total_minutes,
        s.served_mw,
        s.served_loads.len(),
        s.unserved_mw
    );
    for u in &s.unserved_loads {
        let _ = writeln!(out, "  unserved {}: {}", u.load, u.reason);
    }
    out.push('\n');
}

fn section(grid: &Grid, plan: &RestorationPlan) -> PlanSection {
    let rows = plan
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| ReportRow {
            index: i + 1,
            kind: a.kind.verb().to_string(),
            target: match a.kind {
                ActionKind::BlackStart(u) | ActionKind::StartUnit(u) => u.to_string(),
                ActionKind::Energize(b) => b.to_string(),
                ActionKind::PickUp(l) => l.to_string(),
            },
            bus: a.kind.bus(grid),
            t_minutes: a.t_minutes,
            diagnostics: a.diagnostics,
            checked_state: a.checked_state.clone(),
        })
        .collect();
    let served = plan.served_mw(grid);
    let unserved_mw =
        plan.unserved_loads.iter().filter_map(|u| grid.load(u.load)).map(|l| l.p).fold(0.0, |a, b| a + b);
    PlanSection {
        rows,
        summary: PlanSummary {
            omega: plan.omega,
            total_minutes: plan.total_minutes,
            served_mw: served,
            unserved_mw,
            served_loads: plan.picked_loads(),
            unserved_loads: plan.unserved_loads.clone(),
            total_score: plan.total_score,
        },
    }
}

/// Buses touched by the plan, in order. An Energize is listed only when no
/// later pick-up or unit start happens at the same bus, so each bus appears
/// once at the step that puts it to use.
pub fn action_sequence(grid: &Grid, plan: &RestorationPlan) -> Vec<BusId> {
    let mut seq = Vec::new();
    for (i, action) in plan.actions.iter().enumerate() {
        let Some(bus) = action.kind.bus(grid) else { continue };
        if let ActionKind::Energize(_) = action.kind {
            let used_later = plan.actions[i + 1..].iter().any(|a| {
                matches!(a.kind, ActionKind::PickUp(_) | ActionKind::StartUnit(_))
                    && a.kind.bus(grid) == Some(bus)
            });
            if used_later {
                continue;
            }
        }
        seq.push(bus);
    }
    seq
}

/// `B36,B35, B22, ...`: black-start buses joined tightly, then the rest.
pub fn format_sequence(grid: &Grid, plan: &RestorationPlan) -> String {
    let seq = action_sequence(grid, plan);
    let n_bs = plan.actions.iter().take_while(|a| matches!(a.kind, ActionKind::BlackStart(_))).count();
    let head: Vec<String> = seq.iter().take(n_bs).map(|b| b.to_string()).collect();
    let mut parts = vec![head.join(",")];
    parts.extend(seq.iter().skip(n_bs).map(|b| b.to_string()));
    parts.join(", ")
}

pub fn run_plan(case: &CaseFile, overrides: &Overrides) -> Result<PlanReport, RunError> {
    let case = overrides.apply(case)?;
    case.validate()?;
    let grid = case.to_grid()?;
    let weights = ScoreWeights::new(case.planner.omega)?;
    let plan = plan_restoration(&grid, weights, &case.planner_config())?;
    Ok(PlanReport { plans: vec![section(&grid, &plan)], sweep: None, warnings: Vec::new() })
}

/// One plan per distinct ω, plus a table of bus sequences. Duplicate ω
/// values are dropped with a warning.
pub fn run_sweep(case: &CaseFile, omegas: &[f64], overrides: &Overrides) -> Result<PlanReport, RunError> {
    if overrides.omega.is_some() {
        return Err(RunError::Usage("use the omega grid instead of a single omega for sweeps".into()));
    }
    let case = overrides.apply(case)?;
    case.validate()?;
    if let Some(w) = omegas.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(RunError::Usage(format!("omega {w} is outside [0, 1]")));
    }
    let mut warnings = Vec::new();
    let mut distinct: Vec<f64> = Vec::with_capacity(omegas.len());
    for &w in omegas {
        if distinct.contains(&w) {
            warnings.push(format!("duplicate omega {w} ignored"));
        } else {
            distinct.push(w);
        }
    }
    let grid = case.to_grid()?;
    let plans = sweep_omega(&grid, &distinct, &case.planner_config())?;
    let sweep = plans
        .iter()
        .map(|(w, p)| SweepRow {
            omega: *w,
            sequence: action_sequence(&grid, p),
            formatted: format_sequence(&grid, p),
        })
        .collect();
    Ok(PlanReport {
        plans: plans.iter().map(|(_, p)| section(&grid, p)).collect(),
        sweep: Some(sweep),
        warnings,
    })
}

/// `0.0, 0.1, ..., 1.0`.
pub fn default_omega_grid() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}
