//! Case files: a TOML document with `[system]`, `[[buses]]`, `[[lines]]`,
//! `[[generators]]`, `[[chp_regions]]`, `[[wind_profiles]]`, `[[loads]]` and
//! `[planner]` sections. Power is in MW/MVar; impedances in per-unit on
//! `base_mva`.
//!
//! Wind profiles may be inlined as `samples` or read from a two-column
//! `minute MW` text file via `path`, relative to the case file. Loaded cases
//! always hold inline samples, so [`CaseFile::to_canonical_string`] output is
//! self-contained.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Bus, BusId, Grid, Line, LoadId, UnitId};
use crate::planner::{LoadPoint, PlannerConfig};
use crate::resources::{
    ChpRegion, GeneratorUnit, RegionPoint, UnitKind, WindProfile, DEFAULT_CRANKING_FRACTION,
};

/// Range of generated load frequency sensitivities, as a fraction of the
/// load's MW (MVar) per Hz.
pub const LOAD_SENSITIVITY_RANGE: (f64, f64) = (0.01, 0.02);

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid case: {0}")]
    Validation(String),
}

fn default_one() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_resolution() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base_mva: f64,
    /// Reported totals, kept as metadata only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_total_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reported_total_mvar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusEntry {
    pub id: u32,
    #[serde(default = "default_one")]
    pub nominal_voltage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineEntry {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "default_true")]
    pub in_service: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindEntry {
    Thermal,
    Chp,
    Wind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorEntry {
    pub id: u32,
    pub bus: u32,
    pub kind: KindEntry,
    #[serde(default)]
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub droop_k: f64,
    #[serde(default)]
    pub black_start: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cranking_power: Option<f64>,
    #[serde(default)]
    pub startup_hot_minutes: f64,
    #[serde(default)]
    pub startup_cold_minutes: f64,
    #[serde(default)]
    pub hot_window_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChpRegionEntry {
    pub unit: u32,
    /// Thermal output the unit is committed to, MW.
    pub heat_mw: f64,
    /// `[P, H]` pairs.
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindProfileEntry {
    pub unit: u32,
    #[serde(default = "default_resolution")]
    pub resolution_minutes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEntry {
    pub id: u32,
    pub bus: u32,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    /// Drawn from the seeded generator when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_lp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_lq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    #[serde(default = "default_one")]
    pub omega: f64,
    #[serde(default = "PlannerSection::default_switch")]
    pub switch_minutes: f64,
    #[serde(default = "PlannerSection::default_fluctuation")]
    pub fluctuation: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub score_per_mw: bool,
}

impl PlannerSection {
    fn default_switch() -> f64 {
        PlannerConfig::default().switch_minutes
    }
    fn default_fluctuation() -> f64 {
        PlannerConfig::default().fluctuation
    }
}

impl Default for PlannerSection {
    fn default() -> Self {
        PlannerSection {
            omega: 1.0,
            switch_minutes: Self::default_switch(),
            fluctuation: Self::default_fluctuation(),
            seed: 0,
            score_per_mw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub system: SystemSection,
    #[serde(default)]
    pub buses: Vec<BusEntry>,
    #[serde(default)]
    pub lines: Vec<LineEntry>,
    #[serde(default)]
    pub generators: Vec<GeneratorEntry>,
    #[serde(default)]
    pub chp_regions: Vec<ChpRegionEntry>,
    #[serde(default)]
    pub wind_profiles: Vec<WindProfileEntry>,
    #[serde(default)]
    pub loads: Vec<LoadEntry>,
    #[serde(default)]
    pub planner: PlannerSection,
}

fn invalid(message: impl Into<String>) -> CaseError {
    CaseError::Validation(message.into())
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses and validates a case. Relative wind profile paths are resolved
/// against `base_dir`.
pub fn parse_case(text: &str, base_dir: &Path) -> Result<CaseFile, CaseError> {
    if text.trim().is_empty() {
        return Err(CaseError::Parse { line: 1, column: 1, message: "empty case file".into() });
    }
    let mut case: CaseFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        CaseError::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    for entry in &mut case.wind_profiles {
        if let Some(rel) = entry.path.take() {
            if entry.samples.is_some() {
                return Err(invalid(format!(
                    "wind profile for unit {} gives both samples and path",
                    entry.unit
                )));
            }
            let path = base_dir.join(&rel);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CaseError::Io { path: path.clone(), message: e.to_string() })?;
            entry.samples = Some(parse_wind_series(&text, entry.resolution_minutes)?);
        }
    }
    case.validate()?;
    Ok(case)
}

pub fn load_case(path: &Path) -> Result<CaseFile, CaseError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CaseError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    parse_case(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Reads a `minute MW` series (whitespace or comma separated, `#` comments).
/// Minutes must start at 0 and step by `resolution_minutes`.
pub fn parse_wind_series(text: &str, resolution_minutes: u32) -> Result<Vec<f64>, CaseError> {
    let mut samples = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> =
            line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let bad = |message: String| CaseError::Parse { line: n + 1, column: 1, message };
        if fields.len() != 2 {
            return Err(bad(format!("expected 2 columns, found {}", fields.len())));
        }
        let minute: f64 = fields[0].parse().map_err(|_| bad(format!("bad minute {:?}", fields[0])))?;
        let mw: f64 = fields[1].parse().map_err(|_| bad(format!("bad MW value {:?}", fields[1])))?;
        let expected = samples.len() as f64 * f64::from(resolution_minutes);
        if (minute - expected).abs() > 1e-9 {
            return Err(bad(format!("expected minute {expected}, found {minute}")));
        }
        samples.push(mw);
    }
    if samples.is_empty() {
        return Err(CaseError::Parse { line: 1, column: 1, message: "wind series is empty".into() });
    }
    Ok(samples)
}

impl CaseFile {
    /// Checks every invariant the planner relies on by building the grid.
    pub fn validate(&self) -> Result<(), CaseError> {
        let p = &self.planner;
        if !(0.0..=1.0).contains(&p.omega) {
            return Err(invalid(format!("planner omega {} outside [0, 1]", p.omega)));
        }
        if !(0.0..=1.0).contains(&p.fluctuation) {
            return Err(invalid(format!("planner fluctuation {} outside [0, 1]", p.fluctuation)));
        }
        if !(p.switch_minutes >= 0.0) {
            return Err(invalid("planner switch_minutes must be non-negative"));
        }
        let grid = self.to_grid()?;
        grid.check_connected().map_err(|e| invalid(e.to_string()))
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            switch_minutes: self.planner.switch_minutes,
            fluctuation: self.planner.fluctuation,
            score_per_mw: self.planner.score_per_mw,
            ..PlannerConfig::default()
        }
    }

    /// Builds the grid, drawing missing load sensitivities from
    /// `planner.seed`.
    pub fn to_grid(&self) -> Result<Grid, CaseError> {
        let buses = self
            .buses
            .iter()
            .map(|b| Bus { id: BusId(b.id), nominal_voltage: b.nominal_voltage, energized: false })
            .collect();
        let lines = self
            .lines
            .iter()
            .map(|l| Line {
                from_bus: BusId(l.from),
                to_bus: BusId(l.to),
                resistance: l.r,
                reactance: l.x,
                shunt_susceptance: l.b,
                in_service: l.in_service,
            })
            .collect();

        for r in &self.chp_regions {
            match self.generators.iter().find(|g| g.id == r.unit) {
                Some(g) if g.kind == KindEntry::Chp => {}
                _ => return Err(invalid(format!("CHP region refers to non-CHP unit {}", r.unit))),
            }
        }
        for w in &self.wind_profiles {
            match self.generators.iter().find(|g| g.id == w.unit) {
                Some(g) if g.kind == KindEntry::Wind => {}
                _ => return Err(invalid(format!("wind profile refers to non-wind unit {}", w.unit))),
            }
        }

        let mut generators = Vec::with_capacity(self.generators.len());
        for g in &self.generators {
            let kind = match g.kind {
                KindEntry::Thermal => UnitKind::Thermal,
                KindEntry::Chp => {
                    let mut regions = self.chp_regions.iter().filter(|r| r.unit == g.id);
                    let (Some(r), None) = (regions.next(), regions.next()) else {
                        return Err(invalid(format!("CHP unit {} needs exactly one region", g.id)));
                    };
                    let vertices = r.vertices.iter().map(|&[p, h]| RegionPoint { p, h }).collect();
                    let region =
                        ChpRegion::new(vertices).map_err(|e| invalid(format!("unit {}: {e}", g.id)))?;
                    UnitKind::Chp { region, heat_mw: r.heat_mw }
                }
                KindEntry::Wind => {
                    let mut profiles = self.wind_profiles.iter().filter(|w| w.unit == g.id);
                    let (Some(w), None) = (profiles.next(), profiles.next()) else {
                        return Err(invalid(format!("wind unit {} needs exactly one profile", g.id)));
                    };
                    let samples = w
                        .samples
                        .clone()
                        .ok_or_else(|| invalid(format!("wind unit {} has no samples", g.id)))?;
                    let profile = WindProfile::new(w.resolution_minutes, samples)
                        .map_err(|e| invalid(format!("unit {}: {e}", g.id)))?;
                    UnitKind::Wind { profile }
                }
            };
            let cranking_power = g.cranking_power.unwrap_or(if g.black_start {
                0.0
            } else {
                DEFAULT_CRANKING_FRACTION * g.p_max
            });
            generators.push(GeneratorUnit {
                id: UnitId(g.id),
                bus: BusId(g.bus),
                kind,
                p_min: g.p_min,
                p_max: g.p_max,
                q_min: g.q_min,
                q_max: g.q_max,
                droop_k: g.droop_k,
                black_start: g.black_start,
                cranking_power,
                startup_hot_minutes: g.startup_hot_minutes,
                startup_cold_minutes: g.startup_cold_minutes,
                hot_window_minutes: g.hot_window_minutes,
                online: false,
            });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.planner.seed);
        let (lo, hi) = LOAD_SENSITIVITY_RANGE;
        let mut loads = Vec::with_capacity(self.loads.len());
        let mut entries: Vec<&LoadEntry> = self.loads.iter().collect();
        entries.sort_by_key(|l| l.id);
        for l in entries {
            // Both draws happen for every load so that supplying one value
            // does not shift the stream for the others.
            let fp: f64 = rng.random_range(lo..hi);
            let fq: f64 = rng.random_range(lo..hi);
            loads.push(LoadPoint {
                id: LoadId(l.id),
                bus: BusId(l.bus),
                p: l.p,
                q: l.q,
                alpha: l.alpha,
                k_lp: l.k_lp.unwrap_or(fp * l.p.abs()),
                k_lq: l.k_lq.unwrap_or(fq * l.q.abs()),
                connected: false,
            });
        }

        Grid::new(self.system.base_mva, buses, lines, generators, loads).map_err(|e| invalid(e.to_string()))
    }

    /// Sorted keys, shortest round-trip decimals, samples inlined.
    pub fn to_canonical_string(&self) -> String {
        let value = toml::Value::try_from(self).expect("case files serialize to TOML");
        toml::to_string(&value).expect("TOML values serialize")
    }
}
