//! Generation resources: thermal units with hot/cold restart timing, CHP
//! units bounded by a convex P-H operating region, and wind farms driven by
//! an ingested output series.

use thiserror::Error;

use crate::grid::{BusId, UnitId};

/// Share of `p_max` assumed as cranking power when a case omits it.
pub const DEFAULT_CRANKING_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResourceError {
    #[error("{0} self-starts; startup timing does not apply")]
    NotApplicable(UnitId),
    #[error("invalid CHP region: {0}")]
    InvalidRegion(String),
    #[error("invalid wind profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPoint {
    /// Electric output, MW.
    pub p: f64,
    /// Thermal output, MW.
    pub h: f64,
}

/// Closed convex polygon in the electric/thermal output plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ChpRegion {
    vertices: Vec<RegionPoint>,
}

fn cross(o: RegionPoint, a: RegionPoint, b: RegionPoint) -> f64 {
    (a.p - o.p) * (b.h - o.h) - (a.h - o.h) * (b.p - o.p)
}

impl ChpRegion {
    /// Accepts vertices in either winding; they are stored counter-clockwise.
    pub fn new(vertices: Vec<RegionPoint>) -> Result<Self, ResourceError> {
        if vertices.len() < 3 {
            return Err(ResourceError::InvalidRegion(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(v) =
            vertices.iter().find(|v| !(v.p >= 0.0 && v.h >= 0.0 && v.p.is_finite() && v.h.is_finite()))
        {
            return Err(ResourceError::InvalidRegion(format!(
                "vertex ({}, {}) must be finite and non-negative",
                v.p, v.h
            )));
        }
        let n = vertices.len();
        let turns: Vec<f64> =
            (0..n).map(|i| cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n])).collect();
        let positive = turns.iter().any(|&t| t > 0.0);
        let negative = turns.iter().any(|&t| t < 0.0);
        if positive == negative {
            return Err(ResourceError::InvalidRegion(if positive {
                "polygon is not convex".into()
            } else {
                "polygon is degenerate".into()
            }));
        }
        let mut vertices = vertices;
        if negative {
            vertices.reverse();
        }
        Ok(ChpRegion { vertices })
    }

    pub fn vertices(&self) -> &[RegionPoint] {
        &self.vertices
    }

    /// Extent along the electric axis.
    pub fn width(&self) -> f64 {
        let (lo, hi) = self.extent(|v| v.p);
        hi - lo
    }

    fn extent(&self, key: impl Fn(&RegionPoint) -> f64) -> (f64, f64) {
        self.vertices
            .iter()
            .map(key)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    }

    fn tolerance(&self) -> f64 {
        let (plo, phi) = self.extent(|v| v.p);
        let (hlo, hhi) = self.extent(|v| v.h);
        1e-12 * ((phi - plo) + (hhi - hlo)).max(1.0)
    }

    /// Electric output range `[min, max]` available at thermal output `h`.
    pub fn electric_range(&self, h: f64) -> Option<(f64, f64)> {
        let (hlo, hhi) = self.extent(|v| v.h);
        let tol = self.tolerance();
        if h < hlo - tol || h > hhi + tol {
            return None;
        }
        let h = h.clamp(hlo, hhi);
        let n = self.vertices.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let (bottom, top) = if a.h <= b.h { (a, b) } else { (b, a) };
            if h < bottom.h || h > top.h {
                continue;
            }
            let p = if top.h == bottom.h {
                lo = lo.min(bottom.p.min(top.p));
                hi = hi.max(bottom.p.max(top.p));
                continue;
            } else {
                bottom.p + (h - bottom.h) * (top.p - bottom.p) / (top.h - bottom.h)
            };
            lo = lo.min(p);
            hi = hi.max(p);
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Whether `(p, h)` lies inside or on the boundary of the region.
pub fn chp_contains(region: &ChpRegion, p: f64, h: f64) -> bool {
    let tol = region.tolerance();
    match region.electric_range(h) {
        Some((lo, hi)) => p >= lo - tol && p <= hi + tol,
        None => false,
    }
}

/// Largest electric output compatible with thermal output `h`, or `None`
/// when the horizontal slice at `h` misses the region.
pub fn chp_max_electric(region: &ChpRegion, h: f64) -> Option<f64> {
    region.electric_range(h).map(|(_, hi)| hi)
}

/// Wind farm output series, held constant within each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct WindProfile {
    resolution_minutes: u32,
    samples: Vec<f64>,
}

impl WindProfile {
    pub fn new(resolution_minutes: u32, samples: Vec<f64>) -> Result<Self, ResourceError> {
        if resolution_minutes == 0 {
            return Err(ResourceError::InvalidProfile("resolution must be positive".into()));
        }
        if samples.is_empty() {
            return Err(ResourceError::InvalidProfile("no samples".into()));
        }
        if let Some(s) = samples.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(ResourceError::InvalidProfile(format!("sample {s} is negative")));
        }
        Ok(WindProfile { resolution_minutes, samples })
    }

    pub fn resolution_minutes(&self) -> u32 {
        self.resolution_minutes
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// Forecast output at `t_minutes`; the last sample is held past the end.
pub fn wind_available(profile: &WindProfile, t_minutes: f64) -> f64 {
    let idx = (t_minutes.max(0.0) / f64::from(profile.resolution_minutes)).floor() as usize;
    profile.samples[idx.min(profile.samples.len() - 1)]
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitKind {
    Thermal,
    /// `heat_mw` is the thermal output the unit must deliver; electric
    /// output is then confined to the region's slice at that level.
    Chp {
        region: ChpRegion,
        heat_mw: f64,
    },
    Wind {
        profile: WindProfile,
    },
}

impl UnitKind {
    pub fn name(&self) -> &'static str {
        match self {
            UnitKind::Thermal => "thermal",
            UnitKind::Chp { .. } => "chp",
            UnitKind::Wind { .. } => "wind",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorUnit {
    pub id: UnitId,
    pub bus: BusId,
    pub kind: UnitKind,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Primary frequency response, MW per Hz.
    pub droop_k: f64,
    pub black_start: bool,
    pub cranking_power: f64,
    pub startup_hot_minutes: f64,
    pub startup_cold_minutes: f64,
    /// Minutes after the blackout during which a hot restart is possible.
    pub hot_window_minutes: f64,
    pub online: bool,
}

impl GeneratorUnit {
    pub(crate) fn validate(&self) -> Result<(), String> {
        if !(self.p_min <= self.p_max) {
            return Err(format!("p_min {} exceeds p_max {}", self.p_min, self.p_max));
        }
        if !(self.q_min <= self.q_max) {
            return Err(format!("q_min {} exceeds q_max {}", self.q_min, self.q_max));
        }
        if !(self.droop_k >= 0.0) {
            return Err(format!("droop_k {} is negative", self.droop_k));
        }
        if !(self.cranking_power >= 0.0) {
            return Err(format!("cranking_power {} is negative", self.cranking_power));
        }
        if self.black_start && self.cranking_power != 0.0 {
            return Err("black-start units need no cranking power".into());
        }
        for (name, v) in [
            ("startup_hot_minutes", self.startup_hot_minutes),
            ("startup_cold_minutes", self.startup_cold_minutes),
            ("hot_window_minutes", self.hot_window_minutes),
        ] {
            if !(v >= 0.0) {
                return Err(format!("{name} {v} is negative"));
            }
        }
        if let UnitKind::Wind { profile } = &self.kind {
            if let Some(s) = profile.samples.iter().find(|&&s| s > self.p_max) {
                return Err(format!("wind sample {s} exceeds p_max {}", self.p_max));
            }
        }
        Ok(())
    }

    /// Electric output bounds at `t_minutes`, combining the box limits with
    /// the CHP slice or the wind forecast. `None` if no output is feasible.
    pub fn p_bounds_at(&self, t_minutes: f64) -> Option<(f64, f64)> {
        match &self.kind {
            UnitKind::Thermal => Some((self.p_min, self.p_max)),
            UnitKind::Chp { region, heat_mw } => {
                let (lo, hi) = region.electric_range(*heat_mw)?;
                let lo = lo.max(self.p_min);
                let hi = hi.min(self.p_max);
                (lo <= hi).then_some((lo, hi))
            }
            UnitKind::Wind { profile } => {
                let cap = wind_available(profile, t_minutes).min(self.p_max);
                Some((self.p_min.min(cap), cap))
            }
        }
    }

    /// Upper output bound used as knapsack capacity.
    pub fn capacity_at(&self, t_minutes: f64) -> f64 {
        self.p_bounds_at(t_minutes).map_or(0.0, |(_, hi)| hi)
    }

    /// Whether an electric output is admissible at `t_minutes`.
    pub fn p_admissible(&self, p: f64, t_minutes: f64) -> bool {
        const TOL: f64 = 1e-9;
        if p < self.p_min - TOL || p > self.p_max + TOL {
            return false;
        }
        match &self.kind {
            UnitKind::Thermal => true,
            UnitKind::Chp { region, heat_mw } => chp_contains(region, p, *heat_mw),
            UnitKind::Wind { profile } => p <= wind_available(profile, t_minutes) + TOL,
        }
    }
}

/// Minutes a non-black-start thermal unit needs before it can carry load,
/// given how long ago the blackout happened. The hot window boundary counts
/// as hot.
pub fn startup_duration(unit: &GeneratorUnit, t_since_blackout_minutes: f64) -> Result<f64, ResourceError> {
    if unit.black_start || unit.kind != UnitKind::Thermal {
        return Err(ResourceError::NotApplicable(unit.id));
    }
    Ok(if t_since_blackout_minutes <= unit.hot_window_minutes {
        unit.startup_hot_minutes
    } else {
        unit.startup_cold_minutes
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<RegionPoint> {
        v.iter().map(|&(p, h)| RegionPoint { p, h }).collect()
    }

    fn square() -> ChpRegion {
        ChpRegion::new(pts(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)])).unwrap()
    }

    #[test]
    fn square_membership() {
        let sq = square();
        assert!(chp_contains(&sq, 5.0, 5.0));
        assert!(!chp_contains(&sq, 11.0, 5.0));
        assert!(chp_contains(&sq, 10.0, 5.0));
        assert!(chp_contains(&sq, 0.0, 0.0));
        assert!(!chp_contains(&sq, 5.0, -0.1));
    }

    #[test]
    fn max_electric() {
        assert_eq!(chp_max_electric(&square(), 5.0), Some(10.0));
        assert_eq!(chp_max_electric(&square(), 20.0), None);
        let tri = ChpRegion::new(pts(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)])).unwrap();
        assert!((chp_max_electric(&tri, 5.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_max_matches_dense_sampling() {
        let tri = ChpRegion::new(pts(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)])).unwrap();
        // P + H <= 10 sampled on a 1e-4 grid
        let best = (0..=200_000)
            .map(|i| i as f64 * 1e-4)
            .filter(|&p| p + 5.0 <= 10.0 + 1e-12)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((chp_max_electric(&tri, 5.0).unwrap() - best).abs() < 1e-4);
    }

    #[test]
    fn clockwise_input_is_accepted() {
        let cw = ChpRegion::new(pts(&[(0.0, 0.0), (0.0, 10.0), (10.0, 10.0), (10.0, 0.0)])).unwrap();
        assert!(chp_contains(&cw, 5.0, 5.0));
    }

    #[test]
    fn invalid_regions() {
        assert!(ChpRegion::new(pts(&[(0.0, 0.0), (1.0, 1.0)])).is_err());
        assert!(ChpRegion::new(pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])).is_err());
        assert!(ChpRegion::new(pts(&[(0.0, 0.0), (4.0, 0.0), (1.0, 1.0), (0.0, 4.0)])).is_err());
        assert!(ChpRegion::new(pts(&[(-1.0, 0.0), (4.0, 0.0), (0.0, 4.0)])).is_err());
    }

    #[test]
    fn wind_hold() {
        let w = WindProfile::new(5, vec![3.0, 4.0]).unwrap();
        assert_eq!(wind_available(&w, 0.0), 3.0);
        assert_eq!(wind_available(&w, 4.999), 3.0);
        assert_eq!(wind_available(&w, 7.0), 4.0);
        assert_eq!(wind_available(&w, 100.0), 4.0);
        assert!(WindProfile::new(5, vec![]).is_err());
        assert!(WindProfile::new(0, vec![1.0]).is_err());
        assert!(WindProfile::new(5, vec![-1.0]).is_err());
    }

    fn thermal() -> GeneratorUnit {
        GeneratorUnit {
            id: UnitId(1),
            bus: BusId(33),
            kind: UnitKind::Thermal,
            p_min: 0.0,
            p_max: 100.0,
            q_min: -50.0,
            q_max: 50.0,
            droop_k: 20.0,
            black_start: false,
            cranking_power: 5.0,
            startup_hot_minutes: 30.0,
            startup_cold_minutes: 180.0,
            hot_window_minutes: 60.0,
            online: false,
        }
    }

    #[test]
    fn hot_and_cold_restart() {
        let u = thermal();
        assert_eq!(startup_duration(&u, 30.0), Ok(30.0));
        assert_eq!(startup_duration(&u, 61.0), Ok(180.0));
        assert_eq!(startup_duration(&u, 60.0), Ok(30.0));
        let bs = GeneratorUnit { black_start: true, cranking_power: 0.0, ..thermal() };
        assert_eq!(startup_duration(&bs, 0.0), Err(ResourceError::NotApplicable(UnitId(1))));
        let wind = GeneratorUnit {
            kind: UnitKind::Wind { profile: WindProfile::new(5, vec![1.0]).unwrap() },
            ..thermal()
        };
        assert!(startup_duration(&wind, 0.0).is_err());
    }

    #[test]
    fn unit_bounds() {
        let chp =
            GeneratorUnit { kind: UnitKind::Chp { region: square(), heat_mw: 5.0 }, p_max: 8.0, ..thermal() };
        assert_eq!(chp.p_bounds_at(0.0), Some((0.0, 8.0)));
        assert!(chp.p_admissible(8.0, 0.0));
        assert!(!chp.p_admissible(9.0, 0.0));
        let wind = GeneratorUnit {
            kind: UnitKind::Wind { profile: WindProfile::new(5, vec![3.0, 4.0]).unwrap() },
            ..thermal()
        };
        assert_eq!(wind.capacity_at(6.0), 4.0);
        assert!(!wind.p_admissible(3.5, 0.0));
        let mut bad = thermal();
        bad.black_start = true;
        assert!(bad.validate().is_err());
    }
}
