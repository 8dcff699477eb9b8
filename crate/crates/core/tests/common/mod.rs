//! Builders, random instance generators and slow reference implementations
//! shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use restoration::dpf::{LoadDemand, UnitDispatch};
use restoration::grid::{Bus, Line};
use restoration::resources::{RegionPoint, UnitKind};
use restoration::{BusId, GeneratorUnit, Grid, LoadId, LoadPoint, SystemState, UnitId};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bus(id: u32) -> Bus {
    Bus { id: BusId(id), nominal_voltage: 1.0, energized: false }
}

pub fn line(from: u32, to: u32, r: f64, x: f64, b: f64) -> Line {
    Line {
        from_bus: BusId(from),
        to_bus: BusId(to),
        resistance: r,
        reactance: x,
        shunt_susceptance: b,
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
        q_min: -1000.0,
        q_max: 1000.0,
        droop_k,
        black_start,
        cranking_power: if black_start { 0.0 } else { 0.05 * p_max },
        startup_hot_minutes: 30.0,
        startup_cold_minutes: 120.0,
        hot_window_minutes: 60.0,
        online: false,
    }
}

pub fn load(id: u32, bus: u32, p: f64, q: f64, alpha: f64) -> LoadPoint {
    LoadPoint {
        id: LoadId(id),
        bus: BusId(bus),
        p,
        q,
        alpha,
        k_lp: 0.015 * p,
        k_lq: 0.015 * q,
        connected: false,
    }
}

pub fn grid(bus_ids: &[u32], lines: Vec<Line>, units: Vec<GeneratorUnit>, loads: Vec<LoadPoint>) -> Grid {
    Grid::new(100.0, bus_ids.iter().map(|&b| bus(b)).collect(), lines, units, loads).unwrap()
}

/// Path graph 1-2-...-n with uniform impedance.
pub fn chain(n: u32, r: f64, x: f64) -> Vec<Line> {
    (1..n).map(|i| line(i, i + 1, r, x, 0.0)).collect()
}

/// Point-in-convex-polygon by testing every edge's half-plane.
pub fn half_plane_contains(vertices: &[RegionPoint], p: f64, h: f64, eps: f64) -> bool {
    let n = vertices.len();
    let area2: f64 = (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            a.p * b.h - b.p * a.h
        })
        .sum();
    let orient = area2.signum();
    (0..n).all(|i| {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        let cross = (b.p - a.p) * (h - a.h) - (b.h - a.h) * (p - a.p);
        let len = ((b.p - a.p).powi(2) + (b.h - a.h).powi(2)).sqrt();
        orient * cross >= -eps * len
    })
}

/// Random convex polygon: sorted angles on a jittered ellipse.
pub fn random_convex_polygon(rng: &mut impl Rng) -> Vec<RegionPoint> {
    let n = rng.random_range(3..=8);
    let cx = rng.random_range(10.0..100.0);
    let cy = rng.random_range(10.0..100.0);
    let rx = rng.random_range(5.0..60.0);
    let ry = rng.random_range(5.0..60.0);
    let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let pts: Vec<RegionPoint> = angles
        .iter()
        .map(|t| RegionPoint { p: cx + rx * t.cos(), h: (cy + ry * t.sin()).max(0.0) })
        .collect();
    convex_hull(pts)
}

/// Andrew's monotone chain; counter-clockwise, no collinear points.
pub fn convex_hull(mut pts: Vec<RegionPoint>) -> Vec<RegionPoint> {
    pts.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.h.total_cmp(&b.h)));
    let cross = |o: RegionPoint, a: RegionPoint, b: RegionPoint| {
        (a.p - o.p) * (b.h - o.h) - (a.h - o.h) * (b.p - o.p)
    };
    let mut hull: Vec<RegionPoint> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &RegionPoint>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 1e-9 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// All-pairs hop counts by Floyd–Warshall over in-service lines.
pub fn floyd_hops(grid: &Grid) -> BTreeMap<(BusId, BusId), usize> {
    let ids: Vec<BusId> = grid.buses().map(|b| b.id).collect();
    let n = ids.len();
    let idx: BTreeMap<BusId, usize> = ids.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for l in grid.lines().iter().filter(|l| l.in_service) {
        let (a, b) = (idx[&l.from_bus], idx[&l.to_bus]);
        if a != b {
            d[a][b] = 1;
            d[b][a] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if d[i][j] < inf {
                out.insert((ids[i], ids[j]), d[i][j]);
            }
        }
    }
    out
}

/// Random connected network on buses `1..=n`: a random tree plus optional
/// extra edges.
pub fn random_network(rng: &mut impl Rng, n: u32, extra: usize) -> Vec<Line> {
    let mut lines = Vec::new();
    let mut seen = BTreeSet::new();
    for i in 2..=n {
        let parent = rng.random_range(1..i);
        seen.insert((parent, i));
        lines.push(random_line(rng, parent, i));
    }
    for _ in 0..extra {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        let key = (a.min(b), a.max(b));
        if a != b && seen.insert(key) {
            lines.push(random_line(rng, key.0, key.1));
        }
    }
    lines
}

fn random_line(rng: &mut impl Rng, a: u32, b: u32) -> Line {
    let x = rng.random_range(0.02..0.15);
    let r = x * rng.random_range(0.05..0.3);
    let sh = rng.random_range(0.0..0.05);
    line(a, b, r, x, sh)
}

/// A fully energized random system with every unit online, plus the state
/// to solve.
pub struct DpfInstance {
    pub grid: Grid,
    pub state: SystemState,
}

pub fn random_dpf_instance(rng: &mut impl Rng) -> DpfInstance {
    let n = rng.random_range(1..=5u32);
    let lines = random_network(rng, n, 2);
    let n_units = rng.random_range(1..=n.min(2));
    let mut units = Vec::new();
    let mut state = SystemState::default();
    for k in 0..n_units {
        let bus = if k == 0 { 1 } else { rng.random_range(2..=n) };
        if units.iter().any(|u: &GeneratorUnit| u.bus == BusId(bus)) {
            continue;
        }
        let unit = thermal(k + 1, bus, 200.0, rng.random_range(5.0..50.0), k == 0);
        state.online_units.insert(unit.id, UnitDispatch { p: 0.0, q: 0.0 });
        units.push(unit);
    }
    let mut loads = Vec::new();
    for b in 1..=n {
        if rng.random_bool(0.7) {
            let p = rng.random_range(5.0..40.0);
            let q = rng.random_range(0.0..20.0);
            let mut l = load(b, b, p, q, 0.5);
            l.k_lp = rng.random_range(0.01..0.02) * p;
            l.k_lq = rng.random_range(0.01..0.02) * q;
            state.restored_loads.insert(l.id, LoadDemand { p, q });
            loads.push(l);
        }
    }
    let total: f64 = state.restored_loads.values().map(|d| d.p).sum();
    let share = total / state.online_units.len() as f64;
    for d in state.online_units.values_mut() {
        d.p = share + rng.random_range(-5.0..5.0);
    }
    state.energized_buses = (1..=n).map(BusId).collect();
    let grid = grid(&(1..=n).collect::<Vec<_>>(), lines, units, loads);
    DpfInstance { grid, state }
}

pub struct OracleSolution {
    pub magnitude: BTreeMap<BusId, f64>,
    pub angle: BTreeMap<BusId, f64>,
    pub delta_f: f64,
}

/// Gauss–Seidel power flow nested inside a fixed-point iteration on Δf.
///
/// For a trial Δf the reference bus acts as an ordinary slack and the inner
/// loop solves the network. The outer update then sets
/// `Δf = (ΣP_set - ΣP_L - losses) / (ΣK_G + ΣK_Lp)` using the losses found.
pub fn gauss_seidel_dpf(grid: &Grid, state: &SystemState) -> OracleSolution {
    let buses: Vec<BusId> = state.energized_buses.iter().copied().collect();
    let n = buses.len();
    let idx: BTreeMap<BusId, usize> = buses.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let base = grid.base_mva();

    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for l in grid.lines().iter().filter(|l| l.in_service) {
        let (Some(&a), Some(&b)) = (idx.get(&l.from_bus), idx.get(&l.to_bus)) else { continue };
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(l.resistance, l.reactance);
        let ysh = Complex64::new(0.0, l.shunt_susceptance / 2.0);
        y[a][a] += ys + ysh;
        y[b][b] += ys + ysh;
        y[a][b] -= ys;
        y[b][a] -= ys;
    }

    let mut p0 = vec![0.0; n];
    let mut kp = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    let mut kq = vec![0.0; n];
    let mut pv = vec![false; n];
    let mut k_total = 0.0;
    let mut p_sched_total = 0.0;
    for (id, d) in &state.online_units {
        let u = grid.unit(*id).unwrap();
        let i = idx[&u.bus];
        p0[i] += d.p / base;
        kp[i] += u.droop_k / base;
        pv[i] = true;
        k_total += u.droop_k;
        p_sched_total += d.p;
    }
    for (id, d) in &state.restored_loads {
        let l = grid.load(*id).unwrap();
        let i = idx[&l.bus];
        p0[i] -= d.p / base;
        kp[i] += l.k_lp / base;
        q0[i] -= d.q / base;
        kq[i] += l.k_lq / base;
        k_total += l.k_lp;
        p_sched_total -= d.p;
    }
    let reference = pv.iter().position(|&x| x).unwrap();
    let v_set: Vec<f64> = buses.iter().map(|b| grid.bus(*b).unwrap().nominal_voltage).collect();

    let mut v: Vec<Complex64> = v_set.iter().map(|&m| Complex64::new(m, 0.0)).collect();
    let mut delta_f = 0.0;
    for _outer in 0..500 {
        for _inner in 0..200_000 {
            let mut change: f64 = 0.0;
            for i in 0..n {
                if i == reference {
                    continue;
                }
                let sum: Complex64 = (0..n).filter(|&k| k != i).map(|k| y[i][k] * v[k]).sum();
                let p = p0[i] - kp[i] * delta_f;
                let q =
                    if pv[i] { -(v[i].conj() * (sum + y[i][i] * v[i])).im } else { q0[i] + kq[i] * delta_f };
                let s = Complex64::new(p, -q);
                let mut next = (s / v[i].conj() - sum) / y[i][i];
                if pv[i] {
                    next = next / next.norm() * v_set[i];
                }
                change = change.max((next - v[i]).norm());
                v[i] = next;
            }
            if change < 1e-14 {
                break;
            }
        }
        let losses: f64 = (0..n)
            .map(|i| {
                let current: Complex64 = (0..n).map(|k| y[i][k] * v[k]).sum();
                (v[i] * current.conj()).re
            })
            .sum::<f64>()
            * base;
        let next_df = (p_sched_total - losses) / k_total;
        let step = (next_df - delta_f).abs();
        delta_f = next_df;
        if step < 1e-13 {
            break;
        }
    }

    OracleSolution {
        magnitude: buses.iter().enumerate().map(|(i, &b)| (b, v[i].norm())).collect(),
        angle: buses.iter().enumerate().map(|(i, &b)| (b, v[i].arg())).collect(),
        delta_f,
    }
}

/// A random planning instance: a radial network, one black-start unit at
/// bus 1, up to two cranked units, and `n_loads` loads of random size and
/// importance.
pub fn random_planner_grid(rng: &mut impl Rng, n_loads: u32) -> Grid {
    let n_bus = n_loads + 3;
    let lines: Vec<Line> = (2..=n_bus)
        .map(|i| {
            let parent = rng.random_range(1..i);
            let x = rng.random_range(0.005..0.03);
            line(parent, i, x * 0.1, x, 0.0)
        })
        .collect();
    let mut units = vec![thermal(1, 1, rng.random_range(30.0..80.0), rng.random_range(20.0..60.0), true)];
    let extra = rng.random_range(0..=2u32);
    for k in 0..extra {
        let bus = rng.random_range(2..=n_bus);
        if units.iter().any(|u| u.bus == BusId(bus)) {
            continue;
        }
        units.push(thermal(k + 2, bus, rng.random_range(20.0..80.0), rng.random_range(20.0..60.0), false));
    }
    let loads = (0..n_loads)
        .map(|k| {
            let bus = rng.random_range(2..=n_bus);
            let p = rng.random_range(2.0..30.0);
            let mut l = load(k + 1, bus, p, p * rng.random_range(0.1..0.5), rng.random_range(0.0..=1.0));
            l.alpha = (l.alpha * 10.0).round() / 10.0;
            l
        })
        .collect();
    grid(&(1..=n_bus).collect::<Vec<_>>(), lines, units, loads)
}
