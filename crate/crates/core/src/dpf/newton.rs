//! Newton iteration over bus angles, load-bus voltage magnitudes and the
//! system frequency deviation.
//!
//! Generator buses hold their voltage setpoint; every bus, including the
//! angle reference, has a specified active injection that moves with Δf.
//! Δf therefore takes the place of the usual slack-bus active power.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::{DpfError, SystemState};
use crate::grid::{BusId, Grid};

#[derive(Debug, Clone)]
pub struct DpfProblem {
    pub(crate) buses: Vec<BusId>,
    g: DMatrix<f64>,
    b: DMatrix<f64>,
    /// Scheduled active injection at Δf = 0, per-unit.
    p0: Vec<f64>,
    /// Active injection drop per Hz of Δf, per-unit.
    kp: Vec<f64>,
    /// Scheduled reactive injection at Δf = 0 (loads only), per-unit.
    q0: Vec<f64>,
    /// Reactive injection change per Hz of Δf, per-unit.
    kq: Vec<f64>,
    pub(crate) pv: Vec<bool>,
    v_set: Vec<f64>,
    reference: usize,
    angle_slots: Vec<Option<usize>>,
    magnitude_slots: Vec<Option<usize>>,
    dimension: usize,
}

impl DpfProblem {
    pub fn new(grid: &Grid, state: &SystemState) -> Result<Self, DpfError> {
        let energized = &state.energized_buses;
        if energized.is_empty() {
            return Err(DpfError::NothingEnergized);
        }
        for &bus in energized {
            if grid.bus(bus).is_none() {
                return Err(DpfError::UnknownBus(bus));
            }
        }
        check_connected(grid, energized)?;

        let buses: Vec<BusId> = energized.iter().copied().collect();
        let index: BTreeMap<BusId, usize> = buses.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let n = buses.len();
        let base = grid.base_mva();

        let mut p0 = vec![0.0; n];
        let mut kp = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut kq = vec![0.0; n];
        let mut pv = vec![false; n];
        let mut droop_total = 0.0;

        for (&id, dispatch) in &state.online_units {
            let unit = grid.unit(id).ok_or(DpfError::UnknownUnit(id))?;
            let i = *index.get(&unit.bus).ok_or(DpfError::Deenergized(unit.bus))?;
            p0[i] += dispatch.p / base;
            kp[i] += unit.droop_k / base;
            pv[i] = true;
            droop_total += unit.droop_k;
        }
        if !(droop_total > 0.0) {
            return Err(DpfError::NoFrequencyAnchor);
        }
        for (&id, demand) in &state.restored_loads {
            let load = grid.load(id).ok_or(DpfError::UnknownLoad(id))?;
            let i = *index.get(&load.bus).ok_or(DpfError::Deenergized(load.bus))?;
            p0[i] -= demand.p / base;
            kp[i] += load.k_lp / base;
            q0[i] -= demand.q / base;
            kq[i] += load.k_lq / base;
        }

        let mut g = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        for line in grid.lines().iter().filter(|l| l.in_service) {
            let (Some(&i), Some(&j)) = (index.get(&line.from_bus), index.get(&line.to_bus)) else {
                continue;
            };
            let z2 = line.resistance * line.resistance + line.reactance * line.reactance;
            let (gs, bs) = (line.resistance / z2, -line.reactance / z2);
            g[(i, i)] += gs;
            g[(j, j)] += gs;
            g[(i, j)] -= gs;
            g[(j, i)] -= gs;
            b[(i, i)] += bs + line.shunt_susceptance / 2.0;
            b[(j, j)] += bs + line.shunt_susceptance / 2.0;
            b[(i, j)] -= bs;
            b[(j, i)] -= bs;
        }

        let v_set: Vec<f64> =
            buses.iter().map(|&id| grid.bus(id).map_or(1.0, |b| b.nominal_voltage)).collect();
        let reference = pv.iter().position(|&x| x).expect("droop implies an online unit");

        let mut next = 0;
        let mut angle_slots = vec![None; n];
        for (i, slot) in angle_slots.iter_mut().enumerate() {
            if i != reference {
                *slot = Some(next);
                next += 1;
            }
        }
        let mut magnitude_slots = vec![None; n];
        for (i, slot) in magnitude_slots.iter_mut().enumerate() {
            if !pv[i] {
                *slot = Some(next);
                next += 1;
            }
        }

        Ok(DpfProblem {
            buses,
            g,
            b,
            p0,
            kp,
            q0,
            kq,
            pv,
            v_set,
            reference,
            angle_slots,
            magnitude_slots,
            dimension: next + 1,
        })
    }

    /// Angle reference: the lowest-numbered bus with an online unit.
    pub fn reference_bus(&self) -> BusId {
        self.buses[self.reference]
    }

    /// Number of unknowns, including Δf as the last entry.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn frequency_slot(&self) -> usize {
        self.dimension - 1
    }

    /// Flat start: setpoint magnitudes, zero angles, zero Δf.
    pub fn initial_guess(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.dimension);
        for (i, slot) in self.magnitude_slots.iter().enumerate() {
            if let Some(k) = slot {
                x[*k] = self.v_set[i];
            }
        }
        x
    }

    /// Magnitudes, angles and Δf encoded by `x`.
    pub fn unpack(&self, x: &DVector<f64>) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.buses.len();
        let mut vm = self.v_set.clone();
        let mut va = vec![0.0; n];
        for i in 0..n {
            if let Some(k) = self.angle_slots[i] {
                va[i] = x[k];
            }
            if let Some(k) = self.magnitude_slots[i] {
                vm[i] = x[k];
            }
        }
        (vm, va, x[self.frequency_slot()])
    }

    /// Network active and reactive injections at each bus.
    pub fn injections(&self, vm: &[f64], va: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = vm.len();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            for k in 0..n {
                let (gik, bik) = (self.g[(i, k)], self.b[(i, k)]);
                if gik == 0.0 && bik == 0.0 {
                    continue;
                }
                let (s, c) = (va[i] - va[k]).sin_cos();
                p[i] += vm[i] * vm[k] * (gik * c + bik * s);
                q[i] += vm[i] * vm[k] * (gik * s - bik * c);
            }
        }
        (p, q)
    }

    pub(crate) fn scheduled(&self, delta_f: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.p0.iter().zip(&self.kp).map(|(p, k)| p - k * delta_f).collect();
        let q = self.q0.iter().zip(&self.kq).map(|(q, k)| q + k * delta_f).collect();
        (p, q)
    }

    /// Scheduled minus network injection: one active row per bus, then one
    /// reactive row per load bus.
    pub fn mismatch(&self, x: &DVector<f64>) -> DVector<f64> {
        let (vm, va, df) = self.unpack(x);
        let (pc, qc) = self.injections(&vm, &va);
        let (ps, qs) = self.scheduled(df);
        let n = vm.len();
        let mut f = DVector::zeros(self.dimension);
        let mut row = 0;
        for i in 0..n {
            f[row] = ps[i] - pc[i];
            row += 1;
        }
        for i in 0..n {
            if !self.pv[i] {
                f[row] = qs[i] - qc[i];
                row += 1;
            }
        }
        f
    }

    /// Analytic Jacobian of [`DpfProblem::mismatch`].
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (vm, va, _) = self.unpack(x);
        let (pc, qc) = self.injections(&vm, &va);
        let n = vm.len();
        let dim = self.dimension;
        let mut j = DMatrix::zeros(dim, dim);
        let fslot = self.frequency_slot();

        let q_rows: Vec<Option<usize>> = {
            let mut r = n;
            (0..n)
                .map(|i| {
                    (!self.pv[i]).then(|| {
                        r += 1;
                        r - 1
                    })
                })
                .collect()
        };

        for i in 0..n {
            let p_row = i;
            let q_row = q_rows[i];
            for k in 0..n {
                let (gik, bik) = (self.g[(i, k)], self.b[(i, k)]);
                // Partials of the network injections (calc), negated below.
                let (dp_dth, dp_dv, dq_dth, dq_dv) = if i == k {
                    (
                        -qc[i] - bik * vm[i] * vm[i],
                        pc[i] / vm[i] + gik * vm[i],
                        pc[i] - gik * vm[i] * vm[i],
                        qc[i] / vm[i] - bik * vm[i],
                    )
                } else {
                    if gik == 0.0 && bik == 0.0 {
                        continue;
                    }
                    let (s, c) = (va[i] - va[k]).sin_cos();
                    (
                        vm[i] * vm[k] * (gik * s - bik * c),
                        vm[i] * (gik * c + bik * s),
                        -vm[i] * vm[k] * (gik * c + bik * s),
                        vm[i] * (gik * s - bik * c),
                    )
                };
                if let Some(col) = self.angle_slots[k] {
                    j[(p_row, col)] = -dp_dth;
                    if let Some(r) = q_row {
                        j[(r, col)] = -dq_dth;
                    }
                }
                if let Some(col) = self.magnitude_slots[k] {
                    j[(p_row, col)] = -dp_dv;
                    if let Some(r) = q_row {
                        j[(r, col)] = -dq_dv;
                    }
                }
            }
            j[(p_row, fslot)] = -self.kp[i];
            if let Some(r) = q_row {
                j[(r, fslot)] = self.kq[i];
            }
        }
        j
    }
}

fn check_connected(grid: &Grid, energized: &BTreeSet<BusId>) -> Result<(), DpfError> {
    let start = *energized.iter().next().expect("checked non-empty");
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(bus) = stack.pop() {
        for &next in grid.neighbors(bus) {
            if energized.contains(&next) && seen.insert(next) {
                stack.push(next);
            }
        }
    }
    match energized.iter().find(|b| !seen.contains(b)) {
        Some(&bus) => Err(DpfError::Islanded(bus)),
        None => Ok(()),
    }
}

pub(crate) struct NewtonOutcome {
    pub x: DVector<f64>,
    pub residual: DVector<f64>,
    pub iterations: usize,
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn solve(
    problem: &DpfProblem,
    tolerance: f64,
    max_iterations: usize,
) -> Result<NewtonOutcome, DpfError> {
    let mut x = problem.initial_guess();
    let mut f = problem.mismatch(&x);
    let mut norm = max_abs(&f);
    for iteration in 0..=max_iterations {
        if norm < tolerance {
            return Ok(NewtonOutcome { x, residual: f, iterations: iteration });
        }
        if iteration == max_iterations {
            break;
        }
        let jac = problem.jacobian(&x);
        let step = jac.lu().solve(&(-&f)).ok_or(DpfError::SingularJacobian)?;
        // Backtrack on a growing residual; Newton steps are taken in full
        // once close to the solution.
        let mut scale = 1.0;
        loop {
            let trial = &x + &step * scale;
            let f_trial = problem.mismatch(&trial);
            let n_trial = max_abs(&f_trial);
            if n_trial.is_finite() && (n_trial < norm || scale < 1.0 / 64.0) {
                x = trial;
                f = f_trial;
                norm = n_trial;
                break;
            }
            scale *= 0.5;
        }
        if !norm.is_finite() {
            break;
        }
    }
    Err(DpfError::Diverged { iterations: max_iterations, mismatch: norm })
}
