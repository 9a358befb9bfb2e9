//! Offloading, bus and processing tandem queues, the Lyapunov function and
//! the per-LTS drift bound check.
//!
//! Every flow is a per-slot volume: rates are multiplied by the short-slot
//! length before they meet a backlog.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    /// Offloading queue, bits.
    pub offloading: f64,
    /// Bus transfer queue, bits.
    pub bus: f64,
    /// Processing queue, gigacycles.
    pub processing: f64,
}

impl QueueState {
    pub fn new(offloading: f64, bus: f64, processing: f64) -> Self {
        Self {
            offloading,
            bus,
            processing,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.offloading, self.bus, self.processing]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

pub fn lyapunov(q: &QueueState) -> f64 {
    0.5 * (q.offloading * q.offloading + q.bus * q.bus + q.processing * q.processing)
}

fn admitted_dot(y: &[bool], v: &[f64]) -> f64 {
    y.iter().zip(v).filter(|(a, _)| **a).map(|(_, x)| x).sum()
}

/// `max(Phi_I - tau y.r, 0) + y.A`.
pub fn update_offloading(q: &QueueState, y: &[bool], r: &[f64], arrivals: &[f64], tau: f64) -> Result<f64> {
    check_len("rate vector", r.len(), y.len())?;
    check_len("arrival vector", arrivals.len(), y.len())?;
    Ok((q.offloading - tau * admitted_dot(y, r)).max(0.0) + admitted_dot(y, arrivals))
}

/// `max(Phi_II - n_y B tau, 0) + min(tau y.r, Phi_I)`.
pub fn update_bus(q: &QueueState, y: &[bool], r: &[f64], b_bus: f64, tau: f64) -> Result<f64> {
    check_len("rate vector", r.len(), y.len())?;
    let n_y = y.iter().filter(|a| **a).count() as f64;
    let inflow = (tau * admitted_dot(y, r)).min(q.offloading);
    Ok((q.bus - n_y * b_bus * tau).max(0.0) + inflow)
}

/// Per-user share of the bus backlog: proportional to slot delivery
/// `y_u r_u tau`, equal among admitted users when nothing was delivered.
pub fn bus_shares(bus_backlog: f64, y: &[bool], r: &[f64]) -> Vec<f64> {
    let total: f64 = admitted_dot(y, r);
    let n_y = y.iter().filter(|a| **a).count();
    y.iter()
        .zip(r)
        .map(|(&adm, &ru)| {
            if !adm {
                0.0
            } else if total > 0.0 {
                bus_backlog * ru / total
            } else {
                bus_backlog / n_y as f64
            }
        })
        .collect()
}

/// Inflow to the processing queue.
///
/// `demand(u, bits)` converts a per-user data volume into gigacycles. The
/// inflow is the smaller of the work carried by a full bus slot for every
/// admitted user and the work held in the bus backlog.
pub fn processing_inflow(
    q: &QueueState,
    y: &[bool],
    r: &[f64],
    b_bus: f64,
    tau: f64,
    demand: impl Fn(usize, f64) -> f64,
) -> Result<f64> {
    check_len("rate vector", r.len(), y.len())?;
    let bus_cap: f64 = (0..y.len()).filter(|&u| y[u]).map(|u| demand(u, b_bus * tau)).sum();
    let shares = bus_shares(q.bus, y, r);
    let held: f64 = (0..y.len()).filter(|&u| y[u]).map(|u| demand(u, shares[u])).sum();
    Ok(bus_cap.min(held))
}

/// `max(Phi - tau y.f, 0) + inflow`.
pub fn update_processing(q: &QueueState, y: &[bool], f: &[f64], tau: f64, inflow: f64) -> Result<f64> {
    check_len("compute vector", f.len(), y.len())?;
    Ok((q.processing - tau * admitted_dot(y, f)).max(0.0) + inflow)
}

/// Everything one short slot contributes to the drift bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotFlows {
    /// Queue state at the start of the slot.
    pub start: QueueState,
    /// `tau y.r`, bits.
    pub offload_service: f64,
    /// `y.A`, bits.
    pub arrivals: f64,
    /// `n_y B tau`, bits.
    pub bus_service: f64,
    /// `tau y.f`, gigacycles.
    pub compute_service: f64,
    /// `sum_u F_u(y_u B tau)`, gigacycles.
    pub bus_work: f64,
    /// `y_u r_u tau` per user, bits.
    pub user_offload: Vec<f64>,
    /// `F_u(y_u B tau)` per user, gigacycles.
    pub user_bus_work: Vec<f64>,
}

/// Inputs of one queue step.
#[derive(Debug, Clone, Copy)]
pub struct SlotInputs<'a> {
    pub y: &'a [bool],
    pub rates: &'a [f64],
    pub arrivals: &'a [f64],
    pub compute: &'a [f64],
    pub b_bus: f64,
    pub tau: f64,
}

/// Advances all three queues one slot and reports the flows used by the
/// drift bound.
pub fn step(
    q: &QueueState,
    inp: &SlotInputs<'_>,
    demand: impl Fn(usize, f64) -> f64,
) -> Result<(QueueState, SlotFlows)> {
    let u = inp.y.len();
    check_len("compute vector", inp.compute.len(), u)?;
    let offloading = update_offloading(q, inp.y, inp.rates, inp.arrivals, inp.tau)?;
    let bus = update_bus(q, inp.y, inp.rates, inp.b_bus, inp.tau)?;
    let inflow = processing_inflow(q, inp.y, inp.rates, inp.b_bus, inp.tau, |v, bits| demand(v, bits / 8.0))?;
    let processing = update_processing(q, inp.y, inp.compute, inp.tau, inflow)?;

    let user_offload: Vec<f64> = (0..u)
        .map(|v| if inp.y[v] { inp.rates[v] * inp.tau } else { 0.0 })
        .collect();
    let user_bus_work: Vec<f64> = (0..u)
        .map(|v| {
            if inp.y[v] {
                demand(v, inp.b_bus * inp.tau / 8.0)
            } else {
                0.0
            }
        })
        .collect();
    let n_y = inp.y.iter().filter(|a| **a).count() as f64;
    let flows = SlotFlows {
        start: *q,
        offload_service: user_offload.iter().sum(),
        arrivals: admitted_dot(inp.y, inp.arrivals),
        bus_service: n_y * inp.b_bus * inp.tau,
        compute_service: inp.tau * admitted_dot(inp.y, inp.compute),
        bus_work: user_bus_work.iter().sum(),
        user_offload,
        user_bus_work,
    };
    Ok((QueueState::new(offloading, bus, processing), flows))
}

/// Sample-path form of the per-LTS drift-plus-penalty bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub lts_index: usize,
    pub lyapunov_start: f64,
    pub lyapunov_end: f64,
    pub drift: f64,
    /// `V * G(l)`.
    pub penalty: f64,
    pub bound_constant: f64,
    /// Right-hand side of the bound on `drift - penalty`.
    pub bound_rhs: f64,
}

impl DriftRecord {
    pub fn lhs(&self) -> f64 {
        self.drift - self.penalty
    }
}

/// One LTS worth of slot flows plus the closing queue state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtsTrace {
    pub slots: Vec<SlotFlows>,
    pub end: QueueState,
}

fn max_user_total(slots: &[SlotFlows], pick: impl Fn(&SlotFlows) -> &[f64]) -> f64 {
    let users = slots.first().map_or(0, |s| pick(s).len());
    (0..users)
        .map(|u| slots.iter().map(|s| pick(s)[u]).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Six-term constant of the drift bound.
pub fn drift_bound_constant(trace: &LtsTrace) -> Result<f64> {
    if trace.slots.is_empty() {
        return Err(crate::Error::Empty("LTS trace"));
    }
    let users = trace.slots[0].user_offload.len();
    for s in &trace.slots {
        check_len("per-user offload trace", s.user_offload.len(), users)?;
        check_len("per-user bus work trace", s.user_bus_work.len(), users)?;
    }
    let sum = |pick: fn(&SlotFlows) -> f64| trace.slots.iter().map(pick).sum::<f64>();
    let terms = [
        sum(|s| s.offload_service),
        sum(|s| s.arrivals),
        sum(|s| s.bus_service),
        max_user_total(&trace.slots, |s| &s.user_offload),
        sum(|s| s.compute_service),
        max_user_total(&trace.slots, |s| &s.user_bus_work),
    ];
    Ok(0.5 * terms.iter().map(|t| t * t).sum::<f64>())
}

/// Evaluates the bound with an explicit constant `c`.
///
/// The check passes when `drift - V G <= rhs` up to a rounding allowance of
/// `1e-9` times the magnitude of the terms involved.
pub fn check_theorem1_with_constant(
    trace: &LtsTrace,
    lts_index: usize,
    v: f64,
    eta: f64,
    revenue: f64,
    cost: f64,
    c: f64,
) -> Result<(DriftRecord, bool)> {
    if trace.slots.is_empty() {
        return Err(crate::Error::Empty("LTS trace"));
    }
    let l0 = lyapunov(&trace.slots[0].start);
    let l1 = lyapunov(&trace.end);
    let utility = revenue - eta * cost;

    let mut rhs = c;
    let mut scale = c.abs() + l0 + l1;
    for s in &trace.slots {
        let terms = [
            s.start.offloading * (s.offload_service - s.arrivals),
            s.start.bus * (s.bus_service - s.offload_service),
            s.start.processing * (s.compute_service - s.bus_work),
        ];
        for t in terms {
            rhs -= t;
            scale += t.abs();
        }
    }
    rhs -= v * utility;
    scale += (v * utility).abs();

    let record = DriftRecord {
        lts_index,
        lyapunov_start: l0,
        lyapunov_end: l1,
        drift: l1 - l0,
        penalty: v * utility,
        bound_constant: c,
        bound_rhs: rhs,
    };
    let ok = record.lhs() <= rhs + 1e-9 * scale;
    Ok((record, ok))
}

/// Computes the constant from the trace and checks the bound.
pub fn check_theorem1(
    trace: &LtsTrace,
    lts_index: usize,
    v: f64,
    eta: f64,
    revenue: f64,
    cost: f64,
) -> Result<(DriftRecord, bool)> {
    let c = drift_bound_constant(trace)?;
    check_theorem1_with_constant(trace, lts_index, v, eta, revenue, cost, c)
}
