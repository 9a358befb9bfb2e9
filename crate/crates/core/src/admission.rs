//! Long-slot admission: user weights, revenue / cost / utility accounting and
//! the admit-simulate-prune loop.

use serde::{Deserialize, Serialize};

use crate::allocator::{allocate_sts, delay_violations, AllocParams, AllocationDecision, Mode, StsInput};
use crate::channel::ChannelState;
use crate::config::{ScenarioConfig, TaskType};
use crate::error::{Error, Result};
use crate::queues::{self, LtsTrace, QueueState, SlotInputs};
use crate::tasks::{ComputeModel, StsDemand};

/// `v_u = sum_t tdelay(task_u(t)) / T` over the slots of one LTS.
///
/// `history[t][u]` is the task type requested by user `u` in slot `t`.
pub fn weight_v(history: &[Vec<usize>], types: &[TaskType], lts_length: f64) -> Result<Vec<f64>> {
    let first = history.first().ok_or(Error::Empty("task history"))?;
    let mut v = vec![0.0; first.len()];
    for slot in history {
        crate::error::check_len("task history slot", slot.len(), v.len())?;
        for (u, &m) in slot.iter().enumerate() {
            v[u] += types[m].delay_limit();
        }
    }
    for x in &mut v {
        *x /= lts_length;
    }
    Ok(v)
}

pub fn revenue(y: &[bool], v: &[f64]) -> f64 {
    y.iter().zip(v).filter(|(a, _)| **a).fold(0.0, |s, (_, w)| s + w)
}

/// Sum of the per-slot system power over the LTS.
pub fn cost(power_trace: &[f64]) -> f64 {
    power_trace.iter().sum()
}

pub fn utility(revenue: f64, cost: f64, eta: f64) -> f64 {
    revenue - eta * cost
}

pub fn average_utility(history: &[f64]) -> f64 {
    if history.is_empty() {
        0.0
    } else {
        history.iter().sum::<f64>() / history.len() as f64
    }
}

/// Per-user thresholding: admit iff feasible and `v_u - eta c_u > 0`.
pub fn solve_admission(v: &[f64], feasible: &[bool], cost: &[f64], eta: f64) -> Vec<bool> {
    v.iter()
        .zip(feasible)
        .zip(cost)
        .map(|((&vu, &ok), &c)| ok && vu - eta * c > 0.0)
        .collect()
}

/// Separable admission objective `sum_u y_u (v_u - eta c_u)`.
pub fn admission_objective(y: &[bool], v: &[f64], cost: &[f64], eta: f64) -> f64 {
    (0..y.len()).filter(|&u| y[u]).map(|u| v[u] - eta * cost[u]).sum()
}

/// Pre-drawn state of one short slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotContext {
    pub channel: ChannelState,
    pub nearest: Vec<usize>,
    pub demand: StsDemand,
}

/// Everything known at the start of a long slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtsContext {
    pub start: QueueState,
    pub slots: Vec<SlotContext>,
}

impl LtsContext {
    pub fn num_users(&self) -> usize {
        self.slots.first().map_or(0, |s| s.demand.num_users())
    }

    pub fn task_history(&self) -> Vec<Vec<usize>> {
        self.slots.iter().map(|s| s.demand.task.clone()).collect()
    }
}

/// Model and solver settings shared by all long slots of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub alloc: AllocParams,
    pub mode: Mode,
    /// Demand model used for planning and queue dynamics.
    pub planning: ComputeModel,
    /// Demand model used to audit delays.
    pub actual: ComputeModel,
    pub task_types: Vec<TaskType>,
    pub lts_length: f64,
    pub max_passes: usize,
    pub rel_tol: f64,
}

impl SimParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let mode = match cfg.baseline {
            crate::Baseline::FixedAllocation => Mode::FixedAll,
            crate::Baseline::FixedChannel => Mode::FixedAssocBandwidth,
            _ => Mode::Full,
        };
        Ok(Self {
            alloc: AllocParams::from_config(cfg),
            mode,
            planning: ComputeModel::for_config(cfg)?,
            actual: ComputeModel::semantic(cfg),
            task_types: cfg.task_types.clone(),
            lts_length: cfg.lts_length,
            max_passes: cfg.alg2_max_iters,
            rel_tol: cfg.alg2_rel_tol,
        })
    }
}

/// One simulated pass over the slots of an LTS under a fixed admission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassResult {
    pub y: Vec<bool>,
    pub decisions: Vec<AllocationDecision>,
    /// Queue state at the start of every slot.
    pub queue_trace: Vec<QueueState>,
    pub trace: LtsTrace,
    /// System power of every slot, W.
    pub power: Vec<f64>,
    /// Realized `sum_t kappa f_u^3` per user.
    pub user_cost: Vec<f64>,
    /// Users that missed their delay limit in at least one slot.
    pub violated: Vec<bool>,
    /// Delay misses per slot under the planning model.
    pub violations: Vec<usize>,
    /// Delay misses per slot under the actual demand model.
    pub audit_violations: Vec<usize>,
    pub revenue: f64,
    pub cost: f64,
    pub utility: f64,
}

/// Per-slot demand vectors derived from a slot context.
struct SlotDemand {
    limit: Vec<f64>,
    planned: Vec<f64>,
    actual: Vec<f64>,
    bus_work: Vec<f64>,
}

fn slot_demand(slot: &SlotContext, params: &SimParams) -> SlotDemand {
    let d = &slot.demand;
    let n = d.num_users();
    let bus_bytes = params.alloc.b_bus * params.alloc.tau / 8.0;
    let types = &params.task_types;
    SlotDemand {
        limit: (0..n).map(|u| types[d.task[u]].delay_limit()).collect(),
        planned: (0..n)
            .map(|u| params.planning.demand(d.raw_bits[u] / 8.0, &types[d.task[u]]))
            .collect(),
        actual: (0..n)
            .map(|u| params.actual.demand(d.raw_bits[u] / 8.0, &types[d.task[u]]))
            .collect(),
        bus_work: (0..n)
            .map(|u| params.planning.demand(bus_bytes, &types[d.task[u]]))
            .collect(),
    }
}

/// Runs the allocation loop over every slot of `ctx` with admission `y`,
/// advancing a private copy of the queues.
pub fn simulate_pass(ctx: &LtsContext, y: &[bool], v: &[f64], params: &SimParams) -> Result<PassResult> {
    let n = ctx.num_users();
    crate::error::check_len("admission vector", y.len(), n)?;
    let mut q = ctx.start;
    let mut decisions = Vec::with_capacity(ctx.slots.len());
    let mut queue_trace = Vec::with_capacity(ctx.slots.len());
    let mut flows = Vec::with_capacity(ctx.slots.len());
    let mut power = Vec::with_capacity(ctx.slots.len());
    let mut user_cost = vec![0.0; n];
    let mut violated = vec![false; n];
    let mut violations = Vec::with_capacity(ctx.slots.len());
    let mut audit_violations = Vec::with_capacity(ctx.slots.len());
    let kappa = params.alloc.kappa;

    for slot in &ctx.slots {
        let sd = slot_demand(slot, params);
        let input = StsInput {
            queues: q,
            y,
            raw_bits: &slot.demand.raw_bits,
            demand_gc: &sd.planned,
            delay_limit: &sd.limit,
            bus_work: &sd.bus_work,
            channel: &slot.channel,
            nearest: &slot.nearest,
        };
        let d = allocate_sts(&input, &params.alloc, params.mode);
        let f = d.user_compute();
        let mut p_slot = 0.0;
        for u in 0..n {
            let p = kappa * f[u] * f[u] * f[u];
            user_cost[u] += p;
            p_slot += p;
            violated[u] |= d.dropped[u];
        }
        violations.push(d.violations());
        audit_violations.push(delay_violations(&d, &input, &sd.actual, params.alloc.b_bus));
        power.push(p_slot);

        let task = &slot.demand.task;
        let types = &params.task_types;
        let planning = params.planning;
        let step_in = SlotInputs {
            y,
            rates: &d.rates,
            arrivals: &slot.demand.arrivals,
            compute: &f,
            b_bus: params.alloc.b_bus,
            tau: params.alloc.tau,
        };
        let (next, fl) = queues::step(&q, &step_in, |u, bytes| planning.demand(bytes, &types[task[u]]))?;
        queue_trace.push(q);
        flows.push(fl);
        decisions.push(d);
        q = next;
    }

    let gl = revenue(y, v);
    let gs = cost(&power);
    Ok(PassResult {
        y: y.to_vec(),
        decisions,
        queue_trace,
        trace: LtsTrace { slots: flows, end: q },
        power,
        user_cost,
        violated,
        violations,
        audit_violations,
        revenue: gl,
        cost: gs,
        utility: utility(gl, gs, params.alloc.eta),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionOutcome {
    pub y: Vec<bool>,
    pub v: Vec<f64>,
    /// The pass simulated under the final admission.
    pub pass: PassResult,
    /// Number of simulated passes.
    pub passes: usize,
    /// Utility after every pass.
    pub utility_history: Vec<f64>,
    /// Admitted-user count after every pass.
    pub admitted_history: Vec<usize>,
}

/// Admit everyone, simulate the LTS, prune infeasible and unprofitable
/// users, and repeat until the admission or the utility settles. Remaining
/// delay misses are then pruned until a pass is clean.
pub fn admit_lts(ctx: &LtsContext, params: &SimParams) -> Result<AdmissionOutcome> {
    let n = ctx.num_users();
    let v = if ctx.slots.is_empty() {
        vec![0.0; n]
    } else {
        weight_v(&ctx.task_history(), &params.task_types, params.lts_length)?
    };
    let mut y = vec![true; n];
    let mut pass = simulate_pass(ctx, &y, &v, params)?;
    let mut passes = 1;
    let mut utility_history = vec![pass.utility];
    let mut admitted_history = vec![count(&y)];

    loop {
        let feasible: Vec<bool> = pass.violated.iter().map(|b| !b).collect();
        let proposal = solve_admission(&v, &feasible, &pass.user_cost, params.alloc.eta);
        let next: Vec<bool> = (0..n).map(|u| y[u] && proposal[u]).collect();
        if next == y || passes >= params.max_passes {
            break;
        }
        let prev_utility = pass.utility;
        y = next;
        pass = simulate_pass(ctx, &y, &v, params)?;
        passes += 1;
        utility_history.push(pass.utility);
        admitted_history.push(count(&y));
        let settled = (pass.utility - prev_utility).abs() <= params.rel_tol * prev_utility.abs();
        if settled && !pass.violated.iter().any(|b| *b) {
            break;
        }
    }

    while pass.violated.iter().any(|b| *b) {
        y = (0..n).map(|u| y[u] && !pass.violated[u]).collect();
        pass = simulate_pass(ctx, &y, &v, params)?;
        passes += 1;
        utility_history.push(pass.utility);
        admitted_history.push(count(&y));
    }

    Ok(AdmissionOutcome {
        y,
        v,
        pass,
        passes,
        utility_history,
        admitted_history,
    })
}

fn count(y: &[bool]) -> usize {
    y.iter().filter(|b| **b).count()
}
