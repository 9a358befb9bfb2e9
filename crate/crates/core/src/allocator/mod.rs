//! Per-STS resource allocation.
//!
//! The short-slot drift-plus-penalty objective couples association, bandwidth
//! and compute. [`allocate_sts`] alternates the three decoupled solvers
//! ([`association`], [`compute`], [`bandwidth`]) from the nearest-SBS,
//! equal-split starting point until the objective settles.

pub mod association;
pub mod bandwidth;
pub mod compute;

use serde::{Deserialize, Serialize};

use crate::channel::{spectral_efficiency, ChannelState};
use crate::config::{InterferenceModel, ScenarioConfig};
use crate::grid::UserSbsMatrix;
use crate::queues::QueueState;

/// Relative slack used when auditing delay limits.
pub const DELAY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub t_comm: f64,
    pub t_comp: f64,
    pub t_bus: f64,
    pub t_total: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Transmission, compute and bus delay for `a_bits` of raw data.
pub fn delay(a_bits: f64, rate: f64, f: f64, demand_gc: f64, b_bus: f64) -> DelayBreakdown {
    let t_comm = ratio(a_bits, rate);
    let t_comp = ratio(demand_gc, f);
    let t_bus = ratio(a_bits, b_bus);
    DelayBreakdown {
        t_comm,
        t_comp,
        t_bus,
        t_total: t_comm + t_comp + t_bus,
    }
}

/// `kappa * f^3` with `f` in gigacycles/s and `kappa` per cycle^3.
pub fn power(f_gc: f64, kappa_esc: f64) -> f64 {
    let hz = f_gc * 1e9;
    kappa_esc * hz * hz * hz
}

/// `<x, P>` over the association support.
pub fn total_power(x: &UserSbsMatrix, f: &UserSbsMatrix, kappa_esc: f64) -> f64 {
    let mut p = 0.0;
    for u in 0..x.users() {
        for k in 0..x.sbs() {
            if x[(u, k)] != 0.0 {
                p += x[(u, k)] * power(f[(u, k)], kappa_esc);
            }
        }
    }
    p
}

/// Smallest compute (gigacycles/s) meeting the delay limit, or `None` when
/// transport alone already exceeds it.
pub fn compute_floor(a_bits: f64, rate: f64, limit: f64, b_bus: f64, demand_gc: f64) -> Option<f64> {
    let slack = limit - ratio(a_bits, b_bus) - ratio(a_bits, rate);
    if slack > 0.0 {
        Some(demand_gc / slack)
    } else {
        None
    }
}

/// Rate needed to meet the delay limit with compute `f`.
pub fn required_rate(a_bits: f64, f: f64, limit: f64, b_bus: f64, demand_gc: f64) -> Option<f64> {
    if a_bits == 0.0 {
        return Some(0.0);
    }
    let slack = limit - ratio(demand_gc, f) - ratio(a_bits, b_bus);
    if slack > 0.0 {
        Some(a_bits / slack)
    } else {
        None
    }
}

/// System constants the short-slot solvers need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocParams {
    pub tau: f64,
    pub bandwidth: f64,
    pub compute: f64,
    pub b_bus: f64,
    pub v: f64,
    pub eta: f64,
    /// Watts per (gigacycle/s)^3.
    pub kappa: f64,
    pub tx_power: f64,
    pub noise: f64,
    pub interference: InterferenceModel,
    pub eps: f64,
    pub max_iters: usize,
}

impl AllocParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            tau: cfg.sts_length,
            bandwidth: cfg.bandwidth_per_sbs,
            compute: cfg.compute_per_sbs,
            b_bus: cfg.bus_bandwidth,
            v: cfg.lyapunov_v,
            eta: cfg.eta,
            kappa: cfg.kappa_per_gc3(),
            tx_power: cfg.transmit_power(),
            noise: cfg.noise_power(),
            interference: cfg.interference_model,
            eps: cfg.alg1_eps,
            max_iters: cfg.alg1_max_iters,
        }
    }

    /// `V eta kappa`, the cubic cost coefficient.
    pub fn cubic_cost(&self) -> f64 {
        self.v * self.eta * self.kappa
    }
}

/// Which decisions the alternating loop may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Association, compute and bandwidth.
    Full,
    /// Everything stays at the starting point.
    FixedAll,
    /// Association and bandwidth stay at the starting point.
    FixedAssocBandwidth,
}

/// One short slot as seen by the allocator.
#[derive(Debug, Clone, Copy)]
pub struct StsInput<'a> {
    pub queues: QueueState,
    pub y: &'a [bool],
    pub raw_bits: &'a [f64],
    /// Compute demand of each user's task, gigacycles.
    pub demand_gc: &'a [f64],
    pub delay_limit: &'a [f64],
    /// `F_u(B tau)` per user, gigacycles.
    pub bus_work: &'a [f64],
    pub channel: &'a ChannelState,
    pub nearest: &'a [usize],
}

impl StsInput<'_> {
    pub fn num_users(&self) -> usize {
        self.y.len()
    }

    pub fn num_sbs(&self) -> usize {
        self.channel.num_sbs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    pub assoc: Vec<Option<usize>>,
    pub w: UserSbsMatrix,
    pub f: UserSbsMatrix,
    /// Uplink rate of each user, bits/s.
    pub rates: Vec<f64>,
    pub objective: f64,
    /// Objective after the starting point and after every pass.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Admitted users removed from this slot because no feasible allocation
    /// was found for them.
    pub dropped: Vec<bool>,
}

impl AllocationDecision {
    pub fn x(&self) -> UserSbsMatrix {
        association::to_matrix(&self.assoc, self.w.sbs())
    }

    /// Compute given to each user.
    pub fn user_compute(&self) -> Vec<f64> {
        self.assoc
            .iter()
            .enumerate()
            .map(|(u, a)| a.map_or(0.0, |k| self.f[(u, k)]))
            .collect()
    }

    pub fn user_bandwidth(&self) -> Vec<f64> {
        self.assoc
            .iter()
            .enumerate()
            .map(|(u, a)| a.map_or(0.0, |k| self.w[(u, k)]))
            .collect()
    }

    pub fn violations(&self) -> usize {
        self.dropped.iter().filter(|d| **d).count()
    }

    pub fn total_power(&self, kappa: f64) -> f64 {
        self.user_compute().iter().map(|f| kappa * f * f * f).sum()
    }
}

/// Working state of the alternating loop, one entry per user.
#[derive(Debug, Clone)]
struct Iterate {
    assoc: Vec<Option<usize>>,
    w: Vec<f64>,
    f: Vec<f64>,
    dropped: Vec<bool>,
}

impl Iterate {
    fn drop_user(&mut self, u: usize) {
        self.dropped[u] = true;
        self.assoc[u] = None;
        self.w[u] = 0.0;
        self.f[u] = 0.0;
    }

    fn dropped_count(&self) -> usize {
        self.dropped.iter().filter(|d| **d).count()
    }

    fn rate(&self, u: usize, se: &UserSbsMatrix) -> f64 {
        self.assoc[u].map_or(0.0, |k| self.w[u] * se[(u, k)])
    }

    fn members(&self, k: usize) -> Vec<usize> {
        (0..self.assoc.len()).filter(|&u| self.assoc[u] == Some(k)).collect()
    }
}

/// Nearest-SBS association with equal bandwidth and compute splits.
fn starting_point(input: &StsInput<'_>, params: &AllocParams) -> Iterate {
    let u_n = input.num_users();
    let k_n = input.num_sbs();
    let assoc: Vec<Option<usize>> = (0..u_n)
        .map(|u| if input.y[u] { Some(input.nearest[u]) } else { None })
        .collect();
    let mut count = vec![0usize; k_n];
    for k in assoc.iter().flatten() {
        count[*k] += 1;
    }
    let w = (0..u_n)
        .map(|u| assoc[u].map_or(0.0, |k| params.bandwidth / count[k] as f64))
        .collect();
    let f = (0..u_n)
        .map(|u| assoc[u].map_or(0.0, |k| params.compute / count[k] as f64))
        .collect();
    Iterate {
        assoc,
        w,
        f,
        dropped: vec![false; u_n],
    }
}

/// Short-slot objective (minimized).
fn objective(input: &StsInput<'_>, params: &AllocParams, it: &Iterate, se: &UserSbsMatrix) -> f64 {
    let q = &input.queues;
    let tau = params.tau;
    let mut served = 0.0;
    let mut compute = 0.0;
    let mut cubic = 0.0;
    let mut n_y = 0.0;
    let mut bus_work = 0.0;
    for u in 0..input.num_users() {
        if !input.y[u] {
            continue;
        }
        n_y += 1.0;
        bus_work += input.bus_work[u];
        served += it.rate(u, se);
        compute += it.f[u];
        cubic += it.f[u].powi(3);
    }
    (q.bus - q.offloading) * tau * served - q.bus * n_y * params.b_bus * tau - q.processing * tau * compute
        + q.processing * bus_work
        + params.v * params.eta * params.kappa * cubic
}

/// Marks admitted users whose current allocation misses the delay limit.
fn drop_infeasible(input: &StsInput<'_>, params: &AllocParams, it: &mut Iterate, se: &UserSbsMatrix) {
    for u in 0..input.num_users() {
        if it.assoc[u].is_none() {
            continue;
        }
        let d = delay(
            input.raw_bits[u],
            it.rate(u, se),
            it.f[u],
            input.demand_gc[u],
            params.b_bus,
        );
        if !(d.t_total <= input.delay_limit[u] * (1.0 + DELAY_TOL)) {
            it.drop_user(u);
        }
    }
}

fn association_step(input: &StsInput<'_>, params: &AllocParams, it: &mut Iterate, se: &UserSbsMatrix) {
    let costs = association_costs(input, params, &it.w, se);
    let active: Vec<bool> = (0..input.num_users()).map(|u| it.assoc[u].is_some()).collect();
    let choice = association::solve_association(&costs, &active);
    for (slot, c) in it.assoc.iter_mut().zip(choice) {
        if c.is_some() {
            *slot = c;
        }
    }
}

/// Candidate cost of every (user, SBS) pair for the association step.
///
/// The rate at SBS `k` uses the user's current bandwidth; the compute term
/// uses the delay floor at that rate, so SBSs where the user cannot meet its
/// limit cost `+inf`.
pub fn association_costs(input: &StsInput<'_>, params: &AllocParams, w: &[f64], se: &UserSbsMatrix) -> UserSbsMatrix {
    let q = &input.queues;
    let coef = (q.bus - q.offloading) * params.tau;
    UserSbsMatrix::from_fn(input.num_users(), input.num_sbs(), |u, k| {
        if !input.y[u] {
            return f64::INFINITY;
        }
        let r = w[u] * se[(u, k)];
        match compute_floor(
            input.raw_bits[u],
            r,
            input.delay_limit[u],
            params.b_bus,
            input.demand_gc[u],
        ) {
            Some(f) => coef * r + params.cubic_cost() * f * f * f,
            None => f64::INFINITY,
        }
    })
}

fn compute_step(input: &StsInput<'_>, params: &AllocParams, it: &mut Iterate, se: &UserSbsMatrix) {
    let weight = input.queues.processing * params.tau;
    for k in 0..input.num_sbs() {
        loop {
            let members = it.members(k);
            let mut floors = Vec::with_capacity(members.len());
            let mut hopeless = None;
            for &u in &members {
                match compute_floor(
                    input.raw_bits[u],
                    it.rate(u, se),
                    input.delay_limit[u],
                    params.b_bus,
                    input.demand_gc[u],
                ) {
                    Some(f) => floors.push(f),
                    None => {
                        hopeless = Some(u);
                        break;
                    }
                }
            }
            if let Some(u) = hopeless {
                it.drop_user(u);
                continue;
            }
            let weights = vec![weight; members.len()];
            match compute::solve_compute_sbs(&weights, &floors, params.cubic_cost(), params.compute) {
                Ok(sol) => {
                    for (i, &u) in members.iter().enumerate() {
                        it.f[u] = sol.f[i];
                    }
                    break;
                }
                Err(e) => {
                    for i in e.users {
                        it.drop_user(members[i]);
                    }
                }
            }
        }
    }
}

/// Bandwidth LP per SBS given the current compute split.
///
/// With `initial`, nobody is dropped: users whose compute alone already
/// misses the limit keep their current bandwidth, and an SBS whose LP is
/// infeasible keeps its current split. Both are left to the compute step.
fn bandwidth_step(input: &StsInput<'_>, params: &AllocParams, it: &mut Iterate, se: &UserSbsMatrix, initial: bool) {
    let q = &input.queues;
    let coef = (q.bus - q.offloading) * params.tau;
    for k in 0..input.num_sbs() {
        loop {
            let all = it.members(k);
            let mut members = Vec::with_capacity(all.len());
            let mut w_min = Vec::with_capacity(all.len());
            let mut ses = Vec::with_capacity(all.len());
            let mut reserved = 0.0;
            let mut hopeless = None;
            for &u in &all {
                match required_rate(
                    input.raw_bits[u],
                    it.f[u],
                    input.delay_limit[u],
                    params.b_bus,
                    input.demand_gc[u],
                ) {
                    Some(r) => {
                        members.push(u);
                        w_min.push(bandwidth::min_bandwidth(r, se[(u, k)]));
                        ses.push(se[(u, k)]);
                    }
                    None if initial => reserved += it.w[u],
                    None => {
                        hopeless = Some(u);
                        break;
                    }
                }
            }
            if let Some(u) = hopeless {
                it.drop_user(u);
                continue;
            }
            match bandwidth::solve_bandwidth_sbs(&ses, &w_min, coef, params.bandwidth - reserved) {
                Ok(w) => {
                    for (i, &u) in members.iter().enumerate() {
                        it.w[u] = w[i];
                    }
                    break;
                }
                Err(_) if initial => break,
                Err(e) => {
                    for i in e.users {
                        it.drop_user(members[i]);
                    }
                }
            }
        }
    }
}

fn efficiency(input: &StsInput<'_>, params: &AllocParams, it: &Iterate) -> UserSbsMatrix {
    spectral_efficiency(
        input.channel,
        params.tx_power,
        params.noise,
        params.interference,
        &it.assoc,
    )
}

/// Alternating association / compute / bandwidth loop for one short slot.
pub fn allocate_sts(input: &StsInput<'_>, params: &AllocParams, mode: Mode) -> AllocationDecision {
    let mut it = starting_point(input, params);
    let mut se = efficiency(input, params, &it);
    if mode == Mode::Full {
        bandwidth_step(input, params, &mut it, &se, true);
    }
    let mut trace = vec![objective(input, params, &it, &se)];
    let mut iterations = 0;
    let mut converged = true;

    if mode == Mode::FixedAll {
        drop_infeasible(input, params, &mut it, &se);
    } else {
        converged = false;
        while iterations < params.max_iters {
            iterations += 1;
            if mode == Mode::Full {
                let before = it.clone();
                let se_before = se.clone();
                association_step(input, params, &mut it, &se);
                if params.interference == InterferenceModel::CrossUser {
                    se = efficiency(input, params, &it);
                }
                compute_step(input, params, &mut it, &se);
                bandwidth_step(input, params, &mut it, &se, false);
                if it.dropped_count() > before.dropped_count() && it.assoc != before.assoc {
                    // the moves cost users their service: keep the old association
                    it = before;
                    se = se_before;
                    compute_step(input, params, &mut it, &se);
                    bandwidth_step(input, params, &mut it, &se, false);
                }
            } else {
                compute_step(input, params, &mut it, &se);
                drop_infeasible(input, params, &mut it, &se);
            }
            let n = objective(input, params, &it, &se);
            let prev = *trace.last().expect("trace starts non-empty");
            trace.push(n);
            if (n - prev).abs() <= params.eps * (n.abs() + 1.0) {
                converged = true;
                break;
            }
        }
    }

    let u_n = input.num_users();
    let k_n = input.num_sbs();
    let mut w = UserSbsMatrix::zeros(u_n, k_n);
    let mut f = UserSbsMatrix::zeros(u_n, k_n);
    let mut rates = vec![0.0; u_n];
    for u in 0..u_n {
        if let Some(k) = it.assoc[u] {
            w[(u, k)] = it.w[u];
            f[(u, k)] = it.f[u];
            rates[u] = it.rate(u, &se);
        }
    }
    AllocationDecision {
        assoc: it.assoc,
        w,
        f,
        rates,
        objective: *trace.last().expect("trace starts non-empty"),
        objective_trace: trace,
        iterations,
        converged,
        dropped: it.dropped,
    }
}

/// Checks the per-SBS capacity and support constraints of a decision.
pub fn check_constraints(d: &AllocationDecision, params: &AllocParams) -> Result<(), String> {
    let tol = 1e-9;
    for u in 0..d.w.users() {
        for k in 0..d.w.sbs() {
            let on = d.assoc[u] == Some(k);
            if !on && (d.w[(u, k)] != 0.0 || d.f[(u, k)] != 0.0) {
                return Err(format!("user {u} has resources at unassociated SBS {k}"));
            }
            if d.w[(u, k)] < 0.0 || d.f[(u, k)] < 0.0 {
                return Err(format!("negative allocation for user {u} at SBS {k}"));
            }
        }
    }
    for k in 0..d.w.sbs() {
        let wk = d.w.column_sum(k);
        let fk = d.f.column_sum(k);
        if wk > params.bandwidth * (1.0 + tol) {
            return Err(format!("SBS {k} bandwidth {wk} exceeds {}", params.bandwidth));
        }
        if fk > params.compute * (1.0 + tol) {
            return Err(format!("SBS {k} compute {fk} exceeds {}", params.compute));
        }
    }
    Ok(())
}

/// Admitted, served users whose delay exceeds their limit under `demand_gc`.
pub fn delay_violations(d: &AllocationDecision, input: &StsInput<'_>, demand_gc: &[f64], b_bus: f64) -> usize {
    let f = d.user_compute();
    (0..input.num_users())
        .filter(|&u| input.y[u])
        .filter(|&u| {
            if d.assoc[u].is_none() {
                return true;
            }
            let t = delay(input.raw_bits[u], d.rates[u], f[u], demand_gc[u], b_bus);
            !(t.t_total <= input.delay_limit[u] * (1.0 + DELAY_TOL))
        })
        .count()
}
