//! Outer simulation loop: draw each long slot, admit, replay, record.

use serde::{Deserialize, Serialize};

use crate::admission::{admit_lts, average_utility, simulate_pass, LtsContext, PassResult, SimParams, SlotContext};
use crate::channel::ChannelState;
use crate::config::{Baseline, ScenarioConfig};
use crate::error::Result;
use crate::queues::{check_theorem1, DriftRecord, QueueState};
use crate::scenario::{place_topology, seeded_rng, step_mobility, SimRng, Topology};
use crate::tasks::sample_sts_demand;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsRecord {
    pub lts_index: usize,
    pub sts_index: usize,
    /// Queue state at the start of the slot.
    pub queues: QueueState,
    pub total_power: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub violations: usize,
    /// Delay misses re-evaluated with the semantic demand model.
    pub audit_violations: usize,
    pub admitted: usize,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtsRecord {
    pub lts_index: usize,
    pub y: Vec<bool>,
    /// Admitted user-slots per task type.
    pub admitted_per_type: Vec<usize>,
    pub revenue: f64,
    pub cost: f64,
    pub eta: f64,
    pub utility: f64,
    pub mean_utility: f64,
    pub passes: usize,
    pub drift: DriftRecord,
    pub theorem_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub lts: Vec<LtsRecord>,
    pub sts: Vec<StsRecord>,
    pub final_queues: QueueState,
}

impl RunOutput {
    /// Mean utility over all long slots.
    pub fn mean_utility(&self) -> f64 {
        self.lts.last().map_or(0.0, |r| r.mean_utility)
    }

    pub fn mean_revenue(&self) -> f64 {
        mean(self.lts.iter().map(|r| r.revenue))
    }

    pub fn mean_cost(&self) -> f64 {
        mean(self.lts.iter().map(|r| r.cost))
    }

    pub fn mean_admitted(&self) -> f64 {
        mean(self.lts.iter().map(|r| r.y.iter().filter(|b| **b).count() as f64))
    }

    /// Fraction of admitted user-slots that missed the semantic delay limit.
    pub fn audit_violation_rate(&self) -> f64 {
        let admitted: usize = self.sts.iter().map(|s| s.admitted).sum();
        let missed: usize = self.sts.iter().map(|s| s.audit_violations).sum();
        if admitted == 0 {
            0.0
        } else {
            missed as f64 / admitted as f64
        }
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Random state of a run, advanced one long slot at a time.
pub struct World {
    cfg: ScenarioConfig,
    rng: SimRng,
    topology: Topology,
    started: bool,
}

impl World {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let mut rng = seeded_rng(cfg.seed);
        let topology = place_topology(cfg, &mut rng);
        Self {
            cfg: cfg.clone(),
            rng,
            topology,
            started: false,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Draws the next slot: mobility, then data sizes, task types, arrivals.
    pub fn next_slot(&mut self) -> Result<SlotContext> {
        if self.started {
            self.topology = step_mobility(
                &self.topology,
                self.cfg.user_speed(),
                self.cfg.sts_length,
                &mut self.rng,
            );
        }
        self.started = true;
        let channel = ChannelState::from_topology(&self.topology, self.cfg.carrier_freq)?;
        let nearest = (0..self.topology.num_users())
            .map(|u| self.topology.nearest_sbs(u))
            .collect();
        let demand = sample_sts_demand(&self.cfg, &mut self.rng)?;
        Ok(SlotContext {
            channel,
            nearest,
            demand,
        })
    }

    pub fn next_lts(&mut self, start: QueueState) -> Result<LtsContext> {
        let slots = (0..self.cfg.slots_per_lts())
            .map(|_| self.next_slot())
            .collect::<Result<_>>()?;
        Ok(LtsContext { start, slots })
    }
}

fn sts_records(lts_index: usize, pass: &PassResult) -> Vec<StsRecord> {
    let admitted = pass.y.iter().filter(|b| **b).count();
    pass.decisions
        .iter()
        .enumerate()
        .map(|(t, d)| StsRecord {
            lts_index,
            sts_index: t,
            queues: pass.queue_trace[t],
            total_power: pass.power[t],
            objective: d.objective,
            iterations: d.iterations,
            converged: d.converged,
            violations: pass.violations[t],
            audit_violations: pass.audit_violations[t],
            admitted,
            rates: d.rates.clone(),
        })
        .collect()
}

fn admitted_per_type(pass: &PassResult, ctx: &LtsContext, types: usize) -> Vec<usize> {
    let mut counts = vec![0; types];
    for slot in &ctx.slots {
        for (u, &m) in slot.demand.task.iter().enumerate() {
            if pass.y[u] {
                counts[m] += 1;
            }
        }
    }
    counts
}

/// Runs the configured algorithm (or baseline) for `num_lts` long slots.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let cfg = cfg.clone().validated()?;
    let params = SimParams::from_config(&cfg)?;
    let mut world = World::new(&cfg);
    let mut q = QueueState::default();
    let mut lts = Vec::with_capacity(cfg.num_lts);
    let mut sts = Vec::new();
    let mut utilities = Vec::with_capacity(cfg.num_lts);

    for l in 0..cfg.num_lts {
        let ctx = world.next_lts(q)?;
        let outcome = admit_lts(&ctx, &params)?;
        let pass = outcome.pass;
        let (drift, theorem_ok) = check_theorem1(&pass.trace, l, cfg.lyapunov_v, cfg.eta, pass.revenue, pass.cost)?;
        utilities.push(pass.utility);
        lts.push(LtsRecord {
            lts_index: l,
            y: pass.y.clone(),
            admitted_per_type: admitted_per_type(&pass, &ctx, cfg.task_types.len()),
            revenue: pass.revenue,
            cost: pass.cost,
            eta: cfg.eta,
            utility: pass.utility,
            mean_utility: average_utility(&utilities),
            passes: outcome.passes,
            drift,
            theorem_ok,
        });
        sts.extend(sts_records(l, &pass));
        q = pass.trace.end;
    }
    Ok(RunOutput {
        lts,
        sts,
        final_queues: q,
    })
}

/// Runs `cfg` with the algorithm replaced by `baseline`.
pub fn run_baseline(cfg: &ScenarioConfig, baseline: Baseline) -> Result<RunOutput> {
    run(&ScenarioConfig {
        baseline,
        ..cfg.clone()
    })
}

/// Offloading-queue trace under a fixed admission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Mean offloading service per slot with a saturated queue, bits.
    pub capacity_per_slot: f64,
    /// Per-user arrival mean (in `arrival_unit_bits`) used for the probe.
    pub arrival_mean: f64,
    pub offloading: Vec<f64>,
    pub running_mean: Vec<f64>,
    /// Least-squares slope of the running mean per slot.
    pub slope: f64,
    pub mean: f64,
}

/// Least-squares slope of `ys` against `0..n`.
pub fn fitted_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Holds admission `y` fixed, measures the saturated offloading service,
/// sets arrivals to `load` times that capacity and runs `slots` short slots.
pub fn stability_probe(cfg: &ScenarioConfig, y: &[bool], slots: usize, load: f64) -> Result<StabilityReport> {
    let cfg = cfg.clone().validated()?;
    crate::error::check_len("admission vector", y.len(), cfg.num_users)?;
    let params = SimParams::from_config(&cfg)?;
    let n_y = y.iter().filter(|b| **b).count().max(1) as f64;
    let v = vec![0.0; cfg.num_users];

    // pilot: a large standing backlog keeps the offloading queue saturated
    let pilot_lts = 5;
    let mut world = World::new(&cfg);
    let mut served = 0.0;
    let mut count = 0usize;
    for _ in 0..pilot_lts {
        let mut ctx = world.next_lts(QueueState::new(1e12, 0.0, 0.0))?;
        for s in &mut ctx.slots {
            s.demand.arrivals.iter_mut().for_each(|a| *a = 0.0);
        }
        let pass = simulate_pass(&ctx, y, &v, &params)?;
        served += pass.trace.slots.iter().map(|s| s.offload_service).sum::<f64>();
        count += pass.trace.slots.len();
    }
    let capacity = served / count.max(1) as f64;
    let arrival_mean = load * capacity / (n_y * cfg.arrival_unit_bits);

    let probe_cfg = ScenarioConfig {
        arrival_mean,
        seed: cfg.seed ^ 0x5eed_57ab,
        ..cfg.clone()
    };
    let mut world = World::new(&probe_cfg);
    let mut q = QueueState::default();
    let mut offloading = Vec::with_capacity(slots);
    let mut done = 0;
    while done < slots {
        let ctx = world.next_lts(q)?;
        let pass = simulate_pass(&ctx, y, &v, &params)?;
        for s in pass.queue_trace.iter().skip(1).chain(std::iter::once(&pass.trace.end)) {
            if done < slots {
                offloading.push(s.offloading);
                done += 1;
            }
        }
        q = pass.trace.end;
    }
    let mut running_mean = Vec::with_capacity(slots);
    let mut acc = 0.0;
    for (i, x) in offloading.iter().enumerate() {
        acc += x;
        running_mean.push(acc / (i + 1) as f64);
    }
    let slope = fitted_slope(&running_mean);
    let mean = running_mean.iter().sum::<f64>() / running_mean.len().max(1) as f64;
    Ok(StabilityReport {
        capacity_per_slot: capacity,
        arrival_mean,
        offloading,
        running_mean,
        slope,
        mean,
    })
}
