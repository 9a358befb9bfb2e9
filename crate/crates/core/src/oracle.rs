//! Brute-force reference solvers for small instances, plus the randomized
//! suites run by `mecsim selftest`.

use rand::Rng;

use crate::admission::{admission_objective, admit_lts, solve_admission, LtsContext, SimParams};
use crate::allocator::association::argmin_row;
use crate::allocator::bandwidth::{bandwidth_objective, solve_bandwidth_sbs};
use crate::allocator::compute::{compute_objective, solve_compute_sbs};
use crate::allocator::{delay, DELAY_TOL};
use crate::config::ScenarioConfig;
use crate::engine::World;
use crate::grid::UserSbsMatrix;
use crate::queues::QueueState;
use crate::scenario::{seeded_rng, SimRng};

/// Greedy marginal allocation on a grid of `step` from the floors. Exact for
/// the separable concave objective up to the grid resolution.
pub fn grid_compute(weights: &[f64], floors: &[f64], cost: f64, capacity: f64, step: f64) -> Vec<f64> {
    let mut f = floors.to_vec();
    let mut left = capacity - floors.iter().sum::<f64>();
    let gain = |w: f64, x: f64, h: f64| w * h - cost * ((x + h).powi(3) - x.powi(3));
    while left > 0.0 {
        let h = step.min(left);
        let mut best = None;
        let mut best_gain = 0.0;
        for u in 0..f.len() {
            let g = gain(weights[u], f[u], h);
            if g > best_gain {
                best_gain = g;
                best = Some(u);
            }
        }
        match best {
            Some(u) => {
                f[u] += h;
                left -= h;
            }
            None => break,
        }
    }
    f
}

/// Minimizes `c.x` subject to `A x <= b` by enumerating the vertices
/// defined by every `n`-subset of constraints. Assumes the optimum is
/// attained at a vertex.
pub fn lp_vertex_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = c.len();
    let m = a.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    if n == 0 {
        return Some((Vec::new(), 0.0));
    }
    if n > m {
        return None;
    }
    loop {
        let rows: Vec<Vec<f64>> = subset.iter().map(|&i| a[i].clone()).collect();
        let rhs: Vec<f64> = subset.iter().map(|&i| b[i]).collect();
        if let Some(x) = solve_linear(rows, rhs) {
            let feasible = (0..m).all(|i| {
                let lhs: f64 = a[i].iter().zip(&x).map(|(p, q)| p * q).sum();
                lhs <= b[i] + 1e-9 * (1.0 + b[i].abs())
            });
            if feasible {
                let obj: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                if best.as_ref().is_none_or(|(_, o)| obj < *o) {
                    best = Some((x, obj));
                }
            }
        }
        // next n-subset of 0..m in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < m - n + i {
                subset[i] += 1;
                for j in i + 1..n {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` for singular systems.
#[allow(clippy::needless_range_loop)]
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let factor = a[r][col] / a[col][col];
                if factor != 0.0 {
                    for k in col..n {
                        a[r][k] -= factor * a[col][k];
                    }
                    b[r] -= factor * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Bandwidth LP over several SBSs solved as a dense LP.
///
/// `assoc[u]` is the SBS of user `u`; constraints are `w_u >= w_min_u` and one
/// capacity row per SBS.
pub fn bandwidth_lp(
    assoc: &[usize],
    sbs: usize,
    se: &[f64],
    w_min: &[f64],
    coef: f64,
    capacity: f64,
) -> Option<(Vec<f64>, f64)> {
    let n = assoc.len();
    let c: Vec<f64> = se.iter().map(|e| coef * e).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for u in 0..n {
        let mut row = vec![0.0; n];
        row[u] = -1.0;
        a.push(row);
        b.push(-w_min[u]);
    }
    for k in 0..sbs {
        a.push((0..n).map(|u| if assoc[u] == k { 1.0 } else { 0.0 }).collect());
        b.push(capacity);
    }
    lp_vertex_min(&c, &a, &b)
}

/// Joint enumeration of all `K^U` associations; returns the lexicographically
/// first minimizer of the summed cost.
pub fn association_enumerate(costs: &UserSbsMatrix) -> Vec<usize> {
    let u_n = costs.users();
    let k_n = costs.sbs();
    let mut cur = vec![0usize; u_n];
    let mut best = cur.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let total: f64 = (0..u_n).map(|u| costs[(u, cur[u])]).sum();
        if total < best_cost {
            best_cost = total;
            best = cur.clone();
        }
        let mut i = u_n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < k_n {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// Per-user exhaustive scan with the lowest-index tie rule.
pub fn association_per_user(costs: &UserSbsMatrix) -> Vec<usize> {
    (0..costs.users())
        .map(|u| {
            let row = costs.row(u);
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] < row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Best admission over all `2^U` vectors with infeasible users forced out.
pub fn admission_enumerate(v: &[f64], feasible: &[bool], cost: &[f64], eta: f64) -> (Vec<bool>, f64) {
    let n = v.len();
    assert!(n < 24, "enumeration is exponential");
    let mut best = (vec![false; n], 0.0);
    for mask in 0u32..(1 << n) {
        let y: Vec<bool> = (0..n).map(|u| mask >> u & 1 == 1).collect();
        if (0..n).any(|u| y[u] && !feasible[u]) {
            continue;
        }
        let obj = admission_objective(&y, v, cost, eta);
        if obj > best.1 {
            best = (y, obj);
        }
    }
    best
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// Fault injected into the solvers under test, for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Corruption {
    #[default]
    None,
    /// Scales every compute decision down by 10%.
    Compute,
}

/// Outcome of one randomized suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// `sum |w_u f_u| + c sum f_u^3`.
pub fn objective_magnitude(weights: &[f64], cost: f64, f: &[f64]) -> f64 {
    weights
        .iter()
        .zip(f)
        .map(|(w, x)| (w * x).abs() + cost * x * x * x)
        .sum()
}

/// One SBS worth of compute inputs: weights, floors, cubic cost, capacity.
pub type ComputeInstance = (Vec<f64>, Vec<f64>, f64, f64);

/// `users` users on one SBS with random weights and floors that fit.
pub fn random_compute_instance(rng: &mut SimRng, users: usize) -> ComputeInstance {
    let capacity = rng.random_range(10.0..200.0);
    let cost = rng.random_range(1e-3..1e-1);
    let weights: Vec<f64> = (0..users).map(|_| rng.random_range(0.0..100.0)).collect();
    let floors: Vec<f64> = (0..users)
        .map(|_| rng.random_range(0.0..0.9) * capacity / users as f64)
        .collect();
    (weights, floors, cost, capacity)
}

/// Up to two SBSs sharing at most five users.
pub fn random_compute_system(rng: &mut SimRng) -> Vec<ComputeInstance> {
    let sbs = rng.random_range(1..=2);
    let first = rng.random_range(1..=(6 - sbs));
    let mut out = vec![random_compute_instance(rng, first)];
    if sbs == 2 {
        let second = rng.random_range(1..=(5 - first));
        out.push(random_compute_instance(rng, second));
    }
    out
}

/// KKT compute solver against the grid oracle; also checks stationarity.
pub fn compute_suite(seed: u64, cases: usize, corrupt: Corruption) -> SuiteReport {
    let mut rng = seeded_rng(seed);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let mut got = 0.0;
        let mut want = 0.0;
        let mut scale = 0.0;
        let mut stationarity: f64 = 0.0;
        for (weights, floors, cost, capacity) in random_compute_system(&mut rng) {
            let mut sol = solve_compute_sbs(&weights, &floors, cost, capacity).expect("floors fit");
            if corrupt == Corruption::Compute {
                sol.f.iter_mut().for_each(|x| *x *= 0.9);
            }
            let grid = grid_compute(&weights, &floors, cost, capacity, 1e-4 * capacity);
            got += compute_objective(&weights, cost, &sol.f);
            want += compute_objective(&weights, cost, &grid);
            scale += objective_magnitude(&weights, cost, &grid);
            for u in 0..weights.len() {
                if sol.f[u] > floors[u] * (1.0 + 1e-9) + 1e-12 {
                    let r = weights[u] - 3.0 * cost * sol.f[u] * sol.f[u] - sol.mu;
                    stationarity = stationarity.max(r.abs());
                }
            }
        }
        // the two terms can nearly cancel, so errors are taken relative to
        // their magnitude rather than to the net objective
        let err = (got - want).abs() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(err);
        if err > 1e-6 || stationarity > 1e-6 {
            failures += 1;
        }
    }
    SuiteReport {
        name: "compute",
        cases,
        failures,
        worst,
    }
}

/// Random feasible multi-SBS bandwidth instance.
pub fn random_bandwidth_instance(rng: &mut SimRng) -> (Vec<usize>, usize, Vec<f64>, Vec<f64>, f64, f64) {
    let n = rng.random_range(1..=6);
    let sbs = rng.random_range(1..=2);
    let capacity = 1e7;
    let assoc: Vec<usize> = (0..n).map(|_| rng.random_range(0..sbs)).collect();
    let se: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..12.0)).collect();
    let w_min: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..capacity / 6.0)).collect();
    let coef = rng.random_range(-5.0..5.0);
    (assoc, sbs, se, w_min, coef, capacity)
}

/// Structured bandwidth solver against the vertex-enumeration LP.
pub fn bandwidth_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = seeded_rng(seed);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (assoc, sbs, se, w_min, coef, capacity) = random_bandwidth_instance(&mut rng);
        let mut w = vec![0.0; assoc.len()];
        for k in 0..sbs {
            let members: Vec<usize> = (0..assoc.len()).filter(|&u| assoc[u] == k).collect();
            let ses: Vec<f64> = members.iter().map(|&u| se[u]).collect();
            let mins: Vec<f64> = members.iter().map(|&u| w_min[u]).collect();
            let sol = solve_bandwidth_sbs(&ses, &mins, coef, capacity).expect("feasible instance");
            for (i, &u) in members.iter().enumerate() {
                w[u] = sol[i];
            }
        }
        let got = bandwidth_objective(coef, &se, &w);
        let (_, want) = bandwidth_lp(&assoc, sbs, &se, &w_min, coef, capacity).expect("bounded LP");
        let err = rel_err(got, want);
        worst = worst.max(err);
        if err > 1e-6 {
            failures += 1;
        }
    }
    SuiteReport {
        name: "bandwidth",
        cases,
        failures,
        worst,
    }
}

/// Row-wise argmin against per-user and joint enumeration.
pub fn association_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = seeded_rng(seed);
    let mut failures = 0;
    for _ in 0..cases {
        let u_n = rng.random_range(1..=6);
        let k_n = rng.random_range(1..=4);
        // small integer costs make exact ties common
        let costs = UserSbsMatrix::from_fn(u_n, k_n, |_, _| rng.random_range(-5i32..=5) as f64);
        let got: Vec<usize> = (0..u_n)
            .map(|u| argmin_row(costs.row(u)).expect("finite row"))
            .collect();
        if got != association_per_user(&costs) || got != association_enumerate(&costs) {
            failures += 1;
        }
    }
    SuiteReport {
        name: "association",
        cases,
        failures,
        worst: 0.0,
    }
}

/// Small scenario used by the admission suite.
pub fn admission_scenario(seed: u64, rng: &mut SimRng) -> ScenarioConfig {
    ScenarioConfig {
        num_users: rng.random_range(1..=10),
        num_sbs: rng.random_range(1..=3),
        num_lts: 1,
        seed,
        ..ScenarioConfig::default()
    }
    .validated()
    .expect("valid small scenario")
}

/// Admission thresholding against `2^U` enumeration, and a delay audit of
/// the final admission of the full admission loop.
pub fn admission_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = seeded_rng(seed);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let cfg = admission_scenario(seed.wrapping_add(case as u64), &mut rng);
        let params = SimParams::from_config(&cfg).expect("valid params");
        let ctx: LtsContext = World::new(&cfg).next_lts(QueueState::default()).expect("draw");
        let outcome = admit_lts(&ctx, &params).expect("admission runs");

        // thresholding vs enumeration on the first pass's flags and costs
        let first =
            crate::admission::simulate_pass(&ctx, &vec![true; cfg.num_users], &outcome.v, &params).expect("pass runs");
        let feasible: Vec<bool> = first.violated.iter().map(|b| !b).collect();
        let y = solve_admission(&outcome.v, &feasible, &first.user_cost, cfg.eta);
        let got = admission_objective(&y, &outcome.v, &first.user_cost, cfg.eta);
        let (_, want) = admission_enumerate(&outcome.v, &feasible, &first.user_cost, cfg.eta);
        let err = rel_err(got, want);
        worst = worst.max(err);

        let audit_ok = audit_pass(&ctx, &outcome.pass, &params);
        if err > 1e-12 || !audit_ok {
            failures += 1;
        }
    }
    SuiteReport {
        name: "admission",
        cases,
        failures,
        worst,
    }
}

/// Every admitted user meets its delay limit in every slot of `pass`.
#[allow(clippy::needless_range_loop)]
pub fn audit_pass(ctx: &LtsContext, pass: &crate::admission::PassResult, params: &SimParams) -> bool {
    for (slot, d) in ctx.slots.iter().zip(&pass.decisions) {
        let f = d.user_compute();
        for u in 0..pass.y.len() {
            if !pass.y[u] {
                continue;
            }
            if d.assoc[u].is_none() {
                return false;
            }
            let task = &params.task_types[slot.demand.task[u]];
            let bits = slot.demand.raw_bits[u];
            let demand = params.planning.demand(bits / 8.0, task);
            let t = delay(bits, d.rates[u], f[u], demand, params.alloc.b_bus);
            if !(t.t_total <= task.delay_limit() * (1.0 + DELAY_TOL)) {
                return false;
            }
        }
    }
    true
}

/// All suites with the case counts used by `selftest`.
pub fn run_all(seed: u64, corrupt: Corruption) -> Vec<SuiteReport> {
    vec![
        compute_suite(seed, 100, corrupt),
        bandwidth_suite(seed.wrapping_add(1), 100),
        association_suite(seed.wrapping_add(2), 200),
        admission_suite(seed.wrapping_add(3), 20),
    ]
}
