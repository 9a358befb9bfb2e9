use proptest::prelude::*;

use mecsim_core::admission::{admit_lts, SimParams};
use mecsim_core::allocator::{allocate_sts, check_constraints, delay, AllocParams, Mode, StsInput, DELAY_TOL};
use mecsim_core::engine::{run, run_baseline, World};
use mecsim_core::queues::QueueState;
use mecsim_core::scenario::{place_topology, seeded_rng, step_mobility};
use mecsim_core::tasks::ComputeModel;
use mecsim_core::{Baseline, ScenarioConfig};

fn small(users: usize, sbs: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        num_users: users,
        num_sbs: sbs,
        num_lts: 2,
        seed,
        ..ScenarioConfig::default()
    }
    .validated()
    .unwrap()
}

fn mode_of(i: u8) -> Mode {
    match i % 3 {
        0 => Mode::Full,
        1 => Mode::FixedAll,
        _ => Mode::FixedAssocBandwidth,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mobility_keeps_users_inside(seed in 0u64..1000, users in 1usize..40, steps in 1usize..50) {
        let cfg = small(users, 4, seed);
        let mut rng = seeded_rng(seed);
        let mut top = place_topology(&cfg, &mut rng);
        for _ in 0..steps {
            top = step_mobility(&top, 5.0, 1.0, &mut rng);
            prop_assert_eq!(top.num_users(), users);
            for p in &top.user_positions {
                prop_assert!(p.x >= 0.0 && p.x <= cfg.area_side);
                prop_assert!(p.y >= 0.0 && p.y <= cfg.area_side);
            }
        }
    }

    #[test]
    fn allocations_respect_capacities_and_delays(
        seed in 0u64..10_000,
        users in 1usize..14,
        sbs in 1usize..4,
        mode in 0u8..3,
        q1 in 0.0f64..1e7,
        q2 in 0.0f64..1e7,
        q3 in 0.0f64..1e3,
        admit in prop::collection::vec(any::<bool>(), 14),
    ) {
        let cfg = small(users, sbs, seed);
        let params = AllocParams::from_config(&cfg);
        let model = ComputeModel::semantic(&cfg);
        let slot = World::new(&cfg).next_slot().unwrap();
        let d = &slot.demand;
        let types = &cfg.task_types;
        let demand: Vec<f64> = (0..users).map(|u| model.demand(d.raw_bits[u] / 8.0, &types[d.task[u]])).collect();
        let limit: Vec<f64> = (0..users).map(|u| types[d.task[u]].delay_limit()).collect();
        let bus_bytes = cfg.bus_bandwidth * cfg.sts_length / 8.0;
        let bus_work: Vec<f64> = (0..users).map(|u| model.demand(bus_bytes, &types[d.task[u]])).collect();
        let y = &admit[..users];
        let input = StsInput {
            queues: QueueState::new(q1, q2, q3),
            y,
            raw_bits: &d.raw_bits,
            demand_gc: &demand,
            delay_limit: &limit,
            bus_work: &bus_work,
            channel: &slot.channel,
            nearest: &slot.nearest,
        };
        let dec = allocate_sts(&input, &params, mode_of(mode));
        prop_assert!(check_constraints(&dec, &params).is_ok(), "{:?}", check_constraints(&dec, &params));
        prop_assert!(dec.iterations <= cfg.alg1_max_iters);
        let f = dec.user_compute();
        for u in 0..users {
            if !y[u] || dec.dropped[u] {
                prop_assert!(dec.assoc[u].is_none());
                prop_assert_eq!(f[u], 0.0);
                prop_assert_eq!(dec.rates[u], 0.0);
            } else {
                let t = delay(d.raw_bits[u], dec.rates[u], f[u], demand[u], cfg.bus_bandwidth);
                prop_assert!(t.t_total <= limit[u] * (1.0 + DELAY_TOL), "user {} delay {} > {}", u, t.t_total, limit[u]);
            }
        }
    }

    #[test]
    fn admission_only_prunes_and_ends_clean(seed in 0u64..10_000, users in 1usize..16, sbs in 1usize..4, base in 0u8..4) {
        let baseline = [Baseline::None, Baseline::FixedAllocation, Baseline::FixedChannel, Baseline::TraditionalComputing][base as usize];
        let cfg = ScenarioConfig { baseline, ..small(users, sbs, seed) };
        let params = SimParams::from_config(&cfg).unwrap();
        let ctx = World::new(&cfg).next_lts(QueueState::default()).unwrap();
        let out = admit_lts(&ctx, &params).unwrap();
        prop_assert!(out.admitted_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(out.passes <= cfg.alg2_max_iters + users + 1);
        prop_assert!(out.pass.violations.iter().all(|v| *v == 0));
        prop_assert_eq!(out.pass.utility, out.pass.revenue - cfg.eta * out.pass.cost);
    }

    #[test]
    fn runs_keep_queues_nonnegative_and_bound(seed in 0u64..10_000, users in 0usize..20, sbs in 1usize..5) {
        let cfg = small(users, sbs, seed);
        let out = run(&cfg).unwrap();
        prop_assert_eq!(out.lts.len(), cfg.num_lts);
        prop_assert_eq!(out.sts.len(), cfg.num_lts * cfg.slots_per_lts());
        for r in &out.sts {
            prop_assert!(r.queues.is_valid());
            prop_assert_eq!(r.audit_violations, 0);
        }
        for r in &out.lts {
            prop_assert!(r.theorem_ok);
            prop_assert_eq!(r.utility, r.revenue - r.eta * r.cost);
        }
    }
}

#[test]
fn proposed_dominates_fixed_baselines_on_average() {
    let seeds = 1..=10;
    let mut sums = [0.0; 3];
    for s in seeds {
        let cfg = ScenarioConfig {
            seed: s,
            ..ScenarioConfig::default()
        };
        sums[0] += run(&cfg).unwrap().mean_utility();
        sums[1] += run_baseline(&cfg, Baseline::FixedAllocation).unwrap().mean_utility();
        sums[2] += run_baseline(&cfg, Baseline::FixedChannel).unwrap().mean_utility();
    }
    assert!(sums[0] >= sums[1], "{sums:?}");
    assert!(sums[0] >= sums[2], "{sums:?}");
}

#[test]
fn traditional_model_misses_more_deadlines() {
    let mut proposed = 0.0;
    let mut tc = 0.0;
    for s in 1..=5 {
        let cfg = ScenarioConfig {
            seed: s,
            ..ScenarioConfig::default()
        };
        proposed += run(&cfg).unwrap().audit_violation_rate();
        tc += run_baseline(&cfg, Baseline::TraditionalComputing)
            .unwrap()
            .audit_violation_rate();
    }
    assert_eq!(proposed, 0.0);
    assert!(tc > proposed);
}

#[test]
fn fixed_allocation_single_user_is_the_starting_point() {
    let cfg = ScenarioConfig {
        baseline: Baseline::FixedAllocation,
        ..small(1, 4, 3)
    };
    let params = SimParams::from_config(&cfg).unwrap();
    let ctx = World::new(&cfg).next_lts(QueueState::default()).unwrap();
    let out = admit_lts(&ctx, &params).unwrap();
    for (slot, d) in ctx.slots.iter().zip(&out.pass.decisions) {
        if out.y[0] {
            assert_eq!(d.assoc[0], Some(slot.nearest[0]));
            assert_eq!(d.user_bandwidth()[0], cfg.bandwidth_per_sbs);
            assert_eq!(d.user_compute()[0], cfg.compute_per_sbs);
        }
    }
}
