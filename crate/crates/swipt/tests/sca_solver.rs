//! SCA solver checks: feasibility of every start and iterate, cross-module
//! agreement with the closed-form TDMA solve, and the stopping rule.

use proptest::prelude::*;
use qp_core::{solve_qp, QpProblem, QpStatus, SolverSettings};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swipt::metrics::{check_feasible, Tolerances};
use swipt::sca::{
    build_subproblem, feasible_scale, initialize, restore_power, row_tally, sca_solve, seed_allocation,
    solve_per_group, variable_tally, SPLIT_FLOOR, GroupState, ScaSettings, SubproblemState,
};
use swipt::sysmodel::{build_instance, instance_from_distances};
use swipt::tdma::tdma_user_solve_slot;
use swipt::SystemConfig;

const EXACT: Tolerances = Tolerances { rate: 0.0, harvest_rel: 0.0, harvest_abs: 0.0 };

fn cfg(min_rate: f64, min_harvest: f64) -> SystemConfig {
    SystemConfig { min_rate, min_harvest, ..Default::default() }
}

/// Minimum power for fixed splits as an LP solved by the QP solver, written
/// straight from the per-receiver SINR constraints.
fn lp_min_power(gains: &[f64], split: &[f64], slot: f64, c: &SystemConfig) -> f64 {
    let n = gains.len();
    let theta = c.sinr_target(slot);
    let weakest = gains[n - 1];
    let unit = ((c.noise_antenna + c.noise_id) / weakest).max(c.min_harvest / (c.eh_efficiency * weakest));
    let mut qp = QpProblem::new(n);
    for d in 0..n {
        qp.lin[d] = 1.0;
        qp.set_bounds(d, 0.0, f64::INFINITY);
        for m in 0..=d {
            // β_m h_m q_d ≥ θ(β_m h_m Σ_{s<d} q_s + β_m σ² + σ̃²)
            let bh = split[m] * gains[m];
            let mut row = vec![(d, -bh * unit)];
            row.extend((0..d).map(|s| (s, theta * bh * unit)));
            let rhs = -theta * (split[m] * c.noise_antenna + c.noise_id);
            let norm = bh * unit;
            qp.add_constraint(row.into_iter().map(|(i, a)| (i, a / norm)).collect(), rhs / norm);
        }
        if d + 1 < n {
            qp.add_constraint(vec![(d, 1.0), (d + 1, -1.0)], 0.0);
        }
    }
    for j in 0..n {
        let k = c.eh_efficiency * (1.0 - split[j]) * gains[j] * unit;
        if c.min_harvest > 0.0 {
            qp.add_constraint((0..n).map(|s| (s, -1.0)).collect(), -c.min_harvest / k);
        }
    }
    let sol = solve_qp(&qp, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, QpStatus::Optimal);
    sol.objective * unit
}

#[test]
fn restoration_matches_lp_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    use rand::Rng;
    for case in 0..200 {
        let n = rng.gen_range(1..=3);
        let mut gains: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-5.0..-3.0))).collect();
        gains.sort_by(|a, b| b.total_cmp(a));
        let split: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
        let c = cfg(rng.gen_range(0.0..0.5), 10f64.powf(rng.gen_range(-10.0..-6.0)));
        let q = restore_power(&gains, &split, 0.2, &c);
        let got: f64 = q.iter().sum();
        let want = lp_min_power(&gains, &split, 0.2, &c);
        assert!((got - want).abs() <= 1e-6 * want, "case {case}: {got} vs {want}");
        let view = swipt::metrics::GroupView { gains: &gains, power: &q, split: &split, slot_time: 0.2 };
        assert!(swipt::metrics::group_feasible(&view, &c, &EXACT), "case {case}");
    }
}

#[test]
fn initial_point_is_exactly_feasible() {
    let c = cfg(0.1, 1e-9);
    for seed in 0..20 {
        let inst = build_instance(&c, seed).unwrap();
        let state = initialize(&inst, &c, seed).unwrap();
        let vars = state.vars(inst.users());
        assert!(check_feasible(&inst, &vars, &c, &EXACT).feasible, "seed {seed}");
        assert!(vars.split.iter().all(|&b| b == 0.5));
    }
}

#[test]
fn zero_demands_give_zero_start_and_zero_power() {
    let c = cfg(0.0, 0.0);
    let inst = build_instance(&c, 1).unwrap();
    let state = initialize(&inst, &c, 1).unwrap();
    for g in &state.groups {
        assert!(g.power.iter().chain(&g.alpha).chain(&g.rho).chain(&g.varrho).all(|&x| x == 0.0));
    }
    let rep = sca_solve(&inst, &c, &ScaSettings::default());
    assert!(rep.success());
    assert_eq!(rep.total_power(), 0.0);
}

#[test]
fn harvest_scaling_bounds_the_start_scale() {
    let c1 = cfg(0.1, 1e-7);
    let c4 = cfg(0.1, 4e-7);
    let gains = [1e-4, 1.2e-5];
    let split = [0.5, 0.5];
    for seed in 0..10 {
        let shape = seed_allocation(2, 0.2, &c1, &mut ChaCha8Rng::seed_from_u64(seed));
        let a = feasible_scale(&gains, &split, 0.2, &shape, &c1).unwrap();
        let b = feasible_scale(&gains, &split, 0.2, &shape, &c4).unwrap();
        assert!(b >= a && b <= 4.0 * a * (1.0 + 1e-9), "{a} {b}");
    }
}

#[test]
fn tally_for_five_pair_groups() {
    // α 3 + ι 2 + SINR chain 3 + 3 + ρ 4 + harvest 2 + SIC 1
    assert_eq!(row_tally(2), 18);
    assert_eq!(variable_tally(2), 18);
    let c = cfg(0.1, 1e-8);
    let inst = build_instance(&c, 4).unwrap();
    let state = initialize(&inst, &c, 4).unwrap();
    let (qp, layout) = build_subproblem(&state, &c);
    assert_eq!(qp.constraints.len(), 90);
    assert_eq!(qp.n, 90);
    assert!(layout.groups.iter().all(|g| g.rows == 18));
}

fn expansion_slack_ok(state: &SubproblemState, c: &SystemConfig) {
    let (qp, layout) = build_subproblem(state, c);
    let z = layout.expansion_point(state);
    for (r, row) in qp.constraints.iter().enumerate() {
        assert!(row.slack(&z) >= -1e-9, "row {r}: slack {}", row.slack(&z));
    }
    for v in 0..qp.n {
        assert!(z[v] >= qp.lower[v] - 1e-12 && z[v] <= qp.upper[v] + 1e-12, "var {v}");
    }
}

#[test]
fn expansion_point_satisfies_its_subproblem() {
    let c = cfg(0.1, 1e-8);
    for seed in 0..10 {
        let inst = build_instance(&c, seed).unwrap();
        expansion_slack_ok(&initialize(&inst, &c, seed).unwrap(), &c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Every iterate is a restored point, so this covers inner consistency of
    // the update rule.
    #[test]
    fn restored_points_satisfy_their_subproblem(
        seed in 0u64..1000,
        b in prop::array::uniform2(1e-4f64..0.9999),
        rate in 0.0f64..1.0,
        harvest in -10.0f64..-5.0,
    ) {
        let c = cfg(rate, 10f64.powf(harvest));
        let inst = build_instance(&c, seed).unwrap();
        let users = inst.grouping[0].clone();
        let gains = inst.group_gains(0);
        let power = restore_power(&gains, &b, inst.slot_time, &c);
        let g = GroupState::at(users, gains, inst.slot_time, power, b.to_vec(), &c);
        prop_assume!(g.total_power() > 0.0);
        let state = SubproblemState { groups: vec![g] };
        expansion_slack_ok(&state, &c);
    }
}

#[test]
fn theta_is_pinned_at_rate_floor() {
    let c = cfg(0.1, 1e-8);
    let inst = build_instance(&c, 2).unwrap();
    let state = initialize(&inst, &c, 2).unwrap();
    for g in &state.groups {
        assert!((g.theta.log2() * g.slot - c.min_rate).abs() <= 1e-15);
    }
}

#[test]
fn converges_within_twenty_iterations_on_table1() {
    let c = cfg(1e-2, 1e-8);
    for seed in 0..10 {
        let inst = build_instance(&c, seed).unwrap();
        let rep = sca_solve(&inst, &c, &ScaSettings { seed, ..Default::default() });
        assert!(rep.success(), "seed {seed}: {:?}", rep.outcome);
        assert!(rep.iterations <= 20);
        let t = &rep.objective_trace;
        assert!((t[t.len() - 1] - t[t.len() - 2]).abs() < rep.mu);
        assert!(t.windows(2).all(|w| w[1] <= w[0]), "trace {t:?}");
        assert!((t[t.len() - 1] - rep.total_power()).abs() <= 1e-12 * rep.total_power());
    }
}

#[test]
fn final_powers_respect_sic_order() {
    let c = cfg(0.1, 1e-7);
    let inst = build_instance(&c, 9).unwrap();
    let rep = sca_solve(&inst, &c, &ScaSettings::default());
    for users in &inst.grouping {
        for w in users.windows(2) {
            assert!(rep.final_vars.power[w[0]] <= rep.final_vars.power[w[1]]);
        }
    }
}

#[test]
fn singleton_group_matches_closed_form() {
    for (r, p) in [(0.1, 1e-9), (0.5, 1e-7), (0.01, 1e-6)] {
        let c = SystemConfig { users: 1, groups: 1, users_per_group: 1, ..cfg(r, p) };
        for d in [1.0, 2.5, 7.0, 10.0] {
            let inst = instance_from_distances(&c, vec![d]).unwrap();
            let rep = sca_solve(&inst, &c, &ScaSettings::default());
            let exact = tdma_user_solve_slot(inst.gains[0], c.group_slot(), &c).unwrap();
            // The splitter is confined to [1e-4, 1 - 1e-4]; power is unimodal
            // in the split, so a clamped optimum moves to the nearer end.
            let clamped = exact.split.clamp(SPLIT_FLOOR, 1.0 - SPLIT_FLOOR);
            let want = restore_power(&inst.gains, &[clamped], c.group_slot(), &c)[0];
            assert!(want >= exact.power);
            assert!(rep.success());
            let got = rep.total_power();
            assert!((got - want).abs() <= 1e-6 * want, "d {d}: {got} vs {want}");
        }
    }
}

#[test]
fn per_group_matches_joint() {
    let c = cfg(0.1, 1e-8);
    for seed in 0..5 {
        let inst = build_instance(&c, seed).unwrap();
        let s = ScaSettings { seed, ..Default::default() };
        let joint = sca_solve(&inst, &c, &s);
        let split = solve_per_group(&inst, &c, &s);
        assert!(joint.success() && split.success());
        assert!((joint.total_power() - split.total_power()).abs() <= 10.0 * joint.mu);
    }
}

#[test]
fn single_group_per_group_is_joint() {
    let c = SystemConfig { users: 2, groups: 1, ..cfg(0.1, 1e-8) };
    let inst = build_instance(&c, 8).unwrap();
    let s = ScaSettings::default();
    assert_eq!(sca_solve(&inst, &c, &s).final_vars, solve_per_group(&inst, &c, &s).final_vars);
}

#[test]
fn group_permutation_leaves_total_unchanged() {
    let c = cfg(0.1, 1e-8);
    let inst = build_instance(&c, 6).unwrap();
    let mut permuted = inst.clone();
    permuted.grouping.reverse();
    let s = ScaSettings::default();
    let a = solve_per_group(&inst, &c, &s).total_power();
    let b = solve_per_group(&permuted, &c, &s).total_power();
    assert!((a - b).abs() <= 1e-6 * a);
}

#[test]
fn impossible_harvest_is_reported() {
    let c = SystemConfig { eh_efficiency: 0.0, ..cfg(0.1, 1e-8) };
    let inst = build_instance(&c, 1).unwrap();
    let rep = sca_solve(&inst, &c, &ScaSettings::default());
    assert!(!rep.success());
    assert!(matches!(rep.outcome, swipt::sca::Outcome::InitializationFailed(_)));
}
