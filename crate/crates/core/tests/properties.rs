//! Property suites for the metric, queue, dual, and trace invariants.

use proptest::prelude::*;

use plc_core::control::{choose_action, ControllerConfig};
use plc_core::dual::{dual_value, per_state_dual, DualSolverParams, Multiplier};
use plc_core::model::{
    build_two_queue_preset, queue_update, total_variation, two_queue_distribution, ActionDef,
    ActionOutcome, Distribution, QueueVector, SystemModel,
};
use plc_core::prediction::{synthesize_prediction, PredictionProfile};
use plc_core::schedule::DistributionSchedule;
use plc_core::sim::run_simulation;

fn distribution(m: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(1e-6..1.0f64, m).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        Distribution::new(raw.into_iter().map(|x| x / sum).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn tv_symmetric_bounded_and_triangular(
        p in distribution(6),
        q in distribution(6),
        r in distribution(6),
    ) {
        let pq = total_variation(&p, &q).unwrap();
        let qp = total_variation(&q, &p).unwrap();
        prop_assert!((pq - qp).abs() < 1e-15);
        prop_assert!((0.0..=2.0).contains(&pq));
        let pr = total_variation(&p, &r).unwrap();
        let rq = total_variation(&r, &q).unwrap();
        prop_assert!(pq <= pr + rq + 1e-12);
    }

    #[test]
    fn tv_zero_iff_equal(p in distribution(5)) {
        prop_assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        let mut shifted = p.probs().to_vec();
        let delta = 1e-6;
        shifted[0] += delta;
        shifted[1] -= delta;
        if shifted[1] >= 0.0 {
            let q = Distribution::new(shifted).unwrap();
            prop_assert!(total_variation(&p, &q).unwrap() > 1e-12);
        }
    }

    #[test]
    fn queue_update_never_negative(
        q in prop::collection::vec(0.0..50.0f64, 3),
        mu in prop::collection::vec(0.0..5.0f64, 3),
        a in prop::collection::vec(0.0..5.0f64, 3),
    ) {
        let qv = QueueVector::new(q).unwrap();
        let out = ActionOutcome { cost: 0.0, arrivals: a, services: mu };
        let next = queue_update(&qv, &out);
        prop_assert!(next.as_slice().iter().all(|x| *x >= 0.0));
        // Zero service and arrivals leave the queue untouched.
        let idle = ActionOutcome {
            cost: 0.0,
            arrivals: vec![0.0; 3],
            services: vec![0.0; 3],
        };
        let unchanged = queue_update(&qv, &idle);
        prop_assert_eq!(unchanged.as_slice(), qv.as_slice());
    }

    #[test]
    fn synthesized_windows_stay_on_simplex_within_budget(
        pi in distribution(8),
        e in prop::sample::select(vec![0.0, 0.01, 0.04, 0.1]),
        seed in 0u64..1_000,
    ) {
        let schedule = DistributionSchedule::stationary(pi.clone(), 64);
        let profile = PredictionProfile::constant(e, 5).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let win = synthesize_prediction(&schedule, 0, &profile, &mut rng);
        for k in 0..win.window() {
            let d = win.predicted(k);
            prop_assert!(d.probs().iter().all(|p| *p >= 0.0));
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(total_variation(d, &pi).unwrap() <= e + 1e-12);
        }
    }

    #[test]
    fn product_law_is_a_distribution_for_any_rates(
        p1 in 0.0..=1.0f64,
        p2 in 0.0..=1.0f64,
    ) {
        let pi = two_queue_distribution(p1, p2).unwrap();
        prop_assert_eq!(pi.len(), 16);
        prop_assert!((pi.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(pi.probs().iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn dual_value_decomposes_over_states(
        pi in distribution(16),
        g in prop::collection::vec(0.0..500.0f64, 2),
        v in 1.0..300.0f64,
    ) {
        let model = build_two_queue_preset();
        let gamma = Multiplier::new(g).unwrap();
        let total = dual_value(&model, &gamma, &pi, v).unwrap();
        let mut manual = 0.0;
        for i in 0..16 {
            manual += pi.get(i) * per_state_dual(&model, i, &gamma, v).unwrap().0;
        }
        prop_assert!((total - manual).abs() <= 1e-12 * (1.0 + manual.abs()));
    }

    #[test]
    fn max_weight_rule_ignores_constant_value_shifts(
        q in prop::collection::vec(0.0..300.0f64, 2),
        v in 1.0..200.0f64,
        state in 0usize..16,
        shift in -3.0..3.0f64,
    ) {
        // Shifting every action's cost by the same amount shifts every
        // action value by -V*shift and must not change the argmax.
        let base = build_two_queue_preset();
        let a1 = choose_action(&base, state, &q, v).unwrap();
        let mut states = Vec::new();
        let mut actions = Vec::new();
        for i in 0..base.num_states() {
            states.push(base.state_label(i).unwrap().to_string());
            let set = base.actions(i).unwrap();
            let shifted_set: Vec<ActionDef> = set
                .iter()
                .map(|a| ActionDef {
                    label: a.label.clone(),
                    cost: a.cost + shift,
                    arrivals: a.arrivals.clone(),
                    services: a.services.clone(),
                })
                .collect();
            actions.push(shifted_set);
        }
        let shifted = SystemModel::new(states, actions, 2, 6.0).unwrap();
        let a2 = choose_action(&shifted, state, &q, v).unwrap();
        prop_assert_eq!(a1, a2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ledger_conserves_mass_on_random_runs(seed in 0u64..1_000) {
        let model = build_two_queue_preset();
        let pi = two_queue_distribution(0.3, 0.6).unwrap();
        let schedule = DistributionSchedule::stationary(pi, 3_000);
        let profile = PredictionProfile::constant(0.04, 5).unwrap();
        let cfg = ControllerConfig::bp(50.0);
        let out = run_simulation(&model, &schedule, &cfg, &profile, seed, 3_000).unwrap();
        prop_assert!(out.metrics.max_ledger_drift <= 1e-9);
        // Cumulative arrivals - served - dropped = backlog, per queue.
        let mut served = [0.0f64; 2];
        for b in &out.served {
            served[b.queue] += b.mass;
        }
        let mut arrived = [0.0f64; 2];
        let mut dropped_total = 0.0;
        for rec in &out.trace {
            for j in 0..2 {
                arrived[j] += rec.arrivals[j];
            }
            dropped_total += rec.dropped;
        }
        let last = out.trace.last().unwrap();
        let residual: f64 = (0..2)
            .map(|j| arrived[j] - served[j] - last.backlog[j])
            .sum::<f64>()
            - dropped_total;
        prop_assert!(residual.abs() <= 1e-9, "mass residual {residual}");
    }
}

/// With a zero multiplier the augmented rule degenerates to Backpressure:
/// the behavioral trace is bitwise identical.
#[test]
fn plc_with_zero_multiplier_reduces_to_backpressure() {
    let model = build_two_queue_preset();
    let pi = two_queue_distribution(0.3, 0.6).unwrap();
    let schedule = DistributionSchedule::stationary(pi, 10_000);
    let profile = PredictionProfile::constant(0.0, 5).unwrap();
    let v = 100.0;

    let bp = run_simulation(
        &model,
        &schedule,
        &ControllerConfig::bp(v),
        &profile,
        9,
        10_000,
    )
    .unwrap();

    let params = plc_core::control::derive_params(
        v,
        0.5,
        4,
        0.1,
        0.0,
        plc_core::control::ThetaMode::Simplified,
        0.005,
    )
    .unwrap();
    // Zero iteration budget pins the solved multiplier at the origin.
    let mut solver = DualSolverParams::new(v).unwrap();
    solver.max_iters = 0;
    solver.warm_iters = 0;
    let plc = run_simulation(
        &model,
        &schedule,
        &ControllerConfig::plc(params, solver),
        &profile,
        9,
        10_000,
    )
    .unwrap();

    assert_eq!(bp.trace.len(), plc.trace.len());
    for (a, b) in bp.trace.iter().zip(&plc.trace) {
        assert_eq!(a.slot, b.slot);
        assert_eq!(a.state, b.state);
        assert_eq!(a.action, b.action, "slot {}", a.slot);
        assert_eq!(a.cost, b.cost);
        assert_eq!(a.arrivals, b.arrivals);
        assert_eq!(a.services, b.services);
        assert_eq!(a.backlog, b.backlog);
        assert_eq!(a.aug_queues, b.aug_queues);
        assert_eq!(b.gamma, vec![0.0, 0.0]);
        assert_eq!(a.dropped, 0.0);
        assert_eq!(b.dropped, 0.0);
    }
    assert_eq!(bp.metrics.avg_cost, plc.metrics.avg_cost);
    assert_eq!(bp.metrics.avg_backlog, plc.metrics.avg_backlog);
}
