//! Predictive learning-aided control.
//!
//! Per slot: feed the estimator, re-solve the empirical multiplier when the
//! estimate moved, schedule a queue zeroing `w+1` slots after a confident
//! estimate changes, then run the max-weight rule on the augmented queues.

use super::{
    augmented_queue, choose_action, Controller, ControllerConfig, EstimateBranch, PlcParams,
    SlotDecision, SlotEvents, SlotInput,
};
use crate::ade::{AdeParams, AdeState};
use crate::dual::{solve_multiplier, DualSolverParams, Multiplier};
use crate::error::Error;
use crate::model::{total_variation, Distribution, QueueVector, SystemModel};
use crate::Result;

/// Estimate movement treated as "changed" for re-solves and the drop rule.
const ESTIMATE_CHANGE_TV: f64 = 1e-12;

/// Estimate jumps beyond this total variation restart the solve from
/// scratch with the full iteration budget; smaller drifts reuse the
/// previous multiplier as a warm start. Prediction noise moves the
/// estimate by well under this per slot, while a distribution change
/// sweeping through the prediction window moves it by `TV(pi_k, pi_k+1)/
/// (w+1)` per slot, which must land above it.
const COLD_RESOLVE_TV: f64 = 0.05;

pub struct PlcController {
    model: SystemModel,
    params: PlcParams,
    ade_params: AdeParams,
    solver: DualSolverParams,
    ade: AdeState,
    gamma: Multiplier,
    solved_once: bool,
    last_solved_pi: Option<Distribution>,
    last_pi_a: Option<Distribution>,
    prev_confident: bool,
    pending_drop: Option<u64>,
}

impl PlcController {
    pub fn new(model: SystemModel, params: PlcParams, solver: DualSolverParams) -> Result<Self> {
        let ade_params = params.ade_params(model.num_states())?;
        let r = model.num_queues();
        Ok(Self {
            model,
            params,
            ade_params: ade_params.clone(),
            solver,
            ade: AdeState::new(&ade_params),
            gamma: Multiplier::zeros(r),
            solved_once: false,
            last_solved_pi: None,
            last_pi_a: None,
            prev_confident: false,
            pending_drop: None,
        })
    }

    pub fn multiplier(&self) -> &Multiplier {
        &self.gamma
    }

    pub fn reset_points(&self) -> &[u64] {
        self.ade.reset_points()
    }
}

pub(super) fn build(
    model: &SystemModel,
    config: &ControllerConfig,
) -> Result<Box<dyn Controller>> {
    let setup = config.plc.as_ref().ok_or_else(|| {
        Error::InvalidConfig("controller 'plc' requires derived parameters".into())
    })?;
    Ok(Box::new(PlcController::new(
        model.clone(),
        setup.params.clone(),
        setup.solver.clone(),
    )?))
}

impl Controller for PlcController {
    fn name(&self) -> &'static str {
        "plc"
    }

    fn decide(&mut self, input: &SlotInput<'_>) -> Result<SlotDecision> {
        let mut events = SlotEvents::default();

        // Estimation.
        let ade_events = self
            .ade
            .update(input.t, input.state, input.prediction, &self.ade_params)?;
        events.divergence_reset = ade_events.divergence_reset;
        events.reset_point_marked = ade_events.reset_point_marked;
        let pi_a = self.ade.estimate_output(input.prediction, &self.ade_params);

        // Learning: re-solve only when the estimate moved since the last
        // solve; warm-start unless it jumped.
        let moved_since_solve = match &self.last_solved_pi {
            None => f64::INFINITY,
            Some(prev) => total_variation(&pi_a, prev)?,
        };
        if moved_since_solve > ESTIMATE_CHANGE_TV {
            let warm = (self.solved_once && moved_since_solve <= COLD_RESOLVE_TV)
                .then_some(&self.gamma);
            let out = solve_multiplier(&self.model, &pi_a, &self.solver, warm)?;
            self.gamma = out.gamma;
            self.solved_once = true;
            self.last_solved_pi = Some(pi_a.clone());
            events.multiplier_solved = true;
            events.multiplier_capped = out.capped;
        }

        // Dropping: when a confident estimate changes, zero the queues w+1
        // slots ahead. This only happens when a long-lasting stretch ends.
        if self.prev_confident {
            if let Some(prev) = &self.last_pi_a {
                if total_variation(&pi_a, prev)? > ESTIMATE_CHANGE_TV {
                    debug_assert!(self.pending_drop.is_none());
                    self.pending_drop = Some(input.t + self.params.w + 1);
                    events.drop_scheduled = true;
                }
            }
        }

        // Execute a due drop before action selection.
        let drop_now = self.pending_drop == Some(input.t);
        if drop_now {
            self.pending_drop = None;
        }
        let zeroed;
        let q_eff: &QueueVector = if drop_now {
            zeroed = QueueVector::zeros(input.queues.len());
            &zeroed
        } else {
            input.queues
        };

        // Control: max-weight on the multiplier-augmented queues.
        let aug = augmented_queue(q_eff, &self.gamma, self.params.theta);
        let action = choose_action(&self.model, input.state, &aug, self.params.v)?;

        let confident = self.ade.view_confident();
        let branch = if confident {
            EstimateBranch::History
        } else {
            EstimateBranch::Prediction
        };
        self.prev_confident = confident;
        self.last_pi_a = Some(pi_a);

        Ok(SlotDecision {
            action,
            drop_now,
            gamma: self.gamma.as_slice().to_vec(),
            aug_queues: aug,
            branch: Some(branch),
            events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{derive_params, ThetaMode};
    use crate::model::{build_two_queue_preset, two_queue_distribution};
    use crate::prediction::{synthesize_prediction, PredictionProfile};
    use crate::schedule::DistributionSchedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction_solves_once_on_stationary_stream() {
        let model = build_two_queue_preset();
        let params =
            derive_params(20.0, 0.5, 4, 0.1, 0.0, ThetaMode::Simplified, 0.005).unwrap();
        let solver = DualSolverParams::new(20.0).unwrap();
        let mut ctrl = PlcController::new(model.clone(), params, solver).unwrap();
        let pi = two_queue_distribution(0.3, 0.6).unwrap();
        let schedule = DistributionSchedule::stationary(pi, 3000);
        let profile = PredictionProfile::constant(0.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = QueueVector::zeros(2);
        let mut solves = 0;
        for t in 0..1500u64 {
            let s = schedule.sample(t, &mut rng);
            let win = synthesize_prediction(&schedule, t, &profile, &mut rng);
            let dec = ctrl
                .decide(&SlotInput {
                    t,
                    state: s,
                    queues: &q,
                    prediction: &win,
                })
                .unwrap();
            if dec.events.multiplier_solved {
                solves += 1;
            }
            assert!(!dec.drop_now, "perfect prediction never drops");
            let out = model.evaluate_action(s, dec.action).unwrap();
            q = crate::model::queue_update(&q, &out);
        }
        assert_eq!(solves, 1, "constant estimate re-solves exactly once");
    }

    #[test]
    fn drop_fires_exactly_w_plus_one_slots_after_confident_change() {
        // Tiny single-queue model so the confidence window saturates fast.
        let states = vec!["idle".to_string(), "busy".to_string()];
        let mk = |arr: f64| {
            vec![
                crate::model::ActionDef {
                    label: "idle".into(),
                    cost: 0.0,
                    arrivals: vec![arr],
                    services: vec![0.0],
                },
                crate::model::ActionDef {
                    label: "serve".into(),
                    cost: 1.0,
                    arrivals: vec![arr],
                    services: vec![1.5],
                },
            ]
        };
        let model = crate::model::SystemModel::new(states, vec![mk(0.0), mk(1.0)], 1, 2.0).unwrap();
        let w = 1u64;
        let params = PlcParams {
            v: 5.0,
            c: 0.5,
            w,
            eps_d: 0.5,
            delta: 0.005,
            d: 2,
            t_l: 4,
            theta: 1.0,
            theta_mode: ThetaMode::Simplified,
            e_w: 0.0,
        };
        let solver = DualSolverParams::new(5.0).unwrap();
        let mut ctrl = PlcController::new(model.clone(), params, solver).unwrap();
        // Stream flips from mostly-busy to mostly-idle at slot 30.
        let a = Distribution::new(vec![0.1, 0.9]).unwrap();
        let b = Distribution::new(vec![0.9, 0.1]).unwrap();
        let schedule = DistributionSchedule::new(vec![(0, a), (30, b)], 100).unwrap();
        let profile = PredictionProfile::constant(0.0, (w + 1) as usize).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut q = QueueVector::new(vec![3.0]).unwrap();
        let mut scheduled_at = None;
        let mut dropped_at = None;
        for t in 0..60u64 {
            let s = schedule.sample(t, &mut rng);
            let win = synthesize_prediction(&schedule, t, &profile, &mut rng);
            let dec = ctrl
                .decide(&SlotInput {
                    t,
                    state: s,
                    queues: &q,
                    prediction: &win,
                })
                .unwrap();
            if dec.events.drop_scheduled && scheduled_at.is_none() {
                scheduled_at = Some(t);
            }
            if dec.drop_now {
                dropped_at = Some(t);
                let offset = (dec.gamma[0] - 1.0).max(0.0);
                assert!(
                    (dec.aug_queues[0] - offset).abs() < 1e-12,
                    "queue contribution must be zero after the drop"
                );
                break;
            }
            let out = model.evaluate_action(s, dec.action).unwrap();
            q = crate::model::queue_update(&q, &out);
            // Keep some backlog so the drop is observable.
            if q.get(0) < 1.0 {
                q = QueueVector::new(vec![q.get(0) + 2.0]).unwrap();
            }
        }
        let ts = scheduled_at.expect("confident estimate change must schedule a drop");
        assert_eq!(dropped_at, Some(ts + w + 1));
    }
}
