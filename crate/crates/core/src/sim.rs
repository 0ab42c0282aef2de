//! Discrete-time simulation engine.
//!
//! Drives states from a piecewise-stationary schedule, feeds a controller
//! built from the registry, applies the chosen actions to the queues, and
//! keeps fluid LIFO ledgers so per-packet delay can be measured. Fully
//! deterministic given the seed: states and prediction noise come from two
//! independent streams of the same seeded generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{build_controller, ControllerConfig, EstimateBranch, SlotEvents, SlotInput};
use crate::dual::Multiplier;
use crate::error::Error;
use crate::model::{queue_update, QueueVector, SystemModel};
use crate::prediction::{synthesize_prediction, PredictionProfile};
use crate::schedule::DistributionSchedule;
use crate::Result;

/// One queue's LIFO ledger: a stack of `(arrival slot, remaining mass)`
/// batches. Service consumes from the most recent batch first.
#[derive(Debug, Clone, Default)]
pub struct LifoLedger {
    stack: Vec<(u64, f64)>,
}

impl LifoLedger {
    pub fn total(&self) -> f64 {
        self.stack.iter().map(|(_, m)| m).sum()
    }

    pub fn push(&mut self, slot: u64, mass: f64) {
        if mass > 0.0 {
            self.stack.push((slot, mass));
        }
    }

    /// Serve up to `amount` of mass, most recent batch first. Returns the
    /// `(arrival slot, mass)` pieces actually served; excess service beyond
    /// the stacked mass is wasted.
    pub fn pop(&mut self, mut amount: f64) -> Vec<(u64, f64)> {
        let mut served = Vec::new();
        while amount > 0.0 {
            match self.stack.last_mut() {
                None => break,
                Some((slot, mass)) => {
                    if *mass <= amount {
                        amount -= *mass;
                        served.push((*slot, *mass));
                        self.stack.pop();
                    } else {
                        *mass -= amount;
                        served.push((*slot, amount));
                        amount = 0.0;
                    }
                }
            }
        }
        served
    }

    /// Annihilate all stacked mass (packet dropping). Returns the mass.
    pub fn clear(&mut self) -> f64 {
        let total = self.total();
        self.stack.clear();
        total
    }
}

/// One served piece of mass, for delay accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServedBatch {
    pub queue: usize,
    pub arrival_slot: u64,
    pub served_slot: u64,
    pub mass: f64,
}

/// Per-slot record of everything the run did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub slot: u64,
    pub state: usize,
    pub action: usize,
    pub cost: f64,
    pub arrivals: Vec<f64>,
    /// Service offered by the chosen action (before the backlog floor).
    pub services: Vec<f64>,
    /// Backlog after the slot's queue update.
    pub backlog: Vec<f64>,
    /// Decision weights: backlog plus clipped multiplier offset, after any
    /// drop executed this slot.
    pub aug_queues: Vec<f64>,
    /// Multiplier snapshot at decision time.
    pub gamma: Vec<f64>,
    pub branch: Option<EstimateBranch>,
    pub events: SlotEvents,
    /// Mass annihilated by a drop executed this slot.
    pub dropped: f64,
}

/// Mass-weighted delay statistics of the served traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub average: f64,
    /// Average after excluding the `trim_fraction` of served mass with the
    /// largest delays.
    pub trimmed: f64,
    pub trim_fraction: f64,
    /// `(upper edge in slots, mass)` power-of-two bins.
    pub histogram: Vec<(u64, f64)>,
    pub served_mass: f64,
}

/// Detection bookkeeping against the schedule's change points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeDetection {
    pub change_slot: u64,
    pub detected_slot: Option<u64>,
    /// `detected - change`, negative when prediction pre-empts the change.
    pub delay: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub changes: Vec<ChangeDetection>,
    /// Reset events not attributed to any change point.
    pub false_positives: u64,
}

/// Derived statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub horizon: u64,
    pub avg_cost: f64,
    /// Time average of the summed backlog.
    pub avg_backlog: f64,
    pub delay: DelayStats,
    pub total_arrived: f64,
    pub dropped_mass: f64,
    pub drop_rate: f64,
    pub drop_events: u64,
    pub detection: DetectionStats,
    pub multiplier_solves: u64,
    pub cap_events: u64,
    /// Largest observed gap between the ledger mass and the queue
    /// recurrence, a conservation diagnostic.
    pub max_ledger_drift: f64,
    /// Convergence time, filled in by callers that know the target
    /// multiplier (slots from run start; `None` when never within range).
    pub t_zeta: Option<u64>,
}

/// Full output of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub served: Vec<ServedBatch>,
    pub metrics: Metrics,
}

/// Run one seeded simulation of `horizon` slots.
pub fn run_simulation(
    model: &SystemModel,
    schedule: &DistributionSchedule,
    controller: &ControllerConfig,
    profile: &PredictionProfile,
    seed: u64,
    horizon: u64,
) -> Result<RunOutput> {
    if schedule.num_states() != model.num_states() {
        return Err(Error::InvalidConfig(format!(
            "schedule covers {} states, model has {}",
            schedule.num_states(),
            model.num_states()
        )));
    }
    if schedule.horizon() < horizon {
        return Err(Error::InvalidConfig(format!(
            "schedule horizon {} shorter than run horizon {horizon}",
            schedule.horizon()
        )));
    }
    let mut ctrl = build_controller(model, controller)?;
    let r = model.num_queues();
    let mut state_rng = ChaCha8Rng::seed_from_u64(seed);
    state_rng.set_stream(0);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);

    let mut q = QueueVector::zeros(r);
    let mut ledgers: Vec<LifoLedger> = vec![LifoLedger::default(); r];
    let mut trace = Vec::with_capacity(horizon as usize);
    let mut served_log: Vec<ServedBatch> = Vec::new();

    let mut cost_sum = 0.0;
    let mut backlog_sum = 0.0;
    let mut arrived = 0.0;
    let mut dropped_mass = 0.0;
    let mut drop_events = 0u64;
    let mut solves = 0u64;
    let mut caps = 0u64;
    let mut max_drift = 0.0f64;

    for t in 0..horizon {
        let state = schedule.sample(t, &mut state_rng);
        let prediction = synthesize_prediction(schedule, t, profile, &mut noise_rng);
        let decision = ctrl.decide(&SlotInput {
            t,
            state,
            queues: &q,
            prediction: &prediction,
        })?;

        let mut dropped_now = 0.0;
        if decision.drop_now {
            for ledger in ledgers.iter_mut() {
                dropped_now += ledger.clear();
            }
            q = QueueVector::zeros(r);
            dropped_mass += dropped_now;
            drop_events += 1;
        }

        let outcome = model.evaluate_action(state, decision.action)?;
        for j in 0..r {
            let a = outcome.arrivals[j];
            arrived += a;
            ledgers[j].push(t, a);
            let served = outcome.services[j].min(q.get(j) + a);
            if served > 0.0 {
                for (arrival_slot, mass) in ledgers[j].pop(served) {
                    served_log.push(ServedBatch {
                        queue: j,
                        arrival_slot,
                        served_slot: t,
                        mass,
                    });
                }
            }
        }
        q = queue_update(&q, &outcome);
        for j in 0..r {
            let drift = (ledgers[j].total() - q.get(j)).abs();
            if drift > max_drift {
                max_drift = drift;
            }
        }

        cost_sum += outcome.cost;
        backlog_sum += q.total();
        if decision.events.multiplier_solved {
            solves += 1;
        }
        if decision.events.multiplier_capped {
            caps += 1;
        }
        trace.push(TraceRecord {
            slot: t,
            state,
            action: decision.action,
            cost: outcome.cost,
            arrivals: outcome.arrivals,
            services: outcome.services,
            backlog: q.as_slice().to_vec(),
            aug_queues: decision.aug_queues,
            gamma: decision.gamma,
            branch: decision.branch,
            events: decision.events,
            dropped: dropped_now,
        });
    }

    let delay = measure_delay(&served_log, 1.0 / controller.v);
    let detection = detection_stats(&trace, schedule, profile.horizon() as u64);
    let metrics = Metrics {
        horizon,
        avg_cost: cost_sum / horizon as f64,
        avg_backlog: backlog_sum / horizon as f64,
        delay,
        total_arrived: arrived,
        dropped_mass,
        drop_rate: if arrived > 0.0 { dropped_mass / arrived } else { 0.0 },
        drop_events,
        detection,
        multiplier_solves: solves,
        cap_events: caps,
        max_ledger_drift: max_drift,
        t_zeta: None,
    };
    Ok(RunOutput {
        trace,
        served: served_log,
        metrics,
    })
}

/// Mass-weighted delay statistics; `trim_fraction` of the served mass with
/// the largest delays is excluded from the trimmed average.
pub fn measure_delay(served: &[ServedBatch], trim_fraction: f64) -> DelayStats {
    let trim_fraction = trim_fraction.clamp(0.0, 1.0);
    let total: f64 = served.iter().map(|b| b.mass).sum();
    if total <= 0.0 {
        return DelayStats {
            average: 0.0,
            trimmed: 0.0,
            trim_fraction,
            histogram: Vec::new(),
            served_mass: 0.0,
        };
    }
    let mut pairs: Vec<(u64, f64)> = served
        .iter()
        .map(|b| (b.served_slot - b.arrival_slot, b.mass))
        .collect();
    pairs.sort_by_key(|(d, _)| *d);

    let weighted: f64 = pairs.iter().map(|(d, m)| *d as f64 * m).sum();
    let average = weighted / total;

    // Walk from the largest delay down, discarding trim_fraction of mass.
    let mut to_trim = trim_fraction * total;
    let mut kept_mass = 0.0;
    let mut kept_weighted = 0.0;
    for (d, m) in pairs.iter().rev() {
        if to_trim >= *m {
            to_trim -= m;
        } else {
            let kept = m - to_trim;
            to_trim = 0.0;
            kept_mass += kept;
            kept_weighted += *d as f64 * kept;
        }
    }
    let trimmed = if kept_mass > 0.0 { kept_weighted / kept_mass } else { 0.0 };

    let mut histogram: Vec<(u64, f64)> = Vec::new();
    for (d, m) in &pairs {
        let upper = if *d == 0 { 0 } else { (*d).next_power_of_two() };
        match histogram.last_mut() {
            Some((u, acc)) if *u == upper => *acc += m,
            _ => histogram.push((upper, *m)),
        }
    }
    DelayStats {
        average,
        trimmed,
        trim_fraction,
        histogram,
        served_mass: total,
    }
}

/// First slot at which the augmented queue vector enters the `zeta`-ball
/// around `gamma_star` (Euclidean norm), or `None` if it never does.
pub fn convergence_time(
    trace: &[TraceRecord],
    gamma_star: &Multiplier,
    zeta: f64,
) -> Option<u64> {
    convergence_time_after(trace, gamma_star, zeta, 0)
}

/// Like [`convergence_time`], measured from slot `from`; the result is the
/// offset from `from`.
pub fn convergence_time_after(
    trace: &[TraceRecord],
    gamma_star: &Multiplier,
    zeta: f64,
    from: u64,
) -> Option<u64> {
    for rec in trace.iter().filter(|r| r.slot >= from) {
        let dist2: f64 = rec
            .aug_queues
            .iter()
            .zip(gamma_star.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if dist2.sqrt() <= zeta {
            return Some(rec.slot - from);
        }
    }
    None
}

/// Match reset events in the trace against the schedule's change points.
///
/// Each change point claims the first reset event from `w` slots before it
/// (prediction can pre-empt a change) up to the next change point; every
/// other reset event counts as a false positive.
pub fn detection_stats(
    trace: &[TraceRecord],
    schedule: &DistributionSchedule,
    w: u64,
) -> DetectionStats {
    let events: Vec<u64> = trace
        .iter()
        .filter(|r| r.events.divergence_reset || r.events.reset_point_marked)
        .map(|r| r.slot)
        .collect();
    let changes: Vec<u64> = schedule.change_points().collect();
    let horizon = trace.last().map(|r| r.slot + 1).unwrap_or(0);
    let mut attributed = vec![false; events.len()];
    let mut out = Vec::with_capacity(changes.len());
    for (k, &t_k) in changes.iter().enumerate() {
        let window_end = changes.get(k + 1).copied().unwrap_or(horizon);
        let lo = t_k.saturating_sub(w);
        let mut found = None;
        for (i, &ev) in events.iter().enumerate() {
            if !attributed[i] && ev >= lo && ev < window_end {
                attributed[i] = true;
                found = Some(ev);
                break;
            }
        }
        out.push(ChangeDetection {
            change_slot: t_k,
            detected_slot: found,
            delay: found.map(|ev| ev as i64 - t_k as i64),
        });
    }
    let false_positives = attributed.iter().filter(|a| !**a).count() as u64;
    DetectionStats {
        changes: out,
        false_positives,
    }
}
