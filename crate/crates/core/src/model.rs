//! Network model: states, per-state action sets, cost/traffic/service
//! tables, and queue dynamics.
//!
//! All types are immutable after construction and all operations are pure,
//! so a model can be shared freely across concurrent simulation runs.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Absolute tolerance for the simplex sum check.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A probability vector over the `M` system states.
///
/// Entries are nonnegative and sum to one within [`SIMPLEX_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} is negative or non-finite"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Point mass on state `i` out of `m`.
    pub fn point_mass(m: usize, i: usize) -> Self {
        let mut probs = vec![0.0; m];
        probs[i] = 1.0;
        Self { probs }
    }

    /// Uniform distribution over `m` states.
    pub fn uniform(m: usize) -> Self {
        Self {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }
}

/// Total variation distance `sum_i |p_i - q_i|`; range `[0, 2]`.
pub fn total_variation(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// The cost, traffic, and service produced by one (state, action) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub cost: f64,
    /// Packets arriving to each queue.
    pub arrivals: Vec<f64>,
    /// Packets of service offered to each queue.
    pub services: Vec<f64>,
}

/// One entry of a state's action table.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDef {
    pub label: String,
    pub cost: f64,
    pub arrivals: Vec<f64>,
    pub services: Vec<f64>,
}

/// Finite network model: `M` states, a finite action set per state, and
/// tabulated cost/traffic/service values bounded by `delta_max`.
#[derive(Debug, Clone)]
pub struct SystemModel {
    states: Vec<String>,
    actions: Vec<Vec<ActionDef>>,
    num_queues: usize,
    delta_max: f64,
}

impl SystemModel {
    pub fn new(
        states: Vec<String>,
        actions: Vec<Vec<ActionDef>>,
        num_queues: usize,
        delta_max: f64,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidModel("no states".into()));
        }
        if states.len() != actions.len() {
            return Err(Error::DimensionMismatch {
                left: states.len(),
                right: actions.len(),
            });
        }
        if !(delta_max > 0.0) || !delta_max.is_finite() {
            return Err(Error::InvalidModel(format!("bad delta_max {delta_max}")));
        }
        for (i, set) in actions.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "state {i} has an empty action set"
                )));
            }
            for a in set {
                if a.arrivals.len() != num_queues || a.services.len() != num_queues {
                    return Err(Error::DimensionMismatch {
                        left: a.arrivals.len().max(a.services.len()),
                        right: num_queues,
                    });
                }
                let in_bound = a.cost.abs() <= delta_max
                    && a.arrivals.iter().all(|v| *v >= 0.0 && v.abs() <= delta_max)
                    && a.services.iter().all(|v| *v >= 0.0 && v.abs() <= delta_max);
                if !in_bound {
                    return Err(Error::InvalidModel(format!(
                        "state {i} action '{}' exceeds delta_max {delta_max}",
                        a.label
                    )));
                }
            }
        }
        Ok(Self {
            states,
            actions,
            num_queues,
            delta_max,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_queues(&self) -> usize {
        self.num_queues
    }

    pub fn delta_max(&self) -> f64 {
        self.delta_max
    }

    pub fn state_label(&self, i: usize) -> Option<&str> {
        self.states.get(i).map(|s| s.as_str())
    }

    /// Action table of one state.
    pub fn actions(&self, state: usize) -> Result<&[ActionDef]> {
        self.actions
            .get(state)
            .map(|v| v.as_slice())
            .ok_or(Error::UnknownState(state))
    }

    /// Tabulated `(cost, arrivals, services)` of one (state, action) pair.
    pub fn evaluate_action(&self, state: usize, action: usize) -> Result<ActionOutcome> {
        let set = self.actions(state)?;
        let def = set.get(action).ok_or(Error::UnknownAction { state, action })?;
        Ok(ActionOutcome {
            cost: def.cost,
            arrivals: def.arrivals.clone(),
            services: def.services.clone(),
        })
    }
}

/// Tabulated `(cost, arrivals, services)` of one (state, action) pair.
///
/// Pure and deterministic; repeated calls return identical values.
pub fn evaluate_action(model: &SystemModel, state: usize, action: usize) -> Result<ActionOutcome> {
    model.evaluate_action(state, action)
}

/// Queue backlog vector in packets. Entries never go negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueVector {
    q: Vec<f64>,
}

impl QueueVector {
    pub fn zeros(r: usize) -> Self {
        Self { q: vec![0.0; r] }
    }

    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "queue entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { q })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn get(&self, j: usize) -> f64 {
        self.q[j]
    }

    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// One slot of queue dynamics: `q'_j = max(q_j - mu_j + A_j, 0)`.
///
/// Service and arrival are netted before the floor, so arrivals within the
/// slot can absorb leftover service (null packets are transmitted when the
/// queue runs dry).
pub fn queue_update(q: &QueueVector, outcome: &ActionOutcome) -> QueueVector {
    let next = q
        .q
        .iter()
        .zip(outcome.services.iter().zip(&outcome.arrivals))
        .map(|(qj, (mu, a))| (qj - mu + a).max(0.0))
        .collect();
    QueueVector { q: next }
}

/// Number of states in the two-queue preset.
pub const TWO_QUEUE_STATES: usize = 16;
/// Actions per state in the two-queue preset.
pub const TWO_QUEUE_ACTIONS: usize = 6;

/// Decode the canonical two-queue state index into `(A1, A2, CH1, CH2)`.
///
/// States are indexed lexicographically over `(A1, A2, CH1, CH2)` with
/// `A1, A2 in {0, 1}`, `CH1 in {0, 1}`, `CH2 in {1, 2}`:
/// `index = 8*A1 + 4*A2 + 2*CH1 + (CH2 - 1)`.
pub fn two_queue_state_fields(index: usize) -> (u8, u8, u8, u8) {
    let a1 = (index >> 3) & 1;
    let a2 = (index >> 2) & 1;
    let ch1 = (index >> 1) & 1;
    let ch2 = (index & 1) + 1;
    (a1 as u8, a2 as u8, ch1 as u8, ch2 as u8)
}

/// Canonical index of a two-queue state from its fields.
pub fn two_queue_state_index(a1: u8, a2: u8, ch1: u8, ch2: u8) -> usize {
    debug_assert!(a1 <= 1 && a2 <= 1 && ch1 <= 1 && (1..=2).contains(&ch2));
    (a1 as usize) * 8 + (a2 as usize) * 4 + (ch1 as usize) * 2 + (ch2 as usize - 1)
}

/// The single-server two-queue benchmark model.
///
/// Bernoulli arrivals `A_j in {0, 1}`, channels `CH1 in {0, 1}` and
/// `CH2 in {1, 2}`, and six actions per state: serve queue 1 or 2 with power
/// `P in {0, 1, 2}`. Cost equals the allocated power, the served queue gets
/// rate `ln(1 + CH_j * P)`, the other queue gets zero.
pub fn build_two_queue_preset() -> SystemModel {
    let mut states = Vec::with_capacity(TWO_QUEUE_STATES);
    let mut actions = Vec::with_capacity(TWO_QUEUE_STATES);
    for idx in 0..TWO_QUEUE_STATES {
        let (a1, a2, ch1, ch2) = two_queue_state_fields(idx);
        states.push(format!("a{a1}{a2}-ch{ch1}{ch2}"));
        let arrivals = vec![a1 as f64, a2 as f64];
        let mut set = Vec::with_capacity(TWO_QUEUE_ACTIONS);
        for target in [1usize, 2] {
            for power in 0..=2u32 {
                let ch = if target == 1 { ch1 } else { ch2 } as f64;
                let rate = (1.0 + ch * power as f64).ln();
                let mut services = vec![0.0, 0.0];
                services[target - 1] = rate;
                set.push(ActionDef {
                    label: format!("q{target}:p{power}"),
                    cost: power as f64,
                    arrivals: arrivals.clone(),
                    services,
                });
            }
        }
        actions.push(set);
    }
    SystemModel::new(states, actions, 2, 2.0).expect("preset is valid by construction")
}

/// Product law over the two-queue preset's 16 states: Bernoulli arrivals
/// with rates `(p1, p2)` and uniform channel draws.
pub fn two_queue_distribution(p1: f64, p2: f64) -> Result<Distribution> {
    if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) {
        return Err(Error::InvalidParameter(format!(
            "arrival probabilities ({p1}, {p2}) outside [0, 1]"
        )));
    }
    let mut probs = vec![0.0; TWO_QUEUE_STATES];
    for (idx, p) in probs.iter_mut().enumerate() {
        let (a1, a2, _, _) = two_queue_state_fields(idx);
        let pa1 = if a1 == 1 { p1 } else { 1.0 - p1 };
        let pa2 = if a2 == 1 { p2 } else { 1.0 - p2 };
        *p = pa1 * pa2 * 0.25;
    }
    Distribution::new(probs)
}
