//! Per-slot controllers behind a common trait.
//!
//! Each control algorithm implements [`Controller`] and registers under a
//! name in [`REGISTRY`]; runs select one at runtime via
//! [`ControllerConfig::name`]. Two are built in:
//!
//! - `bp`: plain Backpressure max-weight control on the physical queues.
//! - `plc`: predictive learning-aided control, which augments the queues
//!   with a learned multiplier offset and drops stale backlog after a
//!   detected distribution change.

mod bp;
mod plc;

pub use bp::Backpressure;
pub use plc::PlcController;

use serde::{Deserialize, Serialize};

use crate::ade::INFINITE_CONFIDENCE;
use crate::dual::{DualSolverParams, Multiplier};
use crate::error::Error;
use crate::model::{QueueVector, SystemModel};
use crate::prediction::PredictionWindow;
use crate::Result;

/// How the queue offset `theta` is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThetaMode {
    /// `theta = 2 ln(V)^2 (1 + V / sqrt(T_l))`: the full selection rule,
    /// which widens the offset while the confidence window is short.
    Full,
    /// `theta = ln(V)^2`: the simplified benchmark choice.
    Simplified,
}

impl ThetaMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "simplified" => Ok(Self::Simplified),
            other => Err(Error::InvalidConfig(format!(
                "unknown theta mode '{other}' (expected 'full' or 'simplified')"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Simplified => "simplified",
        }
    }
}

/// Derived controller parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlcParams {
    pub v: f64,
    pub c: f64,
    pub w: u64,
    pub eps_d: f64,
    /// Detection error probability backing the window length.
    pub delta: f64,
    /// Detection window length in slots.
    pub d: u64,
    /// Confidence length from the selection formula `max(V^c, e_w^-2)`;
    /// [`INFINITE_CONFIDENCE`] when the prediction is perfect.
    pub t_l: u64,
    /// Queue offset subtracted from the multiplier.
    pub theta: f64,
    pub theta_mode: ThetaMode,
    /// Average prediction error the parameters were derived for.
    pub e_w: f64,
}

impl PlcParams {
    /// Estimator parameters for a model with `m` states. The effective
    /// confidence length is raised to `d` when the selection formula yields
    /// less, so the window tests keep their preconditions satisfiable.
    pub fn ade_params(&self, m: usize) -> Result<crate::ade::AdeParams> {
        let t_l_eff = if self.t_l == INFINITE_CONFIDENCE {
            INFINITE_CONFIDENCE
        } else {
            self.t_l.max(self.d)
        };
        crate::ade::AdeParams::new(t_l_eff, self.d, self.eps_d, self.w, m)
    }
}

/// Derive the controller parameters from the tradeoff parameter `V`.
///
/// The detection error probability is `V^{-ln V}`. In
/// [`ThetaMode::Full`] the window is `d = ceil(4 ln(V)^2/eps_d^2) +
/// w + 1` and `theta = 2 ln(V)^2 (1 + V/sqrt(T_l))`; in
/// [`ThetaMode::Simplified`] the window comes from the benchmark
/// recipe `d = ceil(2 ln(4/delta_sim)/eps_d^2 + w + 1)` and
/// `theta = ln(V)^2`. The confidence length is `max(V^c, e_w^-2)`, infinite
/// for perfect prediction (`e_w = 0`), in which case the estimate always
/// uses the prediction average.
pub fn derive_params(
    v: f64,
    c: f64,
    w: u64,
    eps_d: f64,
    e_w: f64,
    theta_mode: ThetaMode,
    delta_sim: f64,
) -> Result<PlcParams> {
    if !(v >= 2.0) {
        return Err(Error::InvalidParameter(format!("V must be >= 2, got {v}")));
    }
    if !(eps_d > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps_d must be positive, got {eps_d}"
        )));
    }
    if !(0.0 < c && c < 1.0) {
        return Err(Error::InvalidParameter(format!("c must lie in (0, 1), got {c}")));
    }
    if !(0.0..=2.0).contains(&e_w) {
        return Err(Error::InvalidParameter(format!(
            "e_w must lie in [0, 2], got {e_w}"
        )));
    }
    let ln_v = v.ln();
    let delta = (-ln_v * ln_v).exp(); // V^{-ln V}
    let d = match theta_mode {
        ThetaMode::Full => (4.0 * ln_v * ln_v / (eps_d * eps_d)).ceil() as u64 + w + 1,
        ThetaMode::Simplified => {
            if !(delta_sim > 0.0 && delta_sim < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "delta_sim must lie in (0, 1), got {delta_sim}"
                )));
            }
            (2.0 * (4.0 / delta_sim).ln() / (eps_d * eps_d) + (w + 1) as f64).ceil() as u64
        }
    };
    let t_l = if e_w == 0.0 {
        INFINITE_CONFIDENCE
    } else {
        v.powf(c).max(e_w.powi(-2)).ceil() as u64
    };
    let theta = match theta_mode {
        ThetaMode::Simplified => ln_v * ln_v,
        ThetaMode::Full => {
            let boost = if t_l == INFINITE_CONFIDENCE {
                0.0
            } else {
                v / (t_l as f64).sqrt()
            };
            2.0 * ln_v * ln_v * (1.0 + boost)
        }
    };
    Ok(PlcParams {
        v,
        c,
        w,
        eps_d,
        delta,
        d,
        t_l,
        theta,
        theta_mode,
        e_w,
    })
}

/// Elementwise `q_j + max(gamma_j - theta, 0)`: the decision weight used by
/// the max-weight rule. With a zero multiplier this is the plain backlog.
pub fn augmented_queue(q: &QueueVector, gamma: &Multiplier, theta: f64) -> Vec<f64> {
    q.as_slice()
        .iter()
        .zip(gamma.as_slice())
        .map(|(qj, gj)| qj + (gj - theta).max(0.0))
        .collect()
}

/// Max-weight action: the exact argmax of
/// `-V f + sum_j Q_j (mu_j - A_j)` over the state's finite action set, ties
/// to the lowest action index.
pub fn choose_action(model: &SystemModel, state: usize, aug: &[f64], v: f64) -> Result<usize> {
    let actions = model.actions(state)?;
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (idx, a) in actions.iter().enumerate() {
        let mut value = -v * a.cost;
        for (j, q) in aug.iter().enumerate() {
            value += q * (a.services[j] - a.arrivals[j]);
        }
        if value > best {
            best = value;
            best_idx = idx;
        }
    }
    Ok(best_idx)
}

/// Which branch produced the estimate behind a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateBranch {
    Prediction,
    History,
}

/// Events raised while deciding one slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEvents {
    /// Window-divergence restart.
    pub divergence_reset: bool,
    /// Prediction-consistency restart (logged reset point).
    pub reset_point_marked: bool,
    /// The multiplier was re-solved this slot.
    pub multiplier_solved: bool,
    /// The solve hit the `V ln V` cap.
    pub multiplier_capped: bool,
    /// A queue zeroing was scheduled `w+1` slots ahead.
    pub drop_scheduled: bool,
}

/// Everything the engine needs to apply one slot's decision.
#[derive(Debug, Clone)]
pub struct SlotDecision {
    pub action: usize,
    /// Zero the queues at the start of this slot (scheduled `w+1` slots
    /// earlier by the learning step).
    pub drop_now: bool,
    /// Multiplier snapshot at decision time.
    pub gamma: Vec<f64>,
    /// Augmented queue vector the action was chosen against (after any
    /// drop applied this slot).
    pub aug_queues: Vec<f64>,
    pub branch: Option<EstimateBranch>,
    pub events: SlotEvents,
}

/// What a controller sees each slot.
#[derive(Debug)]
pub struct SlotInput<'a> {
    pub t: u64,
    pub state: usize,
    pub queues: &'a QueueVector,
    pub prediction: &'a PredictionWindow,
}

/// A per-slot control strategy. Implementations are single-owner state
/// machines advanced once per slot by the simulation engine.
pub trait Controller {
    fn name(&self) -> &'static str;
    fn decide(&mut self, input: &SlotInput<'_>) -> Result<SlotDecision>;
}

/// Runtime selection of a controller implementation.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    /// Registry key: `bp` or `plc`.
    pub name: String,
    pub v: f64,
    /// Required for `plc`, ignored by `bp`.
    pub plc: Option<PlcSetup>,
}

#[derive(Debug, Clone)]
pub struct PlcSetup {
    pub params: PlcParams,
    pub solver: DualSolverParams,
}

impl ControllerConfig {
    pub fn bp(v: f64) -> Self {
        Self {
            name: "bp".into(),
            v,
            plc: None,
        }
    }

    pub fn plc(params: PlcParams, solver: DualSolverParams) -> Self {
        Self {
            name: "plc".into(),
            v: params.v,
            plc: Some(PlcSetup { params, solver }),
        }
    }
}

type BuilderFn = fn(&SystemModel, &ControllerConfig) -> Result<Box<dyn Controller>>;

/// Name-to-builder table of the available control strategies.
pub const REGISTRY: &[(&str, BuilderFn)] = &[
    ("bp", bp::build),
    ("plc", plc::build),
];

/// Names of the registered controllers.
pub fn controller_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// Instantiate the controller registered under `config.name`.
pub fn build_controller(
    model: &SystemModel,
    config: &ControllerConfig,
) -> Result<Box<dyn Controller>> {
    let builder = REGISTRY
        .iter()
        .find(|(n, _)| *n == config.name)
        .map(|(_, b)| b)
        .ok_or_else(|| Error::UnknownController(config.name.clone()))?;
    builder(model, config)
}
