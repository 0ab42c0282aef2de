//! Average distribution estimate: a pair of sample windows that blends
//! history with prediction, detects distribution change, and emits the
//! estimate driving the dual learning step.
//!
//! Two windows of state samples are maintained. The detection window trails
//! the current slot by `d` slots (its last `w+1` entries are the current
//! prediction window), while the confidence window accumulates up to `T_l`
//! samples behind it. When the two disagree in total variation by more than
//! `eps_d`, or the individual predictions drift too far from the confidence
//! window's empirical law, both windows restart `w+1` slots ahead.

use crate::error::Error;
use crate::model::{total_variation, Distribution};
use crate::prediction::PredictionWindow;
use crate::Result;

/// Sentinel for an infinite confidence length: the estimate then always
/// uses the prediction average and history never takes over.
pub const INFINITE_CONFIDENCE: u64 = u64::MAX;

/// Window and threshold parameters of the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct AdeParams {
    /// Confidence length: samples required before history is trusted.
    pub t_l: u64,
    /// Detection window length in slots.
    pub d: u64,
    /// Total-variation detection threshold.
    pub eps_d: f64,
    /// Prediction horizon `w` (window size `w + 1`).
    pub w: u64,
    /// Number of system states.
    pub m: usize,
}

impl AdeParams {
    pub fn new(t_l: u64, d: u64, eps_d: f64, w: u64, m: usize) -> Result<Self> {
        if d < w + 1 {
            return Err(Error::InvalidParameter(format!(
                "detection window d={d} must be at least w+1={}",
                w + 1
            )));
        }
        if t_l < d {
            return Err(Error::InvalidParameter(format!(
                "confidence length T_l={t_l} must be at least d={d}"
            )));
        }
        if !(eps_d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "detection threshold eps_d={eps_d} must be positive"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("state count must be positive".into()));
        }
        Ok(Self { t_l, d, eps_d, w, m })
    }

    fn ring_capacity(&self) -> usize {
        (self.d + self.w + 8) as usize
    }

    /// The slack added to `e(k)` in the prediction-consistency test:
    /// `2 M ln(T_l) / sqrt(T_l)`.
    pub fn consistency_slack(&self) -> f64 {
        if self.t_l == INFINITE_CONFIDENCE {
            return f64::INFINITY;
        }
        let tl = self.t_l as f64;
        2.0 * self.m as f64 * tl.ln() / tl.sqrt()
    }
}

/// Events raised by one estimator update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AdeEvents {
    /// The window-divergence test fired and both windows restarted.
    pub divergence_reset: bool,
    /// The prediction-consistency test fired; the restart slot was logged
    /// as a reset point.
    pub reset_point_marked: bool,
    /// Markers were frozen (inside the `w+1` slots after a restart).
    pub frozen: bool,
    /// The confidence window reached `T_l` on this update.
    pub confidence_reached: bool,
}

impl AdeEvents {
    pub fn any_reset(&self) -> bool {
        self.divergence_reset || self.reset_point_marked
    }
}

/// Mutable estimator state, advanced once per slot.
#[derive(Debug, Clone)]
pub struct AdeState {
    b_m: u64,
    b_d_start: u64,
    b_d_end: u64,
    /// Exclusive right edge of the samples counted into the confidence
    /// window; `b_m <= m_edge <= b_m + T_l`.
    m_edge: u64,
    counts_m: Vec<u64>,
    /// Counts over the trailing observed range `[(t+w-d)_+, t-1]`.
    counts_d: Vec<u64>,
    n_d: u64,
    ring: Vec<usize>,
    reset_points: Vec<u64>,
    frozen_pi_m: Option<Distribution>,
    next_t: u64,
    prev_b_d_start: Option<u64>,
    /// Confidence status backing the slot's output. On a restart slot this
    /// reflects the windows the comparisons ran against: the restart only
    /// governs later slots, so the fire slot still emits the pre-restart
    /// estimate.
    view_confident: bool,
    view_estimate: Option<Distribution>,
}

impl AdeState {
    pub fn new(params: &AdeParams) -> Self {
        Self {
            b_m: 0,
            b_d_start: 0,
            b_d_end: params.w,
            m_edge: 0,
            counts_m: vec![0; params.m],
            counts_d: vec![0; params.m],
            n_d: 0,
            ring: vec![usize::MAX; params.ring_capacity()],
            reset_points: Vec::new(),
            frozen_pi_m: None,
            next_t: 0,
            prev_b_d_start: None,
            view_confident: false,
            view_estimate: None,
        }
    }

    pub fn window_m_len(&self) -> u64 {
        self.m_edge - self.b_m
    }

    /// Whether the slot's output comes from the confidence window (true) or
    /// the prediction average (false).
    pub fn view_confident(&self) -> bool {
        self.view_confident
    }

    pub fn markers(&self) -> (u64, u64, u64) {
        (self.b_m, self.b_d_start, self.b_d_end)
    }

    pub fn reset_points(&self) -> &[u64] {
        &self.reset_points
    }

    fn ring_get(&self, slot: u64, cap: usize) -> usize {
        let s = self.ring[(slot % cap as u64) as usize];
        debug_assert_ne!(s, usize::MAX, "ring read before write at slot {slot}");
        s
    }

    /// Empirical distribution of the confidence window, or `None` while it
    /// is empty. Once the window reaches `T_l` samples the estimate is
    /// frozen and reused until the next restart.
    pub fn empirical_m(&self) -> Option<Distribution> {
        if let Some(f) = &self.frozen_pi_m {
            return Some(f.clone());
        }
        let n = self.window_m_len();
        if n == 0 {
            return None;
        }
        let probs: Vec<f64> = self.counts_m.iter().map(|c| *c as f64 / n as f64).collect();
        Some(Distribution::new(probs).expect("frequency vector is a distribution"))
    }

    /// Blended detection-window estimate: observed trailing samples plus the
    /// current predictions, normalized by the actual number of terms.
    pub fn empirical_d(&self, prediction: &PredictionWindow) -> Distribution {
        let m = self.counts_d.len();
        let terms = self.n_d as f64 + prediction.window() as f64;
        let mut probs = vec![0.0; m];
        for (p, c) in probs.iter_mut().zip(&self.counts_d) {
            *p = *c as f64;
        }
        for k in 0..prediction.window() {
            for (p, q) in probs.iter_mut().zip(prediction.predicted(k).probs()) {
                *p += q;
            }
        }
        for p in probs.iter_mut() {
            *p /= terms;
        }
        Distribution::new(probs).expect("blend of frequencies and distributions is a distribution")
    }

    /// Advance the estimator by one slot. Must be called once per slot with
    /// strictly increasing `t`, with `sample = S(t)` and the prediction
    /// window based at `t`.
    pub fn update(
        &mut self,
        t: u64,
        sample: usize,
        prediction: &PredictionWindow,
        params: &AdeParams,
    ) -> Result<AdeEvents> {
        if t != self.next_t {
            return Err(Error::InvalidParameter(format!(
                "updates must arrive once per slot: expected t={}, got {t}",
                self.next_t
            )));
        }
        if sample >= params.m {
            return Err(Error::UnknownState(sample));
        }
        if prediction.window() != (params.w + 1) as usize || prediction.base() != t {
            return Err(Error::InvalidParameter(
                "prediction window does not match the estimator's horizon".into(),
            ));
        }
        self.next_t = t + 1;
        let cap = params.ring_capacity();
        let mut events = AdeEvents::default();

        // Trailing-window bookkeeping for the t-1 -> t transition: slot t-1
        // enters the observed range, slot t-1+w-d leaves it.
        if t >= 1 {
            let entering = self.ring_get(t - 1, cap);
            self.counts_d[entering] += 1;
            self.n_d += 1;
            if t - 1 + params.w >= params.d {
                let leaving = t - 1 + params.w - params.d;
                let s = self.ring_get(leaving, cap);
                debug_assert!(self.counts_d[s] > 0);
                self.counts_d[s] -= 1;
                self.n_d -= 1;
            }
        }
        self.ring[(t % cap as u64) as usize] = sample;
        debug_assert_eq!(self.n_d, t.min(params.d - params.w), "trailing window size");

        // Inside the freeze span the markers stay put.
        if let Some(prev) = self.prev_b_d_start {
            if t <= prev {
                events.frozen = true;
                self.view_confident = self.window_m_len() >= params.t_l;
                self.view_estimate = self.frozen_pi_m.clone();
                self.prev_b_d_start = Some(self.b_d_start);
                self.debug_check(params);
                return Ok(events);
            }
        }

        // Trailing advance of the detection window; the confidence window
        // ingests the slots the detection window leaves behind.
        self.b_d_start = (t + params.w).saturating_sub(params.d);
        self.b_d_end = t + params.w;
        let cap_edge = self.b_m.saturating_add(params.t_l);
        let new_edge = self.b_d_start.min(cap_edge).max(self.m_edge);
        let was_confident = self.window_m_len() >= params.t_l;
        for slot in self.m_edge..new_edge {
            let s = self.ring_get(slot, cap);
            self.counts_m[s] += 1;
        }
        self.m_edge = new_edge;
        let wm = self.window_m_len();
        if wm >= params.t_l && self.frozen_pi_m.is_none() {
            let probs: Vec<f64> = self.counts_m.iter().map(|c| *c as f64 / wm as f64).collect();
            self.frozen_pi_m = Some(Distribution::new(probs).expect("frequency vector"));
            if !was_confident {
                events.confidence_reached = true;
            }
        }

        // Window-divergence test. Requires a full detection window and
        // at least d confidence samples; strict inequality, so a tie at the
        // threshold does not fire.
        let mut fired = false;
        if wm >= params.d && self.n_d == params.d - params.w {
            if let Some(pi_m) = self.empirical_m() {
                let pi_d = self.empirical_d(prediction);
                if total_variation(&pi_d, &pi_m)? > params.eps_d {
                    events.divergence_reset = true;
                    fired = true;
                }
            }
        }

        // Prediction-consistency test against the saturated window.
        if !fired && params.t_l != INFINITE_CONFIDENCE && wm == params.t_l {
            if let Some(pi_m) = self.empirical_m() {
                let slack = params.consistency_slack();
                for k in 0..prediction.window() {
                    let tv = total_variation(prediction.predicted(k), &pi_m)?;
                    if tv > prediction.bound(k) + slack {
                        events.reset_point_marked = true;
                        self.reset_points.push(t + params.w + 1);
                        fired = true;
                        break;
                    }
                }
            }
        }

        // The fire slot's output still reflects the windows the comparisons
        // ran against; the restart takes effect from the next slot.
        self.view_confident = wm >= params.t_l;
        self.view_estimate = self.frozen_pi_m.clone();
        if fired {
            let restart = t + params.w + 1;
            self.b_m = restart;
            self.b_d_start = restart;
            self.b_d_end = restart;
            self.m_edge = restart;
            self.counts_m.iter_mut().for_each(|c| *c = 0);
            self.frozen_pi_m = None;
        }
        self.prev_b_d_start = Some(self.b_d_start);
        self.debug_check(params);
        Ok(events)
    }

    /// The estimate emitted at slot `t`: the frozen confidence-window
    /// distribution once `T_l` samples accumulated, the mean of the
    /// predicted distributions before that.
    pub fn estimate_output(&self, prediction: &PredictionWindow, params: &AdeParams) -> Distribution {
        let _ = params;
        if self.view_confident {
            self.view_estimate
                .clone()
                .expect("confidence estimate frozen when the window is full")
        } else {
            prediction.mean()
        }
    }

    fn debug_check(&self, params: &AdeParams) {
        debug_assert!(self.b_d_end >= self.b_d_start);
        debug_assert!(self.m_edge >= self.b_m);
        debug_assert!(self.window_m_len() <= params.t_l);
        debug_assert_eq!(
            self.counts_m.iter().sum::<u64>(),
            self.window_m_len(),
            "confidence counts match the window span"
        );
        debug_assert_eq!(self.counts_d.iter().sum::<u64>(), self.n_d);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Distribution;
    use crate::prediction::{synthesize_prediction, PredictionProfile};
    use crate::schedule::DistributionSchedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Exact prediction window for a known schedule.
    fn exact_window(schedule: &DistributionSchedule, t: u64, w: u64) -> PredictionWindow {
        let profile = PredictionProfile::constant(0.0, (w + 1) as usize).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        synthesize_prediction(schedule, t, &profile, &mut rng)
    }

    fn two_state(p0: f64) -> Distribution {
        Distribution::new(vec![p0, 1.0 - p0]).unwrap()
    }

    #[test]
    fn empirical_m_counts_first_samples() {
        // w=0, d=1: the confidence window trails the current slot by one.
        let params = AdeParams::new(10, 1, 3.0, 0, 2).unwrap();
        let mut state = AdeState::new(&params);
        let schedule = DistributionSchedule::stationary(two_state(0.5), 100);
        let feed = [0usize, 0, 1, 1, 0, 0];
        for (t, s) in feed.iter().enumerate() {
            let win = exact_window(&schedule, t as u64, 0);
            state.update(t as u64, *s, &win, &params).unwrap();
        }
        // After updating t=5: b_d_start = 5 + 0 - 1 = 4, so the confidence
        // window holds samples 0..4 = [0, 0, 1, 1].
        assert_eq!(state.window_m_len(), 4);
        let pi = state.empirical_m().unwrap();
        assert_eq!(pi.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn empirical_m_single_sample_and_empty() {
        let params = AdeParams::new(10, 1, 3.0, 0, 2).unwrap();
        let mut state = AdeState::new(&params);
        let schedule = DistributionSchedule::stationary(two_state(0.5), 100);
        assert!(state.empirical_m().is_none());
        state.update(0, 0, &exact_window(&schedule, 0, 0), &params).unwrap();
        state.update(1, 1, &exact_window(&schedule, 1, 0), &params).unwrap();
        assert!(state.empirical_m().is_none(), "sample 0 not yet behind the edge");
        state.update(2, 1, &exact_window(&schedule, 2, 0), &params).unwrap();
        let pi = state.empirical_m().unwrap();
        assert_eq!(pi.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn empirical_m_concentrates() {
        // 1000 samples from (0.3, 0.7): within TV 0.1 in >= 99% of trials.
        let params = AdeParams::new(1000, 1, 3.0, 0, 2).unwrap();
        let pi = two_state(0.3);
        let schedule = DistributionSchedule::stationary(pi.clone(), 2000);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut ok = 0;
        let trials = 1000;
        for _ in 0..trials {
            let mut state = AdeState::new(&params);
            for t in 0..=1000u64 {
                let s = schedule.sample(t, &mut rng);
                let win = exact_window(&schedule, t, 0);
                state.update(t, s, &win, &params).unwrap();
            }
            let est = state.empirical_m().unwrap();
            if crate::model::total_variation(&est, &pi).unwrap() <= 0.1 {
                ok += 1;
            }
        }
        assert!(ok >= (trials as f64 * 0.99) as usize, "only {ok}/{trials} within TV 0.1");
    }

    #[test]
    fn empirical_d_blends_observed_and_predicted() {
        // w=1 (2 predictions), d=3 (2 observed slots when full).
        let params = AdeParams::new(10, 3, 3.0, 1, 2).unwrap();
        let mut state = AdeState::new(&params);
        let s0 = two_state(1.0);
        let s1 = two_state(0.0);
        // Truth switches to pure state-1 at slot 2, so predictions at t=2
        // are point masses on state 1 while slots 0..1 observed state 0.
        let schedule = DistributionSchedule::new(vec![(0, s0), (2, s1)], 50).unwrap();
        for t in 0..=2u64 {
            let win = exact_window(&schedule, t, 1);
            state.update(t, 0, &win, &params).unwrap();
        }
        // Observed range at t=2: slots [0, 1], both state 0; predictions at
        // slots 2 and 3 are point masses on state 1.
        let win = exact_window(&schedule, 2, 1);
        let blend = state.empirical_d(&win);
        assert_eq!(blend.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn empirical_d_unanimous_and_pure_prediction() {
        let params = AdeParams::new(10, 3, 3.0, 1, 2).unwrap();
        let state = AdeState::new(&params);
        let schedule = DistributionSchedule::stationary(two_state(0.5), 50);
        // No observed samples yet: pure prediction average.
        let win = exact_window(&schedule, 0, 1);
        assert_eq!(state.empirical_d(&win).probs(), &[0.5, 0.5]);

        // Unanimous: observed state 0 everywhere, predictions point mass 0.
        let schedule0 = DistributionSchedule::stationary(two_state(1.0), 50);
        let mut state = AdeState::new(&params);
        for t in 0..=4u64 {
            let win = exact_window(&schedule0, t, 1);
            state.update(t, 0, &win, &params).unwrap();
        }
        let win = exact_window(&schedule0, 4, 1);
        assert_eq!(state.empirical_d(&win).probs(), &[1.0, 0.0]);
    }

    #[test]
    fn divergence_reset_fires_and_freezes() {
        // Feed state 0 long enough to fill the confidence window, then
        // switch the stream (and predictions) to state 1.
        let w = 1u64;
        let d = 4u64;
        let params = AdeParams::new(4, d, 0.1, w, 2).unwrap();
        let mut state = AdeState::new(&params);
        let schedule =
            DistributionSchedule::new(vec![(0, two_state(1.0)), (7, two_state(0.0))], 100).unwrap();
        let mut fired_at = None;
        for t in 0..40u64 {
            let s = if t < 7 { 0 } else { 1 };
            let win = exact_window(&schedule, t, w);
            let ev = state.update(t, s, &win, &params).unwrap();
            if ev.divergence_reset {
                fired_at = Some(t);
                break;
            }
        }
        let t = fired_at.expect("maximal divergence must fire the window test");
        // Both windows restart at t+w+1 and stay frozen for w+1 slots.
        let (b_m, b_ds, b_de) = state.markers();
        assert_eq!(b_m, t + w + 1);
        assert_eq!(b_ds, t + w + 1);
        assert_eq!(b_de, t + w + 1);
        assert_eq!(state.window_m_len(), 0);
        let before = state.markers();
        for ft in (t + 1)..=(t + w + 1) {
            let s = if ft < 7 { 0 } else { 1 };
            let win = exact_window(&schedule, ft, w);
            let ev = state.update(ft, s, &win, &params).unwrap();
            assert!(ev.frozen, "slot {ft} should be frozen");
            assert_eq!(state.markers(), before);
        }
        let win = exact_window(&schedule, t + w + 2, w);
        let ev = state.update(t + w + 2, 1, &win, &params).unwrap();
        assert!(!ev.frozen);
    }

    #[test]
    fn consistency_test_silent_on_stationary_stream() {
        // Stationary stream, exact predictions: the consistency test stays
        // silent because the empirical law concentrates far inside the
        // slack 2 M ln(T_l)/sqrt(T_l).
        let params = AdeParams::new(1000, 10, 1.9, 1, 2).unwrap();
        let pi = two_state(0.5);
        let schedule = DistributionSchedule::stationary(pi, 5000);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut state = AdeState::new(&params);
        for t in 0..3000u64 {
            let s = schedule.sample(t, &mut rng);
            let win = exact_window(&schedule, t, 1);
            let ev = state.update(t, s, &win, &params).unwrap();
            assert!(!ev.reset_point_marked, "false reset point at {t}");
        }
        assert!(state.reset_points().is_empty());
        assert_eq!(state.window_m_len(), 1000);
    }

    #[test]
    fn estimate_output_branches() {
        let w = 1u64;
        let params = AdeParams::new(6, 2, 3.0, w, 2).unwrap();
        let mut state = AdeState::new(&params);
        let pi = two_state(0.3);
        let schedule = DistributionSchedule::stationary(pi.clone(), 100);
        // Before confidence: prediction average (exact predictions => pi).
        let win = exact_window(&schedule, 0, w);
        assert_eq!(state.estimate_output(&win, &params), pi);
        // Drive past saturation; the frozen estimate then rules regardless
        // of later predictions.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut frozen: Option<Distribution> = None;
        for t in 0..30u64 {
            let s = schedule.sample(t, &mut rng);
            let win = exact_window(&schedule, t, w);
            state.update(t, s, &win, &params).unwrap();
            if state.window_m_len() >= params.t_l {
                let out = state.estimate_output(&win, &params);
                match &frozen {
                    None => frozen = Some(out),
                    Some(f) => assert_eq!(&out, f, "frozen estimate must not drift"),
                }
            }
        }
        assert!(frozen.is_some(), "confidence window never saturated");
    }

    #[test]
    fn degenerate_one_slot_window_tracks_truth() {
        // w=0 with e(0)=0: the output equals the true distribution.
        let params = AdeParams::new(5, 1, 3.0, 0, 2).unwrap();
        let state = AdeState::new(&params);
        let pi = two_state(0.8);
        let schedule = DistributionSchedule::stationary(pi.clone(), 10);
        let win = exact_window(&schedule, 0, 0);
        assert_eq!(state.estimate_output(&win, &params), pi);
    }

    #[test]
    fn rejects_out_of_order_updates() {
        let params = AdeParams::new(5, 2, 1.0, 1, 2).unwrap();
        let mut state = AdeState::new(&params);
        let schedule = DistributionSchedule::stationary(two_state(0.5), 10);
        let win = exact_window(&schedule, 0, 1);
        state.update(0, 0, &win, &params).unwrap();
        let win2 = exact_window(&schedule, 2, 1);
        assert!(state.update(2, 0, &win2, &params).is_err());
    }

    #[test]
    fn param_validation() {
        assert!(AdeParams::new(10, 4, 0.1, 4, 2).is_err()); // d < w+1
        assert!(AdeParams::new(3, 4, 0.1, 1, 2).is_err()); // T_l < d
        assert!(AdeParams::new(10, 4, 0.0, 1, 2).is_err()); // eps_d = 0
        assert!(AdeParams::new(10, 4, 0.1, 1, 0).is_err()); // m = 0
    }

    /// Window length from the false-positive-safe recipe
    /// `d = ceil(2 ln(4/delta)/eps^2) + w + 1`.
    fn lemma_window(delta: f64, eps_d: f64, w: u64) -> u64 {
        (2.0 * (4.0 / delta).ln() / (eps_d * eps_d)).ceil() as u64 + w + 1
    }

    /// Detection Monte Carlo in the two-state regime: once the confidence
    /// window holds pre-change samples and the detection window holds
    /// post-change ones, the divergence test fires within `d` slots with
    /// frequency at least `1 - delta`.
    #[test]
    fn detection_frequency_two_state() {
        let delta = 0.005f64;
        let eps_d = 0.25f64;
        let w = 4u64;
        let d = lemma_window(delta, eps_d, w); // 219
        let params = AdeParams::new(d, d, eps_d, w, 2).unwrap();
        let pre = two_state(0.2); // fills the confidence window
        let post = two_state(0.8); // fills the detection window
        let change = d + 1;
        // The first eligible comparison happens at t = T_l + d - w, when
        // the confidence window saturates; the detection window is then
        // entirely post-change.
        let eligible = 2 * d - w;
        let horizon = eligible + d + 1;
        let schedule = DistributionSchedule::new(vec![(0, pre), (change, post)], horizon).unwrap();
        let profile = PredictionProfile::constant(0.0, (w + 1) as usize).unwrap();
        let trials = 2000;
        let mut detected = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for _ in 0..trials {
            let mut state = AdeState::new(&params);
            for t in 0..horizon {
                let s = schedule.sample(t, &mut rng);
                let win = synthesize_prediction(&schedule, t, &profile, &mut rng);
                let ev = state.update(t, s, &win, &params).unwrap();
                if ev.any_reset() {
                    // Restart markers land at or after the change, and the
                    // fire comes within d slots of full non-coherence.
                    assert!(t + w + 1 >= change, "premature reset at t={t}");
                    if t <= eligible + d {
                        detected += 1;
                    }
                    break;
                }
            }
        }
        let freq = detected as f64 / trials as f64;
        assert!(freq >= 1.0 - delta, "detection frequency {freq}");
    }

    /// Prediction advances detection: with a lookahead window the restart
    /// fires earlier (the detection window already holds the post-change
    /// distributions while a sample-only detector is still collecting).
    #[test]
    fn prediction_advances_detection() {
        let delta = 0.005f64;
        let eps_d = 0.25f64;
        let trials = 200;
        let mut mean_delay = Vec::new();
        for w in [4u64, 0] {
            // Same observed-sample budget for both detectors.
            let d = lemma_window(delta, eps_d, 4);
            let params = AdeParams::new(d, d, eps_d, w, 2).unwrap();
            let pre = two_state(0.2);
            let post = two_state(0.8);
            let change = 2 * d;
            let horizon = change + 2 * d;
            let schedule =
                DistributionSchedule::new(vec![(0, pre), (change, post)], horizon).unwrap();
            let profile = PredictionProfile::constant(0.0, (w + 1) as usize).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(606);
            let mut total = 0.0;
            let mut count = 0;
            for _ in 0..trials {
                let mut state = AdeState::new(&params);
                for t in 0..horizon {
                    let s = schedule.sample(t, &mut rng);
                    let win = synthesize_prediction(&schedule, t, &profile, &mut rng);
                    let ev = state.update(t, s, &win, &params).unwrap();
                    if ev.any_reset() && t >= change {
                        total += (t - change) as f64;
                        count += 1;
                        break;
                    }
                }
            }
            assert_eq!(count, trials, "every trial detects (w={w})");
            mean_delay.push(total / trials as f64);
        }
        let (with_lookahead, sample_only) = (mean_delay[0], mean_delay[1]);
        assert!(
            with_lookahead + 2.0 <= sample_only,
            "lookahead should fire several slots earlier: {with_lookahead:.1} vs {sample_only:.1}"
        );
    }

    /// False-positive Monte Carlo: on a stationary stream with the same
    /// window recipe the divergence test fires in at most a 2*delta
    /// fraction of trials.
    #[test]
    fn false_positive_frequency_two_state() {
        let delta = 0.005f64;
        let eps_d = 0.25f64;
        let w = 4u64;
        let d = lemma_window(delta, eps_d, w);
        let params = AdeParams::new(10 * d, d, eps_d, w, 2).unwrap();
        let pi = two_state(0.8);
        // Comparisons become eligible at t = 2d - w; leave a stretch of
        // eligible slots comparable to the detection test's exposure.
        let horizon = 2 * d + 60;
        let schedule = DistributionSchedule::stationary(pi, horizon);
        let profile = PredictionProfile::constant(0.0, (w + 1) as usize).unwrap();
        let trials = 2000;
        let mut fired = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        for _ in 0..trials {
            let mut state = AdeState::new(&params);
            for t in 0..horizon {
                let s = schedule.sample(t, &mut rng);
                let win = synthesize_prediction(&schedule, t, &profile, &mut rng);
                let ev = state.update(t, s, &win, &params).unwrap();
                if ev.any_reset() {
                    fired += 1;
                    break;
                }
            }
        }
        let freq = fired as f64 / trials as f64;
        assert!(freq <= 2.0 * delta, "false-positive frequency {freq}");
    }
}
