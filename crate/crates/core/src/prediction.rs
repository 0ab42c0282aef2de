//! Imperfect distribution predictions with a per-slot total-variation
//! error budget.
//!
//! A predictor exposes, at every slot `t`, the `w+1` distributions for slots
//! `t..=t+w`. Prediction quality is an error curve `e(0..=w)`: the entry for
//! horizon `k` bounds the total variation between the predicted and true
//! distribution. The synthetic predictor reads the schedule's true future
//! and perturbs it, so the error models estimator noise rather than
//! ignorance of the schedule.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::model::{total_variation, Distribution};
use crate::schedule::DistributionSchedule;
use crate::Result;

/// Error curve `e(0..=w)` in total-variation units.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionProfile {
    curve: Vec<f64>,
}

impl PredictionProfile {
    pub fn from_curve(curve: Vec<f64>) -> Result<Self> {
        if curve.is_empty() {
            return Err(Error::InvalidParameter("empty error curve".into()));
        }
        if curve.iter().any(|e| !(0.0..=2.0).contains(e)) {
            return Err(Error::InvalidParameter(
                "error curve entries must lie in [0, 2]".into(),
            ));
        }
        Ok(Self { curve })
    }

    /// Constant curve `e(k) = e` over a window of `window` slots (`w + 1`).
    pub fn constant(e: f64, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter("window must be positive".into()));
        }
        Self::from_curve(vec![e; window])
    }

    /// Window size `w + 1`.
    pub fn window(&self) -> usize {
        self.curve.len()
    }

    /// Horizon `w`.
    pub fn horizon(&self) -> usize {
        self.curve.len() - 1
    }

    pub fn error(&self, k: usize) -> f64 {
        self.curve[k]
    }

    pub fn curve(&self) -> &[f64] {
        &self.curve
    }

    /// Arithmetic mean of the error curve.
    pub fn average_error(&self) -> f64 {
        self.curve.iter().sum::<f64>() / self.curve.len() as f64
    }
}

/// Mean of the error curve.
pub fn average_error(profile: &PredictionProfile) -> f64 {
    profile.average_error()
}

/// The `w+1` predicted distributions for slots `t..=t+w`, together with the
/// per-slot error bounds they were generated under.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionWindow {
    base: u64,
    predicted: Vec<Distribution>,
    bounds: Vec<f64>,
}

impl PredictionWindow {
    pub fn base(&self) -> u64 {
        self.base
    }

    /// Window size `w + 1`.
    pub fn window(&self) -> usize {
        self.predicted.len()
    }

    pub fn horizon(&self) -> usize {
        self.predicted.len() - 1
    }

    /// Prediction for slot `base + k`.
    pub fn predicted(&self, k: usize) -> &Distribution {
        &self.predicted[k]
    }

    pub fn entries(&self) -> &[Distribution] {
        &self.predicted
    }

    /// Error bound `e(k)` the window was generated under.
    pub fn bound(&self, k: usize) -> f64 {
        self.bounds[k]
    }

    /// Mean of the predicted distributions.
    pub fn mean(&self) -> Distribution {
        let m = self.predicted[0].len();
        let w1 = self.predicted.len() as f64;
        let mut probs = vec![0.0; m];
        for d in &self.predicted {
            for (acc, p) in probs.iter_mut().zip(d.probs()) {
                *acc += p / w1;
            }
        }
        // Mean of simplex points stays on the simplex.
        Distribution::new(probs).expect("mean of distributions is a distribution")
    }
}

/// Generate the prediction window for slot `t` by perturbing the schedule's
/// true distributions.
///
/// For each horizon `k`: draw a direction uniformly on the zero-sum sphere,
/// scale it to an L1 radius uniform in `[0, e(k)]`, add it to the true
/// distribution, project back onto the simplex, and shrink toward the truth
/// if the projection pushed the total variation above `e(k)`. The bound
/// holds deterministically, not just in expectation.
pub fn synthesize_prediction(
    schedule: &DistributionSchedule,
    t: u64,
    profile: &PredictionProfile,
    rng: &mut impl Rng,
) -> PredictionWindow {
    let m = schedule.num_states();
    let mut predicted = Vec::with_capacity(profile.window());
    for k in 0..profile.window() {
        let truth = schedule.at(t + k as u64);
        let e = profile.error(k);
        if e == 0.0 {
            predicted.push(truth.clone());
            continue;
        }
        // Zero-sum direction, normalized to unit L1 norm.
        let mut dir: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mean = dir.iter().sum::<f64>() / m as f64;
        for d in dir.iter_mut() {
            *d -= mean;
        }
        let l1: f64 = dir.iter().map(|d| d.abs()).sum();
        let radius = rng.random_range(0.0..=e);
        let mut probs: Vec<f64> = if l1 > 0.0 {
            truth
                .probs()
                .iter()
                .zip(&dir)
                .map(|(p, d)| p + d * radius / l1)
                .collect()
        } else {
            truth.probs().to_vec()
        };
        crate::dual::project_simplex(&mut probs);
        // Projection can move the point; rescale toward the truth so the
        // budget holds exactly.
        let tv: f64 = probs
            .iter()
            .zip(truth.probs())
            .map(|(a, b)| (a - b).abs())
            .sum();
        if tv > e {
            let beta = e / tv;
            for (p, q) in probs.iter_mut().zip(truth.probs()) {
                *p = q + beta * (*p - q);
            }
        }
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        let dist = Distribution::new(probs).expect("perturbation stays on the simplex");
        debug_assert!(total_variation(&dist, truth).unwrap() <= e + 1e-12);
        predicted.push(dist);
    }
    PredictionWindow {
        base: t,
        predicted,
        bounds: profile.curve.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn average_error_examples() {
        let p = PredictionProfile::constant(0.0, 5).unwrap();
        assert_eq!(p.average_error(), 0.0);
        let p = PredictionProfile::constant(0.04, 5).unwrap();
        assert!((p.average_error() - 0.04).abs() < 1e-15);
        let p = PredictionProfile::from_curve(vec![0.0, 0.1]).unwrap();
        assert!((p.average_error() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_budget_reproduces_truth() {
        let pi = Distribution::new(vec![0.25, 0.75]).unwrap();
        let schedule = DistributionSchedule::stationary(pi.clone(), 100);
        let profile = PredictionProfile::constant(0.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let win = synthesize_prediction(&schedule, 10, &profile, &mut rng);
        for k in 0..5 {
            assert_eq!(win.predicted(k), &pi);
        }
    }

    #[test]
    fn tv_bound_holds_across_budgets() {
        let pi = Distribution::new(vec![0.5, 0.5]).unwrap();
        let schedule = DistributionSchedule::stationary(pi.clone(), 100);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for e in [0.0, 0.01, 0.04, 0.1] {
            let profile = PredictionProfile::constant(e, 5).unwrap();
            for _ in 0..2000 {
                let win = synthesize_prediction(&schedule, 0, &profile, &mut rng);
                for k in 0..win.window() {
                    let tv = total_variation(win.predicted(k), &pi).unwrap();
                    assert!(tv <= e + 1e-12, "tv {tv} exceeds budget {e}");
                }
            }
        }
    }

    #[test]
    fn window_straddling_change_tracks_new_segment() {
        let a = Distribution::new(vec![1.0, 0.0]).unwrap();
        let b = Distribution::new(vec![0.0, 1.0]).unwrap();
        let schedule =
            DistributionSchedule::new(vec![(0, a.clone()), (10, b.clone())], 20).unwrap();
        let profile = PredictionProfile::constant(0.0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let win = synthesize_prediction(&schedule, 8, &profile, &mut rng);
        assert_eq!(win.predicted(0), &a); // slot 8
        assert_eq!(win.predicted(1), &a); // slot 9
        assert_eq!(win.predicted(2), &b); // slot 10
        assert_eq!(win.predicted(4), &b); // slot 12
    }

    #[test]
    fn same_seed_same_output() {
        let pi = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let schedule = DistributionSchedule::stationary(pi, 100);
        let profile = PredictionProfile::constant(0.04, 5).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let w1 = synthesize_prediction(&schedule, 3, &profile, &mut r1);
        let w2 = synthesize_prediction(&schedule, 3, &profile, &mut r2);
        assert_eq!(w1, w2);
    }

    #[test]
    fn mean_of_window_is_a_distribution() {
        let pi = Distribution::new(vec![0.1, 0.9]).unwrap();
        let schedule = DistributionSchedule::stationary(pi, 100);
        let profile = PredictionProfile::constant(0.1, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let win = synthesize_prediction(&schedule, 0, &profile, &mut rng);
            let mean = win.mean();
            assert!((mean.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
