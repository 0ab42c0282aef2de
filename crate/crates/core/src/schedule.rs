//! Piecewise-stationary schedule of state distributions.

use rand::Rng;

use crate::error::Error;
use crate::model::Distribution;
use crate::Result;

/// A list of `(start slot, distribution)` segments covering `[0, horizon)`.
/// The last segment extends past the horizon so prediction windows near the
/// end of a run stay defined.
#[derive(Debug, Clone)]
pub struct DistributionSchedule {
    segments: Vec<(u64, Distribution)>,
    horizon: u64,
}

impl DistributionSchedule {
    pub fn new(segments: Vec<(u64, Distribution)>, horizon: u64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSchedule("no segments".into()));
        }
        if segments[0].0 != 0 {
            return Err(Error::InvalidSchedule("first segment must start at 0".into()));
        }
        let m = segments[0].1.len();
        for pair in segments.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidSchedule(
                    "segment starts must be strictly increasing".into(),
                ));
            }
        }
        if segments.iter().any(|(_, d)| d.len() != m) {
            return Err(Error::InvalidSchedule(
                "all segments must share the same state space".into(),
            ));
        }
        Ok(Self { segments, horizon })
    }

    /// Single-segment schedule.
    pub fn stationary(pi: Distribution, horizon: u64) -> Self {
        Self {
            segments: vec![(0, pi)],
            horizon,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.segments[0].1.len()
    }

    pub fn segments(&self) -> &[(u64, Distribution)] {
        &self.segments
    }

    /// Slots at which the distribution changes (all segment starts after 0).
    pub fn change_points(&self) -> impl Iterator<Item = u64> + '_ {
        self.segments.iter().skip(1).map(|(t, _)| *t)
    }

    /// The distribution active at slot `t`.
    pub fn at(&self, t: u64) -> &Distribution {
        let idx = match self.segments.binary_search_by_key(&t, |(s, _)| *s) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        &self.segments[idx].1
    }

    /// Draw one state index from the distribution active at slot `t`.
    pub fn sample(&self, t: u64, rng: &mut impl Rng) -> usize {
        let pi = self.at(t);
        let u: f64 = rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        for (i, p) in pi.probs().iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        pi.len() - 1
    }
}
