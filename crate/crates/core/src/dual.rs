//! Lagrangian dual of the deterministic problem.
//!
//! The dual function decomposes over states: for a multiplier `gamma`,
//! each state contributes the minimum over its actions of
//! `V*f + sum_j gamma_j * (A_j - mu_j)`, weighted by the state probability.
//! `solve_multiplier` runs projected subgradient ascent on this concave
//! function; `grid_oracle` brute-forces the same maximization on a lattice
//! and serves as the independent check.
//!
//! Because the objective carries the `V` factor, the dual optimum equals
//! `V` times the optimal long-run average cost, and the argmax scales
//! exactly linearly in `V` (verified by the oracle tests).

use rand::Rng;

use crate::error::Error;
use crate::model::{Distribution, SystemModel};
use crate::Result;

/// Nonnegative multiplier vector, one entry per queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    gamma: Vec<f64>,
}

impl Multiplier {
    pub fn zeros(r: usize) -> Self {
        Self { gamma: vec![0.0; r] }
    }

    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.iter().any(|g| *g < 0.0 || !g.is_finite()) {
            return Err(Error::InvalidParameter(
                "multiplier entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { gamma })
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    pub fn get(&self, j: usize) -> f64 {
        self.gamma[j]
    }

    pub fn linf(&self) -> f64 {
        self.gamma.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Parameters of the projected subgradient solve.
#[derive(Debug, Clone)]
pub struct DualSolverParams {
    /// Utility-delay tradeoff parameter, `V >= 1`.
    pub v: f64,
    /// Iteration budget for a cold solve.
    pub max_iters: usize,
    /// Step scale for cold solves; step at iteration n is `alpha0 / sqrt(n)`.
    pub alpha0: f64,
    /// Iteration budget when warm-started from a previous multiplier.
    pub warm_iters: usize,
    /// Step scale for warm solves.
    pub warm_alpha0: f64,
    /// Early-exit tolerance on the running average's movement.
    pub tolerance: f64,
}

impl DualSolverParams {
    pub fn new(v: f64) -> Result<Self> {
        if !(v >= 1.0) {
            return Err(Error::InvalidParameter(format!("V must be >= 1, got {v}")));
        }
        Ok(Self {
            v,
            max_iters: 10_000,
            alpha0: v,
            warm_iters: 120,
            warm_alpha0: (v / 20.0).max(1.0),
            tolerance: 1e-4,
        })
    }

    /// The multiplier cap `V * ln(V)` applied on an unbounded dual.
    pub fn cap(&self) -> f64 {
        self.v * self.v.ln()
    }
}

/// Result of a multiplier solve. `capped` marks the unbounded-dual path
/// where the output was pinned to `V ln(V) * 1`.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub gamma: Multiplier,
    pub capped: bool,
    pub iterations: usize,
}

/// Dual contribution of a single state: the exact minimum of
/// `V*f + sum_j gamma_j (A_j - mu_j)` over the state's finite action set,
/// with ties broken by the lowest action index.
pub fn per_state_dual(
    model: &SystemModel,
    state: usize,
    gamma: &Multiplier,
    v: f64,
) -> Result<(f64, usize)> {
    let actions = model.actions(state)?;
    let mut best = f64::INFINITY;
    let mut best_idx = 0;
    for (idx, a) in actions.iter().enumerate() {
        let mut value = v * a.cost;
        for j in 0..gamma.len() {
            value += gamma.get(j) * (a.arrivals[j] - a.services[j]);
        }
        if value < best {
            best = value;
            best_idx = idx;
        }
    }
    Ok((best, best_idx))
}

/// The dual function `g(gamma, pi)`: probability-weighted sum of the
/// per-state minima.
pub fn dual_value(model: &SystemModel, gamma: &Multiplier, pi: &Distribution, v: f64) -> Result<f64> {
    if pi.len() != model.num_states() {
        return Err(Error::DimensionMismatch {
            left: pi.len(),
            right: model.num_states(),
        });
    }
    let mut total = 0.0;
    for i in 0..model.num_states() {
        let p = pi.get(i);
        if p == 0.0 {
            continue;
        }
        total += p * per_state_dual(model, i, gamma, v)?.0;
    }
    Ok(total)
}

/// Expected drift vector `sum_i pi_i (A(s_i, x*_i) - mu(s_i, x*_i))` at the
/// per-state argmin actions. This is a supergradient of the dual at `gamma`.
fn expected_drift(
    model: &SystemModel,
    pi: &Distribution,
    gamma: &Multiplier,
    v: f64,
) -> Result<Vec<f64>> {
    let r = model.num_queues();
    let mut drift = vec![0.0; r];
    for i in 0..model.num_states() {
        let p = pi.get(i);
        if p == 0.0 {
            continue;
        }
        let (_, a_idx) = per_state_dual(model, i, gamma, v)?;
        let a = &model.actions(i)?[a_idx];
        for j in 0..r {
            drift[j] += p * (a.arrivals[j] - a.services[j]);
        }
    }
    Ok(drift)
}

/// Consecutive above-cap iterations with all-positive drift before the dual
/// is declared unbounded.
const UNBOUNDED_STREAK: usize = 100;

/// Projected subgradient ascent for `max g(gamma, pi) s.t. gamma >= 0`.
///
/// Returns the running average of the tail half of the iterates (suffix
/// averaging discards the wide early steps), clamped coordinatewise to
/// `[0, V ln V]`. If the iterate rides above the cap for a long streak while
/// the drift stays positive in every coordinate, the dual is declared
/// unbounded and the capped vector `V ln(V) * 1` is returned with the flag
/// set. A warm start reuses the previous multiplier with a shorter, finer
/// step schedule.
pub fn solve_multiplier(
    model: &SystemModel,
    pi: &Distribution,
    params: &DualSolverParams,
    warm: Option<&Multiplier>,
) -> Result<SolveOutcome> {
    let r = model.num_queues();
    let cap = params.cap();
    let (iters, alpha0) = match warm {
        Some(_) => (params.warm_iters, params.warm_alpha0),
        None => (params.max_iters, params.alpha0),
    };
    let suffix_start = iters / 2;
    let mut gamma: Vec<f64> = warm.map(|w| w.as_slice().to_vec()).unwrap_or(vec![0.0; r]);
    let mut avg = gamma.clone();
    let mut avg_count = 0usize;
    let mut above_streak = 0usize;
    let mut last_check = avg.clone();
    let mut n_done = 0usize;

    for n in 1..=iters {
        let g = Multiplier { gamma: gamma.clone() };
        let drift = expected_drift(model, pi, &g, params.v)?;
        let alpha = alpha0 / (n as f64).sqrt();
        let mut linf = 0.0f64;
        for j in 0..r {
            gamma[j] = (gamma[j] + alpha * drift[j]).max(0.0);
            linf = linf.max(gamma[j]);
        }
        let min_drift = drift.iter().cloned().fold(f64::INFINITY, f64::min);
        if linf > cap && min_drift > 0.0 {
            above_streak += 1;
            if above_streak >= UNBOUNDED_STREAK {
                return Ok(SolveOutcome {
                    gamma: Multiplier { gamma: vec![cap; r] },
                    capped: true,
                    iterations: n,
                });
            }
        } else {
            above_streak = 0;
        }
        if n > suffix_start {
            avg_count += 1;
            let w = 1.0 / avg_count as f64;
            for j in 0..r {
                avg[j] += w * (gamma[j] - avg[j]);
            }
        }
        n_done = n;
        // Cheap stationarity exit: the averaged iterate has stopped moving.
        if avg_count > 0 && n % 1024 == 0 {
            let moved = avg
                .iter()
                .zip(&last_check)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if moved < params.tolerance {
                break;
            }
            last_check.clone_from(&avg);
        }
    }
    if avg_count == 0 {
        avg.clone_from(&gamma);
    }

    let mut capped = false;
    for a in avg.iter_mut() {
        if *a > cap {
            *a = cap;
            capped = true;
        }
    }
    Ok(SolveOutcome {
        gamma: Multiplier { gamma: avg },
        capped,
        iterations: n_done,
    })
}

/// Exhaustive lattice argmax of the dual on `[0, grid_max]^r` with spacing
/// `grid_step`; ties go to the lexicographically lowest lattice point.
/// Refuses `r > 3`.
pub fn grid_oracle(
    model: &SystemModel,
    pi: &Distribution,
    v: f64,
    grid_max: f64,
    grid_step: f64,
) -> Result<Multiplier> {
    Ok(grid_oracle_detailed(model, pi, v, grid_max, grid_step)?.argmax)
}

/// Grid argmax plus diagnostics about the near-optimal plateau.
#[derive(Debug, Clone)]
pub struct GridReport {
    pub argmax: Multiplier,
    pub value: f64,
    /// Lattice points within `1e-9 * (1 + |value|)` of the maximum.
    pub plateau_points: usize,
    /// Per-coordinate extent of that plateau, in multiplier units.
    pub plateau_extent: Vec<f64>,
}

pub fn grid_oracle_detailed(
    model: &SystemModel,
    pi: &Distribution,
    v: f64,
    grid_max: f64,
    grid_step: f64,
) -> Result<GridReport> {
    let r = model.num_queues();
    if r > 3 {
        return Err(Error::InvalidParameter(format!(
            "grid oracle supports at most 3 queues, model has {r}"
        )));
    }
    if !(grid_step > 0.0) || !(grid_max >= 0.0) {
        return Err(Error::InvalidParameter("bad grid bounds".into()));
    }
    let steps = (grid_max / grid_step).round() as usize;
    // Pre-tabulate per-state action terms weighted by pi.
    let mut terms: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut state_offsets = Vec::with_capacity(model.num_states() + 1);
    for i in 0..model.num_states() {
        state_offsets.push(terms.len());
        let p = pi.get(i);
        if p == 0.0 {
            continue;
        }
        for a in model.actions(i)? {
            let drift: Vec<f64> = (0..r).map(|j| a.arrivals[j] - a.services[j]).collect();
            terms.push((p * v * a.cost, drift.iter().map(|d| p * d).collect()));
        }
    }
    state_offsets.push(terms.len());

    let eval = |gamma: &[f64]| -> f64 {
        let mut total = 0.0;
        for i in 0..model.num_states() {
            let (lo, hi) = (state_offsets[i], state_offsets[i + 1]);
            if lo == hi {
                continue;
            }
            let mut best = f64::INFINITY;
            for (base, drift) in &terms[lo..hi] {
                let mut val = *base;
                for j in 0..r {
                    val += gamma[j] * drift[j];
                }
                if val < best {
                    best = val;
                }
            }
            total += best;
        }
        total
    };

    let mut best_val = f64::NEG_INFINITY;
    let mut best_pt = vec![0.0; r];
    let mut near: Vec<Vec<f64>> = Vec::new();
    let mut lattice = vec![0usize; r];
    let total_points = (steps + 1).pow(r as u32);
    for flat in 0..total_points {
        let mut rem = flat;
        for j in (0..r).rev() {
            lattice[j] = rem % (steps + 1);
            rem /= steps + 1;
        }
        let gamma: Vec<f64> = lattice.iter().map(|k| *k as f64 * grid_step).collect();
        let val = eval(&gamma);
        if val > best_val {
            best_val = val;
            best_pt = gamma;
        }
    }
    // Second pass for the plateau diagnostic.
    let tol = 1e-9 * (1.0 + best_val.abs());
    let mut lo = best_pt.clone();
    let mut hi = best_pt.clone();
    let mut count = 0usize;
    for flat in 0..total_points {
        let mut rem = flat;
        for j in (0..r).rev() {
            lattice[j] = rem % (steps + 1);
            rem /= steps + 1;
        }
        let gamma: Vec<f64> = lattice.iter().map(|k| *k as f64 * grid_step).collect();
        if (eval(&gamma) - best_val).abs() <= tol {
            count += 1;
            for j in 0..r {
                lo[j] = lo[j].min(gamma[j]);
                hi[j] = hi[j].max(gamma[j]);
            }
            if near.len() < 8 {
                near.push(gamma);
            }
        }
    }
    Ok(GridReport {
        argmax: Multiplier { gamma: best_pt },
        value: best_val,
        plateau_points: count,
        plateau_extent: (0..r).map(|j| hi[j] - lo[j]).collect(),
    })
}

/// Search per-state randomized action mixtures for the most negative
/// max-queue expected drift. `feasible` means some mixture drives every
/// queue's drift strictly below zero.
pub fn verify_slack(
    model: &SystemModel,
    pi: &Distribution,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<(bool, f64)> {
    let r = model.num_queues();
    let m = model.num_states();
    // Per-state expected drift of each action, weighted by pi.
    let mut weighted: Vec<Vec<Vec<f64>>> = Vec::with_capacity(m);
    for i in 0..m {
        let p = pi.get(i);
        let set = model.actions(i)?;
        weighted.push(
            set.iter()
                .map(|a| (0..r).map(|j| p * (a.arrivals[j] - a.services[j])).collect())
                .collect(),
        );
    }
    let eval_mix = |mix: &[Vec<f64>]| -> f64 {
        let mut drift = vec![0.0; r];
        for i in 0..m {
            for (a, w) in weighted[i].iter().zip(&mix[i]) {
                for j in 0..r {
                    drift[j] += w * a[j];
                }
            }
        }
        drift.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };

    let mut best = f64::INFINITY;
    let mut best_mix: Vec<Vec<f64>> = Vec::new();

    // Greedy sweep over queue-weight scalarizations, including the axes.
    let mut lambdas: Vec<Vec<f64>> = (0..r)
        .map(|j| (0..r).map(|k| if k == j { 1.0 } else { 0.0 }).collect())
        .collect();
    lambdas.push(vec![1.0 / r as f64; r]);
    for _ in 0..64 {
        let raw: Vec<f64> = (0..r).map(|_| -rng.random_range(0.0f64..1.0).ln()).collect();
        let sum: f64 = raw.iter().sum();
        lambdas.push(raw.iter().map(|x| x / sum).collect());
    }
    for lambda in &lambdas {
        let mix: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let scores: Vec<f64> = weighted[i]
                    .iter()
                    .map(|a| (0..r).map(|j| lambda[j] * a[j]).sum())
                    .collect();
                let besti = scores
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                let mut w = vec![0.0; scores.len()];
                w[besti] = 1.0;
                w
            })
            .collect();
        let val = eval_mix(&mix);
        if val < best {
            best = val;
            best_mix = mix;
        }
    }

    // Random mixtures.
    for _ in 0..samples {
        let mix: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let raw: Vec<f64> = (0..weighted[i].len())
                    .map(|_| -rng.random_range(0.0f64..1.0).ln())
                    .collect();
                let sum: f64 = raw.iter().sum();
                raw.iter().map(|x| x / sum).collect()
            })
            .collect();
        let val = eval_mix(&mix);
        if val < best {
            best = val;
            best_mix = mix;
        }
    }

    // Local polish: subgradient descent on the max-drift objective over the
    // product of per-state simplices.
    if !best_mix.is_empty() {
        let mut mix = best_mix.clone();
        for step in 0..200 {
            let mut drift = vec![0.0; r];
            for i in 0..m {
                for (a, w) in weighted[i].iter().zip(&mix[i]) {
                    for j in 0..r {
                        drift[j] += w * a[j];
                    }
                }
            }
            let jstar = drift
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(j, _)| j)
                .unwrap();
            let eta = 0.5 / (1.0 + step as f64).sqrt();
            for i in 0..m {
                for (k, a) in weighted[i].iter().enumerate() {
                    mix[i][k] -= eta * a[jstar];
                }
                project_simplex(&mut mix[i]);
            }
            let val = eval_mix(&mix);
            if val < best {
                best = val;
                best_mix.clone_from(&mix);
            }
        }
    }

    Ok((best < 0.0, best))
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(x: &mut [f64]) {
    let n = x.len();
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    let mut found = false;
    for (k, v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - 1.0) / (k as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
        } else {
            found = true;
            break;
        }
    }
    let _ = found;
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
        sum += *v;
    }
    if sum > 0.0 {
        for v in x.iter_mut() {
            *v /= sum;
        }
    } else {
        let u = 1.0 / n as f64;
        for v in x.iter_mut() {
            *v = u;
        }
    }
}
