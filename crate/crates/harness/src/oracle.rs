//! Dual-solver oracle check: solve the multiplier two ways and report both.

use serde::Serialize;

use plc_core::dual::{grid_oracle_detailed, solve_multiplier, DualSolverParams};
use plc_core::model::{build_two_queue_preset, two_queue_distribution};
use plc_core::Result;

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub v: f64,
    pub p1: f64,
    pub p2: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    pub solver_gamma: Vec<f64>,
    pub solver_capped: bool,
    pub solver_iterations: usize,
    pub grid_gamma: Vec<f64>,
    pub grid_value: f64,
    /// Lattice points tied with the maximum (uniqueness diagnostic).
    pub plateau_points: usize,
    pub plateau_extent: Vec<f64>,
    /// Max-norm gap between the two routes.
    pub linf_gap: f64,
}

/// Solve the benchmark dual with both routes and report the gap.
pub fn oracle_report(p1: f64, p2: f64, v: f64, grid_max: f64, grid_step: f64) -> Result<OracleReport> {
    let model = build_two_queue_preset();
    let pi = two_queue_distribution(p1, p2)?;
    let params = DualSolverParams::new(v)?;
    let solved = solve_multiplier(&model, &pi, &params, None)?;
    let grid = grid_oracle_detailed(&model, &pi, v, grid_max, grid_step)?;
    let linf_gap = solved
        .gamma
        .as_slice()
        .iter()
        .zip(grid.argmax.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(OracleReport {
        v,
        p1,
        p2,
        grid_max,
        grid_step,
        solver_gamma: solved.gamma.as_slice().to_vec(),
        solver_capped: solved.capped,
        solver_iterations: solved.iterations,
        grid_gamma: grid.argmax.as_slice().to_vec(),
        grid_value: grid.value,
        plateau_points: grid.plateau_points,
        plateau_extent: grid.plateau_extent,
        linf_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_and_grid_agree_at_low_v() {
        let report = oracle_report(0.3, 0.6, 20.0, 60.0, 0.25).unwrap();
        assert!(report.linf_gap <= 0.5, "gap {}", report.linf_gap);
        assert!(!report.solver_capped);
        assert_eq!(report.plateau_points, 1);
    }
}
