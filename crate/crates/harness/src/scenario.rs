//! Benchmark scenario presets.

use crate::config::{ControllerToken, ExperimentConfig};
use plc_core::error::Error;
use plc_core::Result;

/// Stationary benchmark: constant arrival rates `(0.3, 0.6)` over
/// `5*10^4` slots, a sweep over `V in {20, 50, 100, 150, 200, 300}`, and
/// three controllers: Backpressure, PLC with perfect prediction, and PLC
/// with average prediction error 0.04.
pub fn scenario_stationary() -> ExperimentConfig {
    ExperimentConfig {
        scenario: "stationary".into(),
        model: "two-queue".into(),
        horizon: 50_000,
        controllers: vec![
            ControllerToken::bp(),
            ControllerToken::plc_constant(0.0),
            ControllerToken::plc_constant(0.04),
        ],
        v_list: vec![20.0, 50.0, 100.0, 150.0, 200.0, 300.0],
        c: 0.5,
        window: 5,
        eps_d: 0.1,
        delta_sim: 0.005,
        theta_mode: "simplified".into(),
        seeds: (0..10).collect(),
        segments: vec![(0, 0.3, 0.6)],
        zeta: 10.0,
        out_dir: "out".into(),
    }
}

/// Change benchmark: arrival rates `(0.2, 0.4)` switching to `(0.3, 0.6)`
/// at mid-run (slot 2500 of 5000), `V = 100` only.
pub fn scenario_change() -> ExperimentConfig {
    ExperimentConfig {
        horizon: 5_000,
        scenario: "change".into(),
        v_list: vec![100.0],
        segments: vec![(0, 0.2, 0.4), (2_500, 0.3, 0.6)],
        controllers: vec![
            ControllerToken::plc_constant(0.0),
            ControllerToken::plc_constant(0.04),
            ControllerToken::bp(),
        ],
        ..scenario_stationary()
    }
}

/// Look up a preset by name.
pub fn by_name(name: &str) -> Result<ExperimentConfig> {
    match name {
        "stationary" => Ok(scenario_stationary()),
        "change" => Ok(scenario_change()),
        other => Err(Error::InvalidConfig(format!(
            "unknown scenario '{other}' (expected 'stationary' or 'change')"
        ))),
    }
}
