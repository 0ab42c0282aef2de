//! Experiment orchestration for the PLC/Backpressure simulator: scenario
//! presets, flat-text experiment configs, seeded parameter sweeps, the
//! detection Monte Carlo bench, and the dual-solver oracle check.

pub mod bench;
pub mod config;
pub mod oracle;
pub mod scenario;
pub mod sweep;

/// Format a float with nine significant digits, for byte-stable CSVs.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.8e}")
    }
}
