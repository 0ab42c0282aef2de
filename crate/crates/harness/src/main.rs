//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 on configuration/validation errors, 2 when
//! one or more sweep cells fail.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use plc_harness::bench::detect_bench;
use plc_harness::config::{ControllerToken, ExperimentConfig};
use plc_harness::oracle::oracle_report;
use plc_harness::scenario;
use plc_harness::sweep::{
    flat_metrics_json, run_cell, run_sweep, trace_csv, write_artifacts, CellResult,
};
use plc_core::model::build_two_queue_preset;

#[derive(Parser)]
#[command(
    name = "plc",
    about = "Predictive learning-aided control vs Backpressure: simulator and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one (controller, V, seed) cell; writes trace.csv and metrics.json.
    Run {
        /// Scenario preset: stationary | change.
        #[arg(long, conflicts_with = "config")]
        scenario: Option<String>,
        /// Experiment config file (flat key = value format).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Controller name: bp | plc.
        #[arg(long)]
        controller: String,
        #[arg(long)]
        v: f64,
        /// Constant prediction error (plc only).
        #[arg(long, default_value_t = 0.0)]
        e_w: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the scenario horizon.
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Run the full (controller, V, seed) grid of a scenario.
    Sweep {
        #[arg(long, conflicts_with = "config")]
        scenario: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the seed list, e.g. "0,1,2".
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Detection and false-positive Monte Carlo in the window-test regime.
    DetectBench {
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dual solver vs brute-force grid oracle, printed as JSON.
    Oracle {
        #[arg(long)]
        v: f64,
        /// Scenario preset whose final law supplies (p1, p2).
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value_t = 0.3)]
        p1: f64,
        #[arg(long, default_value_t = 0.6)]
        p2: f64,
        /// Lattice upper bound (defaults to 3V, which covers the benchmark optimum).
        #[arg(long)]
        grid_max: Option<f64>,
        #[arg(long, default_value_t = 0.25)]
        grid_step: f64,
    },
}

fn load_config(
    scenario_name: &Option<String>,
    config_path: &Option<PathBuf>,
) -> Result<ExperimentConfig, String> {
    match (scenario_name, config_path) {
        (Some(name), None) => scenario::by_name(name).map_err(|e| e.to_string()),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_text(&text).map_err(|e| e.to_string())
        }
        (None, None) => Err("one of --scenario or --config is required".into()),
        (Some(_), Some(_)) => Err("--scenario conflicts with --config".into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            config,
            controller,
            v,
            e_w,
            seed,
            out_dir,
            horizon,
        } => {
            let mut cfg = match load_config(&scenario, &config) {
                Ok(c) => c,
                Err(e) => return validation_error(&e),
            };
            if let Some(h) = horizon {
                cfg.horizon = h;
                if let Some((start, _, _)) = cfg.segments.last() {
                    if *start >= h {
                        return validation_error("horizon override cuts off a schedule segment");
                    }
                }
            }
            let token = if controller == "bp" {
                ControllerToken::bp()
            } else {
                ControllerToken {
                    name: controller.clone(),
                    e_w: Some(e_w),
                    curve: None,
                }
            };
            cfg.controllers = vec![token.clone()];
            cfg.v_list = vec![v];
            cfg.seeds = vec![seed];
            if let Err(e) = cfg.validate() {
                return validation_error(&e.to_string());
            }
            let model = build_two_queue_preset();
            let out = match run_cell(&model, &cfg, &token, v, seed, None) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("cell failed: {e}");
                    return ExitCode::from(2);
                }
            };
            let cell = CellResult {
                controller: token.name.clone(),
                v,
                e_w: token.average_error(cfg.window as usize),
                seed,
                metrics: out.metrics,
            };
            let metrics_json = flat_metrics_json(&cell);
            if let Err(e) = fs::create_dir_all(&out_dir)
                .and_then(|_| fs::write(out_dir.join("trace.csv"), trace_csv(&out.trace)))
                .and_then(|_| fs::write(out_dir.join("metrics.json"), &metrics_json))
            {
                eprintln!("writing artifacts failed: {e}");
                return ExitCode::from(2);
            }
            println!("{metrics_json}");
            ExitCode::SUCCESS
        }
        Command::Sweep {
            scenario,
            config,
            out_dir,
            seeds,
            horizon,
        } => {
            let mut cfg = match load_config(&scenario, &config) {
                Ok(c) => c,
                Err(e) => return validation_error(&e),
            };
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            if let Some(list) = seeds {
                let parsed: Result<Vec<u64>, _> =
                    list.split(',').map(|s| s.trim().parse()).collect();
                match parsed {
                    Ok(s) => cfg.seeds = s,
                    Err(_) => return validation_error(&format!("bad seed list '{list}'")),
                }
            }
            cfg.out_dir = out_dir.display().to_string();
            if let Err(e) = cfg.validate() {
                return validation_error(&e.to_string());
            }
            let outcome = match run_sweep(&cfg) {
                Ok(o) => o,
                Err(e) => return validation_error(&e.to_string()),
            };
            if let Err(e) = fs::create_dir_all(&out_dir)
                .and_then(|_| fs::write(out_dir.join("config.txt"), cfg.to_text()))
                .and_then(|_| write_artifacts(&out_dir, &outcome))
            {
                eprintln!("writing artifacts failed: {e}");
                return ExitCode::from(2);
            }
            eprintln!(
                "{} cells completed, {} failed; artifacts in {}",
                outcome.cells.len(),
                outcome.failures.len(),
                out_dir.display()
            );
            for (cell, err) in &outcome.failures {
                eprintln!("  failed: {cell}: {err}");
            }
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Command::DetectBench { trials, seed } => {
            let report = detect_bench(trials, seed);
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialize"));
            ExitCode::SUCCESS
        }
        Command::Oracle {
            v,
            scenario,
            p1,
            p2,
            grid_max,
            grid_step,
        } => {
            let (p1, p2) = match &scenario {
                Some(name) => match scenario::by_name(name) {
                    Ok(cfg) => {
                        let (_, a, b) = *cfg.segments.last().expect("presets have segments");
                        (a, b)
                    }
                    Err(e) => return validation_error(&e.to_string()),
                },
                None => (p1, p2),
            };
            let grid_max = grid_max.unwrap_or(3.0 * v);
            match oracle_report(p1, p2, v, grid_max, grid_step) {
                Ok(report) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&report).expect("report serialize")
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => validation_error(&e.to_string()),
            }
        }
    }
}

fn validation_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}
