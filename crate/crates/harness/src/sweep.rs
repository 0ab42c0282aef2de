//! Seeded sweep execution: every `(controller, V, seed)` cell runs
//! independently (in parallel), then results merge into deterministic,
//! byte-stable CSV and JSON artifacts.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use plc_core::control::{derive_params, ControllerConfig, ThetaMode};
use plc_core::dual::{solve_multiplier, DualSolverParams, Multiplier};
use plc_core::error::Error;
use plc_core::model::{build_two_queue_preset, SystemModel};
use plc_core::prediction::PredictionProfile;
use plc_core::sim::{convergence_time_after, run_simulation, Metrics, RunOutput, TraceRecord};
use plc_core::Result;

use crate::config::{ControllerToken, ExperimentConfig};
use crate::fmt9;

/// One executed cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub controller: String,
    pub v: f64,
    pub e_w: f64,
    pub seed: u64,
    pub metrics: Metrics,
}

/// A finished sweep: per-cell results plus any isolated cell failures.
#[derive(Debug)]
pub struct SweepOutcome {
    pub cells: Vec<CellResult>,
    pub failures: Vec<(String, Error)>,
}

/// Build the run configuration for one cell.
pub fn cell_controller_config(
    config: &ExperimentConfig,
    token: &ControllerToken,
    v: f64,
) -> Result<ControllerConfig> {
    match token.name.as_str() {
        "bp" => Ok(ControllerConfig::bp(v)),
        "plc" => {
            let params = derive_params(
                v,
                config.c,
                config.window - 1,
                config.eps_d,
                token.average_error(config.window as usize),
                ThetaMode::parse(&config.theta_mode)?,
                config.delta_sim,
            )?;
            Ok(ControllerConfig::plc(params, DualSolverParams::new(v)?))
        }
        other => Err(Error::UnknownController(other.to_string())),
    }
}

/// Run a single `(controller, V, seed)` cell, including the convergence
/// time against the final law's multiplier when a reference is supplied.
pub fn run_cell(
    model: &SystemModel,
    config: &ExperimentConfig,
    token: &ControllerToken,
    v: f64,
    seed: u64,
    gamma_ref: Option<&Multiplier>,
) -> Result<RunOutput> {
    let schedule = config.schedule()?;
    let profile = PredictionProfile::from_curve(token.error_curve(config.window as usize))?;
    let ctrl = cell_controller_config(config, token, v)?;
    let mut out = run_simulation(model, &schedule, &ctrl, &profile, seed, config.horizon)?;
    if let Some(target) = gamma_ref {
        out.metrics.t_zeta =
            convergence_time_after(&out.trace, target, config.zeta, config.last_change());
    }
    Ok(out)
}

/// Solve the final law's multiplier once per `V` (used as the convergence
/// target for every cell at that `V`).
pub fn reference_multipliers(
    model: &SystemModel,
    config: &ExperimentConfig,
) -> Result<Vec<(f64, Multiplier)>> {
    let pi = config.final_law()?;
    config
        .v_list
        .iter()
        .map(|&v| {
            let params = DualSolverParams::new(v)?;
            let out = solve_multiplier(model, &pi, &params, None)?;
            Ok((v, out.gamma))
        })
        .collect()
}

/// Execute the full grid. Cell failures are isolated and reported; the
/// remaining cells still run.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let model = build_two_queue_preset();
    let refs = reference_multipliers(&model, config)?;
    let mut jobs = Vec::new();
    for token in &config.controllers {
        for &v in &config.v_list {
            for &seed in &config.seeds {
                jobs.push((token.clone(), v, seed));
            }
        }
    }
    let results: Vec<(String, f64, f64, u64, Result<RunOutput>)> = jobs
        .par_iter()
        .map(|(token, v, seed)| {
            let gamma_ref = refs
                .iter()
                .find(|(rv, _)| rv == v)
                .map(|(_, g)| g)
                .expect("reference solved for every V");
            let out = run_cell(&model, config, token, *v, *seed, Some(gamma_ref));
            (
                token.name.clone(),
                *v,
                token.average_error(config.window as usize),
                *seed,
                out,
            )
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (controller, v, e_w, seed, res) in results {
        match res {
            Ok(out) => cells.push(CellResult {
                controller,
                v,
                e_w,
                seed,
                metrics: out.metrics,
            }),
            Err(e) => failures.push((format!("{controller} v={v} e_w={e_w} seed={seed}"), e)),
        }
    }
    sort_cells(&mut cells);
    Ok(SweepOutcome { cells, failures })
}

fn sort_cells(cells: &mut [CellResult]) {
    cells.sort_by(|a, b| {
        a.controller
            .cmp(&b.controller)
            .then(a.v.partial_cmp(&b.v).unwrap())
            .then(a.e_w.partial_cmp(&b.e_w).unwrap())
            .then(a.seed.cmp(&b.seed))
    });
}

/// Flat JSON object for one run: scalar fields only, with the detection
/// delays and delay histogram encoded as compact strings.
pub fn flat_metrics_json(cell: &CellResult) -> String {
    fn num(v: f64) -> serde_json::Value {
        serde_json::Number::from_f64(v)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }
    let m = &cell.metrics;
    let mut obj = serde_json::Map::new();
    obj.insert("controller".into(), cell.controller.clone().into());
    obj.insert("v".into(), num(cell.v));
    obj.insert("e_w".into(), num(cell.e_w));
    obj.insert("seed".into(), cell.seed.into());
    obj.insert("horizon".into(), m.horizon.into());
    obj.insert("avg_cost".into(), num(m.avg_cost));
    obj.insert("avg_backlog".into(), num(m.avg_backlog));
    obj.insert("avg_delay".into(), num(m.delay.average));
    obj.insert("trimmed_delay".into(), num(m.delay.trimmed));
    obj.insert("trim_fraction".into(), num(m.delay.trim_fraction));
    obj.insert("served_mass".into(), num(m.delay.served_mass));
    obj.insert("total_arrived".into(), num(m.total_arrived));
    obj.insert("dropped_mass".into(), num(m.dropped_mass));
    obj.insert("drop_rate".into(), num(m.drop_rate));
    obj.insert("drop_events".into(), m.drop_events.into());
    obj.insert("multiplier_solves".into(), m.multiplier_solves.into());
    obj.insert("cap_events".into(), m.cap_events.into());
    obj.insert("false_positives".into(), m.detection.false_positives.into());
    obj.insert("max_ledger_drift".into(), num(m.max_ledger_drift));
    obj.insert(
        "t_zeta".into(),
        match m.t_zeta {
            Some(t) => t.into(),
            None => serde_json::Value::Null,
        },
    );
    let delays: Vec<String> = m
        .detection
        .changes
        .iter()
        .map(|d| d.delay.map(|x| x.to_string()).unwrap_or_else(|| "miss".into()))
        .collect();
    obj.insert("detection_delays".into(), delays.join(";").into());
    let hist: Vec<String> = m
        .delay
        .histogram
        .iter()
        .map(|(upper, mass)| format!("{upper}:{}", fmt9(*mass)))
        .collect();
    obj.insert("delay_histogram".into(), hist.join(";").into());
    serde_json::to_string_pretty(&serde_json::Value::Object(obj)).expect("flat metrics serialize")
}

/// Per-run summary CSV (sorted by controller, e_w, V, seed).
pub fn summary_csv(cells: &[CellResult]) -> String {
    let mut out = String::from(
        "controller,v,e_w,seed,avg_cost,avg_backlog,avg_delay,trimmed_delay,drop_rate,t_zeta,detection_delays\n",
    );
    for c in cells {
        let t_zeta = match c.metrics.t_zeta {
            Some(t) => t.to_string(),
            None => "inf".to_string(),
        };
        let delays: Vec<String> = c
            .metrics
            .detection
            .changes
            .iter()
            .map(|d| d.delay.map(|x| x.to_string()).unwrap_or_else(|| "miss".into()))
            .collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            c.controller,
            c.v,
            c.e_w,
            c.seed,
            fmt9(c.metrics.avg_cost),
            fmt9(c.metrics.avg_backlog),
            fmt9(c.metrics.delay.average),
            fmt9(c.metrics.delay.trimmed),
            fmt9(c.metrics.drop_rate),
            t_zeta,
            delays.join(";"),
        ));
    }
    out
}

/// Aggregated statistics of one `(controller, e_w, V)` sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub controller: String,
    pub e_w: f64,
    pub v: f64,
    pub runs: usize,
    pub cost_mean: f64,
    pub cost_min: f64,
    pub cost_max: f64,
    pub backlog_mean: f64,
    pub delay_mean: f64,
    pub trimmed_mean: f64,
    pub trimmed_min: f64,
    pub trimmed_max: f64,
    pub drop_rate_mean: f64,
}

/// Collapse cells into per-(controller, e_w, V) aggregates, seed-averaged.
pub fn aggregate(cells: &[CellResult]) -> Vec<SweepPoint> {
    let mut keys: Vec<(String, f64, f64)> = cells
        .iter()
        .map(|c| (c.controller.clone(), c.e_w, c.v))
        .collect();
    keys.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.partial_cmp(&b.2).unwrap())
    });
    keys.dedup_by(|a, b| a == b);
    keys.into_iter()
        .map(|(controller, e_w, v)| {
            let group: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.controller == controller && c.e_w == e_w && c.v == v)
                .collect();
            let n = group.len() as f64;
            let mean = |f: &dyn Fn(&CellResult) -> f64| group.iter().map(|c| f(c)).sum::<f64>() / n;
            let minmax = |f: &dyn Fn(&CellResult) -> f64| {
                group.iter().map(|c| f(c)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(x), hi.max(x))
                })
            };
            let (cost_min, cost_max) = minmax(&|c: &CellResult| c.metrics.avg_cost);
            let (trimmed_min, trimmed_max) = minmax(&|c: &CellResult| c.metrics.delay.trimmed);
            SweepPoint {
                controller,
                e_w,
                v,
                runs: group.len(),
                cost_mean: mean(&|c: &CellResult| c.metrics.avg_cost),
                cost_min,
                cost_max,
                backlog_mean: mean(&|c: &CellResult| c.metrics.avg_backlog),
                delay_mean: mean(&|c: &CellResult| c.metrics.delay.average),
                trimmed_mean: mean(&|c: &CellResult| c.metrics.delay.trimmed),
                trimmed_min,
                trimmed_max,
                drop_rate_mean: mean(&|c: &CellResult| c.metrics.drop_rate),
            }
        })
        .collect()
}

/// Plot-ready CSV keyed for cost-vs-V and delay-vs-V curves.
pub fn plot_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(
        "controller,e_w,v,runs,cost_mean,cost_min,cost_max,backlog_mean,delay_mean,trimmed_mean,trimmed_min,trimmed_max,drop_rate_mean\n",
    );
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            p.controller,
            p.e_w,
            p.v,
            p.runs,
            fmt9(p.cost_mean),
            fmt9(p.cost_min),
            fmt9(p.cost_max),
            fmt9(p.backlog_mean),
            fmt9(p.delay_mean),
            fmt9(p.trimmed_mean),
            fmt9(p.trimmed_min),
            fmt9(p.trimmed_max),
            fmt9(p.drop_rate_mean),
        ));
    }
    out
}

/// Trace CSV, one row per slot. Vector fields are flattened with one
/// column per queue.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let r = trace.first().map(|t| t.arrivals.len()).unwrap_or(0);
    let mut header = String::from("slot,state,action,cost");
    for prefix in ["arr", "svc", "backlog", "aug", "gamma"] {
        for j in 1..=r {
            header.push_str(&format!(",{prefix}_{j}"));
        }
    }
    header.push_str(",branch,events,dropped\n");
    let mut out = header;
    for rec in trace {
        out.push_str(&format!("{},{},{},{}", rec.slot, rec.state, rec.action, fmt9(rec.cost)));
        for vecf in [&rec.arrivals, &rec.services, &rec.backlog, &rec.aug_queues, &rec.gamma] {
            for x in vecf {
                out.push_str(&format!(",{}", fmt9(*x)));
            }
        }
        let branch = match rec.branch {
            Some(plc_core::control::EstimateBranch::Prediction) => "prediction",
            Some(plc_core::control::EstimateBranch::History) => "history",
            None => "none",
        };
        let mut events = Vec::new();
        if rec.events.divergence_reset {
            events.push("divergence");
        }
        if rec.events.reset_point_marked {
            events.push("reset_point");
        }
        if rec.events.multiplier_solved {
            events.push("solve");
        }
        if rec.events.multiplier_capped {
            events.push("cap");
        }
        if rec.events.drop_scheduled {
            events.push("drop_scheduled");
        }
        if rec.dropped > 0.0 {
            events.push("drop");
        }
        let events = if events.is_empty() { "-".to_string() } else { events.join("|") };
        out.push_str(&format!(",{branch},{events},{}\n", fmt9(rec.dropped)));
    }
    out
}

/// Write all sweep artifacts under `dir`: per-run flat metrics JSON, the
/// summary CSV, and the plot-data CSV.
pub fn write_artifacts(dir: &Path, outcome: &SweepOutcome) -> std::io::Result<()> {
    fs::create_dir_all(dir.join("metrics"))?;
    for c in &outcome.cells {
        let name = format!(
            "{}-ew{}-v{}-seed{}.json",
            c.controller, c.e_w, c.v, c.seed
        );
        fs::write(dir.join("metrics").join(name), flat_metrics_json(c))?;
    }
    fs::write(dir.join("summary.csv"), summary_csv(&outcome.cells))?;
    fs::write(dir.join("plot_data.csv"), plot_csv(&aggregate(&outcome.cells)))?;
    Ok(())
}
