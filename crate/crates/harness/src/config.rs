//! Experiment configuration: a flat `key = value` text format with a fixed
//! key set, lossless round-tripping, and precondition validation.

use plc_core::control::ThetaMode;
use plc_core::error::Error;
use plc_core::model::{two_queue_distribution, Distribution};
use plc_core::schedule::DistributionSchedule;
use plc_core::Result;

/// One controller selection: the registry name plus its prediction error
/// configuration (a constant average error or an explicit curve).
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerToken {
    pub name: String,
    /// Constant error-curve value; mutually exclusive with `curve`.
    pub e_w: Option<f64>,
    /// Explicit error curve `e(0..=w)`.
    pub curve: Option<Vec<f64>>,
}

impl ControllerToken {
    pub fn bp() -> Self {
        Self {
            name: "bp".into(),
            e_w: None,
            curve: None,
        }
    }

    pub fn plc_constant(e_w: f64) -> Self {
        Self {
            name: "plc".into(),
            e_w: Some(e_w),
            curve: None,
        }
    }

    /// Error curve for a window of `window` slots.
    pub fn error_curve(&self, window: usize) -> Vec<f64> {
        match (&self.curve, self.e_w) {
            (Some(c), _) => c.clone(),
            (None, Some(e)) => vec![e; window],
            (None, None) => vec![0.0; window],
        }
    }

    /// Average error of the configured curve.
    pub fn average_error(&self, window: usize) -> f64 {
        let c = self.error_curve(window);
        c.iter().sum::<f64>() / c.len() as f64
    }

    fn emit(&self) -> String {
        match (&self.curve, self.e_w) {
            (Some(c), _) => format!(
                "{}(curve={})",
                self.name,
                c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":")
            ),
            (None, Some(e)) => format!("{}(ew={e})", self.name),
            (None, None) => self.name.clone(),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(open) = s.find('(') {
            let name = s[..open].to_string();
            let inner = s[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::InvalidConfig(format!("unclosed controller token '{s}'")))?;
            if let Some(v) = inner.strip_prefix("ew=") {
                let e_w: f64 = v
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad ew value '{v}'")))?;
                Ok(Self {
                    name,
                    e_w: Some(e_w),
                    curve: None,
                })
            } else if let Some(v) = inner.strip_prefix("curve=") {
                let curve: Vec<f64> = v
                    .split(':')
                    .map(|x| {
                        x.parse()
                            .map_err(|_| Error::InvalidConfig(format!("bad curve entry '{x}'")))
                    })
                    .collect::<Result<_>>()?;
                Ok(Self {
                    name,
                    e_w: None,
                    curve: Some(curve),
                })
            } else {
                Err(Error::InvalidConfig(format!(
                    "unknown controller option '{inner}'"
                )))
            }
        } else {
            Ok(Self {
                name: s.to_string(),
                e_w: None,
                curve: None,
            })
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub model: String,
    pub horizon: u64,
    pub controllers: Vec<ControllerToken>,
    pub v_list: Vec<f64>,
    pub c: f64,
    /// Prediction window size `w + 1`.
    pub window: u64,
    pub eps_d: f64,
    pub delta_sim: f64,
    pub theta_mode: String,
    pub seeds: Vec<u64>,
    /// Piecewise-stationary arrival segments `(start slot, p1, p2)`.
    pub segments: Vec<(u64, f64, f64)>,
    /// Ball radius for the convergence-time metric.
    pub zeta: f64,
    pub out_dir: String,
}

const KEYS: &[&str] = &[
    "scenario",
    "model",
    "horizon",
    "controllers",
    "v_list",
    "c",
    "window",
    "eps_d",
    "delta_sim",
    "theta_mode",
    "seeds",
    "segments",
    "zeta",
    "out_dir",
];

impl ExperimentConfig {
    /// Emit the flat `key = value` text form (fixed key order).
    pub fn to_text(&self) -> String {
        let mut lines = Vec::with_capacity(KEYS.len());
        lines.push(format!("scenario = {}", self.scenario));
        lines.push(format!("model = {}", self.model));
        lines.push(format!("horizon = {}", self.horizon));
        lines.push(format!(
            "controllers = {}",
            self.controllers.iter().map(|t| t.emit()).collect::<Vec<_>>().join(",")
        ));
        lines.push(format!(
            "v_list = {}",
            self.v_list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        ));
        lines.push(format!("c = {}", self.c));
        lines.push(format!("window = {}", self.window));
        lines.push(format!("eps_d = {}", self.eps_d));
        lines.push(format!("delta_sim = {}", self.delta_sim));
        lines.push(format!("theta_mode = {}", self.theta_mode));
        lines.push(format!(
            "seeds = {}",
            self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
        ));
        lines.push(format!(
            "segments = {}",
            self.segments
                .iter()
                .map(|(t, p1, p2)| format!("{t}:{p1}:{p2}"))
                .collect::<Vec<_>>()
                .join(";")
        ));
        lines.push(format!("zeta = {}", self.zeta));
        lines.push(format!("out_dir = {}", self.out_dir));
        lines.join("\n") + "\n"
    }

    /// Parse the flat text form. Unknown keys are rejected.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::InvalidConfig(format!("unknown key '{key}'")));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate key '{key}'")));
            }
        }
        let get = |k: &str| -> Result<String> {
            map.get(k)
                .cloned()
                .ok_or_else(|| Error::InvalidConfig(format!("missing key '{k}'")))
        };
        let parse_f64 = |k: &str, v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("key '{k}': bad number '{v}'")))
        };
        let controllers = get("controllers")?
            .split(',')
            .map(ControllerToken::parse)
            .collect::<Result<Vec<_>>>()?;
        let v_list = get("v_list")?
            .split(',')
            .map(|v| parse_f64("v_list", v.trim()))
            .collect::<Result<Vec<_>>>()?;
        let seeds = get("seeds")?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad seed '{s}'")))
            })
            .collect::<Result<Vec<u64>>>()?;
        let segments = get("segments")?
            .split(';')
            .map(|seg| {
                let parts: Vec<&str> = seg.trim().split(':').collect();
                if parts.len() != 3 {
                    return Err(Error::InvalidConfig(format!(
                        "segment '{seg}' must be start:p1:p2"
                    )));
                }
                let t = parts[0]
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad segment start '{}'", parts[0])))?;
                Ok((t, parse_f64("segments", parts[1])?, parse_f64("segments", parts[2])?))
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = Self {
            scenario: get("scenario")?,
            model: get("model")?,
            horizon: get("horizon")?
                .parse()
                .map_err(|_| Error::InvalidConfig("bad horizon".into()))?,
            controllers,
            v_list,
            c: parse_f64("c", &get("c")?)?,
            window: get("window")?
                .parse()
                .map_err(|_| Error::InvalidConfig("bad window".into()))?,
            eps_d: parse_f64("eps_d", &get("eps_d")?)?,
            delta_sim: parse_f64("delta_sim", &get("delta_sim")?)?,
            theta_mode: get("theta_mode")?,
            seeds,
            segments,
            zeta: parse_f64("zeta", &get("zeta")?)?,
            out_dir: get("out_dir")?,
        };
        Ok(cfg)
    }

    /// Check every module precondition the runs will rely on. Error
    /// messages name the violated constraint.
    pub fn validate(&self) -> Result<()> {
        if self.model != "two-queue" {
            return Err(Error::InvalidConfig(format!(
                "model '{}' unknown (expected 'two-queue')",
                self.model
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if self.controllers.is_empty() {
            return Err(Error::InvalidConfig("controllers must be nonempty".into()));
        }
        if self.v_list.is_empty() {
            return Err(Error::InvalidConfig("v_list must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be nonempty".into()));
        }
        if self.window == 0 {
            return Err(Error::InvalidConfig("window (w+1) must be at least 1".into()));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::InvalidConfig("zeta must be positive".into()));
        }
        ThetaMode::parse(&self.theta_mode)?;
        let names: Vec<&str> = plc_core::control::controller_names();
        for token in &self.controllers {
            if !names.contains(&token.name.as_str()) {
                return Err(Error::UnknownController(token.name.clone()));
            }
            if let Some(curve) = &token.curve {
                if curve.len() != self.window as usize {
                    return Err(Error::InvalidConfig(format!(
                        "error curve length {} does not match window {}",
                        curve.len(),
                        self.window
                    )));
                }
                if curve.iter().any(|e| !(0.0..=2.0).contains(e)) {
                    return Err(Error::InvalidConfig(
                        "error curve entries must lie in [0, 2]".into(),
                    ));
                }
            }
            if let Some(e) = token.e_w {
                if !(0.0..=2.0).contains(&e) {
                    return Err(Error::InvalidConfig(format!(
                        "e_w {e} must lie in [0, 2]"
                    )));
                }
            }
        }
        // Parameter derivation must succeed for every (controller, V) cell.
        for token in &self.controllers {
            if token.name != "plc" {
                continue;
            }
            for &v in &self.v_list {
                plc_core::control::derive_params(
                    v,
                    self.c,
                    self.window - 1,
                    self.eps_d,
                    token.average_error(self.window as usize),
                    ThetaMode::parse(&self.theta_mode)?,
                    self.delta_sim,
                )?;
            }
        }
        self.schedule()?;
        Ok(())
    }

    /// Build the arrival-law schedule described by `segments`.
    pub fn schedule(&self) -> Result<DistributionSchedule> {
        let segs: Vec<(u64, Distribution)> = self
            .segments
            .iter()
            .map(|(t, p1, p2)| Ok((*t, two_queue_distribution(*p1, *p2)?)))
            .collect::<Result<_>>()?;
        DistributionSchedule::new(segs, self.horizon)
    }

    /// Last change point, or 0 for a stationary schedule.
    pub fn last_change(&self) -> u64 {
        self.segments.last().map(|(t, _, _)| *t).unwrap_or(0)
    }

    /// The law in force at the end of the run.
    pub fn final_law(&self) -> Result<Distribution> {
        let (_, p1, p2) = self
            .segments
            .last()
            .ok_or_else(|| Error::InvalidConfig("segments must be nonempty".into()))?;
        two_queue_distribution(*p1, *p2)
    }
}
