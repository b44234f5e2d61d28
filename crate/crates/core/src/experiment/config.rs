use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::lattice::Params;
use crate::tendency::Method;
use crate::timeloop::StepControl;

/// Every recognised key, in the order they are documented.
pub const KEYS: &[&str] = &[
    "tau",
    "N",
    "dt",
    "t_max",
    "s",
    "sample_every",
    "method",
    "output_path",
    "sweep_tau",
    "seed",
    "emit_scan",
    "scan_box",
    "drift_budget",
    "halve_on_breach",
    "parallel",
];

/// Full configuration of a run, sweep or scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub method: Method,
    pub output_path: PathBuf,
    pub sweep_tau: Option<Vec<f64>>,
    /// Seed for the random states used by `selftest`.
    pub seed: u64,
    /// Also write the quadratic-form scan next to the run output.
    pub emit_scan: bool,
    /// Box for `scan`; `None` means `max(N, 4)`.
    pub scan_box: Option<usize>,
    pub drift_budget: f64,
    pub halve_on_breach: bool,
    /// Run the members of a sweep concurrently.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: Params::new(0.05, 64),
            method: Method::Fast,
            output_path: PathBuf::from("sqg_run.csv"),
            sweep_tau: None,
            seed: 0,
            emit_scan: false,
            scan_box: None,
            drift_budget: StepControl::DEFAULT_DRIFT_BUDGET,
            halve_on_breach: true,
            parallel: false,
        }
    }
}

impl RunConfig {
    pub fn step_control(&self) -> StepControl {
        StepControl {
            dt: self.params.dt,
            drift_budget: self.drift_budget,
            halve_on_breach: self.halve_on_breach,
        }
    }

    pub fn scan_box(&self) -> usize {
        self.scan_box.unwrap_or(self.params.n.max(4))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.step_control().validate()?;
        if let Some(taus) = &self.sweep_tau {
            if taus.is_empty() {
                return Err(Error::invalid("sweep_tau", "needs at least one value"));
            }
        }
        Ok(())
    }
}

/// Accumulates `key=value` assignments from a file and from flags, then
/// resolves defaults that depend on other keys (`dt` follows `N`).
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    config: RunConfig,
    dt_set: bool,
    output_set: bool,
}

fn config_error(location: &str, message: impl Into<String>) -> Error {
    Error::Config {
        location: location.to_string(),
        message: message.into(),
    }
}

fn parse_value<T: std::str::FromStr>(location: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_error(location, format!("cannot parse `{value}` as a value for {key}")))
}

fn parse_bool(location: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(config_error(location, format!("cannot parse `{value}` as a boolean for {key}"))),
    }
}

fn require(location: &str, ok: bool, constraint: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(config_error(location, format!("constraint {constraint} violated")))
    }
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one assignment. `location` names the line or flag in errors.
    pub fn set(&mut self, location: &str, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let c = &mut self.config;
        match key {
            "tau" => {
                let tau: f64 = parse_value(location, key, value)?;
                require(location, tau > 0.0 && tau.is_finite(), "tau>0")?;
                c.params.tau = tau;
            }
            "N" => {
                let n: usize = parse_value(location, key, value)?;
                require(location, n >= 8, "N>=8")?;
                c.params.n = n;
            }
            "dt" => {
                let dt: f64 = parse_value(location, key, value)?;
                require(location, dt > 0.0 && dt.is_finite(), "dt>0")?;
                c.params.dt = dt;
                self.dt_set = true;
            }
            "t_max" => {
                let t: f64 = parse_value(location, key, value)?;
                require(location, t >= 0.0 && t.is_finite(), "t_max>=0")?;
                c.params.t_max = t;
            }
            "s" => {
                let s: f64 = parse_value(location, key, value)?;
                require(location, s.is_finite(), "s finite")?;
                c.params.s = s;
            }
            "sample_every" => {
                let every: usize = parse_value(location, key, value)?;
                require(location, every >= 1, "sample_every>=1")?;
                c.params.sample_every = every;
            }
            "method" => {
                c.method = value
                    .parse()
                    .map_err(|e: String| config_error(location, e))?;
            }
            "output_path" => {
                require(location, !value.is_empty(), "output_path non-empty")?;
                c.output_path = PathBuf::from(value);
                self.output_set = true;
            }
            "sweep_tau" => {
                let taus = value
                    .split(',')
                    .map(|v| parse_value::<f64>(location, key, v.trim()))
                    .collect::<Result<Vec<_>>>()?;
                require(
                    location,
                    !taus.is_empty() && taus.iter().all(|t| *t > 0.0 && t.is_finite()),
                    "sweep_tau>0",
                )?;
                c.sweep_tau = Some(taus);
            }
            "seed" => c.seed = parse_value(location, key, value)?,
            "emit_scan" => c.emit_scan = parse_bool(location, key, value)?,
            "scan_box" => {
                let b: usize = parse_value(location, key, value)?;
                require(location, b >= 4, "box>=4")?;
                c.scan_box = Some(b);
            }
            "drift_budget" => {
                let d: f64 = parse_value(location, key, value)?;
                require(location, d > 0.0 && d.is_finite(), "drift_budget>0")?;
                c.drift_budget = d;
            }
            "halve_on_breach" => c.halve_on_breach = parse_bool(location, key, value)?,
            "parallel" => c.parallel = parse_bool(location, key, value)?,
            _ => return Err(config_error(location, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line of a config file. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let location = format!("line {}", i + 1);
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_error(&location, format!("expected key=value, got `{line}`")));
            };
            self.set(&location, key.trim(), value)?;
        }
        Ok(())
    }

    /// Applies a command-line override; errors name the flag.
    pub fn apply_flag(&mut self, key: &str, value: &str) -> Result<()> {
        self.set(&format!("--{key}"), key, value)
    }

    /// Whether `output_path` was assigned explicitly.
    pub fn output_path_set(&self) -> bool {
        self.output_set
    }

    pub fn build(mut self) -> Result<RunConfig> {
        if !self.dt_set {
            self.config.params.dt = Params::default_dt(self.config.params.n);
        }
        self.config.validate()?;
        Ok(self.config)
    }
}

/// Parses a config file on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut builder = ConfigBuilder::new();
    builder.apply_text(text)?;
    builder.build()
}
