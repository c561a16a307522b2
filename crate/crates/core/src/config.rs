//! Flat `key = value` run configuration shared by every command.
//!
//! Files hold one `key = value` per line; `#` starts a comment. Command-line
//! flags with the same names override file values. Angles are given in
//! degrees and converted on use.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::spectrum::{DEFAULT_OMEGA_MAX, DEFAULT_OMEGA_POINTS};
use crate::error::{Error, Result};
use crate::experiments::{DiffusionMode, FieldKind, SpectrumMode};
use crate::model::ModelParams;
use crate::modes::{DEFAULT_EXTENT, DEFAULT_POINTS};
use crate::stochastic::{EnsembleSpec, DEFAULT_DT, DEFAULT_SAMPLES};

/// Every recognised key, in output order.
pub const KEYS: &[&str] = &[
    "sigma",
    "g",
    "gamma_s",
    "gamma_p_over_gamma_s",
    "kappa",
    "trajectories",
    "dt",
    "t_burn",
    "t_record",
    "samples",
    "seed",
    "mode",
    "psi_l",
    "omega_max",
    "omega_points",
    "max_lag",
    "diffusion_mode",
    "fit_t_min",
    "field",
    "theta",
    "rho",
    "extent",
    "n_points",
    "dump_trajectories",
    "out",
    "workers",
];

/// Keys that do not change results and are left out of output provenance.
const EXECUTION_KEYS: &[&str] = &["out", "workers"];

const DEFAULT_TRAJECTORIES: usize = 1000;
const DEFAULT_SPECTRUM_RECORD: f64 = 50.0;
const DEFAULT_THETA_RECORD: f64 = 1000.0;
const DEFAULT_NONLINEAR_RECORD: f64 = 30.0;
/// Exact for the driftless Wiener process.
const DEFAULT_THETA_DT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub trajectories: usize,
    pub dt: Option<f64>,
    pub t_burn: Option<f64>,
    pub t_record: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub mode: SpectrumMode,
    /// Degrees.
    pub psi_l: f64,
    pub omega_max: f64,
    pub omega_points: usize,
    pub max_lag: Option<f64>,
    pub diffusion_mode: DiffusionMode,
    pub fit_t_min: Option<f64>,
    pub field: FieldKind,
    /// Degrees; also the initial orientation of nonlinear runs.
    pub theta: f64,
    pub rho: Option<f64>,
    pub extent: f64,
    pub n_points: usize,
    pub dump_trajectories: bool,
    pub out: PathBuf,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            trajectories: DEFAULT_TRAJECTORIES,
            dt: None,
            t_burn: None,
            t_record: None,
            samples: DEFAULT_SAMPLES,
            seed: 1,
            mode: SpectrumMode::Analytic,
            psi_l: 90.0,
            omega_max: DEFAULT_OMEGA_MAX,
            omega_points: DEFAULT_OMEGA_POINTS,
            max_lag: None,
            diffusion_mode: DiffusionMode::Theta,
            fit_t_min: None,
            field: FieldKind::Classical,
            theta: 0.0,
            rho: None,
            extent: DEFAULT_EXTENT,
            n_points: DEFAULT_POINTS,
            dump_trajectories: false,
            out: PathBuf::from("out"),
            workers: 1,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_optional(key: &str, value: &str) -> Result<Option<f64>> {
    match value {
        "auto" | "" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "`{key}`: expected true or false, got `{value}`"
        ))),
    }
}

fn show_optional(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    n + 1
                ))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "sigma" => self.params.sigma = parse(key, value)?,
            "g" => self.params.g = parse(key, value)?,
            "gamma_s" => self.params.gamma_s = parse(key, value)?,
            "gamma_p_over_gamma_s" => self.params.gamma_p_over_gamma_s = parse(key, value)?,
            "kappa" => self.params.kappa = parse(key, value)?,
            "trajectories" => self.trajectories = parse(key, value)?,
            "dt" => self.dt = parse_optional(key, value)?,
            "t_burn" => self.t_burn = parse_optional(key, value)?,
            "t_record" => self.t_record = parse_optional(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "psi_l" => self.psi_l = parse(key, value)?,
            "omega_max" => self.omega_max = parse(key, value)?,
            "omega_points" => self.omega_points = parse(key, value)?,
            "max_lag" => self.max_lag = parse_optional(key, value)?,
            "diffusion_mode" => self.diffusion_mode = value.parse()?,
            "fit_t_min" => self.fit_t_min = parse_optional(key, value)?,
            "field" => self.field = value.parse()?,
            "theta" => self.theta = parse(key, value)?,
            "rho" => self.rho = parse_optional(key, value)?,
            "extent" => self.extent = parse(key, value)?,
            "n_points" => self.n_points = parse(key, value)?,
            "dump_trajectories" => self.dump_trajectories = parse_bool(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "workers" => self.workers = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let p = &self.params;
        Some(match key {
            "sigma" => p.sigma.to_string(),
            "g" => p.g.to_string(),
            "gamma_s" => p.gamma_s.to_string(),
            "gamma_p_over_gamma_s" => p.gamma_p_over_gamma_s.to_string(),
            "kappa" => p.kappa.to_string(),
            "trajectories" => self.trajectories.to_string(),
            "dt" => show_optional(self.dt),
            "t_burn" => show_optional(self.t_burn),
            "t_record" => show_optional(self.t_record),
            "samples" => self.samples.to_string(),
            "seed" => self.seed.to_string(),
            "mode" => self.mode.to_string(),
            "psi_l" => self.psi_l.to_string(),
            "omega_max" => self.omega_max.to_string(),
            "omega_points" => self.omega_points.to_string(),
            "max_lag" => show_optional(self.max_lag),
            "diffusion_mode" => self.diffusion_mode.to_string(),
            "fit_t_min" => show_optional(self.fit_t_min),
            "field" => self.field.to_string(),
            "theta" => self.theta.to_string(),
            "rho" => show_optional(self.rho),
            "extent" => self.extent.to_string(),
            "n_points" => self.n_points.to_string(),
            "dump_trajectories" => self.dump_trajectories.to_string(),
            "out" => self.out.display().to_string(),
            "workers" => self.workers.to_string(),
            _ => return None,
        })
    }

    /// Result-relevant keys with their resolved values, in [`KEYS`] order.
    pub fn provenance(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .filter(|k| !EXECUTION_KEYS.contains(k))
            .map(|k| (k.to_string(), self.get(k).expect("known key")))
            .collect()
    }

    /// `key=value` lines for file headers, preceded by the command name.
    pub fn header(&self, command: &str) -> Vec<String> {
        let mut lines = vec![format!("command={command}")];
        lines.extend(
            self.provenance()
                .into_iter()
                .map(|(k, v)| format!("{k}={v}")),
        );
        lines
    }

    pub fn provenance_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .provenance()
            .into_iter()
            .map(|(k, v)| (k, serde_json::Value::String(v)))
            .collect();
        serde_json::Value::Object(map)
    }

    /// Checks everything that does not depend on the command.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.workers == 0 {
            return Err(Error::param("workers", "must be at least 1"));
        }
        if self.samples < 4 {
            return Err(Error::param(
                "samples",
                format!("need at least 4 samples, got {}", self.samples),
            ));
        }
        for (name, v) in [("psi_l", self.psi_l), ("theta", self.theta)] {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
        }
        for (name, v) in [
            ("max_lag", self.max_lag),
            ("fit_t_min", self.fit_t_min),
            ("rho", self.rho),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::param(name, format!("must be >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn psi_radians(&self) -> f64 {
        self.psi_l.to_radians()
    }

    pub fn theta_radians(&self) -> f64 {
        self.theta.to_radians()
    }

    /// Ensemble for a spectrum run with defaults filled in.
    pub fn spectrum_ensemble(&self) -> Result<EnsembleSpec> {
        self.ensemble(DEFAULT_DT, DEFAULT_SPECTRUM_RECORD)
    }

    /// Ensemble for a diffusion run with defaults filled in.
    pub fn diffusion_ensemble(&self) -> Result<EnsembleSpec> {
        match self.diffusion_mode {
            DiffusionMode::Theta => self.ensemble(DEFAULT_THETA_DT, DEFAULT_THETA_RECORD),
            DiffusionMode::Nonlinear => self.ensemble(DEFAULT_DT, DEFAULT_NONLINEAR_RECORD),
        }
    }

    fn ensemble(&self, dt: f64, t_record: f64) -> Result<EnsembleSpec> {
        let spec = EnsembleSpec::new(
            self.trajectories,
            self.dt.unwrap_or(dt),
            self.t_burn.unwrap_or_else(|| self.params.default_burn_in()),
            self.t_record.unwrap_or(t_record),
            self.seed,
        )
        .with_samples(self.samples);
        spec.validate()?;
        Ok(spec)
    }

    /// The whole configuration as a config file.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("known key"));
        }
        s
    }
}
