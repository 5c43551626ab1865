//! Scenario configuration: defaults, JSON file merging and `--set` overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use snap_core::analytics::sample_targets;
use snap_core::dynamics::{NoiseRates, PropagationConfig, Protocol, SystemParams};
use snap_core::optimizer::OptimizerConfig;
use snap_core::pulse::TargetOp;

use crate::CliError;

/// Everything a scenario run depends on.
///
/// Gate times (`chiT`, `chiT_grid`, `limit_grid`, `limit_resolution`) are
/// given in units of π.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub error_correction: bool,
    /// Physical parameters; rescaled to `χ = 1` before any run.
    pub system: SystemParams<f64>,
    /// Keep Kerr and χ′. The protocol comparison always drops them.
    pub higher_order: bool,
    /// Use the Lindblad rates of `system`; zero rates otherwise.
    pub noise: bool,
    /// Explicit target phases. When null, `theta_samples` random targets
    /// with `modes` phases each are drawn from `seed`.
    pub theta: Option<Vec<f64>>,
    pub modes: usize,
    pub theta_samples: usize,
    #[serde(rename = "chiT")]
    pub chi_t: f64,
    #[serde(rename = "chiT_grid")]
    pub chi_t_grid: Vec<f64>,
    /// Scan for the optimization limit inside the protocol comparison.
    pub limit_grid: Vec<f64>,
    pub limit_resolution: f64,
    pub optimizer: OptimizerConfig<f64>,
    pub interference: InterferenceConfig,
    pub wigner: WignerConfig,
    pub seed: u64,
    /// Output directory; not part of the scenario identity.
    #[serde(skip)]
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferenceConfig {
    /// Coherent amplitude of the input state.
    pub alpha: f64,
    pub fock_levels: usize,
    pub epsilon: f64,
    /// Target phases of the synthetic measurement.
    pub theta: Vec<f64>,
    /// Phase errors imprinted on the synthetic data.
    pub dtheta: Vec<f64>,
    pub noise_sigma: f64,
    pub noise_samples: usize,
    pub epsilon_scan: Vec<f64>,
}

impl Default for InterferenceConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            fock_levels: 8,
            epsilon: 0.1,
            theta: vec![0.0, PI / 2.0, PI / 4.0],
            dtheta: vec![0.0, 0.15, -0.1],
            noise_sigma: 0.01,
            noise_samples: 100,
            epsilon_scan: vec![0.02, 0.05, 0.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub alpha: f64,
    pub fock_levels: usize,
    /// Half width of the square phase-space window.
    pub extent: f64,
    pub points: usize,
    /// Use the optimized pulse instead of the unoptimized one.
    pub optimized: bool,
}

impl Default for WignerConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            fock_levels: 12,
            extent: 3.0,
            points: 61,
            optimized: true,
        }
    }
}

fn pi_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Ge,
            error_correction: false,
            system: SystemParams::table_s2(Protocol::Ge),
            higher_order: true,
            noise: true,
            theta: Some(vec![0.0, PI, 0.0]),
            modes: 4,
            theta_samples: 16,
            chi_t: 3.25,
            chi_t_grid: pi_range(2.0, 14.0, 0.25),
            limit_grid: pi_range(1.5, 6.0, 0.25),
            limit_resolution: 0.01,
            optimizer: OptimizerConfig {
                propagation: PropagationConfig::with_steps(4000).without_audit(),
                ..OptimizerConfig::default()
            },
            interference: InterferenceConfig::default(),
            wigner: WignerConfig::default(),
            seed: 2024,
            out: PathBuf::from("out"),
            workers: None,
        }
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn check_grid(field: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(config_err(field, "the scan grid is empty"));
    }
    if grid.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(config_err(field, "values must be positive and finite"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(config_err(field, "values must be strictly increasing"));
    }
    Ok(())
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(field, format!("must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_grid("chiT_grid", &self.chi_t_grid)?;
        check_grid("limit_grid", &self.limit_grid)?;
        positive("chiT", self.chi_t)?;
        positive("limit_resolution", self.limit_resolution)?;
        match &self.theta {
            Some(t) if t.is_empty() => return Err(config_err("theta", "needs at least one phase")),
            Some(t) if t.iter().any(|v| !v.is_finite()) => return Err(config_err("theta", "phases must be finite")),
            _ => {}
        }
        if self.modes == 0 {
            return Err(config_err("modes", "must be at least 1"));
        }
        if self.theta_samples == 0 {
            return Err(config_err("theta_samples", "must be at least 1"));
        }
        positive("system.chi", self.system.chi)?;
        positive("system.chi_f", self.system.chi_f)?;
        self.system.validate()?;
        self.optimizer.validate()?;

        let i = &self.interference;
        positive("interference.alpha", i.alpha)?;
        positive("interference.epsilon", i.epsilon)?;
        if i.noise_sigma < 0.0 || !i.noise_sigma.is_finite() {
            return Err(config_err("interference.noise_sigma", "must be non-negative"));
        }
        if i.theta.len() < 2 || i.theta.len() > i.fock_levels {
            return Err(config_err(
                "interference.theta",
                format!("needs between 2 and fock_levels = {} phases", i.fock_levels),
            ));
        }
        if i.dtheta.len() != i.theta.len() {
            return Err(config_err("interference.dtheta", "must have one entry per target phase"));
        }
        if i.epsilon_scan.iter().any(|e| !(*e > 0.0)) {
            return Err(config_err("interference.epsilon_scan", "values must be positive"));
        }

        let w = &self.wigner;
        positive("wigner.alpha", w.alpha)?;
        positive("wigner.extent", w.extent)?;
        if w.points < 2 {
            return Err(config_err("wigner.points", "need at least 2 points per axis"));
        }
        let modes = self.theta.as_ref().map_or(self.modes, Vec::len);
        if w.fock_levels < modes {
            return Err(config_err("wigner.fock_levels", "must cover every addressed mode"));
        }
        Ok(())
    }

    /// System in units of `χ`, with the configured protocol and toggles.
    pub fn dimensionless_system(&self) -> SystemParams<f64> {
        let mut s = self.system.clone().with_protocol(self.protocol);
        if !self.higher_order {
            s = s.without_higher_order();
        }
        if !self.noise {
            s = s.with_rates(NoiseRates::zero());
        }
        s.to_dimensionless()
    }

    pub fn targets(&self) -> Result<Vec<TargetOp<f64>>, CliError> {
        match &self.theta {
            Some(theta) => Ok(vec![TargetOp::from_f64(theta)?]),
            None => Ok(sample_targets(self.modes, self.theta_samples, self.seed)?),
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        self.chi_t_grid.iter().map(|v| v * PI).collect()
    }
}

/// Builds the configuration from defaults, an optional JSON file and
/// `dotpath=value` overrides, in that order.
pub fn resolve(file: Option<&Path>, sets: &[String]) -> Result<ScenarioConfig, CliError> {
    let mut value = serde_json::to_value(ScenarioConfig::default()).expect("default config serializes");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
        merge(&mut value, patch, "")?;
    }
    for set in sets {
        let (path, raw) = set
            .split_once('=')
            .ok_or_else(|| config_err(set, "expected <dotpath>=<value>"))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, path, parsed)?;
    }
    serde_json::from_value(value).map_err(|e| config_err("config", e.to_string()))
}

fn merge(base: &mut Value, patch: Value, prefix: &str) -> Result<(), CliError> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &path)?,
                    None => return Err(config_err(&path, "unknown field")),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

fn set_path(root: &mut Value, path: &str, v: Value) -> Result<(), CliError> {
    let mut node = root;
    for key in path.split('.') {
        let map: &mut Map<String, Value> = node
            .as_object_mut()
            .ok_or_else(|| config_err(path, format!("{key:?} is not inside an object")))?;
        node = map.get_mut(key).ok_or_else(|| config_err(path, "unknown field"))?;
    }
    *node = v;
    Ok(())
}
