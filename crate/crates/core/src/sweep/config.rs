//! Sweep configuration: a TOML file, overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlations::{linspace, Normalization};
use crate::model::{
    EmitterParams, ModeParams, ModelSpec, MultiTlsParams, RabiParams, TwoModeParams,
    DEFAULT_N_FOCK,
};

pub const G_BOUNDS: (f64, f64) = (0.0, 1.5);
pub const T_BOUNDS: (f64, f64) = (0.02, 1.0);
/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "USTRONG_WORKERS";

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {reason}")]
    Read { path: String, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid `{key}`: got {got}, expected {expected}")]
    Invalid { key: String, got: String, expected: String },
}

fn invalid(key: &str, got: impl fmt::Display, expected: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), got: got.to_string(), expected: expected.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    G2zero,
    Levels,
    G2tau,
    Crosscorr,
    Spectrum,
    Baseline,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::G2zero => "g2zero",
            Task::Levels => "levels",
            Task::G2tau => "g2tau",
            Task::Crosscorr => "crosscorr",
            Task::Spectrum => "spectrum",
            Task::Baseline => "baseline",
        }
    }
}

/// `rabi`, `multi-tls:N` or `two-mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelChoice {
    #[default]
    Rabi,
    MultiTls(usize),
    TwoMode,
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelChoice::Rabi => f.write_str("rabi"),
            ModelChoice::MultiTls(n) => write!(f, "multi-tls:{n}"),
            ModelChoice::TwoMode => f.write_str("two-mode"),
        }
    }
}

impl FromStr for ModelChoice {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let expected = "rabi, multi-tls:N (N >= 1) or two-mode";
        match s {
            "rabi" => Ok(ModelChoice::Rabi),
            "two-mode" => Ok(ModelChoice::TwoMode),
            _ => match s.strip_prefix("multi-tls:").map(str::parse::<usize>) {
                Some(Ok(n)) if n >= 1 => Ok(ModelChoice::MultiTls(n)),
                _ => Err(invalid("model", s, expected)),
            },
        }
    }
}

impl Serialize for ModelChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// `steps` evenly spaced values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            vec![self.min]
        } else {
            linspace(self.min, self.max, self.steps)
        }
    }

    fn validate(&self, key: &str, bounds: Option<(f64, f64)>) -> Result<(), ConfigError> {
        if self.steps == 0 {
            return Err(invalid(&format!("{key}.steps"), 0, "at least 1"));
        }
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(invalid(key, format!("[{}, {}]", self.min, self.max), "finite bounds"));
        }
        if self.steps > 1 && !(self.max > self.min) {
            return Err(invalid(
                &format!("{key}.max"),
                self.max,
                format!("greater than {key}.min = {}", self.min),
            ));
        }
        if let Some((lo, hi)) = bounds {
            if self.min < lo {
                return Err(invalid(&format!("{key}.min"), self.min, format!(">= {lo}")));
            }
            if self.max > hi || (self.steps == 1 && self.min > hi) {
                return Err(invalid(&format!("{key}.max"), self.max, format!("<= {hi}")));
            }
        }
        Ok(())
    }
}

/// Second mode of the two-mode model, relative to the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecondMode {
    pub omega_ratio: f64,
    pub coupling_ratio: f64,
    pub n_fock: usize,
}

impl Default for SecondMode {
    fn default() -> Self {
        Self { omega_ratio: 2.0, coupling_ratio: 2.0, n_fock: 10 }
    }
}

/// A named point of the phase diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub name: &'static str,
    pub g: f64,
    pub temperature: f64,
}

/// Reference points in the green, gray, blue and red regions.
pub const MARKERS: [Marker; 4] = [
    Marker { name: "diamond", g: 0.1, temperature: 0.2 },
    Marker { name: "triangle", g: 0.2, temperature: 0.1 },
    Marker { name: "square", g: 0.5, temperature: 0.07 },
    Marker { name: "dot", g: 0.9, temperature: 0.15 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub task: Task,
    pub model: ModelChoice,
    pub omega_x: f64,
    pub gamma_a: f64,
    pub gamma_x: f64,
    pub n_fock: usize,
    /// Number of dressed levels kept; the thermal window when absent.
    pub level_cut: Option<usize>,
    pub g: GridSpec,
    pub t: GridSpec,
    /// Delay grid for trace tasks; derived from the linewidths when absent.
    pub tau: Option<GridSpec>,
    pub omega: GridSpec,
    pub markers: bool,
    pub normalize: Normalization,
    /// Levels written by the `levels` task.
    pub levels: usize,
    pub check_convergence: bool,
    /// Fock truncation of the standard master-equation baseline.
    pub baseline_n_fock: usize,
    pub two_mode: SecondMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            task: Task::G2zero,
            model: ModelChoice::Rabi,
            omega_x: 1.0,
            gamma_a: 0.01,
            gamma_x: 0.01,
            n_fock: DEFAULT_N_FOCK,
            level_cut: None,
            g: GridSpec { min: 0.0, max: 1.0, steps: 60 },
            t: GridSpec { min: 0.02, max: 0.3, steps: 60 },
            tau: None,
            omega: GridSpec { min: 0.0, max: 2.0, steps: 4001 },
            markers: false,
            normalize: Normalization::Raw,
            levels: 6,
            check_convergence: true,
            baseline_n_fock: 8,
            two_mode: SecondMode::default(),
            out: None,
            format: OutputFormat::Csv,
            workers: None,
        }
    }
}

/// Command-line values that replace file values when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub task: Option<Task>,
    pub model: Option<ModelChoice>,
    pub g_min: Option<f64>,
    pub g_max: Option<f64>,
    pub g_steps: Option<usize>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub t_steps: Option<usize>,
    pub n_fock: Option<usize>,
    pub gamma_a: Option<f64>,
    pub gamma_x: Option<f64>,
    pub markers: bool,
    pub normalize: Option<Normalization>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub format: Option<OutputFormat>,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Copy>(dst: &mut T, src: Option<T>) {
            if let Some(v) = src {
                *dst = v;
            }
        }
        set(&mut self.task, o.task);
        set(&mut self.model, o.model);
        set(&mut self.g.min, o.g_min);
        set(&mut self.g.max, o.g_max);
        set(&mut self.g.steps, o.g_steps);
        set(&mut self.t.min, o.t_min);
        set(&mut self.t.max, o.t_max);
        set(&mut self.t.steps, o.t_steps);
        set(&mut self.n_fock, o.n_fock);
        set(&mut self.gamma_a, o.gamma_a);
        set(&mut self.gamma_x, o.gamma_x);
        set(&mut self.normalize, o.normalize);
        set(&mut self.format, o.format);
        self.markers |= o.markers;
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if o.workers.is_some() {
            self.workers = o.workers;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.g.validate("g", Some(G_BOUNDS))?;
        self.t.validate("t", Some(T_BOUNDS))?;
        self.omega.validate("omega", None)?;
        if let Some(tau) = &self.tau {
            tau.validate("tau", None)?;
            if tau.min < 0.0 && self.task != Task::Crosscorr {
                return Err(invalid("tau.min", tau.min, ">= 0 outside crosscorr"));
            }
        }
        if !(self.omega_x.is_finite() && self.omega_x > 0.0) {
            return Err(invalid("omega_x", self.omega_x, "a positive number"));
        }
        for (key, v) in [("gamma_a", self.gamma_a), ("gamma_x", self.gamma_x)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(key, v, "a non-negative number"));
            }
        }
        if self.gamma_a == 0.0 && self.gamma_x == 0.0 {
            return Err(invalid("gamma_a", 0, "a positive rate on at least one channel"));
        }
        for (key, v) in [
            ("n_fock", self.n_fock),
            ("baseline_n_fock", self.baseline_n_fock),
            ("two_mode.n_fock", self.two_mode.n_fock),
        ] {
            if v < 2 {
                return Err(invalid(key, v, ">= 2"));
            }
        }
        if let Some(cut) = self.level_cut {
            if cut < 3 {
                return Err(invalid("level_cut", cut, ">= 3"));
            }
        }
        if self.levels < 2 {
            return Err(invalid("levels", self.levels, ">= 2"));
        }
        for (key, v) in
            [("two_mode.omega_ratio", self.two_mode.omega_ratio), ("two_mode.coupling_ratio", self.two_mode.coupling_ratio)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, v, "a positive number"));
            }
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", 0, ">= 1"));
        }
        if let ModelChoice::MultiTls(n) = self.model {
            if self.model_spec(0.0).n_fock() << n > crate::model::DIMENSION_CAP {
                return Err(invalid(
                    "model",
                    self.model,
                    format!("a dimension 2^N * n_fock <= {}", crate::model::DIMENSION_CAP),
                ));
            }
        }
        Ok(())
    }

    /// Model instance at coupling `g` (the first mode's coupling for two modes).
    pub fn model_spec(&self, g: f64) -> ModelSpec {
        match self.model {
            ModelChoice::Rabi => ModelSpec::Rabi(RabiParams {
                omega0: 1.0,
                omega_x: self.omega_x,
                g,
                n_fock: self.n_fock,
            }),
            ModelChoice::MultiTls(n) => ModelSpec::MultiTls(MultiTlsParams {
                omega0: 1.0,
                emitters: vec![EmitterParams { omega_x: self.omega_x, g }; n],
                n_fock: self.n_fock,
            }),
            ModelChoice::TwoMode => ModelSpec::TwoMode(TwoModeParams {
                modes: [
                    ModeParams { omega0: 1.0, g, n_fock: self.n_fock },
                    ModeParams {
                        omega0: self.two_mode.omega_ratio,
                        g: self.two_mode.coupling_ratio * g,
                        n_fock: self.two_mode.n_fock,
                    },
                ],
                omega_x: self.omega_x,
            }),
        }
    }

    /// `(label, g, T)` of every point, in output order: markers, or the grid
    /// with `g` varying slowest.
    pub fn points(&self) -> Vec<(Option<&'static str>, f64, f64)> {
        if self.markers {
            return MARKERS.iter().map(|m| (Some(m.name), m.g, m.temperature)).collect();
        }
        let ts = self.t.values();
        self.g
            .values()
            .into_iter()
            .flat_map(|g| ts.iter().map(move |&t| (None, g, t)))
            .collect()
    }

    /// Worker count: explicit value, then the environment, then all cores.
    pub fn resolved_workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// SHA-256 of the settings that determine the results (not where or how
    /// fast they are written).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        canonical.workers = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Reads `path` (if any), applies `overrides` and validates.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<SweepConfig, ConfigError> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                path: p.display().to_string(),
                reason: e.to_string(),
            })?;
            SweepConfig::from_toml(&text)?
        }
        None => SweepConfig::default(),
    };
    config.apply(overrides);
    config.validate()?;
    Ok(config)
}
