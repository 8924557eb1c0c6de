//! Run configuration: a TOML file whose keys mirror [`RunConfig`], with
//! command-line flags applied on top.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Levels,
    Eigenvalues,
    Odnmr,
    PulseMap,
    AfcMap,
    Echo,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Levels => "levels",
            Self::Eigenvalues => "eigenvalues",
            Self::Odnmr => "odnmr",
            Self::PulseMap => "pulse-map",
            Self::AfcMap => "afc-map",
            Self::Echo => "echo",
        }
    }
}

/// Explicit values, or `{ start, stop, steps }` with both ends included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, steps: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Self::List(ref v) => v.clone(),
            Self::Range { start, steps: 1, .. } => vec![start],
            Self::Range { start, stop, steps } => (0..steps).map(|k| start + (stop - start) * k as f64 / (steps - 1) as f64).collect(),
        }
    }

    fn validate(&self, key: &str) -> Result<(), CliError> {
        let bad = |why: &str| Err(CliError::Config(format!("{key}: {why}")));
        match *self {
            Self::List(ref v) if v.is_empty() => bad("empty list"),
            Self::List(ref v) if v.iter().any(|x| !x.is_finite()) => bad("non-finite value"),
            Self::Range { steps: 0, .. } => bad("steps must be at least 1"),
            Self::Range { start, stop, .. } if !(start.is_finite() && stop.is_finite()) || stop < start => bad("need finite start ≤ stop"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EchoVariant {
    Centered,
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    Standard,
    SinglePure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdnmrConfig {
    /// μs
    pub duration: f64,
    /// μs
    pub dt: f64,
    pub ensemble: Ensemble,
    /// μs⁻¹
    pub damping: Option<f64>,
    pub padding: usize,
}

impl Default for OdnmrConfig {
    fn default() -> Self {
        Self { duration: 4000.0, dt: 0.5, ensemble: Ensemble::Standard, damping: None, padding: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    /// μs
    pub fwhm: f64,
    /// kHz
    pub chirp: Grid,
    pub truncation: f64,
    pub tolerance: f64,
    pub max_refinements: u32,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            fwhm: 120.0,
            chirp: Grid::Range { start: 0.0, stop: 200.0, steps: 21 },
            truncation: 4.0,
            tolerance: 1e-6,
            max_refinements: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AfcConfig {
    /// Δ_AFC grid, kHz
    pub period: Grid,
    pub bandwidth: f64,
    pub finesse: f64,
    pub d0: f64,
    pub cycles: usize,
    pub pump: f64,
    pub class_step: f64,
}

impl Default for AfcConfig {
    fn default() -> Self {
        Self {
            period: Grid::Range { start: 15.0, stop: 80.0, steps: 131 },
            bandwidth: 600.0,
            finesse: 3.0,
            d0: 3.0,
            cycles: 200,
            pump: 0.5,
            class_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EchoConfig {
    pub variant: EchoVariant,
    /// First storage time, μs; defaults to the two π-pulse durations.
    pub ts_start: Option<f64>,
    /// μs
    pub ts_step: f64,
    pub ts_points: usize,
}

impl Default for EchoConfig {
    fn default() -> Self {
        Self { variant: EchoVariant::Centered, ts_start: None, ts_step: 2.0, ts_points: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Output subdirectory under the output root; defaults to the experiment name.
    #[serde(default)]
    pub name: Option<String>,
    /// `eu_yso` or a path to a fixture TOML file.
    #[serde(default = "default_fixture")]
    pub fixture: String,
    #[serde(default = "default_direction")]
    pub direction: String,
    /// Bias field amplitudes, mT.
    #[serde(default = "default_b")]
    pub b: Grid,
    /// RF Rabi frequency Ω₀, kHz.
    #[serde(default = "default_rabi")]
    pub rabi: f64,
    /// kHz
    #[serde(default)]
    pub detuning: f64,
    /// Relative amplitude above which spectrum maxima are reported as peaks.
    #[serde(default = "default_peak_threshold")]
    pub peak_threshold: f64,
    #[serde(default)]
    pub odnmr: OdnmrConfig,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub afc: AfcConfig,
    #[serde(default)]
    pub echo: EchoConfig,
}

fn default_fixture() -> String {
    "eu_yso".into()
}

fn default_direction() -> String {
    "II".into()
}

fn default_b() -> Grid {
    Grid::List(vec![1.0])
}

fn default_rabi() -> f64 {
    30.0
}

fn default_peak_threshold() -> f64 {
    0.05
}

/// Flag values that replace config keys when given.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub fixture: Option<String>,
    pub direction: Option<String>,
    pub b: Option<Vec<f64>>,
    pub rabi: Option<f64>,
    pub detuning: Option<f64>,
    pub variant: Option<EchoVariant>,
    pub name: Option<String>,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        let mut table = toml::Table::new();
        table.insert("experiment".into(), experiment.name().into());
        table.try_into().expect("defaults deserialize")
    }

    /// Reads a config file. The experiment key may be omitted; if present it
    /// must agree with `experiment`.
    pub fn load(path: &Path, experiment: Experiment) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        match table.get("experiment").and_then(|v| v.as_str()) {
            Some(name) if name != experiment.name() => {
                return Err(CliError::Config(format!("config is for '{name}', not '{}'", experiment.name())));
            }
            _ => {
                table.insert("experiment".into(), experiment.name().into());
            }
        }
        table.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(v) = o.fixture {
            self.fixture = v;
        }
        if let Some(v) = o.direction {
            self.direction = v;
        }
        if let Some(v) = o.b {
            self.b = Grid::List(v);
        }
        if let Some(v) = o.rabi {
            self.rabi = v;
        }
        if let Some(v) = o.detuning {
            self.detuning = v;
        }
        if let Some(v) = o.variant {
            self.echo.variant = v;
        }
        if let Some(v) = o.name {
            self.name = Some(v);
        }
    }

    pub fn output_name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.experiment.name())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.b.validate("b")?;
        self.pulse.chirp.validate("pulse.chirp")?;
        self.afc.period.validate("afc.period")?;
        let name = self.output_name();
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(CliError::Config(format!("name '{name}' is not a plain directory name")));
        }
        let positive = [
            ("rabi", self.rabi),
            ("odnmr.duration", self.odnmr.duration),
            ("odnmr.dt", self.odnmr.dt),
            ("pulse.fwhm", self.pulse.fwhm),
            ("pulse.truncation", self.pulse.truncation),
            ("pulse.tolerance", self.pulse.tolerance),
            ("afc.bandwidth", self.afc.bandwidth),
            ("afc.class_step", self.afc.class_step),
            ("echo.ts_step", self.echo.ts_step),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if !(self.peak_threshold > 0.0 && self.peak_threshold < 1.0) {
            return Err(CliError::Config("peak_threshold must lie in (0, 1)".into()));
        }
        if self.afc.finesse <= 1.0 {
            return Err(CliError::Config("afc.finesse must exceed 1".into()));
        }
        if self.echo.ts_points < 2 {
            return Err(CliError::Config("echo.ts_points must be at least 2".into()));
        }
        if self.odnmr.padding == 0 {
            return Err(CliError::Config("odnmr.padding must be at least 1".into()));
        }
        Ok(())
    }
}
