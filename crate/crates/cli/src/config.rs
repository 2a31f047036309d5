use std::path::{Path, PathBuf};

use multiwell::potentials::PotentialConfig;
use multiwell::propagate::Window;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SusyGen,
    Diag,
    Spectral,
    Poincare,
    Nodal,
    Bench,
    CriticalPoints,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SusyGen => "susy-gen",
            Command::Diag => "diag",
            Command::Spectral => "spectral",
            Command::Poincare => "poincare",
            Command::Nodal => "nodal",
            Command::Bench => "bench",
            Command::CriticalPoints => "critical-points",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    #[default]
    Basis,
    Grid,
}

/// Uniform grid, `2^log2_points` nodes per axis on `|x| ≤ half_width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub log2_points: u32,
}

/// Parameters of every command in one flat table; each command reads the
/// fields it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    pub n_levels: usize,
    pub solver: Solver,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis_omega: Option<f64>,
    pub hbar: f64,
    /// Oscillator states kept by `susy-gen`.
    pub n_states: usize,
    /// Propagation length `2^exponent · Δt`.
    pub exponent: u32,
    pub window: Window,
    pub packet_center: Vec<f64>,
    pub packet_width: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    /// Classical energy as a fraction of the potential's energy scale.
    pub energy_frac: f64,
    pub trajectories: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub sample_stride: usize,
    pub wells: Vec<String>,
    /// `[n_x, n_y]` for a separable oscillator, `[k]` for the k-th eigenstate.
    pub state: Vec<usize>,
    pub center: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_radius: Option<f64>,
    pub amplitude_floor: f64,
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub epsilon: f64,
    /// `[x_lo, y_lo, x_hi, y_hi]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_box: Option<[f64; 4]>,
    pub seeds_per_axis: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            n_levels: 10,
            solver: Solver::Basis,
            basis_size: None,
            basis_omega: None,
            hbar: 1.0,
            n_states: 8,
            exponent: 16,
            window: Window::Hann,
            packet_center: Vec::new(),
            packet_width: Vec::new(),
            e_min: None,
            e_max: None,
            energy_frac: 0.75,
            trajectories: 32,
            duration: None,
            sample_stride: 10,
            wells: Vec::new(),
            state: Vec::new(),
            center: [0.0, 0.0],
            mask_radius: None,
            amplitude_floor: 1e-6,
            sizes: vec![100, 200, 400],
            repeats: 3,
            epsilon: 0.01,
            search_box: None,
            seeds_per_axis: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub outdir: PathBuf,
    pub potential: PotentialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub method: MethodConfig,
}

/// Same shape with every field optional, used to validate a config file
/// before it is laid over the flags.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct PartialConfig {
    command: Option<Command>,
    seed: Option<u64>,
    outdir: Option<PathBuf>,
    potential: Option<PotentialConfig>,
    grid: Option<GridConfig>,
    method: Option<MethodConfig>,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct ConfigError {
    pub message: String,
    pub field: Option<String>,
    pub line: Option<usize>,
    pub path: Option<PathBuf>,
}

impl ConfigError {
    fn plain(message: impl Into<String>) -> Self {
        Self { message: message.into(), field: None, line: None, path: None }
    }

    pub fn missing(field: &str) -> Self {
        Self { field: Some(field.into()), ..Self::plain(format!("missing required parameter `{field}`")) }
    }

    fn from_toml(err: toml::de::Error, text: &str, path: &Path) -> Self {
        let line = err.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        let message = err.message().to_string();
        // serde names the offending key in backticks
        let field = message.split('`').nth(1).map(str::to_string);
        Self { message, field, line, path: Some(path.to_path_buf()) }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            // a potential of another kind must not inherit stray parameters
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if k != "potential" => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Lays the file at `path` over the flag-derived config.
    pub fn overlay_file(self, path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { path: Some(path.to_path_buf()), ..ConfigError::plain(format!("cannot read config: {e}")) })?;
        Self::overlay_str(self, &text, path)
    }

    pub fn overlay_str(self, text: &str, path: &Path) -> Result<Self, ConfigError> {
        let partial: PartialConfig = toml::from_str(text).map_err(|e| ConfigError::from_toml(e, text, path))?;
        if let Some(c) = partial.command {
            if c != self.command {
                return Err(ConfigError {
                    field: Some("command".into()),
                    path: Some(path.to_path_buf()),
                    ..ConfigError::plain(format!("config is for `{}`, not `{}`", c.name(), self.command.name()))
                });
            }
        }
        let file: toml::Table = text.parse().map_err(|e| ConfigError::from_toml(e, text, path))?;
        let mut base = toml::Table::try_from(&self).map_err(|e| ConfigError::plain(e.to_string()))?;
        merge(&mut base, file);
        base.try_into().map_err(|e: toml::de::Error| ConfigError {
            field: e.message().split('`').nth(1).map(str::to_string),
            path: Some(path.to_path_buf()),
            ..ConfigError::plain(e.message())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
