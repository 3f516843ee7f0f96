//! TOML configuration files.
//!
//! ```toml
//! dim = 1
//!
//! [[kernel]]
//! offset = [1]
//! rate = 0.5
//!
//! [[kernel]]
//! offset = [-1]
//! rate = 0.5
//!
//! [[sources]]
//! position = [0]
//! coefficients = [1.0, -3.0, 2.0]
//! ```
//!
//! `[numerics]` and `[simulation]` are optional; every omitted key takes the
//! default documented on its field, and the resolved values are written into
//! the header of every output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::green::QuadratureSpec;
use crate::kernel::{BranchingSource, BrwConfig, KernelError, TransitionKernel};
use crate::lattice::{BoxLattice, Point, MAX_DIM};
use crate::moments::MomentOptions;
use crate::simulator::RunOptions;
use crate::spectral::SpectralOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid {field}: {source}")]
    Validation {
        field: String,
        source: KernelError,
    },
    #[error("invalid {field}: {message}")]
    Option { field: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub offset: Vec<i64>,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub position: Vec<i64>,
    /// b_0, b_1, b_2, ...
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Starting trapezoid nodes per axis (doubled until converged). Default 32.
    pub quadrature_nodes: usize,
    /// Truncation radius R of the box carrying ℋ_R. Default 200.
    pub radius: usize,
    /// Radius of the window on which f and ψ are tabulated. Default 60, 24, 10 for d = 1, 2, 3.
    pub window: Option<usize>,
    /// Highest moment order. Default 20.
    pub n_max: usize,
    /// Moments are tabulated for x, y with |x|∞, |y|∞ <= this. Default 3.
    pub moment_window: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            quadrature_nodes: 32,
            radius: 200,
            window: None,
            n_max: 20,
            moment_window: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    /// Horizon T. Default 25.
    pub horizon: f64,
    /// Replicas stop once the population exceeds this. Default 10^6.
    pub cap: u64,
    /// Default 10^4.
    pub replicas: u64,
    /// Default 1.
    pub seed: u64,
    /// Snapshot times on [0, T]. Default 64.
    pub snapshots: usize,
    /// Radius of the window of recorded site counts. Default 3.
    pub window: usize,
    /// Initial particle position. Default: the first source.
    pub start: Option<Vec<i64>>,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            horizon: 25.0,
            cap: 1_000_000,
            replicas: 10_000,
            seed: 1,
            snapshots: 64,
            window: 3,
            start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dim: usize,
    pub kernel: Vec<KernelEntry>,
    pub sources: Vec<SourceEntry>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub simulation: Simulation,
}

/// A parsed file with every default filled in, and the model it describes.
#[derive(Clone, Debug)]
pub struct Config {
    pub file: ConfigFile,
    pub model: BrwConfig,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn point(field: &str, coords: &[i64], dim: usize) -> Result<Point, ConfigError> {
    if coords.len() != dim {
        return Err(ConfigError::Option {
            field: field.to_string(),
            message: format!("expected {dim} coordinates, got {}", coords.len()),
        });
    }
    Point::try_new(coords).ok_or_else(|| ConfigError::Option {
        field: field.to_string(),
        message: format!("dimension must be 1..={MAX_DIM}"),
    })
}

pub fn parse_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<Config, ConfigError> {
    let mut file: ConfigFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    file.resolve()?;
    let model = file.model()?;
    Ok(Config { file, model })
}

impl ConfigFile {
    /// Fills dimension-dependent defaults and checks numeric options.
    fn resolve(&mut self) -> Result<(), ConfigError> {
        if !(1..=MAX_DIM).contains(&self.dim) {
            return Err(ConfigError::Validation {
                field: "dim".into(),
                source: KernelError::UnsupportedDimension(self.dim),
            });
        }
        let n = &mut self.numerics;
        if n.window.is_none() {
            n.window = Some(SpectralOptions::for_dim(self.dim).window);
        }
        QuadratureSpec::new(n.quadrature_nodes).map_err(|e| ConfigError::Option {
            field: "numerics.quadrature_nodes".into(),
            message: e.to_string(),
        })?;
        let bad = |field: &str, message: &str| ConfigError::Option {
            field: field.into(),
            message: message.into(),
        };
        if n.radius == 0 {
            return Err(bad("numerics.radius", "must be positive"));
        }
        if n.n_max == 0 {
            return Err(bad("numerics.n_max", "must be positive"));
        }
        let s = &mut self.simulation;
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return Err(bad("simulation.horizon", "must be positive and finite"));
        }
        if s.cap == 0 {
            return Err(bad("simulation.cap", "must be positive"));
        }
        if s.snapshots < 2 {
            return Err(bad("simulation.snapshots", "must be at least 2"));
        }
        if s.start.is_none() {
            s.start = self.sources.first().map(|src| src.position.clone());
        }
        Ok(())
    }

    /// Validated model; errors name the offending entry, e.g. `kernel[2]`.
    pub fn model(&self) -> Result<BrwConfig, ConfigError> {
        let mut raw = Vec::with_capacity(self.kernel.len());
        for (i, entry) in self.kernel.iter().enumerate() {
            raw.push((point(&format!("kernel[{i}].offset"), &entry.offset, self.dim)?, entry.rate));
        }
        let kernel = TransitionKernel::new(self.dim, &raw).map_err(|source| {
            let offending = match &source {
                KernelError::AsymmetricKernel { offset, .. }
                | KernelError::InvalidRate { offset, .. }
                | KernelError::DuplicateOffset(offset) => raw.iter().rposition(|(z, _)| z == offset),
                _ => None,
            };
            ConfigError::Validation {
                field: offending.map_or_else(|| "kernel".to_string(), |i| format!("kernel[{i}]")),
                source,
            }
        })?;
        let mut sources = Vec::with_capacity(self.sources.len());
        for (i, entry) in self.sources.iter().enumerate() {
            let pos = point(&format!("sources[{i}].position"), &entry.position, self.dim)?;
            let src = BranchingSource::new(pos, entry.coefficients.clone()).map_err(|source| ConfigError::Validation {
                field: format!("sources[{i}]"),
                source,
            })?;
            sources.push(src);
        }
        BrwConfig::new(kernel, sources).map_err(|source| {
            let field = match &source {
                KernelError::DuplicateSource(p) => self
                    .sources
                    .iter()
                    .rposition(|s| s.position == p.coords())
                    .map_or_else(|| "sources".to_string(), |i| format!("sources[{i}]")),
                _ => "sources".to_string(),
            };
            ConfigError::Validation { field, source }
        })
    }

    /// Resolved file as TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

impl Config {
    pub fn spectral_options(&self) -> SpectralOptions {
        let n = &self.file.numerics;
        SpectralOptions::new(
            QuadratureSpec::new(n.quadrature_nodes).expect("checked when parsed"),
            n.window.unwrap_or_else(|| SpectralOptions::for_dim(self.file.dim).window),
        )
    }

    pub fn moment_options(&self) -> MomentOptions {
        let n = &self.file.numerics;
        let points: Vec<Point> = BoxLattice::new(self.file.dim, n.moment_window).points().collect();
        MomentOptions {
            n_max: n.n_max,
            radius: n.radius,
            x_points: points.clone(),
            y_points: points,
        }
    }

    pub fn run_options(&self) -> Result<RunOptions, ConfigError> {
        let s = &self.file.simulation;
        let mut options = RunOptions::new(&self.model, s.horizon, s.cap);
        options.snapshots = s.snapshots;
        options.window = s.window;
        if let Some(start) = &s.start {
            options.start = point("simulation.start", start, self.file.dim)?;
        }
        Ok(options)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "dim = 1\n\n[[kernel]]\noffset = [1]\nrate = 0.5\n\n[[kernel]]\noffset = [-1]\nrate = 0.5\n\n[[sources]]\nposition = [0]\ncoefficients = [1.0, -3.0, 2.0]\n";

    #[test]
    fn minimal_config() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.model.n_sources(), 1);
        assert_eq!(cfg.file.numerics.window, Some(60));
        assert_eq!(cfg.file.simulation.start, Some(vec![0]));
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        let text = MINIMAL.replace("coefficients", "beta_total = 1.0\ncoefficients");
        match parse_config_str(&text) {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert_eq!(line, 13);
                assert!(message.contains("beta_total"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn asymmetric_kernel_names_the_entry() {
        let text = MINIMAL.replacen("rate = 0.5", "rate = 0.7", 1);
        match parse_config_str(&text) {
            Err(ConfigError::Validation { field, source }) => {
                assert!(matches!(source, KernelError::AsymmetricKernel { .. }));
                assert!(field == "kernel[0]" || field == "kernel[1]", "{field}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let again = parse_config_str(&cfg.file.to_toml()).unwrap();
        assert_eq!(cfg.file, again.file);
    }
}
