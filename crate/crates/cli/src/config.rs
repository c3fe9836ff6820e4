use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use crackband_core::cell::assert_simple;
use crackband_core::pencil::{Method, DEFAULT_ORDER, DEFAULT_THETA_POINTS};
use crackband_core::{CellSpec, ModeIndex};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MethodChoice {
    Root,
    Reduced,
    FdOracle,
    All,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Root => vec![Method::Root],
            MethodChoice::Reduced => vec![Method::Reduced],
            MethodChoice::FdOracle => vec![Method::FdOracle],
            MethodChoice::All => vec![Method::Root, Method::Reduced, Method::FdOracle],
        }
    }
}

/// Run parameters as read from a JSON file; every field is optional there.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub height: Option<f64>,
    pub m: Option<u32>,
    pub n: Option<u32>,
    pub epsilons: Option<Vec<f64>>,
    pub theta_points: Option<usize>,
    pub theta: Option<f64>,
    pub order: Option<usize>,
    pub h: Option<f64>,
    pub method: Option<MethodChoice>,
    pub count: Option<usize>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Command-line overrides; any flag given wins over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cell height H.
    #[arg(long)]
    pub height: Option<f64>,
    /// Longitudinal mode index.
    #[arg(long)]
    pub m: Option<u32>,
    /// Transverse mode index.
    #[arg(long)]
    pub n: Option<u32>,
    /// Comma-separated half-apertures.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Points of the uniform quasimomentum grid on [0, 2 pi].
    #[arg(long)]
    pub theta_points: Option<usize>,
    /// Quasimomentum for `prop2`.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Pencil order N.
    #[arg(long)]
    pub order: Option<usize>,
    /// Finite-difference spacing for the oracle.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,
    /// Number of eigenpairs for `modes`.
    #[arg(long)]
    pub count: Option<usize>,
    /// Band CSV consumed by `fit`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub height: f64,
    pub mode: ModeIndex,
    pub epsilons: Vec<f64>,
    pub theta_points: usize,
    pub theta: f64,
    pub order: usize,
    pub h: Option<f64>,
    pub method: MethodChoice,
    pub count: usize,
    #[serde(skip)]
    pub input: Option<PathBuf>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            height: 1.4,
            mode: ModeIndex::new(1, 0),
            epsilons: vec![1e-2, 1e-4, 1e-6],
            theta_points: DEFAULT_THETA_POINTS,
            theta: 0.0,
            order: DEFAULT_ORDER,
            h: None,
            method: MethodChoice::Root,
            count: 10,
            input: None,
            out: None,
        }
    }
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })
}

impl RunConfig {
    /// Defaults, then the config file, then flags.
    pub fn resolve(flags: &Overrides) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let d = RunConfig::default();
        Ok(RunConfig {
            height: flags.height.or(file.height).unwrap_or(d.height),
            mode: ModeIndex::new(
                flags.m.or(file.m).unwrap_or(d.mode.m),
                flags.n.or(file.n).unwrap_or(d.mode.n),
            ),
            epsilons: flags.epsilons.clone().or(file.epsilons).unwrap_or(d.epsilons),
            theta_points: flags.theta_points.or(file.theta_points).unwrap_or(d.theta_points),
            theta: flags.theta.or(file.theta).unwrap_or(d.theta),
            order: flags.order.or(file.order).unwrap_or(d.order),
            h: flags.h.or(file.h),
            method: flags.method.or(file.method).unwrap_or(d.method),
            count: flags.count.or(file.count).unwrap_or(d.count),
            input: flags.input.clone().or(file.input),
            out: flags.out.clone().or(file.out),
        })
    }

    /// Checks shared by every command that builds a cell.
    pub fn validate_cell(&self) -> Result<(), CliError> {
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(field("height", format!("must be positive, got {}", self.height)));
        }
        Ok(())
    }

    /// Checks for commands that evaluate a list of half-apertures.
    pub fn validate_epsilons(&self) -> Result<(), CliError> {
        self.validate_cell()?;
        if self.epsilons.is_empty() {
            return Err(field("epsilons", "must not be empty".into()));
        }
        for (i, &e) in self.epsilons.iter().enumerate() {
            if !(e.is_finite() && e > 0.0 && e < 0.5 * self.height && e < 1.0) {
                return Err(field(
                    &format!("epsilons[{i}]"),
                    format!("must satisfy 0 < eps < min(1, H/2), got {e}"),
                ));
            }
        }
        if self.order < 8 {
            return Err(field("order", format!("must be at least 8, got {}", self.order)));
        }
        if !self.theta.is_finite() {
            return Err(field("theta", "must be finite".into()));
        }
        Ok(())
    }

    /// The tracked mode must be a simple eigenvalue of the cell.
    pub fn validate_simple(&self) -> Result<(), CliError> {
        let cell = self.spectral_cell()?;
        let window = 4.0 * cell.eigenvalue(self.mode).max(1.0);
        assert_simple(&cell, self.mode, window).map_err(|e| field("mode", e.to_string()))?;
        Ok(())
    }

    pub fn validate_band(&self) -> Result<(), CliError> {
        self.validate_epsilons()?;
        self.validate_simple()?;
        if self.theta_points == 0 {
            return Err(field("theta_points", "must be at least 1".into()));
        }
        if self.method.methods().contains(&Method::FdOracle) {
            match self.h {
                None => return Err(field("h", "required when method includes fd_oracle".into())),
                Some(h) if !(h.is_finite() && h > 0.0) => {
                    return Err(field("h", format!("must be positive, got {h}")))
                }
                Some(h) => {
                    for (name, length) in [("period", 1.0), ("height", self.height)] {
                        let r = length / h;
                        if (r - r.round()).abs() > 1e-9 * r {
                            return Err(field("h", format!("{h} does not divide the {name} {length}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn cell(&self, epsilon: f64) -> Result<CellSpec, CliError> {
        CellSpec::new(self.height, epsilon, self.mode).map_err(|e| CliError::Config(e.to_string()))
    }

    /// A cell for spectral data that does not depend on the window.
    pub fn spectral_cell(&self) -> Result<CellSpec, CliError> {
        self.validate_cell()?;
        self.cell((0.25 * self.height).min(1e-2))
    }
}

fn field(name: &str, message: String) -> CliError {
    CliError::Config(format!("field `{name}`: {message}"))
}
