//! JSON experiment configuration: model specs, grid specs, and task
//! parameters. Everything round-trips losslessly through serde so a run is
//! reproducible from its config file alone.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::spectral::{
    BrownianLevySpectral, CovKernel, GaussianSpectral, MaskedSpectral, SpectralModel,
};

/// Centralized defaults, documented in the README defaults table.
pub const DEFAULT_REPS: usize = 100_000;
pub const DEFAULT_KS_LEVEL: f64 = 0.01;
pub const DEFAULT_RADIUS: f64 = 8.0;
pub const DEFAULT_ERROR_BUDGET: f64 = 1e-4;

fn one() -> f64 {
    1.0
}

/// Spectral model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Fractional-Brownian kernel: incremental variance `scale |t-s|^alpha`.
    Fbm {
        alpha: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Drift-corrected scaled Brownian motion on nonnegative times.
    BrownianLevy {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Total-kill mixture: inner model with survival probability `p`.
    Masked { p: f64, inner: Box<ModelSpec> },
    /// Explicit covariance matrix from a CSV file (header row: the
    /// one-dimensional grid coordinates; body: the symmetric matrix).
    Kernel { matrix_file: PathBuf },
    /// Rank-one kernel `r(s,t) = scale (s t)^power`. `power = 1, scale = 2`
    /// is the quadrature-oracle model; `power = 2` is the non-stationary
    /// negative control.
    Monomial {
        power: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl ModelSpec {
    /// Build the runtime model; `base_dir` anchors relative file paths.
    pub fn build(&self, base_dir: &Path) -> Result<SpectralModel> {
        match self {
            ModelSpec::Fbm { alpha, scale } => Ok(SpectralModel::Gaussian(GaussianSpectral::new(
                CovKernel::fbm_scaled(*alpha, *scale)?,
            ))),
            ModelSpec::BrownianLevy { scale } => Ok(SpectralModel::BrownianLevy(
                BrownianLevySpectral::new(*scale)?,
            )),
            ModelSpec::Masked { p, inner } => {
                let inner = match inner.build(base_dir)? {
                    SpectralModel::Gaussian(g) => g,
                    SpectralModel::BrownianLevy(b) => b.as_gaussian(),
                    SpectralModel::Masked(_) => {
                        return Err(Error::Config(
                            "model.inner: masked models cannot nest".into(),
                        ))
                    }
                };
                Ok(SpectralModel::Masked(MaskedSpectral::new(*p, inner)?))
            }
            ModelSpec::Kernel { matrix_file } => {
                let path = if matrix_file.is_absolute() {
                    matrix_file.clone()
                } else {
                    base_dir.join(matrix_file)
                };
                let (grid, matrix) = read_kernel_csv(&path)?;
                Ok(SpectralModel::Gaussian(GaussianSpectral::from_matrix(
                    grid, matrix,
                )?))
            }
            ModelSpec::Monomial { power, scale } => Ok(SpectralModel::Gaussian(
                GaussianSpectral::new(CovKernel::Monomial {
                    power: *power,
                    scale: *scale,
                }),
            )),
        }
    }
}

fn read_kernel_csv(path: &Path) -> Result<(Grid, DMatrix<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("model.matrix_file: cannot read {path:?}: {e}")))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("model.matrix_file: empty file".into()))?;
    let coords: Vec<f64> = header
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("model.matrix_file: bad header cell '{c}'")))
        })
        .collect::<Result<_>>()?;
    let n = coords.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("model.matrix_file: bad cell '{c}'")))
            })
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(Error::Config(
                "model.matrix_file: row width must match header".into(),
            ));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::Config(
            "model.matrix_file: matrix must be square against the header".into(),
        ));
    }
    let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok((Grid::from_coords_1d(&coords)?, matrix))
}

/// Index-set specification: a lattice box or explicit points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Lattice {
        dim: usize,
        delta: f64,
        /// Box side length; the box is `[lo, lo + extent]^dim`.
        extent: f64,
        #[serde(default)]
        lo: f64,
    },
    Points { points: Vec<Vec<f64>> },
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        match self {
            GridSpec::Lattice {
                dim,
                delta,
                extent,
                lo,
            } => {
                if !(*extent > 0.0) {
                    return Err(Error::Config("grid.extent must be > 0".into()));
                }
                Grid::lattice(*dim, *delta, *lo, lo + extent)
            }
            GridSpec::Points { points } => Grid::new(points.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimAlgorithm {
    Dm,
    Direct,
}

impl Default for SimAlgorithm {
    fn default() -> Self {
        SimAlgorithm::Dm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidiMethod {
    Mc,
    Infargmax,
    Empirical,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PickandsMethodSpec {
    Direct,
    Ratio,
    Argmax,
    C0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentitySpec {
    XiShift,
    TiltShift,
    ThetaShift,
    Field,
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS
}

fn default_dim() -> usize {
    1
}

fn default_budget() -> f64 {
    DEFAULT_ERROR_BUDGET
}

/// Task-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskSpec {
    Simulate {
        grid: GridSpec,
        #[serde(default)]
        algorithm: SimAlgorithm,
        #[serde(default = "default_budget")]
        budget: f64,
        #[serde(default)]
        provenance: bool,
    },
    Fidi {
        points: Vec<Vec<f64>>,
        x: Vec<f64>,
        method: FidiMethod,
    },
    Pickands {
        method: PickandsMethodSpec,
        delta: f64,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default = "default_dim")]
        dim: usize,
        window: Option<f64>,
    },
    Check {
        identity: IdentitySpec,
        a: Vec<f64>,
        h: Vec<f64>,
        grid: GridSpec,
        functional: Option<String>,
    },
    Extend {
        grid: GridSpec,
    },
    Oracle {
        method: PickandsMethodSpec,
        delta: f64,
        #[serde(default = "default_radius")]
        radius: f64,
    },
}

fn default_reps() -> usize {
    DEFAULT_REPS
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(flatten)]
    pub task: TaskSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {path:?}: {e}")))?;
        Self::from_json(&text)
    }

    /// Stable hash of the canonical serialized form, for provenance headers.
    pub fn content_hash(&self) -> u64 {
        fnv1a(self.to_json().as_bytes())
    }
}

/// FNV-1a, 64-bit: tiny, dependency-free, stable across platforms.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}
