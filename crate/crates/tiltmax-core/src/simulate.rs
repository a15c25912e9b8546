//! Simulation of the associated max-stable field on a finite grid.
//!
//! Two algorithms ship. The exact one rewrites the field with marked Poisson
//! atoms and sum-normalized shape functions; with the counting measure on
//! the target grid every shape is bounded above by zero, so atom levels
//! eventually fall below the running minimum and the enumeration stops with
//! a guarantee. The direct algorithm enumerates raw atoms and truncates
//! under a caller-supplied error budget; it is deliberately kept as an
//! independent implementation for cross-validation.

use crate::error::{Error, Result};
use crate::grid::{log_sum_exp_uniform, Grid, LogPath};
use crate::rng::{GumbelPppStream, MarkLaw, RngStream};
use crate::spectral::{GaussianSpectral, PathSampler, SpectralModel};

/// One retained Poisson atom: level, mark index, and the shape (or raw)
/// path it contributed.
#[derive(Debug, Clone)]
pub struct Atom {
    pub level: f64,
    pub mark_index: usize,
    pub path: LogPath,
}

/// One realization of the max-stable field on a grid, Gumbel scale.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Generating atoms, retained only on request.
    pub provenance: Option<Vec<Atom>>,
    /// True when the stopping rule guarantees no unsimulated atom could
    /// exceed any recorded value.
    pub exact: bool,
}

impl FieldSample {
    pub fn value_at(&self, point: &[f64]) -> Result<f64> {
        self.grid
            .index_of(point)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::PointNotOnGrid(point.to_vec()))
    }
}

/// The atom attaining the field maximum at the anchor point.
#[derive(Debug, Clone)]
pub struct ExtremalFunction {
    pub anchor: Vec<f64>,
    pub path: LogPath,
    pub level: f64,
}

impl ExtremalFunction {
    /// Shape anchored to zero at the anchor: `path(.) - path(anchor)`.
    /// Its law is the anchored tilted process of the model, independent of
    /// the field value at the anchor.
    pub fn normalized_shape(&self) -> Result<LogPath> {
        let at_anchor = self.path.value_at(&self.anchor)?;
        let values = self.path.values().iter().map(|v| v - at_anchor).collect();
        LogPath::new(self.path.grid().clone(), values)
    }
}

/// Reusable exact simulator: per-anchor shape samplers are factorized once
/// and shared across replicates.
pub struct DmSimulator {
    grid: Grid,
    theta_samplers: Vec<PathSampler>,
    marks: MarkLaw,
}

impl DmSimulator {
    pub fn new(model: &SpectralModel, grid: &Grid) -> Result<Self> {
        let theta_samplers = grid
            .points()
            .map(|h| PathSampler::new(&model.theta_process(h), grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            theta_samplers,
            marks: MarkLaw::counting(grid.len())?,
        })
    }

    /// Build from an explicit Gaussian spectral vector (the two-sided
    /// extension feeds its extension law through here).
    pub fn from_gaussian_vector(model: &GaussianSpectral, grid: &Grid) -> Result<Self> {
        Self::new(&SpectralModel::Gaussian(model.clone()), grid)
    }

    /// One exact field realization.
    ///
    /// Atoms arrive in strictly decreasing level order. Each shape satisfies
    /// `F(t) <= 0`, so once the level drops below the running minimum of the
    /// field no later atom can contribute anywhere.
    pub fn sample(&self, rng: RngStream, retain_provenance: bool) -> Result<FieldSample> {
        let n = self.grid.len();
        let mut ppp = GumbelPppStream::new(rng, self.marks.mass())?;
        let mut values = vec![f64::NEG_INFINITY; n];
        let mut atoms = if retain_provenance { Some(Vec::new()) } else { None };
        loop {
            let running_min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let (level, mark) = ppp.next_marked(&self.marks)?;
            if level < running_min {
                break;
            }
            let theta = self.theta_samplers[mark].sample(ppp.rng_mut());
            let normalizer = log_sum_exp_uniform(theta.values());
            // an all -inf theta path cannot occur: theta is zero at its own
            // anchor, so the normalizer is finite
            debug_assert!(normalizer.is_finite());
            let mut shape = vec![0.0; n];
            let mut contributed = false;
            for i in 0..n {
                shape[i] = theta.values()[i] - normalizer;
                debug_assert!(shape[i] <= 1e-12, "shape must be <= 0, got {}", shape[i]);
                let candidate = level + shape[i];
                if candidate > values[i] {
                    values[i] = candidate;
                    contributed = true;
                }
            }
            if let Some(atoms) = atoms.as_mut() {
                if contributed || atoms.is_empty() {
                    atoms.push(Atom {
                        level,
                        mark_index: mark,
                        path: LogPath::new(self.grid.clone(), shape)?,
                    });
                }
            }
        }
        Ok(FieldSample {
            grid: self.grid.clone(),
            values,
            provenance: atoms,
            exact: true,
        })
    }
}

/// Exact sample of the max-stable field restricted to the grid.
pub fn simulate_dm(
    model: &SpectralModel,
    grid: &Grid,
    rng: RngStream,
    retain_provenance: bool,
) -> Result<FieldSample> {
    DmSimulator::new(model, grid)?.sample(rng, retain_provenance)
}

/// Reusable direct simulator over raw spectral atoms.
pub struct DirectSimulator {
    grid: Grid,
    sampler: crate::spectral::ModelSampler,
    error_budget: f64,
}

impl DirectSimulator {
    pub fn new(model: &SpectralModel, grid: &Grid, error_budget: f64) -> Result<Self> {
        if !(error_budget > 0.0) {
            return Err(Error::InvalidArgument("error budget must be > 0".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            sampler: model.sampler(grid)?,
            error_budget,
        })
    }

    /// Approximate field realization.
    ///
    /// Atoms are discarded once the level falls below the threshold `tau`
    /// solving `sum_t exp(tau - m(t)) = budget`, the union bound over grid
    /// points of the per-atom Markov bound `P(tau + Z(t) > m(t)) <=
    /// exp(tau - m(t))` from the unit exponential moment.
    pub fn sample(&self, rng: RngStream, retain_provenance: bool) -> Result<FieldSample> {
        let n = self.grid.len();
        let mut ppp = GumbelPppStream::new(rng, 1.0)?;
        let mut values = vec![f64::NEG_INFINITY; n];
        let mut atoms = if retain_provenance { Some(Vec::new()) } else { None };
        loop {
            // tau = ln(budget) - ln(sum_t e^{-m(t)}); grows as the field fills in
            let log_sum_exp_neg_m = log_sum_exp_uniform(
                &values.iter().map(|v| -v).collect::<Vec<f64>>(),
            );
            let tau = self.error_budget.ln() - log_sum_exp_neg_m;
            let level = ppp.next_point();
            if level < tau {
                break;
            }
            let path = self.sampler.sample(ppp.rng_mut());
            let mut contributed = false;
            for i in 0..n {
                let candidate = level + path.values()[i];
                if candidate > values[i] {
                    values[i] = candidate;
                    contributed = true;
                }
            }
            if let Some(atoms) = atoms.as_mut() {
                if contributed {
                    atoms.push(Atom {
                        level,
                        mark_index: 0,
                        path: path.clone(),
                    });
                }
            }
        }
        Ok(FieldSample {
            grid: self.grid.clone(),
            values,
            provenance: atoms,
            exact: false,
        })
    }
}

/// Approximate sample by truncated direct enumeration.
pub fn simulate_direct(
    model: &SpectralModel,
    grid: &Grid,
    rng: RngStream,
    error_budget: f64,
    retain_provenance: bool,
) -> Result<FieldSample> {
    DirectSimulator::new(model, grid, error_budget)?.sample(rng, retain_provenance)
}

/// Extract the atom attaining the field maximum at `h`. Requires the field
/// to have been simulated with provenance retention.
pub fn extract_extremal(field: &FieldSample, h: &[f64]) -> Result<ExtremalFunction> {
    let atoms = field.provenance.as_ref().ok_or(Error::NoProvenance)?;
    let target = field.value_at(h)?;
    let mut best: Option<&Atom> = None;
    let mut best_val = f64::NEG_INFINITY;
    for atom in atoms {
        let v = atom.level + atom.path.value_at(h)?;
        if v > best_val {
            best_val = v;
            best = Some(atom);
        }
    }
    let atom = best.ok_or(Error::NoProvenance)?;
    debug_assert!((best_val - target).abs() < 1e-9);
    Ok(ExtremalFunction {
        anchor: h.to_vec(),
        path: atom.path.clone(),
        level: atom.level,
    })
}

/// Spectral law of the two-sided extension on a grid spanning negative and
/// positive points: `Y(t) = Xi_h Z(t + h)` with
/// `h = -min(0, min_j t_j)`, expressed as a Gaussian model through the
/// shifted increment kernel.
pub fn two_sided_extension(model: &SpectralModel, grid: &Grid) -> Result<GaussianSpectral> {
    let dim = grid.dim();
    let mut h = vec![0.0f64; dim];
    for t in grid.points() {
        for k in 0..dim {
            h[k] = h[k].max(-t[k]);
        }
    }
    let anchored = model.theta_process(&h);
    Ok(GaussianSpectral::new(crate::spectral::CovKernel::Shift {
        base: Box::new(anchored.kernel().clone()),
        offset: h,
    }))
}

/// Sample the two-sided extension field: realize the extension spectral
/// vector `Y` on the grid and feed it to the exact simulator.
pub fn simulate_two_sided(
    model: &SpectralModel,
    grid: &Grid,
    rng: RngStream,
    retain_provenance: bool,
) -> Result<FieldSample> {
    let extension = two_sided_extension(model, grid)?;
    DmSimulator::from_gaussian_vector(&extension, grid)?.sample(rng, retain_provenance)
}
