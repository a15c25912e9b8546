//! Finite index sets in R^d, log-valued paths with a first-class minus
//! infinity state, and the lag (backshift) operator.

use crate::error::{Error, Result};
use std::sync::Arc;

const COORD_TOL: f64 = 1e-9;

/// A finite ordered set of distinct points in R^d.
///
/// Ordering is lexicographic and fixed at construction so indices are stable.
/// `spacing` is set when the grid is a box inside `delta * Z^d`.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    points: Arc<Vec<Vec<f64>>>,
    spacing: Option<f64>,
}

impl Grid {
    pub fn new(mut points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one point".into()));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidArgument(
                "grid points must share a positive dimension".into(),
            ));
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in points.windows(2) {
            if coords_eq(&w[0], &w[1]) {
                return Err(Error::InvalidArgument("grid points must be distinct".into()));
            }
        }
        Ok(Self {
            dim,
            points: Arc::new(points),
            spacing: None,
        })
    }

    /// One-dimensional grid from explicit coordinates.
    pub fn from_coords_1d(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| vec![c]).collect())
    }

    /// Lattice `delta * Z^d` intersected with the box `[lo, hi]^d`.
    pub fn lattice(dim: usize, delta: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument("lattice spacing must be > 0".into()));
        }
        let k_lo = (lo / delta - COORD_TOL).ceil() as i64;
        let k_hi = (hi / delta + COORD_TOL).floor() as i64;
        if k_hi < k_lo {
            return Err(Error::InvalidArgument("empty lattice box".into()));
        }
        let axis: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 * delta).collect();
        let mut points = vec![vec![]];
        for _ in 0..dim {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for p in &points {
                for &c in &axis {
                    let mut q = p.clone();
                    q.push(c);
                    next.push(q);
                }
            }
            points = next;
        }
        let mut grid = Self::new(points)?;
        grid.spacing = Some(delta);
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one point
    }

    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.as_slice())
    }

    /// Index of a point, matched within a fixed absolute tolerance.
    pub fn index_of(&self, point: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| coords_eq(p, point))
    }

    /// Grid translated by `offset` (every point becomes `p + offset`).
    pub fn translate(&self, offset: &[f64]) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| p.iter().zip(offset).map(|(a, b)| a + b).collect())
            .collect();
        let mut g = Self::new(points)?;
        g.spacing = self.spacing;
        Ok(g)
    }
}

fn coords_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= COORD_TOL)
}

/// A realization of a log-scale process on a grid.
///
/// Values live in `[-inf, inf)`; `f64::NEG_INFINITY` is the exact killed
/// state, with `exp(-inf) = 0` and `-inf + finite = -inf` holding in IEEE
/// arithmetic. The all `-inf` path is representable (a masked sample can be
/// fully killed) but excluded wherever an operation requires a live point.
#[derive(Debug, Clone)]
pub struct LogPath {
    grid: Grid,
    values: Vec<f64>,
}

impl LogPath {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(
                "path length must match grid size".into(),
            ));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::InvalidArgument(
                "path values must be in [-inf, inf)".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn all_killed(grid: Grid) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![f64::NEG_INFINITY; n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value_at(&self, point: &[f64]) -> Result<f64> {
        self.grid
            .index_of(point)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::PointNotOnGrid(point.to_vec()))
    }

    pub fn is_all_killed(&self) -> bool {
        self.values.iter().all(|v| *v == f64::NEG_INFINITY)
    }

    /// Lag (backshift) by `h`: out(t) = in(t - h) on the common domain.
    ///
    /// The result lives on the sub-grid of points `t` with `t - h` on the
    /// original grid; an empty common domain is an error.
    pub fn lag_shift(&self, h: &[f64]) -> Result<LogPath> {
        if h.len() != self.grid.dim() {
            return Err(Error::InvalidArgument("shift dimension mismatch".into()));
        }
        let mut points = Vec::new();
        let mut values = Vec::new();
        for t in self.grid.points() {
            let src: Vec<f64> = t.iter().zip(h).map(|(a, b)| a - b).collect();
            if let Some(i) = self.grid.index_of(&src) {
                points.push(t.to_vec());
                values.push(self.values[i]);
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyShiftDomain);
        }
        LogPath::new(Grid::new(points)?, values)
    }
}

/// `ln sum_s w(s) exp(v(s))` with max-subtraction; exact about the killed
/// state (terms at `-inf` contribute zero). Returns `-inf` when every
/// contributing term vanishes; callers treat that as the degenerate case.
pub fn log_sum_exp(values: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    let m = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values
        .iter()
        .zip(weights)
        .filter(|(&v, &w)| w > 0.0 && v > f64::NEG_INFINITY)
        .map(|(&v, &w)| w * (v - m).exp())
        .sum();
    m + sum.ln()
}

/// Uniform-weight variant, the counting-measure normalizer of the exact
/// simulator.
pub fn log_sum_exp_uniform(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values
        .iter()
        .filter(|&&v| v > f64::NEG_INFINITY)
        .map(|&v| (v - m).exp())
        .sum();
    m + sum.ln()
}
