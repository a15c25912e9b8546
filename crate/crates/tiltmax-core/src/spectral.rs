//! Spectral process models with unit exponential moment, their sampling,
//! and exponential tilting.
//!
//! Every model represents a process `Z` with `E exp(Z(t)) = 1` at each index
//! point. Gaussian models are written in the canonical form
//! `Z(t) = B(t) - var(B(t))/2`; the normalizer is always applied
//! analytically, never estimated.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{Grid, LogPath};
use crate::report::{run_replicates, EstimatorReport};
use crate::rng::RngStream;

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn dist(s: &[f64], t: &[f64]) -> f64 {
    s.iter()
        .zip(t)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn signed_pow(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// Covariance kernel of the underlying centered Gaussian `B`.
#[derive(Debug, Clone)]
pub enum CovKernel {
    /// Fractional-Brownian family: incremental variance
    /// `gamma(s,t) = scale * |t-s|^alpha`, so
    /// `r(s,t) = scale * (|s|^alpha + |t|^alpha - |t-s|^alpha) / 2`.
    Fbm { alpha: f64, scale: f64 },
    /// Brownian motion `c B(t)` on `t >= 0`: `r(s,t) = c^2 min(s,t)`.
    Brownian { scale: f64 },
    /// Degenerate rank-one family `B(t) = sqrt(scale) t^power xi`:
    /// `r(s,t) = scale (s t)^power`. `power = 1, scale = 2` is the canonical
    /// quadrature-oracle model; `power = 2` has non-stationary increments
    /// and serves as the negative control.
    Monomial { power: f64, scale: f64 },
    /// User-supplied covariance matrix over an explicit grid.
    Explicit { grid: Grid, matrix: DMatrix<f64> },
    /// Covariance of the increment `B(t) - B(anchor)` of a base kernel.
    Increment {
        base: Box<CovKernel>,
        anchor: Vec<f64>,
    },
    /// Base kernel with translated arguments: `r(s,t) = base(s+off, t+off)`.
    Shift {
        base: Box<CovKernel>,
        offset: Vec<f64>,
    },
}

impl CovKernel {
    pub fn fbm(alpha: f64) -> Result<Self> {
        Self::fbm_scaled(alpha, 1.0)
    }

    pub fn fbm_scaled(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidArgument("fbm index must be in (0, 2]".into()));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument("fbm scale must be > 0".into()));
        }
        Ok(CovKernel::Fbm { alpha, scale })
    }

    pub fn r(&self, s: &[f64], t: &[f64]) -> f64 {
        match self {
            CovKernel::Fbm { alpha, scale } => {
                0.5 * scale
                    * (norm(s).powf(*alpha) + norm(t).powf(*alpha) - dist(s, t).powf(*alpha))
            }
            CovKernel::Brownian { scale } => {
                let (a, b) = (s[0], t[0]);
                assert!(
                    a >= -1e-12 && b >= -1e-12,
                    "Brownian kernel evaluated at negative time"
                );
                scale * scale * a.max(0.0).min(b.max(0.0))
            }
            CovKernel::Monomial { power, scale } => {
                scale * signed_pow(s[0], *power) * signed_pow(t[0], *power)
            }
            CovKernel::Explicit { grid, matrix } => {
                let i = grid
                    .index_of(s)
                    .unwrap_or_else(|| panic!("point {s:?} off the kernel grid"));
                let j = grid
                    .index_of(t)
                    .unwrap_or_else(|| panic!("point {t:?} off the kernel grid"));
                matrix[(i, j)]
            }
            CovKernel::Increment { base, anchor } => {
                base.r(s, t) - base.r(s, anchor) - base.r(anchor, t) + base.r(anchor, anchor)
            }
            CovKernel::Shift { base, offset } => {
                let sp: Vec<f64> = s.iter().zip(offset).map(|(a, b)| a + b).collect();
                let tp: Vec<f64> = t.iter().zip(offset).map(|(a, b)| a + b).collect();
                base.r(&sp, &tp)
            }
        }
    }

    /// Variance function `sigma^2(t) = r(t,t)`.
    pub fn variance(&self, t: &[f64]) -> f64 {
        self.r(t, t)
    }

    /// Incremental variance `gamma(s,t) = Var(B(t) - B(s))`.
    pub fn gamma(&self, s: &[f64], t: &[f64]) -> f64 {
        self.variance(s) + self.variance(t) - 2.0 * self.r(s, t)
    }

    /// For rank-one kernels `B(t) = a(t) xi`, the factor `a(t)`;
    /// enables exact sampling without factorization.
    fn rank1_factor(&self, t: &[f64]) -> Option<f64> {
        match self {
            CovKernel::Monomial { power, scale } => {
                Some(scale.sqrt() * signed_pow(t[0], *power))
            }
            CovKernel::Increment { base, anchor } => {
                Some(base.rank1_factor(t)? - base.rank1_factor(anchor)?)
            }
            CovKernel::Shift { base, offset } => {
                let tp: Vec<f64> = t.iter().zip(offset).map(|(a, b)| a + b).collect();
                base.rank1_factor(&tp)
            }
            _ => None,
        }
    }

    fn is_rank1(&self) -> bool {
        match self {
            CovKernel::Monomial { .. } => true,
            CovKernel::Increment { base, .. } | CovKernel::Shift { base, .. } => base.is_rank1(),
            _ => false,
        }
    }
}

/// A Gaussian spectral model `Z(t) = B(t) - sigma^2(t)/2 [+ r(h,t)]`.
///
/// With `tilt_anchor = None` this is the canonical model with unit
/// exponential moment. With `tilt_anchor = Some(h)` it is the exponential
/// tilt `Z^{[h]}`: same covariance, mean shifted by the column `r(h, .)`.
#[derive(Debug, Clone)]
pub struct GaussianSpectral {
    cov: CovKernel,
    tilt_anchor: Option<Vec<f64>>,
}

impl GaussianSpectral {
    pub fn new(cov: CovKernel) -> Self {
        Self {
            cov,
            tilt_anchor: None,
        }
    }

    pub fn fbm(alpha: f64) -> Result<Self> {
        Ok(Self::new(CovKernel::fbm(alpha)?))
    }

    /// Build from an explicit covariance matrix; PSD is verified by
    /// factorization (with the jitter ladder) at construction.
    pub fn from_matrix(grid: Grid, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::Config("covariance matrix size must match grid".into()));
        }
        if (&matrix - matrix.transpose()).abs().max() > 1e-9 * matrix.abs().max().max(1.0) {
            return Err(Error::Config("covariance matrix must be symmetric".into()));
        }
        factorize_with_jitter(matrix.clone())?;
        Ok(Self::new(CovKernel::Explicit { grid, matrix }))
    }

    pub fn kernel(&self) -> &CovKernel {
        &self.cov
    }

    pub fn is_tilted(&self) -> bool {
        self.tilt_anchor.is_some()
    }

    pub fn mean(&self, t: &[f64]) -> f64 {
        let base = -0.5 * self.cov.variance(t);
        match &self.tilt_anchor {
            Some(h) => base + self.cov.r(h, t),
            None => base,
        }
    }

    pub fn covariance(&self, s: &[f64], t: &[f64]) -> f64 {
        self.cov.r(s, t)
    }

    pub fn mean_vector(&self, grid: &Grid) -> Vec<f64> {
        grid.points().map(|t| self.mean(t)).collect()
    }

    pub fn cov_matrix(&self, grid: &Grid) -> DMatrix<f64> {
        let n = grid.len();
        DMatrix::from_fn(n, n, |i, j| self.cov.r(grid.point(i), grid.point(j)))
    }

    /// The tilted model `Z^{[h]}`: covariance unchanged, mean shifted by
    /// `r(h, .)`.
    pub fn tilt_closed_form(&self, h: &[f64]) -> Result<GaussianSpectral> {
        if self.tilt_anchor.is_some() {
            return Err(Error::InvalidArgument(
                "model is already tilted; tilt the canonical model".into(),
            ));
        }
        Ok(GaussianSpectral {
            cov: self.cov.clone(),
            tilt_anchor: Some(h.to_vec()),
        })
    }

    /// The anchored tilted process `Xi_h Z(t) = Z^{[h]}(t) - Z^{[h]}(h)`:
    /// Gaussian with mean `-gamma(h,t)/2` and covariance
    /// `(gamma(h,t) + gamma(h,s) - gamma(s,t))/2`; it is zero with zero
    /// variance at `t = h`. In canonical form this is the increment kernel
    /// anchored at `h`.
    pub fn xi_process(&self, h: &[f64]) -> GaussianSpectral {
        GaussianSpectral::new(CovKernel::Increment {
            base: Box::new(self.cov.clone()),
            anchor: h.to_vec(),
        })
    }
}

enum SampleFactor {
    Rank1(Vec<f64>),
    Chol(DMatrix<f64>),
}

/// Precomputed sampler of a Gaussian model on a fixed grid. Factorizes once;
/// each draw costs one matrix-vector product (or one scalar for rank-one
/// kernels).
pub struct PathSampler {
    grid: Grid,
    means: Vec<f64>,
    zero_var: Vec<bool>,
    factor: SampleFactor,
}

impl PathSampler {
    pub fn new(model: &GaussianSpectral, grid: &Grid) -> Result<Self> {
        let means = model.mean_vector(grid);
        let zero_var: Vec<bool> = grid.points().map(|t| model.cov.variance(t) == 0.0).collect();
        let factor = if model.cov.is_rank1() {
            SampleFactor::Rank1(
                grid.points()
                    .map(|t| model.cov.rank1_factor(t).unwrap())
                    .collect(),
            )
        } else {
            SampleFactor::Chol(factorize_with_jitter(model.cov_matrix(grid))?)
        };
        Ok(Self {
            grid: grid.clone(),
            means,
            zero_var,
            factor,
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> LogPath {
        let n = self.grid.len();
        let mut values = vec![0.0; n];
        match &self.factor {
            SampleFactor::Rank1(a) => {
                let xi = rng.standard_normal();
                for i in 0..n {
                    values[i] = self.means[i] + a[i] * xi;
                }
            }
            SampleFactor::Chol(l) => {
                let z: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
                for i in 0..n {
                    let mut acc = self.means[i];
                    for j in 0..=i {
                        acc += l[(i, j)] * z[j];
                    }
                    values[i] = acc;
                }
            }
        }
        // points with zero variance are deterministic; kill any jitter noise
        for i in 0..n {
            if self.zero_var[i] {
                values[i] = self.means[i];
            }
        }
        LogPath::new(self.grid.clone(), values).expect("sampler produces a valid path")
    }
}

/// Lower-triangular Cholesky factor, with relative diagonal jitter escalated
/// through 0, 1e-12, 1e-10, 1e-8 before giving up.
fn factorize_with_jitter(matrix: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = matrix.diagonal().amax();
    if scale == 0.0 {
        // deterministic model: zero factor
        return Ok(DMatrix::zeros(matrix.nrows(), matrix.ncols()));
    }
    for jitter in [0.0, 1e-12, 1e-10, 1e-8] {
        let mut m = matrix.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter * scale;
            }
        }
        if let Some(chol) = m.cholesky() {
            return Ok(chol.l());
        }
    }
    Err(Error::KernelNotPsd)
}

/// Laplace exponent of the driving Levy process. Only the Brownian case
/// ships, but it is carried as an evaluable object so exponent identities
/// are testable on a grid of arguments.
#[derive(Debug, Clone, Copy)]
pub enum LaplaceExponent {
    /// `Phi(theta) = c^2 theta^2 / 2` for the scaled Brownian motion `c B(t)`.
    BrownianScale(f64),
}

impl LaplaceExponent {
    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            LaplaceExponent::BrownianScale(c) => c * c * theta * theta / 2.0,
        }
    }
}

/// Laplace exponent of the time-reversed (two-sided extension) process:
/// `Phi(1 - theta) - (1 - theta) Phi(1)`.
pub fn levy_two_sided_exponent(phi: &LaplaceExponent, theta: f64) -> f64 {
    phi.eval(1.0 - theta) - (1.0 - theta) * phi.eval(1.0)
}

/// Drift-corrected Brownian spectral process `Z(t) = c B(t) - c^2 t / 2` on
/// `t >= 0`, with independent stationary increments.
#[derive(Debug, Clone, Copy)]
pub struct BrownianLevySpectral {
    scale: f64,
}

impl BrownianLevySpectral {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument("scale must be > 0".into()));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn laplace_exponent(&self) -> LaplaceExponent {
        LaplaceExponent::BrownianScale(self.scale)
    }

    /// On any finite grid this is the Gaussian model with the Brownian
    /// kernel; all tilting machinery applies through that view.
    pub fn as_gaussian(&self) -> GaussianSpectral {
        GaussianSpectral::new(CovKernel::Brownian { scale: self.scale })
    }
}

/// Spectral model with a total-kill branch: with probability `p` the path is
/// the inner Gaussian path shifted by `-ln p`, otherwise identically `-inf`.
///
/// The anchored tilted process of this model is the inner model's, whatever
/// `p` is.
#[derive(Debug, Clone)]
pub struct MaskedSpectral {
    survive_prob: f64,
    inner: GaussianSpectral,
}

impl MaskedSpectral {
    pub fn new(survive_prob: f64, inner: GaussianSpectral) -> Result<Self> {
        if !(survive_prob > 0.0 && survive_prob <= 1.0) {
            return Err(Error::InvalidArgument(
                "survival probability must be in (0, 1]".into(),
            ));
        }
        Ok(Self {
            survive_prob,
            inner,
        })
    }

    pub fn survive_prob(&self) -> f64 {
        self.survive_prob
    }

    pub fn inner(&self) -> &GaussianSpectral {
        &self.inner
    }
}

/// Any shipped spectral model.
#[derive(Debug, Clone)]
pub enum SpectralModel {
    Gaussian(GaussianSpectral),
    BrownianLevy(BrownianLevySpectral),
    Masked(MaskedSpectral),
}

impl SpectralModel {
    pub fn fbm(alpha: f64) -> Result<Self> {
        Ok(SpectralModel::Gaussian(GaussianSpectral::fbm(alpha)?))
    }

    /// Probability that a single point (hence the whole path, in the
    /// total-kill model) is alive.
    pub fn survive_prob(&self) -> f64 {
        match self {
            SpectralModel::Masked(m) => m.survive_prob,
            _ => 1.0,
        }
    }

    /// The Gaussian view used for path generation (masked models defer to
    /// their inner model; the kill branch is applied on top).
    fn gaussian_view(&self) -> GaussianSpectral {
        match self {
            SpectralModel::Gaussian(g) => g.clone(),
            SpectralModel::BrownianLevy(b) => b.as_gaussian(),
            SpectralModel::Masked(m) => m.inner.clone(),
        }
    }

    /// Precompute a sampler for repeated draws on one grid.
    pub fn sampler(&self, grid: &Grid) -> Result<ModelSampler> {
        let inner = PathSampler::new(&self.gaussian_view(), grid)?;
        Ok(ModelSampler {
            inner,
            survive_prob: self.survive_prob(),
            grid: grid.clone(),
        })
    }

    /// One realization of `Z` on the grid.
    pub fn sample_path(&self, grid: &Grid, rng: &mut RngStream) -> Result<LogPath> {
        Ok(self.sampler(grid)?.sample(rng))
    }

    /// The identifiable anchored tilted process `Theta_h`.
    ///
    /// For Gaussian models this is `Xi_h Z`; for masked models it is the
    /// inner model's, independent of the kill probability. Always zero with
    /// zero variance at `h`.
    pub fn theta_process(&self, h: &[f64]) -> GaussianSpectral {
        self.gaussian_view().xi_process(h)
    }

    /// MC check of `E exp(Z(t)) = 1` at every grid point.
    pub fn check_unit_moment(
        &self,
        grid: &Grid,
        reps: usize,
        seed: u64,
    ) -> Result<Vec<EstimatorReport>> {
        if reps < 2 {
            return Err(Error::InvalidArgument("need at least 2 replicates".into()));
        }
        let sampler = self.sampler(grid)?;
        let rows = run_replicates(seed, reps, |_, rng| {
            let path = sampler.sample(rng);
            path.values().iter().map(|v| v.exp()).collect::<Vec<f64>>()
        });
        Ok((0..grid.len())
            .map(|j| {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                EstimatorReport::from_values(&col)
            })
            .collect())
    }
}

/// Sampler of a full spectral model (Gaussian path plus kill branch) on a
/// fixed grid.
pub struct ModelSampler {
    inner: PathSampler,
    survive_prob: f64,
    grid: Grid,
}

impl ModelSampler {
    pub fn sample(&self, rng: &mut RngStream) -> LogPath {
        if self.survive_prob < 1.0 {
            // kill decision first so surviving paths consume the same draws
            // as the unmasked model
            if !rng.bernoulli(self.survive_prob) {
                return LogPath::all_killed(self.grid.clone());
            }
            let mut path = self.inner.sample(rng);
            let shift = -self.survive_prob.ln();
            for v in path.values_mut() {
                *v += shift;
            }
            path
        } else {
            self.inner.sample(rng)
        }
    }
}

/// Importance-weight a path collection toward the tilted law at `h`:
/// weights proportional to `exp(Z(h))`, killed paths weight zero.
pub fn tilt_empirical<'a>(paths: &'a [LogPath], h: &[f64]) -> Result<Vec<(&'a LogPath, f64)>> {
    let raw: Vec<f64> = paths
        .iter()
        .map(|p| p.value_at(h).map(|v| v.exp()))
        .collect::<Result<_>>()?;
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::TiltPointKilled);
    }
    Ok(paths.iter().zip(raw).map(|(p, w)| (p, w / total)).collect())
}
