//! Finite-dimensional distributions of the max-stable field: Monte Carlo
//! estimators over spectral paths, the inf-argmax decomposition, a bivariate
//! closed form, empirical evaluation from simulated fields, tail recovery of
//! the anchored tilted process, and the Frechet-margin transform.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::report::{run_replicates, run_replicates_offset, EstimatorReport};
use crate::simulate::FieldSample;
use crate::spectral::{GaussianSpectral, PathSampler, SpectralModel};
use crate::stats::{exp1_cdf, ks_one_sample, std_normal_cdf, KsReport};

/// A joint lower-orthant query: points and Gumbel-scale thresholds.
#[derive(Debug, Clone)]
pub struct FidiQuery {
    pub points: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
}

impl FidiQuery {
    pub fn new(points: Vec<Vec<f64>>, thresholds: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != thresholds.len() {
            return Err(Error::InvalidArgument(
                "query needs n >= 1 points with matching thresholds".into(),
            ));
        }
        for (i, p) in points.iter().enumerate() {
            for q in &points[..i] {
                if p.iter().zip(q).all(|(a, b)| (a - b).abs() < 1e-12) {
                    return Err(Error::InvalidArgument("query points must be distinct".into()));
                }
            }
        }
        Ok(Self { points, thresholds })
    }

    pub fn one_dim(coords: &[f64], thresholds: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| vec![c]).collect(), thresholds.to_vec())
    }

    fn grid(&self) -> Result<Grid> {
        Grid::new(self.points.clone())
    }
}

/// `-ln P(zeta(t_i) <= x_i for all i)` as the MC average of
/// `max_i exp(Z(t_i) - x_i)` over spectral paths.
pub fn neglog_fidi_mc(
    model: &SpectralModel,
    query: &FidiQuery,
    reps: usize,
    seed: u64,
) -> Result<EstimatorReport> {
    if reps < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    let grid = query.grid()?;
    let sampler = model.sampler(&grid)?;
    // grid sorting may permute the query points; map thresholds to grid order
    let x: Vec<f64> = grid
        .points()
        .map(|t| {
            let k = query
                .points
                .iter()
                .position(|p| p.iter().zip(t).all(|(a, b)| (a - b).abs() < 1e-12))
                .expect("grid point originates from the query");
            query.thresholds[k]
        })
        .collect();
    let values = run_replicates(seed, reps, |_, rng| {
        let path = sampler.sample(rng);
        path.values()
            .iter()
            .zip(&x)
            .map(|(&z, &xi)| (z - xi).exp())
            .fold(0.0f64, f64::max)
    });
    Ok(EstimatorReport::from_values(&values))
}

/// `-ln H(x)` by the inf-argmax decomposition: for each index `k`, the
/// probability that `k` is the smallest argmax of
/// `Theta_{t_k}(t_i) - x_i`, combined as `sum_k exp(-x_k) Psi_k`.
///
/// Tie order: strict inequality against indices before `k`, non-strict
/// against `k` and later.
pub fn neglog_fidi_infargmax(
    model: &SpectralModel,
    query: &FidiQuery,
    reps: usize,
    seed: u64,
) -> Result<EstimatorReport> {
    if reps < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    let grid = query.grid()?;
    let n = query.points.len();
    let idx_of: Vec<usize> = query
        .points
        .iter()
        .map(|p| grid.index_of(p).expect("query point on its own grid"))
        .collect();
    let mut estimate = 0.0;
    let mut variance = 0.0;
    for k in 0..n {
        let theta = model.theta_process(&query.points[k]);
        let sampler = PathSampler::new(&theta, &grid)?;
        let xk = query.thresholds[k];
        // separate stream block per anchor; anchors use different laws
        let hits = run_replicates_offset(seed, (k as u64) << 32, reps, |_, rng| {
            let path = sampler.sample(rng);
            let scores: Vec<f64> = (0..n)
                .map(|i| path.values()[idx_of[i]] - query.thresholds[i])
                .collect();
            let sk = scores[k];
            let strictly_above_earlier = scores[..k].iter().all(|&s| s < sk);
            let at_least_later = scores[k + 1..].iter().all(|&s| s <= sk);
            if strictly_above_earlier && at_least_later {
                1.0
            } else {
                0.0
            }
        });
        let psi = EstimatorReport::from_values(&hits);
        let w = (-xk).exp();
        estimate += w * psi.estimate;
        variance += w * w * psi.stderr * psi.stderr;
    }
    Ok(EstimatorReport::new(estimate, variance.sqrt(), reps))
}

/// Bivariate closed form for incremental variance `gamma > 0`:
/// `exp(-x) Phi(lam + (y-x)/(2 lam)) + exp(-y) Phi(lam + (x-y)/(2 lam))`
/// with `lam = sqrt(gamma)/2`.
pub fn hr_closed_form(gamma: f64, x: f64, y: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    let lam = gamma.sqrt() / 2.0;
    Ok((-x).exp() * std_normal_cdf(lam + (y - x) / (2.0 * lam))
        + (-y).exp() * std_normal_cdf(lam + (x - y) / (2.0 * lam)))
}

/// Empirical joint probability and its negative log from simulated fields.
/// The negative-log stderr uses the delta method; a zero empirical
/// probability is reported as unbounded via the flag.
#[derive(Debug, Clone)]
pub struct EmpiricalFidi {
    pub probability: EstimatorReport,
    pub neglog: EstimatorReport,
    pub neglog_unbounded: bool,
}

pub fn empirical_fidi(fields: &[FieldSample], query: &FidiQuery) -> Result<EmpiricalFidi> {
    if fields.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    let hits: Vec<f64> = fields
        .iter()
        .map(|f| {
            let inside = query
                .points
                .iter()
                .zip(&query.thresholds)
                .all(|(p, &x)| f.value_at(p).map(|v| v <= x).unwrap_or(false));
            // a query point off the field grid is a caller error; surface it
            for p in &query.points {
                f.value_at(p)?;
            }
            Ok(if inside { 1.0 } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    let prob = EstimatorReport::from_values(&hits);
    if prob.estimate <= 0.0 {
        return Ok(EmpiricalFidi {
            neglog: EstimatorReport::new(f64::INFINITY, f64::INFINITY, fields.len()),
            probability: prob,
            neglog_unbounded: true,
        });
    }
    let neglog = EstimatorReport::new(
        -prob.estimate.ln(),
        prob.stderr / prob.estimate,
        fields.len(),
    );
    Ok(EmpiricalFidi {
        probability: prob,
        neglog,
        neglog_unbounded: false,
    })
}

/// Tail recovery of the anchored tilted process from exceedances of the
/// field at `h` over level `u`.
#[derive(Debug, Clone)]
pub struct GpdRecovery {
    pub exceedance_count: usize,
    /// Differences `zeta(t) - zeta(h)` on replicates with `zeta(h) > u`.
    pub differences: Vec<f64>,
    /// Overshoots `zeta(h) - u` on the same replicates.
    pub overshoots: Vec<f64>,
    /// KS of the differences against the model's anchored tilted law at `t`.
    pub ks_differences: KsReport,
    /// KS of the overshoots against the unit exponential.
    pub ks_overshoots: KsReport,
}

pub fn gpd_recover_theta(
    fields: &[FieldSample],
    model: &SpectralModel,
    h: &[f64],
    t: &[f64],
    level: f64,
    min_exceedances: usize,
) -> Result<GpdRecovery> {
    let mut differences = Vec::new();
    let mut overshoots = Vec::new();
    for f in fields {
        let at_h = f.value_at(h)?;
        if at_h > level {
            differences.push(f.value_at(t)? - at_h);
            overshoots.push(at_h - level);
        }
    }
    if differences.len() < min_exceedances {
        return Err(Error::TooFewExceedances {
            found: differences.len(),
            needed: min_exceedances,
        });
    }
    let theta = model.theta_process(h);
    let mean = theta.mean(t);
    let sd = theta.covariance(t, t).sqrt();
    let ks_differences = ks_one_sample(&differences, |x| std_normal_cdf((x - mean) / sd));
    let ks_overshoots = ks_one_sample(&overshoots, exp1_cdf);
    Ok(GpdRecovery {
        exceedance_count: differences.len(),
        differences,
        overshoots,
        ks_differences,
        ks_overshoots,
    })
}

/// Map a Gumbel-scale field to unit-Frechet margins with shape `alpha`:
/// `x -> exp(x / alpha)`.
pub fn to_frechet(field: &FieldSample, alpha: f64) -> Result<FieldSample> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("frechet shape must be > 0".into()));
    }
    Ok(FieldSample {
        grid: field.grid.clone(),
        values: field.values.iter().map(|v| (v / alpha).exp()).collect(),
        provenance: None,
        exact: field.exact,
    })
}

/// Spectral tail process of the lattice-sampled stationary field, on the
/// log scale: the anchored tilted process at the origin. Exponentiating a
/// sample gives the nonnegative tail process, equal to one at the origin.
pub fn stp_extract(model: &SpectralModel) -> GaussianSpectral {
    let dim_probe = match model {
        SpectralModel::Gaussian(g) => g,
        _ => return model.theta_process(&[0.0]),
    };
    let _ = dim_probe;
    model.theta_process(&[0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::simulate::DmSimulator;
    use crate::spectral::CovKernel;

    #[test]
    fn unit_moment_query() {
        let model = SpectralModel::fbm(1.0).unwrap();
        let q = FidiQuery::one_dim(&[1.0], &[0.0]).unwrap();
        let r = neglog_fidi_mc(&model, &q, 100_000, 71).unwrap();
        assert!((r.estimate - 1.0).abs() < 3.0 * r.stderr);
    }

    #[test]
    fn bivariate_matches_closed_form() {
        let model = SpectralModel::fbm(1.0).unwrap();
        let q = FidiQuery::one_dim(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
        let r = neglog_fidi_mc(&model, &q, 100_000, 73).unwrap();
        let want = hr_closed_form(1.0, 0.0, 0.0).unwrap();
        assert!((want - 2.0 * std_normal_cdf(0.5)).abs() < 1e-15);
        assert!((r.estimate - want).abs() < 3.0 * r.stderr);
    }

    #[test]
    fn pathwise_homogeneity_in_thresholds() {
        let model = SpectralModel::fbm(1.5).unwrap();
        let c = 0.7;
        let q0 = FidiQuery::one_dim(&[0.0, 1.0], &[0.2, -0.3]).unwrap();
        let qc = FidiQuery::one_dim(&[0.0, 1.0], &[0.2 + c, -0.3 + c]).unwrap();
        let r0 = neglog_fidi_mc(&model, &q0, 5_000, 79).unwrap();
        let rc = neglog_fidi_mc(&model, &qc, 5_000, 79).unwrap();
        // same seed, same paths: exact pathwise scaling
        assert!((rc.estimate - (-c as f64).exp() * r0.estimate).abs() < 1e-12);
    }

    #[test]
    fn infargmax_single_point_is_exact() {
        let model = SpectralModel::fbm(1.0).unwrap();
        let q = FidiQuery::one_dim(&[1.0], &[0.4]).unwrap();
        let r = neglog_fidi_infargmax(&model, &q, 100, 83).unwrap();
        assert!((r.estimate - (-0.4f64).exp()).abs() < 1e-15);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn infargmax_matches_mc() {
        let model = SpectralModel::fbm(1.0).unwrap();
        let q = FidiQuery::one_dim(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
        let a = neglog_fidi_infargmax(&model, &q, 100_000, 89).unwrap();
        let want = hr_closed_form(1.0, 0.0, 0.0).unwrap();
        assert!(
            (a.estimate - want).abs() < 3.0 * a.stderr,
            "{} vs {want}",
            a.estimate
        );
    }

    #[test]
    fn infargmax_probabilities_partition() {
        // for a fixed anchor the events {inf argmax = k} partition each
        // replicate; with n = 2 check Psi estimates lie in [0, 1] and the
        // estimator is bounded by e^{-x1} + e^{-x2}
        let model = SpectralModel::fbm(1.0).unwrap();
        let q = FidiQuery::one_dim(&[0.0, 1.0], &[0.3, -0.1]).unwrap();
        let r = neglog_fidi_infargmax(&model, &q, 20_000, 97).unwrap();
        let upper = (-0.3f64).exp() + (0.1f64).exp();
        let lower = (-0.3f64).exp().max((0.1f64).exp());
        assert!(r.estimate <= upper + 3.0 * r.stderr);
        assert!(r.estimate >= lower - 3.0 * r.stderr);
    }

    #[test]
    fn hr_closed_form_reference_and_limits() {
        // gamma = 4, x = y = 0: 2 Phi(1)
        let v = hr_closed_form(4.0, 0.0, 0.0).unwrap();
        assert!((v - 2.0 * std_normal_cdf(1.0)).abs() < 1e-15);
        assert!((v - 1.6826894921370859).abs() < 1e-12);
        // large gamma: independence e^{-x} + e^{-y}
        let v = hr_closed_form(1e8, 0.5, -0.2).unwrap();
        assert!((v - ((-0.5f64).exp() + (0.2f64).exp())).abs() < 1e-9);
        // small gamma: complete dependence e^{-min(x,y)}
        let v = hr_closed_form(1e-12, 0.5, -0.2).unwrap();
        assert!((v - (0.2f64).exp()).abs() < 1e-9);
        assert!(matches!(
            hr_closed_form(0.0, 0.0, 0.0),
            Err(Error::NonPositiveGamma(_))
        ));
    }

    #[test]
    fn hr_symmetry_and_monotonicity() {
        for &gamma in &[0.3, 1.0, 2.5, 7.0] {
            for &(x, y) in &[(0.0, 0.0), (0.5, -0.4), (1.2, 0.1)] {
                let a = hr_closed_form(gamma, x, y).unwrap();
                let b = hr_closed_form(gamma, y, x).unwrap();
                assert!((a - b).abs() < 1e-14);
            }
        }
        let mut prev = f64::INFINITY;
        for &gamma in &[8.0, 4.0, 2.0, 1.0, 0.5, 0.25] {
            let v = hr_closed_form(gamma, 0.0, 0.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn empirical_fidi_on_dm_fields() {
        let model = SpectralModel::fbm(1.0).unwrap();
        let g = Grid::from_coords_1d(&[0.0, 1.0]).unwrap();
        let sim = DmSimulator::new(&model, &g).unwrap();
        let fields: Vec<FieldSample> = crate::report::run_replicates(101, 50_000, |rep, _| {
            sim.sample(RngStream::new(101, rep), false).unwrap()
        });
        let q = FidiQuery::one_dim(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
        let e = empirical_fidi(&fields, &q).unwrap();
        let want = (-2.0 * std_normal_cdf(0.5)).exp();
        assert!((e.probability.estimate - want).abs() < 3.0 * e.probability.stderr);
        assert!(!e.neglog_unbounded);

        // huge thresholds: probability one
        let q = FidiQuery::one_dim(&[0.0, 1.0], &[1e9, 1e9]).unwrap();
        let e = empirical_fidi(&fields, &q).unwrap();
        assert_eq!(e.probability.estimate, 1.0);

        // impossible thresholds: flagged unbounded
        let q = FidiQuery::one_dim(&[0.0, 1.0], &[-1e9, -1e9]).unwrap();
        let e = empirical_fidi(&fields, &q).unwrap();
        assert!(e.neglog_unbounded);
    }

    #[test]
    fn frechet_transform_and_stp() {
        let model = SpectralModel::fbm(1.0).unwrap();
        let g = Grid::from_coords_1d(&[0.0, 1.0]).unwrap();
        let field = FieldSample {
            grid: g,
            values: vec![0.0, 1.0],
            provenance: None,
            exact: true,
        };
        let f = to_frechet(&field, 1.0).unwrap();
        assert_eq!(f.values[0], 1.0);
        assert!((f.values[1] - 1f64.exp()).abs() < 1e-15);

        let stp = stp_extract(&model);
        // log-scale STP is zero at the origin; exp gives one
        assert_eq!(stp.mean(&[0.0]), 0.0);
        assert_eq!(stp.covariance(&[0.0], &[0.0]), 0.0);
        // at t = 1 the exponentiated process is lognormal with mean one
        assert!((stp.mean(&[1.0]) + 0.5).abs() < 1e-12);
        assert!((stp.covariance(&[1.0], &[1.0]) - 1.0).abs() < 1e-12);
        let mean_of_exp = (stp.mean(&[1.0]) + 0.5 * stp.covariance(&[1.0], &[1.0])).exp();
        assert!((mean_of_exp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frechet_neglog_homogeneity() {
        // -ln H on the Frechet scale is -1-homogeneous: thresholds c*x on
        // the Frechet scale are thresholds x_gumbel + alpha ln c on the
        // Gumbel scale, and the pathwise estimator scales by 1/c
        let model = SpectralModel::fbm(1.0).unwrap();
        let alpha = 1.0;
        let c: f64 = 2.5;
        let x_frechet = [1.5f64, 0.8];
        let xg: Vec<f64> = x_frechet.iter().map(|v| alpha * v.ln()).collect();
        let xgc: Vec<f64> = x_frechet.iter().map(|v| alpha * (c * v).ln()).collect();
        let q = FidiQuery::one_dim(&[0.0, 1.0], &xg).unwrap();
        let qc = FidiQuery::one_dim(&[0.0, 1.0], &xgc).unwrap();
        let r = neglog_fidi_mc(&model, &q, 5_000, 103).unwrap();
        let rc = neglog_fidi_mc(&model, &qc, 5_000, 103).unwrap();
        assert!((rc.estimate - r.estimate / c).abs() < 1e-12);
    }

    #[test]
    fn gpd_recovery_errors_on_too_few() {
        let model = SpectralModel::fbm(1.0).unwrap();
        let g = Grid::from_coords_1d(&[0.0, 1.0]).unwrap();
        let fields = vec![
            FieldSample {
                grid: g.clone(),
                values: vec![0.0, 0.0],
                provenance: None,
                exact: true,
            };
            10
        ];
        assert!(matches!(
            gpd_recover_theta(&fields, &model, &[0.0], &[1.0], 100.0, 5),
            Err(Error::TooFewExceedances { .. })
        ));
    }

    #[test]
    fn tilting_invariance_of_fidis() {
        // zeta_Z and zeta_{Xi_h Z} share fidis
        let model = SpectralModel::fbm(1.0).unwrap();
        let h = [1.0];
        let xi_model = SpectralModel::Gaussian(match &model {
            SpectralModel::Gaussian(g) => g.xi_process(&h),
            _ => unreachable!(),
        });
        let q = FidiQuery::one_dim(&[0.0, 1.0, 2.0], &[0.0, 0.5, -0.2]).unwrap();
        let a = neglog_fidi_mc(&model, &q, 100_000, 107).unwrap();
        let b = neglog_fidi_mc(&xi_model, &q, 100_000, 109).unwrap();
        assert!(a.agrees_with(&b, 3.0), "{} vs {}", a.estimate, b.estimate);
    }

    #[test]
    fn degenerate_model_uniform_weights() {
        // rank-one model with negligible noise: tilt weights are uniform
        let model = GaussianSpectral::new(CovKernel::Monomial {
            power: 1.0,
            scale: 1e-300,
        });
        let g = Grid::from_coords_1d(&[0.0, 1.0]).unwrap();
        let sampler = SpectralModel::Gaussian(model).sampler(&g).unwrap();
        let paths: Vec<crate::grid::LogPath> =
            crate::report::run_replicates(113, 50, |_, rng| sampler.sample(rng));
        let weighted = crate::spectral::tilt_empirical(&paths, &[1.0]).unwrap();
        for (_, w) in weighted {
            assert!((w - 1.0 / 50.0).abs() < 1e-12);
        }
    }
}
