//! Machine-checked shift identities of the tilted processes and the
//! simulated field, with analytic comparisons wherever both sides are
//! Gaussian and statistical tests otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{log_sum_exp_uniform, Grid};
use crate::report::{run_replicates_offset, EstimatorReport};
use crate::rng::RngStream;
use crate::simulate::FieldSample;
use crate::spectral::{GaussianSpectral, PathSampler, SpectralModel};
use crate::stats::ks_two_sample;

/// Outcome of one identity check. The verdict is `pass` exactly when
/// `discrepancy <= tolerance`; the metric is a scaled elementwise gap for
/// analytic checks and a z-score (gap over combined stderr) for MC checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheckReport {
    pub identity: String,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub summary: String,
}

impl IdentityCheckReport {
    fn verdict(identity: &str, discrepancy: f64, tolerance: f64, summary: String) -> Self {
        Self {
            identity: identity.to_string(),
            discrepancy,
            tolerance,
            pass: discrepancy <= tolerance,
            summary,
        }
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

const ANALYTIC_REL_TOL: f64 = 1e-10;

/// Compare two Gaussian laws evaluated on paired point lists: relative
/// elementwise gap over mean vectors and covariance matrices.
fn gaussian_law_gap(
    left: &GaussianSpectral,
    left_pts: &[Vec<f64>],
    right: &GaussianSpectral,
    right_pts: &[Vec<f64>],
) -> f64 {
    let n = left_pts.len();
    let mut scale = 1.0f64;
    let mut gap = 0.0f64;
    for i in 0..n {
        let (lm, rm) = (left.mean(&left_pts[i]), right.mean(&right_pts[i]));
        scale = scale.max(lm.abs()).max(rm.abs());
        gap = gap.max((lm - rm).abs());
        for j in 0..n {
            let lc = left.covariance(&left_pts[i], &left_pts[j]);
            let rc = right.covariance(&right_pts[i], &right_pts[j]);
            scale = scale.max(lc.abs()).max(rc.abs());
            gap = gap.max((lc - rc).abs());
        }
    }
    gap / scale
}

/// Shift identity of the anchored tilted process: the law of the process
/// anchored at `a + h` on `{t_i}` against the law anchored at `a` on
/// `{t_i - h}`. Exact (analytic moments), relative tolerance 1e-10.
pub fn check_xi_shift_gaussian(
    model: &GaussianSpectral,
    a: &[f64],
    h: &[f64],
    grid: &Grid,
) -> IdentityCheckReport {
    let left = model.xi_process(&add(a, h));
    let right = model.xi_process(a);
    let left_pts: Vec<Vec<f64>> = grid.points().map(|t| t.to_vec()).collect();
    let right_pts: Vec<Vec<f64>> = left_pts.iter().map(|t| sub(t, h)).collect();
    let gap = gaussian_law_gap(&left, &left_pts, &right, &right_pts);
    IdentityCheckReport::verdict(
        "xi-shift",
        gap,
        ANALYTIC_REL_TOL,
        format!("analytic moment comparison on {} points, a={a:?}, h={h:?}", grid.len()),
    )
}

/// Shift identity of the identifiable anchored process (masked models defer
/// to their inner Gaussian, so the comparison is analytic for every shipped
/// model).
pub fn check_theta_shift(
    model: &SpectralModel,
    a: &[f64],
    h: &[f64],
    grid: &Grid,
) -> IdentityCheckReport {
    let left = model.theta_process(&add(a, h));
    let right = model.theta_process(a);
    let left_pts: Vec<Vec<f64>> = grid.points().map(|t| t.to_vec()).collect();
    let right_pts: Vec<Vec<f64>> = left_pts.iter().map(|t| sub(t, h)).collect();
    let gap = gaussian_law_gap(&left, &left_pts, &right, &right_pts);
    IdentityCheckReport::verdict(
        "theta-shift",
        gap,
        ANALYTIC_REL_TOL,
        format!("analytic moment comparison on {} points, a={a:?}, h={h:?}", grid.len()),
    )
}

/// A path functional invariant to adding a constant, evaluated on values
/// listed in stencil order.
#[derive(Clone, Copy)]
pub struct PathFunctional {
    pub tag: &'static str,
    eval: fn(&[f64]) -> f64,
}

impl PathFunctional {
    pub fn new(tag: &'static str, eval: fn(&[f64]) -> f64) -> Self {
        Self { tag, eval }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        (self.eval)(values)
    }

    /// Verify `F(f + c) = F(f)` on random paths; run before any MC use.
    pub fn self_test(&self, seed: u64) -> Result<()> {
        let mut rng = RngStream::new(seed, u64::MAX);
        for _ in 0..16 {
            let f: Vec<f64> = (0..5).map(|_| 2.0 * rng.standard_normal()).collect();
            let base = self.eval(&f);
            for c in [-3.25, 0.5, 7.0] {
                let shifted: Vec<f64> = f.iter().map(|v| v + c).collect();
                if (self.eval(&shifted) - base).abs() > 1e-9 {
                    return Err(Error::FunctionalNotShiftInvariant);
                }
            }
        }
        Ok(())
    }
}

/// Shipped library of shift-invariant functionals; chosen to be sensitive
/// to changes in the increment law at several lags.
pub fn functional_library() -> Vec<PathFunctional> {
    fn one(_: &[f64]) -> f64 {
        1.0
    }
    fn first_increment_nonpos(v: &[f64]) -> f64 {
        if v.len() < 2 || v[1] - v[0] <= 0.0 {
            1.0
        } else {
            0.0
        }
    }
    fn last_increment_nonpos(v: &[f64]) -> f64 {
        let n = v.len();
        if n < 2 || v[n - 1] - v[n - 2] <= 0.0 {
            1.0
        } else {
            0.0
        }
    }
    fn argmax_is_first(v: &[f64]) -> f64 {
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if v[0] >= m {
            1.0
        } else {
            0.0
        }
    }
    fn softmax_first(v: &[f64]) -> f64 {
        let lse = log_sum_exp_uniform(v);
        if lse == f64::NEG_INFINITY {
            return 0.0;
        }
        (v[0] - lse).exp()
    }
    fn range_at_most_one(v: &[f64]) -> f64 {
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        if max - min <= 1.0 {
            1.0
        } else {
            0.0
        }
    }
    vec![
        PathFunctional::new("one", one),
        PathFunctional::new("first-increment-nonpos", first_increment_nonpos),
        PathFunctional::new("last-increment-nonpos", last_increment_nonpos),
        PathFunctional::new("argmax-is-first", argmax_is_first),
        PathFunctional::new("softmax-first", softmax_first),
        PathFunctional::new("range-at-most-one", range_at_most_one),
    ]
}

/// One of the three sides of the tilt-shift identity, as an MC estimate.
fn weighted_functional_estimate(
    model: &GaussianSpectral,
    stencil: &[Vec<f64>],
    weight_point: Option<&[f64]>,
    functional: &PathFunctional,
    survive_prob: f64,
    reps: usize,
    seed: u64,
    stream_base: u64,
) -> Result<EstimatorReport> {
    let mut pts: Vec<Vec<f64>> = stencil.to_vec();
    if let Some(w) = weight_point {
        if !pts.iter().any(|p| p.iter().zip(w).all(|(x, y)| (x - y).abs() < 1e-9)) {
            pts.push(w.to_vec());
        }
    }
    let grid = Grid::new(pts)?;
    let sampler = PathSampler::new(model, &grid)?;
    let gather: Vec<usize> = stencil
        .iter()
        .map(|p| grid.index_of(p).expect("stencil point on eval grid"))
        .collect();
    let w_idx = weight_point.map(|w| grid.index_of(w).expect("weight point on eval grid"));
    let kill_shift = -survive_prob.ln();
    let values = run_replicates_offset(seed, stream_base, reps, |_, rng| {
        // total-kill branch of masked models: killed paths weight zero
        if survive_prob < 1.0 && !rng.bernoulli(survive_prob) {
            return 0.0;
        }
        let path = sampler.sample(rng);
        let vals: Vec<f64> = gather.iter().map(|&i| path.values()[i] + kill_shift).collect();
        match w_idx {
            Some(i) => (path.values()[i] + kill_shift).exp() * functional.eval(&vals),
            None => functional.eval(&vals),
        }
    });
    Ok(EstimatorReport::from_values(&values))
}

/// Tilt-shift identity in three MC estimates: the functional of the raw
/// process weighted by `e^{Z(a+h)}`, the lag-shifted process weighted by
/// `e^{Z(a)}`, and the unweighted functional of the lag-shifted anchored
/// process. Pass iff all pairs agree within 3 combined standard errors.
pub fn check_tilt_shift_mc(
    model: &SpectralModel,
    functional: &PathFunctional,
    a: &[f64],
    h: &[f64],
    stencil: &Grid,
    reps: usize,
    seed: u64,
) -> Result<IdentityCheckReport> {
    functional.self_test(seed)?;
    if reps < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    let ah = add(a, h);
    let pts: Vec<Vec<f64>> = stencil.points().map(|t| t.to_vec()).collect();
    let pts_back: Vec<Vec<f64>> = pts.iter().map(|t| sub(t, h)).collect();
    let (gauss, p) = match model {
        SpectralModel::Gaussian(g) => (g.clone(), 1.0),
        SpectralModel::BrownianLevy(b) => (b.as_gaussian(), 1.0),
        SpectralModel::Masked(m) => (m.inner().clone(), m.survive_prob()),
    };
    let left =
        weighted_functional_estimate(&gauss, &pts, Some(&ah), functional, p, reps, seed, 0)?;
    let middle =
        weighted_functional_estimate(&gauss, &pts_back, Some(a), functional, p, reps, seed, 1 << 40)?;
    let theta = model.theta_process(a);
    let right = weighted_functional_estimate(
        &theta, &pts_back, None, functional, 1.0, reps, seed, 1 << 41,
    )?;
    let mut z_max = 0.0f64;
    for (x, y) in [(&left, &middle), (&left, &right), (&middle, &right)] {
        let combined = (x.stderr * x.stderr + y.stderr * y.stderr).sqrt();
        let z = if combined > 0.0 {
            (x.estimate - y.estimate).abs() / combined
        } else if x.estimate == y.estimate {
            0.0
        } else {
            f64::INFINITY
        };
        z_max = z_max.max(z);
    }
    Ok(IdentityCheckReport::verdict(
        "tilt-shift",
        z_max,
        3.0,
        format!(
            "functional '{}': weighted-raw {:.5}+-{:.5}, weighted-shifted {:.5}+-{:.5}, anchored {:.5}+-{:.5}",
            functional.tag,
            left.estimate,
            left.stderr,
            middle.estimate,
            middle.stderr,
            right.estimate,
            right.stderr
        ),
    ))
}

/// Field-level stationarity: two-sample KS between matched point values and
/// pairwise max/min summaries of the field at `{t}` versus `{t + h}`,
/// Bonferroni-adjusted at overall level 0.01.
pub fn check_field_stationarity(fields: &[FieldSample], h: &[f64]) -> Result<IdentityCheckReport> {
    if fields.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 fields".into()));
    }
    let grid = &fields[0].grid;
    let matched: Vec<(usize, usize)> = grid
        .points()
        .enumerate()
        .filter_map(|(i, t)| grid.index_of(&add(t, h)).map(|j| (i, j)))
        .collect();
    if matched.is_empty() {
        return Err(Error::EmptyShiftDomain);
    }
    let column = |i: usize| -> Vec<f64> { fields.iter().map(|f| f.values[i]).collect() };
    let mut p_values: Vec<(String, f64)> = Vec::new();
    for &(i, j) in &matched {
        let ks = ks_two_sample(&column(i), &column(j));
        p_values.push((format!("point {:?}", grid.point(i)), ks.p_value));
    }
    for (u, &(i1, j1)) in matched.iter().enumerate() {
        for &(i2, j2) in matched.iter().skip(u + 1) {
            let base_max: Vec<f64> = fields
                .iter()
                .map(|f| f.values[i1].max(f.values[i2]))
                .collect();
            let shifted_max: Vec<f64> = fields
                .iter()
                .map(|f| f.values[j1].max(f.values[j2]))
                .collect();
            let base_min: Vec<f64> = fields
                .iter()
                .map(|f| f.values[i1].min(f.values[i2]))
                .collect();
            let shifted_min: Vec<f64> = fields
                .iter()
                .map(|f| f.values[j1].min(f.values[j2]))
                .collect();
            let tag = format!("pair {:?},{:?}", grid.point(i1), grid.point(i2));
            p_values.push((format!("{tag} max"), ks_two_sample(&base_max, &shifted_max).p_value));
            p_values.push((format!("{tag} min"), ks_two_sample(&base_min, &shifted_min).p_value));
        }
    }
    let level = 0.01 / p_values.len() as f64;
    let (worst_tag, min_p) = p_values
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(t, p)| (t.clone(), *p))
        .unwrap();
    Ok(IdentityCheckReport::verdict(
        "field-shift",
        level - min_p,
        0.0,
        format!(
            "{} KS tests over {} fields; worst: {worst_tag} (p = {min_p:.3e}, level {level:.3e})",
            p_values.len(),
            fields.len()
        ),
    ))
}
