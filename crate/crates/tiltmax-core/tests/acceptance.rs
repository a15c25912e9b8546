//! Acceptance suite: one test per release criterion, each printing a single
//! verdict line. Run with `cargo test --test acceptance -- --nocapture` to
//! see the lines for passing criteria too.

use tiltmax_core::distribution::{
    empirical_fidi, gpd_recover_theta, hr_closed_form, neglog_fidi_infargmax, neglog_fidi_mc,
    FidiQuery,
};
use tiltmax_core::grid::Grid;
use tiltmax_core::pickands::{oracle_argmax_prob, oracle_ratio, pickands_argmax_prob, pickands_ratio};
use tiltmax_core::report::{run_replicates, EstimatorReport};
use tiltmax_core::rng::RngStream;
use tiltmax_core::simulate::{extract_extremal, simulate_two_sided, DirectSimulator, DmSimulator, FieldSample};
use tiltmax_core::spectral::{
    levy_two_sided_exponent, CovKernel, GaussianSpectral, LaplaceExponent, MaskedSpectral,
    PathSampler, SpectralModel,
};
use tiltmax_core::stationarity::{
    check_field_stationarity, check_theta_shift, check_tilt_shift_mc, check_xi_shift_gaussian,
    functional_library,
};
use tiltmax_core::stats::{exp1_cdf, ks_one_sample, std_normal_cdf};

fn verdict(criterion: usize, name: &str, pass: bool) {
    println!(
        "criterion {criterion:2} [{}]: {name}",
        if pass { "pass" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {name}");
}

fn fbm() -> SpectralModel {
    SpectralModel::fbm(1.0).unwrap()
}

fn parabola() -> SpectralModel {
    SpectralModel::Gaussian(GaussianSpectral::new(CovKernel::Monomial {
        power: 1.0,
        scale: 2.0,
    }))
}

fn negative_control() -> SpectralModel {
    SpectralModel::Gaussian(GaussianSpectral::new(CovKernel::Monomial {
        power: 2.0,
        scale: 1.0,
    }))
}

fn dm_fields(
    model: &SpectralModel,
    grid: &Grid,
    reps: usize,
    seed: u64,
    provenance: bool,
) -> Vec<FieldSample> {
    let sim = DmSimulator::new(model, grid).unwrap();
    run_replicates(seed, reps, |rep, _| {
        sim.sample(RngStream::new(seed, rep), provenance).unwrap()
    })
}

fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

fn agree(a: &EstimatorReport, b: &EstimatorReport) -> bool {
    a.agrees_with(b, 3.0)
}

#[test]
fn criterion_01_marginal_law() {
    let grid = Grid::from_coords_1d(&[0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
    let fields = dm_fields(&fbm(), &grid, 10_000, 1001, false);
    let mut pass = true;
    for j in 0..grid.len() {
        let col: Vec<f64> = fields.iter().map(|f| f.values[j]).collect();
        let ks = ks_one_sample(&col, gumbel_cdf);
        pass &= ks.p_value > 0.01;
    }
    verdict(1, "exact-simulator margins are unit Gumbel (5-point KS)", pass);
}

#[test]
fn criterion_02_bivariate_oracle() {
    let q = FidiQuery::one_dim(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
    let r1 = neglog_fidi_mc(&fbm(), &q, 100_000, 1002).unwrap();
    let want1 = 2.0 * std_normal_cdf(0.5);
    let model4 = SpectralModel::Gaussian(GaussianSpectral::new(
        CovKernel::fbm_scaled(1.0, 4.0).unwrap(),
    ));
    let r4 = neglog_fidi_mc(&model4, &q, 100_000, 1003).unwrap();
    let want4 = 2.0 * std_normal_cdf(1.0);
    let pass = (r1.estimate - want1).abs() < 3.0 * r1.stderr
        && (want1 - 1.38293).abs() < 1e-5
        && (r4.estimate - want4).abs() < 3.0 * r4.stderr
        && (want4 - 1.68269).abs() < 1e-5
        && (hr_closed_form(1.0, 0.0, 0.0).unwrap() - want1).abs() < 1e-14
        && (hr_closed_form(4.0, 0.0, 0.0).unwrap() - want4).abs() < 1e-14;
    verdict(2, "bivariate estimator hits the closed form at gamma 1 and 4", pass);
}

#[test]
fn criterion_03_four_way_agreement() {
    let model = fbm();
    let queries: Vec<(Vec<f64>, Vec<f64>)> = vec![
        (vec![0.0, 1.0], vec![0.0, 0.0]),
        (vec![0.0, 1.0], vec![0.5, -0.5]),
        (vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0]),
        (vec![0.0, 0.5, 1.0], vec![-0.3, 0.2, 0.0]),
        (vec![0.0, 2.0], vec![1.0, -1.0]),
        (vec![0.5, 1.5], vec![0.0, 0.3]),
    ];
    let mut pass = true;
    for (qi, (coords, x)) in queries.iter().enumerate() {
        let seed = 1100 + 10 * qi as u64;
        let q = FidiQuery::one_dim(coords, x).unwrap();
        let grid = Grid::from_coords_1d(coords).unwrap();
        let mc = neglog_fidi_mc(&model, &q, 100_000, seed).unwrap();
        let ia = neglog_fidi_infargmax(&model, &q, 50_000, seed + 1).unwrap();
        let exact = dm_fields(&model, &grid, 100_000, seed + 2, false);
        let emp_dm = empirical_fidi(&exact, &q).unwrap().neglog;
        let direct_sim = DirectSimulator::new(&model, &grid, 1e-4).unwrap();
        let approx: Vec<FieldSample> = run_replicates(seed + 3, 5_000, |rep, _| {
            direct_sim.sample(RngStream::new(seed + 3, rep), false).unwrap()
        });
        let emp_dir = empirical_fidi(&approx, &q).unwrap().neglog;
        let estimates = [&mc, &ia, &emp_dm, &emp_dir];
        for i in 0..4 {
            for j in (i + 1)..4 {
                let ok = agree(estimates[i], estimates[j]);
                if !ok {
                    eprintln!(
                        "query {qi}: method {i} = {:.4}+-{:.4} vs method {j} = {:.4}+-{:.4}",
                        estimates[i].estimate,
                        estimates[i].stderr,
                        estimates[j].estimate,
                        estimates[j].stderr
                    );
                }
                pass &= ok;
            }
        }
    }
    verdict(3, "four estimator routes agree pairwise on the 6-query matrix", pass);
}

#[test]
fn criterion_04_tilting_invariance() {
    let model = fbm();
    let gauss = GaussianSpectral::fbm(1.0).unwrap();
    let q = FidiQuery::one_dim(&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]).unwrap();
    let base = neglog_fidi_mc(&model, &q, 100_000, 1200).unwrap();
    let mut pass = true;
    for (k, h) in [0.0, 1.0, 2.0].iter().enumerate() {
        let xi = SpectralModel::Gaussian(gauss.xi_process(&[*h]));
        let r = neglog_fidi_mc(&xi, &q, 100_000, 1210 + k as u64).unwrap();
        pass &= agree(&base, &r);
    }
    // closed-form tilt: covariance bit-identical, mean shifted by r(h, .)
    let grid = Grid::from_coords_1d(&[0.0, 0.5, 1.0, 2.0]).unwrap();
    for h in [[0.0], [1.0], [2.0]] {
        let tilted = gauss.tilt_closed_form(&h).unwrap();
        pass &= tilted.cov_matrix(&grid) == gauss.cov_matrix(&grid);
        for t in grid.points() {
            pass &= tilted.mean(t) == gauss.mean(t) + gauss.covariance(&h, t);
        }
    }
    verdict(4, "field law is invariant under anchored tilting of the spectral process", pass);
}

#[test]
fn criterion_05_masked_equivalence() {
    let inner = GaussianSpectral::fbm(1.0).unwrap();
    let grid = Grid::from_coords_1d(&[0.0, 1.0]).unwrap();
    let q = FidiQuery::one_dim(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
    let plain = SpectralModel::Gaussian(inner.clone());
    let base_fields = dm_fields(&plain, &grid, 100_000, 1300, false);
    let base = empirical_fidi(&base_fields, &q).unwrap().neglog;
    let mut pass = true;
    let theta_grid = Grid::from_coords_1d(&[0.0, 0.5, 1.0, 2.0]).unwrap();
    let theta_ref = plain.theta_process(&[1.0]);
    for (k, p) in [0.3, 0.9].iter().enumerate() {
        let masked = SpectralModel::Masked(MaskedSpectral::new(*p, inner.clone()).unwrap());
        let fields = dm_fields(&masked, &grid, 100_000, 1310 + k as u64, false);
        let got = empirical_fidi(&fields, &q).unwrap().neglog;
        pass &= agree(&base, &got);
        // identifiable anchored process is independent of the kill rate
        let theta = masked.theta_process(&[1.0]);
        pass &= theta.mean_vector(&theta_grid) == theta_ref.mean_vector(&theta_grid);
        pass &= theta.cov_matrix(&theta_grid) == theta_ref.cov_matrix(&theta_grid);
    }
    verdict(5, "total-kill mixtures reproduce the unmasked field and anchored process", pass);
}

#[test]
fn criterion_06_pickands_cross_validation() {
    let model = parabola();
    let limit = 1.0 / std::f64::consts::PI.sqrt();
    let mut pass = true;
    let mut prev_err = f64::INFINITY;
    for (k, delta) in [0.5, 0.25, 0.1].iter().enumerate() {
        let seed = 1400 + 10 * k as u64;
        let oracle_r = oracle_ratio(&model, *delta, 8.0).unwrap();
        let oracle_a = oracle_argmax_prob(&model, *delta, 8.0).unwrap();
        let ratio = pickands_ratio(&model, 1, *delta, 8.0, 100_000, seed).unwrap();
        let argmax = pickands_argmax_prob(&model, 1, *delta, 8.0, 100_000, seed + 1).unwrap();
        pass &= (ratio.report.estimate - oracle_r).abs() < 3.0 * ratio.report.stderr.max(1e-4);
        pass &= (argmax.report.estimate - oracle_a).abs() < 3.0 * argmax.report.stderr;
        // extremal index bound delta * H <= 1
        pass &= delta * ratio.report.estimate <= 1.0 + 3.0 * ratio.report.stderr;
        pass &= delta * argmax.report.estimate <= 1.0 + 3.0 * argmax.report.stderr;
        // oracle sequence approaches the continuous value from quadrature
        let err = (oracle_a - limit).abs();
        pass &= err < prev_err;
        prev_err = err;
    }
    pass &= prev_err < 2e-3 && (limit - 0.56419).abs() < 1e-5;
    verdict(6, "lattice-constant estimators match the quadrature oracle down to delta 0.1", pass);
}

#[test]
fn criterion_07_pickands_positivity_monotonicity() {
    let mut pass = true;
    for (alpha, radius) in [(1.0, 32.0), (1.5, 16.0)] {
        let model = SpectralModel::fbm(alpha).unwrap();
        let mut estimates = Vec::new();
        for (k, delta) in [1.0, 0.5, 0.25].iter().enumerate() {
            let seed = 1500 + 100 * (alpha as u64) + 10 * k as u64;
            let e = pickands_ratio(&model, 1, *delta, radius, 20_000, seed).unwrap();
            estimates.push(e.report);
        }
        for (k, e) in estimates.iter().take(2).enumerate() {
            pass &= e.estimate - 3.0 * e.stderr > 0.0;
            let finer = &estimates[k + 1];
            let combined = (e.stderr.powi(2) + finer.stderr.powi(2)).sqrt();
            pass &= finer.estimate >= e.estimate - 3.0 * combined;
        }
    }
    verdict(7, "lattice constants are positive and nondecreasing under spacing refinement", pass);
}

#[test]
fn criterion_08_stationarity_equivalence() {
    let combos: [(Vec<f64>, Vec<f64>); 3] = [
        (vec![0.0], vec![1.0]),
        (vec![1.0], vec![0.5]),
        (vec![0.0], vec![2.0]),
    ];
    let stencil = Grid::from_coords_1d(&[0.0, 1.0, 2.0]).unwrap();
    let field_grid = Grid::lattice(1, 0.5, 0.0, 4.0).unwrap();
    let lib = functional_library();
    let mut pass = true;
    for (model, expect_pass, seed) in [
        (fbm(), true, 1600u64),
        (negative_control(), false, 1700u64),
    ] {
        let gauss = match &model {
            SpectralModel::Gaussian(g) => g.clone(),
            _ => unreachable!(),
        };
        let fields = dm_fields(&model, &field_grid, 10_000, seed, false);
        for (k, (a, h)) in combos.iter().enumerate() {
            let xi = check_xi_shift_gaussian(&gauss, a, h, &stencil);
            let theta = check_theta_shift(&model, a, h, &stencil);
            let tilt_all = lib
                .iter()
                .enumerate()
                .map(|(fi, f)| {
                    check_tilt_shift_mc(
                        &model,
                        f,
                        a,
                        h,
                        &stencil,
                        50_000,
                        seed + 10 * k as u64 + fi as u64,
                    )
                    .unwrap()
                    .pass
                })
                .collect::<Vec<bool>>();
            let tilt = tilt_all.iter().all(|&p| p);
            let field = check_field_stationarity(&fields, h).unwrap();
            let verdicts = [xi.pass, theta.pass, tilt, field.pass];
            let unanimous = verdicts.iter().all(|&v| v == expect_pass);
            if !unanimous {
                eprintln!(
                    "model expect_pass={expect_pass}, (a,h)=({a:?},{h:?}): verdicts {verdicts:?}, tilt per functional {tilt_all:?}"
                );
            }
            pass &= unanimous;
        }
    }
    verdict(8, "four stationarity criteria are unanimous on control models", pass);
}

#[test]
fn criterion_09_two_sided_extension() {
    let model = SpectralModel::BrownianLevy(
        tiltmax_core::spectral::BrownianLevySpectral::new(1.0).unwrap(),
    );
    let grid = Grid::from_coords_1d(&[-1.0, -0.5, 0.0, 0.5, 1.0]).unwrap();
    let extension = tiltmax_core::simulate::two_sided_extension(&model, &grid).unwrap();
    let sampler = PathSampler::new(&extension, &grid).unwrap();
    let paths: Vec<Vec<f64>> = run_replicates(1800, 100_000, |_, rng| {
        sampler.sample(rng).values().to_vec()
    });
    let mut pass = true;
    // means -|t|/2
    for (j, t) in grid.points().enumerate() {
        let col: Vec<f64> = paths.iter().map(|p| p[j]).collect();
        let r = EstimatorReport::from_values(&col);
        pass &= (r.estimate + t[0].abs() / 2.0).abs() < 3.0 * r.stderr.max(1e-12);
    }
    // covariances (|s| + |t| - |t-s|)/2
    let means: Vec<f64> = (0..grid.len())
        .map(|j| {
            let col: Vec<f64> = paths.iter().map(|p| p[j]).collect();
            EstimatorReport::from_values(&col).estimate
        })
        .collect();
    for (i, s) in grid.points().enumerate() {
        for (j, t) in grid.points().enumerate().skip(i) {
            let prods: Vec<f64> = paths
                .iter()
                .map(|p| (p[i] - means[i]) * (p[j] - means[j]))
                .collect();
            let r = EstimatorReport::from_values(&prods);
            let want = 0.5 * (s[0].abs() + t[0].abs() - (t[0] - s[0]).abs());
            pass &= (r.estimate - want).abs() < 3.0 * r.stderr.max(1e-12);
        }
    }
    // restricted two-sided field matches the one-sided model's fidis
    let q = FidiQuery::one_dim(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
    let two_sided: Vec<FieldSample> = run_replicates(1801, 100_000, |rep, _| {
        simulate_two_sided(&model, &grid, RngStream::new(1801, rep), false).unwrap()
    });
    let restricted = empirical_fidi(&two_sided, &q).unwrap().neglog;
    let one_sided_fields = dm_fields(&model, &Grid::from_coords_1d(&[0.0, 1.0]).unwrap(), 100_000, 1802, false);
    let one_sided = empirical_fidi(&one_sided_fields, &q).unwrap().neglog;
    pass &= agree(&restricted, &one_sided);
    // tilted exponent identity on a 20-point grid
    let phi = LaplaceExponent::BrownianScale(1.0);
    for i in 0..20 {
        let theta = -1.0 + 0.15 * i as f64;
        let want = theta * theta / 2.0 - theta / 2.0;
        pass &= (levy_two_sided_exponent(&phi, theta) - want).abs() <= 1e-12;
    }
    verdict(9, "two-sided extension has the drifted two-sided law and restricts to the original", pass);
}

#[test]
fn criterion_10_extremal_functions_and_tail_recovery() {
    let model = fbm();
    let grid = Grid::from_coords_1d(&[0.0, 1.0]).unwrap();
    // extremal shapes from provenance-retaining runs
    let fields = dm_fields(&model, &grid, 10_000, 1900, true);
    let mut shapes = Vec::with_capacity(fields.len());
    let mut field_at_0 = Vec::with_capacity(fields.len());
    for f in &fields {
        let ext = extract_extremal(f, &[0.0]).unwrap();
        shapes.push(ext.normalized_shape().unwrap().value_at(&[1.0]).unwrap());
        field_at_0.push(f.value_at(&[0.0]).unwrap());
    }
    let ks_shape = ks_one_sample(&shapes, |x| std_normal_cdf((x + 0.5) / 1.0));
    let mut pass = ks_shape.p_value > 0.01;
    // shape is independent of the field level at the anchor
    let n = shapes.len() as f64;
    let mx = shapes.iter().sum::<f64>() / n;
    let my = field_at_0.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in shapes.iter().zip(&field_at_0) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let corr = sxy / (sxx * syy).sqrt();
    pass &= corr.abs() < 3.0 / n.sqrt();
    // exceedance-conditioned differences and overshoots
    let plain = dm_fields(&model, &grid, 100_000, 1901, false);
    let rec = gpd_recover_theta(&plain, &model, &[0.0], &[1.0], 100f64.ln(), 500).unwrap();
    pass &= rec.ks_differences.p_value > 0.005;
    pass &= rec.ks_overshoots.p_value > 0.01;
    // sanity: the reference laws are the ones claimed
    pass &= (std_normal_cdf(0.5) - 0.6914624612740131).abs() < 1e-12;
    pass &= (exp1_cdf(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15;
    verdict(10, "extremal shapes and tail exceedances recover the anchored law", pass);
}

#[test]
fn criterion_11_determinism() {
    let model = fbm();
    let q = FidiQuery::one_dim(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
    let grid = Grid::from_coords_1d(&[0.0, 0.5, 1.0]).unwrap();

    let fidi_a = neglog_fidi_mc(&model, &q, 20_000, 2000).unwrap();
    let field_a = dm_fields(&model, &grid, 1_000, 2001, false);
    let pick_a = pickands_ratio(&parabola(), 1, 0.5, 8.0, 20_000, 2002).unwrap();

    // repeat on a single-thread pool: replicate-keyed streams and
    // fixed-order aggregation must give bit-identical numbers
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let (fidi_b, field_b, pick_b) = pool.install(|| {
        (
            neglog_fidi_mc(&model, &q, 20_000, 2000).unwrap(),
            dm_fields(&model, &grid, 1_000, 2001, false),
            pickands_ratio(&parabola(), 1, 0.5, 8.0, 20_000, 2002).unwrap(),
        )
    });
    let mut pass = fidi_a.estimate.to_bits() == fidi_b.estimate.to_bits()
        && fidi_a.stderr.to_bits() == fidi_b.stderr.to_bits()
        && pick_a.report.estimate.to_bits() == pick_b.report.estimate.to_bits()
        && pick_a.report.stderr.to_bits() == pick_b.report.stderr.to_bits();
    for (fa, fb) in field_a.iter().zip(&field_b) {
        for (va, vb) in fa.values.iter().zip(&fb.values) {
            pass &= va.to_bits() == vb.to_bits();
        }
    }
    verdict(11, "identical seeds give bit-identical outputs at any thread count", pass);
}
