//! Reproducible random streams and ordered Poisson point process enumeration.
//!
//! Every Monte Carlo replicate draws from its own [`RngStream`], keyed by
//! `(seed, replicate_id)`. Streams are independent of thread scheduling, so
//! replicates may run in any order or in parallel and still produce
//! byte-identical output.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A deterministic random stream for one replicate.
///
/// Distinct `replicate_id`s under the same seed select distinct ChaCha
/// streams, which are statistically independent by construction.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
    seed: u64,
    replicate_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, replicate_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(replicate_id);
        Self {
            inner,
            seed,
            replicate_id,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate_id(&self) -> u64 {
        self.replicate_id
    }

    /// Uniform draw in (0, 1]; never returns 0 so `-ln` is always finite.
    pub fn uniform_pos(&mut self) -> f64 {
        loop {
            let u: f64 = self.inner.gen();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Unit-rate exponential draw.
    pub fn exp1(&mut self) -> f64 {
        -self.uniform_pos().ln()
    }

    /// Standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(rand_distr::StandardNormal)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.gen::<f64>() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// A discrete mark measure on grid-point indices with finite total mass.
#[derive(Debug, Clone)]
pub struct MarkLaw {
    cumulative: Vec<f64>,
    mass: f64,
}

impl MarkLaw {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().all(|&w| w <= 0.0) {
            return Err(Error::DegenerateMarkMeasure);
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "mark weights must be finite and nonnegative".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self {
            cumulative,
            mass: acc,
        })
    }

    /// Counting measure on `n` points: every point carries mass 1.
    pub fn counting(n: usize) -> Result<Self> {
        Self::new(&vec![1.0; n])
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    fn sample(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform_pos() * self.mass;
        // cumulative is nondecreasing; partition_point gives the first bucket with cum >= u
        let idx = self.cumulative.partition_point(|&c| c < u);
        idx.min(self.cumulative.len() - 1)
    }
}

/// Strictly decreasing enumeration of a PPP on the real line with intensity
/// `mass * e^{-x} dx`, via arrival times of a unit-rate Poisson process:
/// `P_i = -ln(Gamma_i / mass)`.
#[derive(Debug, Clone)]
pub struct GumbelPppStream {
    rng: RngStream,
    gamma_sum: f64,
    mass: f64,
}

impl GumbelPppStream {
    pub fn new(rng: RngStream, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidArgument(
                "PPP stream needs finite mass > 0".into(),
            ));
        }
        Ok(Self {
            rng,
            gamma_sum: 0.0,
            mass,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Next point of the decreasing enumeration. With `mass = 1` the first
    /// point is standard Gumbel.
    pub fn next_point(&mut self) -> f64 {
        self.gamma_sum += self.rng.exp1();
        -(self.gamma_sum / self.mass).ln()
    }

    /// Next marked point `(P_i, index of T_i)`. The mark is drawn from the
    /// normalized mark law independently of the level, realizing the
    /// product-intensity PPP on the line times the grid.
    pub fn next_marked(&mut self, marks: &MarkLaw) -> Result<(f64, usize)> {
        if (marks.mass() - self.mass).abs() > 1e-9 * self.mass.max(1.0) {
            return Err(Error::MassMismatch {
                stream_mass: self.mass,
                mark_mass: marks.mass(),
            });
        }
        let p = self.next_point();
        let t = marks.sample(&mut self.rng);
        Ok((p, t))
    }

    pub fn rng_mut(&mut self) -> &mut RngStream {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_one_sample, std_normal_cdf};

    #[test]
    fn identical_keys_identical_draws() {
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 0);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_replicates_differ() {
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 1);
        let same = (0..100).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn scheduling_independence() {
        use rayon::prelude::*;
        let sequential: Vec<u64> = (0..64u64)
            .map(|rep| RngStream::new(7, rep).next_u64())
            .collect();
        let parallel: Vec<u64> = (0..64u64)
            .into_par_iter()
            .map(|rep| RngStream::new(7, rep).next_u64())
            .collect();
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn first_point_is_gumbel() {
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|rep| {
                let mut s = GumbelPppStream::new(RngStream::new(11, rep), 1.0).unwrap();
                s.next_point()
            })
            .collect();
        let ks = ks_one_sample(&draws, |x| (-(-x).exp()).exp());
        assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
    }

    #[test]
    fn points_strictly_decrease() {
        let mut s = GumbelPppStream::new(RngStream::new(3, 0), 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..1000 {
            let p = s.next_point();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn mass_scales_first_point() {
        // P_1 - ln(mass) under mass m is standard Gumbel
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|rep| {
                let mut s = GumbelPppStream::new(RngStream::new(13, rep), 2.0).unwrap();
                s.next_point() - 2f64.ln()
            })
            .collect();
        let ks = ks_one_sample(&draws, |x| (-(-x).exp()).exp());
        assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
    }

    #[test]
    fn marks_uniform_under_counting_measure() {
        let marks = MarkLaw::counting(3).unwrap();
        let mut s = GumbelPppStream::new(RngStream::new(5, 0), 3.0).unwrap();
        let n = 100_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let (_, t) = s.next_marked(&marks).unwrap();
            counts[t] += 1;
        }
        // chi-square with 2 df, critical value 9.21 at level 0.01
        let expected = n as f64 / 3.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 9.21, "chi2 = {chi2}");
    }

    #[test]
    fn dirac_mark_always_hits() {
        let marks = MarkLaw::new(&[0.0, 1.0, 0.0]).unwrap();
        let mut s = GumbelPppStream::new(RngStream::new(5, 1), 1.0).unwrap();
        for _ in 0..100 {
            let (_, t) = s.next_marked(&marks).unwrap();
            assert_eq!(t, 1);
        }
    }

    #[test]
    fn mass_mismatch_rejected() {
        let marks = MarkLaw::counting(3).unwrap();
        let mut s = GumbelPppStream::new(RngStream::new(5, 2), 1.0).unwrap();
        assert!(matches!(
            s.next_marked(&marks),
            Err(Error::MassMismatch { .. })
        ));
    }

    #[test]
    fn empty_mark_law_rejected() {
        assert!(matches!(
            MarkLaw::new(&[]),
            Err(Error::DegenerateMarkMeasure)
        ));
        assert!(matches!(
            MarkLaw::new(&[0.0, 0.0]),
            Err(Error::DegenerateMarkMeasure)
        ));
    }

    #[test]
    fn count_above_level_is_poisson() {
        // number of points above x has mean mass * e^{-x}
        let x = 1.0f64;
        let mass = 2.0f64;
        let expected = mass * (-x).exp();
        let reps = 20_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for rep in 0..reps {
            let mut s = GumbelPppStream::new(RngStream::new(17, rep), mass).unwrap();
            let mut count = 0.0;
            while s.next_point() > x {
                count += 1.0;
            }
            sum += count;
            sumsq += count * count;
        }
        let mean = sum / reps as f64;
        let var = sumsq / reps as f64 - mean * mean;
        let se = (var / reps as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se);
        // Poisson: variance equals mean
        assert!((var - expected).abs() < 0.1 * expected);
    }

    #[test]
    fn standard_normal_is_normal() {
        let n = 100_000;
        let draws: Vec<f64> = {
            let mut rng = RngStream::new(23, 0);
            (0..n).map(|_| rng.standard_normal()).collect()
        };
        let ks = ks_one_sample(&draws, std_normal_cdf);
        assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
    }
}
