use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PdtError;
use crate::special::norm_cdf;

/// Acceptance rates below this make rejection sampling impractical.
pub const MIN_ACCEPTANCE: f64 = 1e-3;

/// Log-normal distribution of `η` truncated to `[0, 1]`, with
/// `ln η ~ N(-μ, σ²)` before truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncLogNormal {
    pub mu: f64,
    pub sigma: f64,
    /// Probability mass of the untruncated law on `[0, 1]`.
    pub normalizer: f64,
}

impl TruncLogNormal {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, PdtError> {
        if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(PdtError::InvalidInput(format!("log-normal needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        Ok(TruncLogNormal {
            mu,
            sigma,
            normalizer: norm_cdf(mu / sigma),
        })
    }

    /// Parameters matched to the first two moments as if untruncated.
    pub fn from_moments(mean_eta: f64, mean_eta2: f64) -> Result<Self, PdtError> {
        let m1 = mean_eta;
        let m2 = mean_eta2;
        if !(m1 > 0.0 && m1 <= 1.0 && m2 >= m1 * m1 && m2 <= m1) {
            return Err(PdtError::InvalidInput(format!("moments ({m1}, {m2}) violate 0 < <eta>^2 <= <eta^2> <= <eta> <= 1")));
        }
        if m2 == m1 * m1 {
            return Err(PdtError::DegenerateDistribution { mean: m1 });
        }
        let mu = -(m1 * m1 / m2.sqrt()).ln();
        let sigma = (m2 / (m1 * m1)).ln().sqrt();
        if sigma == 0.0 {
            return Err(PdtError::DegenerateDistribution { mean: m1 });
        }
        Self::new(mu, sigma)
    }

    pub fn density(&self, eta: f64) -> f64 {
        if !(eta > 0.0 && eta <= 1.0) || self.normalizer == 0.0 {
            return 0.0;
        }
        let z = (eta.ln() + self.mu) / self.sigma;
        (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * self.sigma * eta * self.normalizer)
    }

    /// `P(η' ≤ η)` under the truncated law.
    pub fn cdf(&self, eta: f64) -> f64 {
        if eta <= 0.0 {
            return 0.0;
        }
        if eta >= 1.0 {
            return 1.0;
        }
        (norm_cdf((eta.ln() + self.mu) / self.sigma) / self.normalizer).min(1.0)
    }

    /// `P(η' > η)`.
    pub fn exceedance(&self, eta: f64) -> f64 {
        if eta <= 0.0 {
            return 1.0;
        }
        if eta >= 1.0 {
            return 0.0;
        }
        if self.normalizer == 0.0 {
            // all remaining mass sits at the truncation point
            return 1.0;
        }
        // Φ(μ/σ) - Φ((ln η + μ)/σ) without cancellation
        let hi = self.mu / self.sigma;
        let lo = (eta.ln() + self.mu) / self.sigma;
        (band(lo, hi) / self.normalizer).clamp(0.0, 1.0)
    }

    /// `E[η^k ; η > lo]` under the truncated law.
    pub fn partial_moment(&self, k: f64, lo: f64) -> f64 {
        let s = self.sigma;
        let shift = -self.mu + k * s * s;
        let hi_z = -shift / s;
        let lo_z = if lo <= 0.0 { f64::NEG_INFINITY } else { (lo.ln() - shift) / s };
        if lo_z >= hi_z {
            return 0.0;
        }
        let scale = (-k * self.mu + 0.5 * k * k * s * s).exp();
        scale * band(lo_z, hi_z) / self.normalizer
    }

    pub fn moment(&self, k: f64) -> f64 {
        self.partial_moment(k, 0.0)
    }

    /// Moment of the untruncated law, `exp(-kμ + k²σ²/2)`.
    pub fn untruncated_moment(&self, k: f64) -> f64 {
        (-k * self.mu + 0.5 * k * k * self.sigma * self.sigma).exp()
    }

    /// One draw by rejection from the untruncated law.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, PdtError> {
        if self.normalizer < MIN_ACCEPTANCE {
            return Err(PdtError::RejectionStall {
                acceptance: self.normalizer,
            });
        }
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let y = -self.mu + self.sigma * z;
            if y <= 0.0 {
                return Ok(y.exp());
            }
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>, PdtError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }
}

/// `Φ(hi) - Φ(lo)` for `lo ≤ hi`, evaluated on the side that keeps precision.
pub(crate) fn band(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        norm_cdf(-lo) - norm_cdf(-hi)
    } else {
        norm_cdf(hi) - norm_cdf(lo)
    }
}

pub fn trunc_lognormal_from_moments(mean_eta: f64, mean_eta2: f64) -> Result<TruncLogNormal, PdtError> {
    TruncLogNormal::from_moments(mean_eta, mean_eta2)
}

pub fn trunc_lognormal_density(eta: f64, p: &TruncLogNormal) -> f64 {
    p.density(eta)
}

pub fn trunc_lognormal_sample(p: &TruncLogNormal, n: usize, seed: u64) -> Result<Vec<f64>, PdtError> {
    p.sample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{adaptive, Tolerance};
    use proptest::prelude::*;

    #[test]
    fn parameters_from_moments() {
        let p = TruncLogNormal::from_moments(0.5, 0.3).unwrap();
        assert!((p.mu - 0.784_307_958_956_922_6).abs() < 1e-13);
        assert!((p.sigma - 0.426_991_284_213_102_7).abs() < 1e-13);
        assert!((p.normalizer - norm_cdf(p.mu / p.sigma)).abs() < 1e-15);
        assert!(matches!(
            TruncLogNormal::from_moments(0.5, 0.25),
            Err(PdtError::DegenerateDistribution { .. })
        ));
        assert!(TruncLogNormal::from_moments(0.5, 0.6).is_err());
    }

    #[test]
    fn normalized_and_zero_outside() {
        for (mu, sigma) in [(0.78, 0.43), (0.05, 0.3), (2.0, 1.5), (0.3, 0.05)] {
            let p = TruncLogNormal::new(mu, sigma).unwrap();
            let r = adaptive(|e| p.density(e), 0.0, 1.0, Tolerance::new(1e-12, 1e-10)).unwrap();
            assert!((r.value - 1.0).abs() < 1e-6, "({mu}, {sigma}): {}", r.value);
            assert_eq!(p.density(1.2), 0.0);
            assert_eq!(p.density(-0.1), 0.0);
        }
    }

    #[test]
    fn vanishing_variance_concentrates_at_mean() {
        let m = 0.6;
        let p = TruncLogNormal::from_moments(m, m * m * (1.0 + 1e-8)).unwrap();
        assert!(p.sigma < 1e-3);
        let mode = (-p.mu - p.sigma * p.sigma).exp();
        assert!((mode - m).abs() < 1e-6);
    }

    #[test]
    fn nearly_untruncated_moments_reproduce_inputs() {
        let (m1, m2) = (0.1, 0.0105);
        let p = TruncLogNormal::from_moments(m1, m2).unwrap();
        assert!(p.normalizer > 1.0 - 1e-6);
        let q1 = adaptive(|e| e * p.density(e), 0.0, 1.0, Tolerance::new(0.0, 1e-12)).unwrap().value;
        let q2 = adaptive(|e| e * e * p.density(e), 0.0, 1.0, Tolerance::new(0.0, 1e-12)).unwrap().value;
        assert!((q1 / m1 - 1.0).abs() < 1e-4);
        assert!((q2 / m2 - 1.0).abs() < 1e-4);
        assert!((p.moment(1.0) - q1).abs() < 1e-10);
        assert!((p.moment(2.0) - q2).abs() < 1e-10);
    }

    #[test]
    fn sample_mean_matches_quadrature_mean() {
        let p = TruncLogNormal::new(0.78, 0.43).unwrap();
        let xs = p.sample(1_000_000, 2024).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let exact = p.moment(1.0);
        assert!((mean - exact).abs() < 4.0 * (var / n).sqrt(), "{mean} vs {exact}");
        assert!(xs.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn sampler_matches_cdf() {
        let p = TruncLogNormal::new(0.1, 0.4).unwrap();
        let mut xs = p.sample(100_000, 5).unwrap();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = p.cdf(x);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn heavy_truncation_stalls() {
        let p = TruncLogNormal::new(-1.0, 0.2).unwrap();
        assert!(matches!(p.sample(3, 1), Err(PdtError::RejectionStall { .. })));
    }

    proptest! {
        #[test]
        fn exceedance_and_cdf_are_complementary(mu in -0.5f64..3.0, sigma in 0.05f64..2.0, eta in 0.0f64..1.0) {
            let p = TruncLogNormal::new(mu, sigma).unwrap();
            prop_assume!(p.normalizer > 1e-6);
            prop_assert!((p.cdf(eta) + p.exceedance(eta) - 1.0).abs() < 1e-9);
            prop_assert!((p.partial_moment(0.0, eta) - p.exceedance(eta)).abs() < 1e-9);
        }
    }
}
