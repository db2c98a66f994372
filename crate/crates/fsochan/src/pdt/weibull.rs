use serde::{Deserialize, Serialize};

use super::PdtError;
use crate::special::{i0e, i1e};

/// Ratios `a / W_ST` for which the parameters are validated.
pub const VALIDATED_RATIO: (f64, f64) = (0.01, 10.0);

/// Parameters of the log-negative Weibull model of a wandering Gaussian
/// beam with short-term width `W_ST` through an aperture of radius `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    /// Transmittance of the centered beam.
    pub eta0_max: f64,
    /// Scale `R`, m.
    pub r_scale: f64,
    pub shape_lambda: f64,
    /// `a / W_ST`.
    pub ratio: f64,
}

/// `1 - e^{-x} I0(x)`, without cancellation for small `x`.
fn one_minus_i0e(x: f64) -> f64 {
    if x < 1.0 {
        // e^{-x} (I0(x) - 1) by its series
        let q = 0.25 * x * x;
        let (mut term, mut sum) = (1.0, 0.0);
        for k in 1..30 {
            term *= q / (k * k) as f64;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        -(-x).exp_m1() - (-x).exp() * sum
    } else {
        1.0 - i0e(x)
    }
}

pub fn weibull_params(a: f64, wst: f64) -> Result<WeibullParams, PdtError> {
    if !(a > 0.0 && wst > 0.0) || !a.is_finite() || !wst.is_finite() {
        return Err(PdtError::InvalidInput(format!("aperture {a} and short-term width {wst} must be positive")));
    }
    let xi = a / wst;
    if !(VALIDATED_RATIO.0..=VALIDATED_RATIO.1).contains(&xi) {
        return Err(PdtError::DomainError { ratio: xi });
    }
    let x = 4.0 * xi * xi;
    let eta0 = -(-2.0 * xi * xi).exp_m1();
    let d = one_minus_i0e(x);
    let l = (2.0 * eta0 / d).ln();
    let lambda = 8.0 * xi * xi * i1e(x) / d / l;
    let r = a * l.powf(-1.0 / lambda);
    Ok(WeibullParams {
        eta0_max: eta0,
        r_scale: r,
        shape_lambda: lambda,
        ratio: xi,
    })
}

impl WeibullParams {
    /// Transmittance of a beam displaced by `r0` from the aperture center.
    pub fn transmittance(&self, r0: f64) -> f64 {
        self.eta0_max * (-(r0 / self.r_scale).powf(self.shape_lambda)).exp()
    }

    /// Displacement giving transmittance `eta`; inverse of [`Self::transmittance`].
    pub fn displacement(&self, eta: f64) -> f64 {
        self.r_scale * (self.eta0_max / eta).ln().powf(1.0 / self.shape_lambda)
    }

    /// Density of `η` when the displacement is Rayleigh with variance
    /// `sigma_bw2` per axis.
    pub fn density(&self, eta: f64, sigma_bw2: f64) -> f64 {
        weibull_density_at(eta, self.eta0_max, self, sigma_bw2)
    }

    /// `P(η' > η)`.
    pub fn exceedance(&self, eta: f64, sigma_bw2: f64) -> f64 {
        weibull_exceedance_at(eta, self.eta0_max, self, sigma_bw2)
    }
}

/// Density with the peak transmittance `eta0` supplied separately.
pub(crate) fn weibull_density_at(eta: f64, eta0: f64, wp: &WeibullParams, sigma_bw2: f64) -> f64 {
    if !(eta > 0.0 && eta < eta0) || !(sigma_bw2 > 0.0) {
        return 0.0;
    }
    let lam = wp.shape_lambda;
    let r2 = wp.r_scale * wp.r_scale;
    let l = (eta0 / eta).ln();
    r2 / (sigma_bw2 * eta * lam) * l.powf(2.0 / lam - 1.0) * (-r2 / (2.0 * sigma_bw2) * l.powf(2.0 / lam)).exp()
}

pub(crate) fn weibull_exceedance_at(eta: f64, eta0: f64, wp: &WeibullParams, sigma_bw2: f64) -> f64 {
    if eta <= 0.0 {
        return 1.0;
    }
    if eta >= eta0 {
        return 0.0;
    }
    if !(sigma_bw2 > 0.0) {
        return 1.0;
    }
    let r2 = wp.r_scale * wp.r_scale * (eta0 / eta).ln().powf(2.0 / wp.shape_lambda);
    -(-r2 / (2.0 * sigma_bw2)).exp_m1()
}

pub fn weibull_pdt_density(eta: f64, wp: &WeibullParams, sigma_bw2: f64) -> f64 {
    wp.density(eta, sigma_bw2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{adaptive, Tolerance};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a / b - 1.0).abs() < rel
    }

    #[test]
    fn reference_parameters() {
        // 50-digit evaluations, (a, W_ST) -> (eta0, R, lambda)
        let cases = [
            (0.04, 0.05, 0.721_962_699_546_805_9, 0.048_090_081_401_305_276, 2.117_413_133_033_406_3),
            (0.02, 0.02, 0.864_664_716_763_387_3, 0.022_272_229_321_575_261, 2.312_896_075_706_476_8),
            (0.04, 4.0, 0.000_199_980_001_333_266_7, 2.828_568_551_990_674, 2.000_000_000_000_666_7),
            (0.04, 0.8, 0.004_987_520_807_317_686_3, 0.566_393_259_559_197_23, 2.000_000_010_416_575_6),
            (0.04, 0.4, 0.019_801_326_693_244_696, 0.284_262_603_147_431_59, 2.000_000_666_573_655_7),
            (0.04, 0.008, 1.0, 0.041_112_088_400_188_211, 11.281_408_081_769_398),
            (0.04, 0.004, 1.0, 0.040_596_984_029_405_204, 22.805_627_685_556_403),
        ];
        for (a, w, e0, r, lam) in cases {
            let p = weibull_params(a, w).unwrap();
            assert!(close(p.eta0_max, e0, 1e-13), "{a}/{w}: eta0 {}", p.eta0_max);
            assert!(close(p.r_scale, r, 1e-9), "{a}/{w}: R {}", p.r_scale);
            assert!(close(p.shape_lambda, lam, 1e-10), "{a}/{w}: lambda {}", p.shape_lambda);
        }
    }

    #[test]
    fn outside_validated_range() {
        assert!(matches!(weibull_params(0.04, 0.0001), Err(PdtError::DomainError { .. })));
        assert!(matches!(weibull_params(0.0001, 0.04), Err(PdtError::DomainError { .. })));
        assert!(weibull_params(-1.0, 0.04).is_err());
    }

    #[test]
    fn density_normalized() {
        let p = weibull_params(0.04, 0.05).unwrap();
        let s2 = 0.01 * 0.01;
        let r = adaptive(|e| p.density(e, s2), 0.0, p.eta0_max, Tolerance::new(1e-10, 1e-9)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "{}", r.value);
        assert_eq!(p.density(p.eta0_max, s2), 0.0);
        assert_eq!(p.density(0.9, s2), 0.0);
    }

    #[test]
    fn induced_radii_are_rayleigh() {
        let p = weibull_params(0.04, 0.05).unwrap();
        let sigma: f64 = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // inverse-CDF draws of η from the exceedance, mapped back to radii
        let n = 100_000;
        let mut r2: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let r = sigma * (-2.0 * (1.0 - u).ln()).sqrt();
                let eta = p.transmittance(r);
                p.displacement(eta).powi(2)
            })
            .collect();
        r2.sort_by(f64::total_cmp);
        // r² / (2σ²) is standard exponential
        let ks = r2
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = -(-v / (2.0 * sigma * sigma)).exp_m1();
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.006, "KS {ks}");
        // and the exceedance of η is the Rayleigh CDF of the radius
        let eta = p.transmittance(0.013);
        let expect = -(-(0.013f64).powi(2) / (2.0 * sigma * sigma)).exp_m1();
        assert!((p.exceedance(eta, sigma * sigma) - expect).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn params_positive_in_range(ratio in 0.01f64..10.0) {
            let p = weibull_params(0.04, 0.04 / ratio).unwrap();
            prop_assert!(p.r_scale > 0.0 && p.shape_lambda > 0.0);
            prop_assert!(p.eta0_max > 0.0 && p.eta0_max <= 1.0);
            prop_assert!((p.eta0_max + (-2.0 * p.ratio * p.ratio).exp_m1()).abs() < 1e-15);
        }

        #[test]
        fn exceedance_matches_integrated_density(ratio in 0.3f64..2.0, s in 0.005f64..0.03, q in 0.05f64..0.95) {
            let p = weibull_params(0.04, 0.04 / ratio).unwrap();
            let eta = q * p.eta0_max;
            // η = η0 exp(-u^λ) removes the endpoint singularity at η0
            let lam = p.shape_lambda;
            let top = (p.eta0_max / eta).ln().powf(1.0 / lam);
            let tail = adaptive(
                |u| {
                    let e = p.eta0_max * (-u.powf(lam)).exp();
                    p.density(e, s * s) * e * lam * u.powf(lam - 1.0)
                },
                0.0,
                top,
                Tolerance::new(1e-12, 1e-9),
            )
            .unwrap();
            prop_assert!((tail.value - p.exceedance(eta, s * s)).abs() < 1e-6);
        }
    }
}
