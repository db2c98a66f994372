use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use super::gamma::{gamma2_peak, log_factor, log_mutual, mean_eta, scaled};
use super::structure::{rytov_parameter, StructureFunction};
use super::{ChannelParams, KernelError};
use crate::qmc::{self, Budget, Estimate};
use crate::quad::{adaptive, Tolerance};
use crate::special::norm_inv;

/// Bumped whenever a change to the kernels alters their numbers.
pub const KERNEL_VERSION: &str = "fsochan-kernels/1";

/// Fresnel parameters over which the vacuum profile is verified against its
/// closed form by the test suite.
pub const VALIDATED_FRESNEL: (f64, f64) = (0.05, 10.0);

/// The four statistics that parameterize every transmittance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamStats {
    pub mean_eta: f64,
    pub mean_eta2: f64,
    /// Beam-wandering variance, m².
    pub sigma_bw2: f64,
    /// Squared short-term beam width, m².
    pub wst2: f64,
}

impl BeamStats {
    pub fn check(&self) -> Result<(), String> {
        let BeamStats {
            mean_eta: m1,
            mean_eta2: m2,
            sigma_bw2,
            wst2,
        } = *self;
        if !(m1 > 0.0 && m1 <= 1.0) {
            return Err(format!("mean transmittance {m1} outside (0, 1]"));
        }
        if !(m2 >= m1 * m1 && m2 <= m1) {
            return Err(format!("second moment {m2} outside [{}, {m1}]", m1 * m1));
        }
        if !(sigma_bw2 >= 0.0) {
            return Err(format!("negative wandering variance {sigma_bw2}"));
        }
        if !(wst2 > 0.0) {
            return Err(format!("non-positive short-term width {wst2}"));
        }
        Ok(())
    }

    pub fn wst(&self) -> f64 {
        self.wst2.sqrt()
    }

    pub fn sigma_bw(&self) -> f64 {
        self.sigma_bw2.sqrt()
    }
}

/// Uncertainties attached to [`BeamStats`]: QMC standard errors for the
/// sampled quantity, quadrature error estimates for the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsErrors {
    pub mean_eta: f64,
    pub mean_eta2: f64,
    pub sigma_bw2: f64,
    pub wst2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsDiagnostics {
    pub fresnel: f64,
    pub rytov: f64,
    pub validated_fresnel: (f64, f64),
    pub gamma2_peak: f64,
    /// Peak-equivalent long-term width squared, `2/(π Γ2(0))`.
    pub long_term_width2: f64,
    /// Intensity covariance `⟨η²⟩ - ⟨η⟩²` before any clamping.
    pub covariance: Estimate,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub stats: BeamStats,
    pub errors: StatsErrors,
    pub diagnostics: StatsDiagnostics,
}

/// Computes the beam statistics of a channel.
///
/// `⟨η⟩` is a one-dimensional Hankel-type quadrature. `⟨η²⟩` is `⟨η⟩²` plus
/// the aperture-integrated intensity covariance, sampled over six source and
/// four aperture coordinates with the factorized fourth-order integrand as
/// control variate. `σ²_bw` is the leading order in the structure function of
/// the centroid covariance, and `W²_ST` subtracts it from the peak-equivalent
/// long-term width.
pub fn channel_stats(params: &ChannelParams, budget: Budget, seed: u64) -> Result<ChannelStats, KernelError> {
    params.validate()?;
    if !budget.is_valid() {
        return Err(KernelError::InvalidParams {
            field: "budget",
            value: budget.points as f64,
        });
    }
    let mut warnings = Vec::new();
    let fresnel = params.fresnel();
    if fresnel < VALIDATED_FRESNEL.0 || fresnel > VALIDATED_FRESNEL.1 {
        warnings.push(format!(
            "Fresnel parameter {fresnel:.4} outside validated range [{}, {}]",
            VALIDATED_FRESNEL.0, VALIDATED_FRESNEL.1
        ));
    }

    let (m1, m1_err) = mean_eta(params)?;
    let cov = if params.cn2 == 0.0 {
        Estimate::exact(0.0)
    } else {
        eta_covariance(params, budget, seed)
    };
    let (m2, m2_clamped) = clamp_second_moment(m1, m1 * m1 + cov.mean, cov.std_error)?;
    if let Some(w) = m2_clamped {
        log::warn!("{w}");
        warnings.push(w);
    }

    let (sbw2, sbw2_err) = beam_wander_variance(params)?;
    let (peak, peak_err) = gamma2_peak(params)?;
    let wlt2 = 2.0 / (PI * peak);
    let wlt2_err = wlt2 * peak_err / peak;
    let wst2 = wlt2 - 4.0 * sbw2;
    if !(wst2 > 0.0) {
        return Err(KernelError::StatsInvariantViolation {
            what: "positive short-term width",
            detail: format!("W_LT^2 = {wlt2:e}, 4 sigma_bw^2 = {:e}", 4.0 * sbw2),
        });
    }

    let stats = BeamStats {
        mean_eta: m1,
        mean_eta2: m2,
        sigma_bw2: sbw2,
        wst2,
    };
    if let Err(detail) = stats.check() {
        return Err(KernelError::StatsInvariantViolation {
            what: "moment ordering",
            detail,
        });
    }
    Ok(ChannelStats {
        stats,
        errors: StatsErrors {
            mean_eta: m1_err,
            mean_eta2: cov.std_error + 2.0 * m1 * m1_err,
            sigma_bw2: sbw2_err,
            wst2: wlt2_err + 4.0 * sbw2_err,
        },
        diagnostics: StatsDiagnostics {
            fresnel,
            rytov: rytov_parameter(params),
            validated_fresnel: VALIDATED_FRESNEL,
            gamma2_peak: peak,
            long_term_width2: wlt2,
            covariance: cov,
            warnings,
        },
    })
}

/// Keeps `m2` inside `[m1², m1]`, tolerating excursions of up to three
/// standard errors.
fn clamp_second_moment(m1: f64, m2: f64, se: f64) -> Result<(f64, Option<String>), KernelError> {
    let lo = m1 * m1;
    let hi = m1;
    if m2 > hi {
        let excess = m2 - hi;
        if excess <= 3.0 * se {
            let w = format!("second moment {m2:e} above first moment by {:.2} standard errors; clamped", excess / se);
            return Ok((hi, Some(w)));
        }
        return Err(KernelError::StatsInvariantViolation {
            what: "<eta^2> <= <eta>",
            detail: format!("<eta^2> = {m2:e} exceeds <eta> = {hi:e} by {excess:e} (standard error {se:e})"),
        });
    }
    if m2 < lo {
        let deficit = lo - m2;
        if deficit <= 3.0 * se {
            let w = format!("second moment {m2:e} below <eta>^2 by {:.2} standard errors; clamped", deficit / se);
            return Ok((lo, Some(w)));
        }
        return Err(KernelError::StatsInvariantViolation {
            what: "<eta>^2 <= <eta^2>",
            detail: format!("<eta^2> = {m2:e} below <eta>^2 = {lo:e} by {deficit:e} (standard error {se:e})"),
        });
    }
    Ok((m2, None))
}

/// Aperture-integrated intensity covariance `⟨η²⟩ - ⟨η⟩²`.
pub(crate) fn eta_covariance(params: &ChannelParams, budget: Budget, seed: u64) -> Estimate {
    let kappa = params.kappa();
    let a = params.aperture_radius;
    let sf = StructureFunction::new(params);
    let sd = params.w0 * FRAC_1_SQRT_2;
    let [cov] = qmc::estimate(10, budget, seed, |x, y: &mut [f64; 1]| {
        let z: [f64; 6] = std::array::from_fn(|i| sd * norm_inv(x[i]));
        let (p, s, t) = ([z[0], z[1]], [z[2], z[3]], [z[4], z[5]]);
        let (ra, ta) = (a * x[6].sqrt(), 2.0 * PI * x[7]);
        let (rb, tb) = (a * x[8].sqrt(), 2.0 * PI * x[9]);
        let r1 = [ra * ta.cos(), ra * ta.sin()];
        let r2 = [rb * tb.cos(), rb * tb.sin()];
        let u = [r1[0] - r2[0], r1[1] - r2[1]];
        let v = [r1[0] + r2[0], r1[1] + r2[1]];
        let phase = kappa * (u[0] * s[0] + u[1] * s[1] + v[0] * t[0] + v[1] * t[1]);
        y[0] = log_factor(&sf, s, t).exp() * log_mutual(&sf, u, p, s, t).exp_m1() * phase.cos();
    });
    let scale = (kappa * params.w0 * a).powi(4) / 4.0;
    scaled(cov, scale)
}

/// Beam-wandering variance to first order in the structure function, with
/// its quadrature error estimate.
///
/// Spectral form: `4π c β ∫_0^1 dξ ∫_0^∞ dK K^(-2/3) A²(ξ, K) (α cos θ - γ sin θ)²`
/// where `c = 1/(2π I)` normalizes the Kolmogorov 5/3 law to its spectrum.
pub fn beam_wander_variance(params: &ChannelParams) -> Result<(f64, f64), KernelError> {
    params.validate()?;
    spectral_wander(params, true)
}

fn kolmogorov_spectral_constant() -> f64 {
    let mu: f64 = 5.0 / 3.0;
    let i = libm::tgamma(1.0 - mu / 2.0) / (mu * 2f64.powf(mu) * libm::tgamma(1.0 + mu / 2.0));
    1.0 / (2.0 * PI * i)
}

fn spectral_wander(params: &ChannelParams, diffraction: bool) -> Result<(f64, f64), KernelError> {
    let beta = params.beta();
    if beta == 0.0 {
        return Ok((0.0, 0.0));
    }
    let w0 = params.w0;
    let kappa = params.kappa();
    let gw = 1.0 / (w0 * w0 * kappa * kappa);
    let inner = |xi: f64| -> Result<(f64, f64), KernelError> {
        let one = 1.0 - xi;
        let alpha = one / (2.0 * kappa);
        let gamma = if diffraction { xi * gw } else { 0.0 };
        let damp = w0 * w0 * one * one / 4.0 + if diffraction { xi * xi * gw } else { 0.0 };
        if damp <= 0.0 {
            return Ok((0.0, 0.0));
        }
        // K = t^3 removes the K^(-2/3) endpoint singularity
        let tmax = (64.0 / damp).sqrt().cbrt();
        let f = |tt: f64| {
            let k2 = tt.powi(6);
            let th = if diffraction { xi * one * k2 / (2.0 * kappa) } else { 0.0 };
            let amp = alpha * th.cos() - gamma * th.sin();
            3.0 * (-damp * k2).exp() * amp * amp
        };
        let r = adaptive(f, 0.0, tmax, Tolerance::new(0.0, 1e-10)).map_err(|e| KernelError::quad("beam wandering (inner)", e))?;
        Ok((r.value, r.error))
    };
    let mut first_err: Option<KernelError> = None;
    let mut inner_err = 0.0f64;
    let outer = adaptive(
        |xi| match inner(xi) {
            Ok((v, e)) => {
                inner_err = inner_err.max(e);
                v
            }
            Err(e) => {
                first_err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        1.0,
        Tolerance::new(0.0, 1e-8),
    );
    if let Some(e) = first_err {
        return Err(e);
    }
    let outer = outer.map_err(|e| KernelError::quad("beam wandering", e))?;
    let c = 4.0 * PI * kolmogorov_spectral_constant() * beta;
    Ok((c * outer.value, c * (outer.error + inner_err)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(cn2: f64, length: f64) -> ChannelParams {
        ChannelParams {
            cn2,
            wavelength: 800e-9,
            length,
            w0: 0.02,
            aperture_radius: 0.04,
            extinction_db_per_km: 1.0,
        }
    }

    #[test]
    fn spectral_constant() {
        assert!((kolmogorov_spectral_constant() - 1.0 / (2.0 * PI * 1.118_334_400_32)).abs() < 1e-11);
    }

    #[test]
    fn geometric_wander_matches_closed_form() {
        // without diffraction the double integral has the closed form
        // (75/144) Γ(5/6) β w0^(-1/3) / κ²
        for (cn2, length) in [(4e-14, 1000.0), (3e-15, 3000.0)] {
            let p = link(cn2, length);
            let (v, _) = spectral_wander(&p, false).unwrap();
            let exact = 75.0 / 144.0 * libm::tgamma(5.0 / 6.0) * p.beta() * p.w0.powf(-1.0 / 3.0)
                / (p.kappa() * p.kappa());
            assert!((v / exact - 1.0).abs() < 1e-7, "{v} vs {exact}");
        }
    }

    #[test]
    fn vacuum_stats() {
        let p = link(0.0, 1000.0);
        let s = channel_stats(&p, Budget::new(1 << 10, 4), 1).unwrap();
        let w2 = p.vacuum_width().powi(2);
        assert_eq!(s.stats.sigma_bw2, 0.0);
        assert!((s.stats.wst2 / w2 - 1.0).abs() < 1e-10);
        assert_eq!(s.stats.mean_eta2, s.stats.mean_eta * s.stats.mean_eta);
    }

    #[test]
    fn clamping_rules() {
        assert_eq!(clamp_second_moment(0.5, 0.3, 0.01).unwrap(), (0.3, None));
        let (v, w) = clamp_second_moment(0.5, 0.52, 0.01).unwrap();
        assert_eq!(v, 0.5);
        assert!(w.is_some());
        assert!(clamp_second_moment(0.5, 0.54, 0.01).is_err());
        assert_eq!(clamp_second_moment(0.5, 0.24, 0.01).unwrap().0, 0.25);
        assert!(clamp_second_moment(0.5, 0.2, 0.01).is_err());
    }

    #[test]
    fn moderate_turbulence_stats_are_consistent() {
        let p = link(3e-15, 2000.0);
        let s = channel_stats(&p, Budget::new(1 << 16, 16), 7).unwrap();
        let b = s.stats;
        assert!(b.mean_eta2 > b.mean_eta * b.mean_eta);
        assert!(b.mean_eta2 < b.mean_eta);
        assert!(b.sigma_bw2 > 0.0 && b.wst2 > 0.0);
        // weaker wandering than the beam itself
        assert!(b.sigma_bw2 < s.diagnostics.long_term_width2 / 4.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let p = link(3e-15, 3000.0);
        let b = Budget::new(1 << 12, 8);
        let a = channel_stats(&p, b, 42).unwrap();
        let c = channel_stats(&p, b, 42).unwrap();
        assert_eq!(a, c);
        let d = channel_stats(&p, b, 43).unwrap();
        assert_ne!(a.stats.mean_eta2, d.stats.mean_eta2);
    }
}
