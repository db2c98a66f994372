use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lognormal::TruncLogNormal;
use super::weibull::{weibull_density_at, weibull_exceedance_at, weibull_params, WeibullParams};
use super::{mean_over, PdtError};
use crate::quad::{adaptive, Tolerance};
use crate::turbulence::BeamStats;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Upper limit of the normalization integrals over `ξ = r0/σ_bw`.
const XI_CUTOFF: f64 = 12.0;

/// `ζ0²/η0²` closer to one than this is treated as zero conditional variance.
const DEGENERATE_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Number of displacement radii `N`.
    pub samples: usize,
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

/// Mixture of conditional truncated log-normals over `N` sampled beam
/// displacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePdt {
    pub format_version: u32,
    pub eta0_norm: f64,
    pub zeta0_sq: f64,
    pub weibull: WeibullParams,
    pub sigma_bw2: f64,
    /// Per-axis variance the radii were drawn with: `σ_bw²`, or `Δ²` after tracking.
    pub radius_variance: f64,
    /// Zero selects the point-mass branch.
    pub sigma_r0: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Spread of the mean over the sampled displacements.
    pub std_error: f64,
}

/// Rayleigh radii for per-axis variance `variance`. The same seed gives the
/// same uniforms for every variance.
pub(crate) fn rayleigh_radii(n: usize, variance: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = variance.max(0.0).sqrt();
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            s * (-2.0 * (-u).ln_1p()).sqrt()
        })
        .collect()
}

/// `∫_0^12 ξ exp(-ξ²/2 - m (s ξ)^λ) dξ` with `s = σ_bw / R`; dividing the
/// input moments by it for `m = 1, 2` gives `η0` and `ζ0²`.
pub fn displacement_normalization(s: f64, lambda: f64, m: f64) -> Result<f64, PdtError> {
    if s == 0.0 {
        return Ok(-(-0.5 * XI_CUTOFF * XI_CUTOFF).exp_m1());
    }
    let r = adaptive(
        |x| x * (-0.5 * x * x - m * (s * x).powf(lambda)).exp(),
        0.0,
        XI_CUTOFF,
        Tolerance::new(0.0, 1e-8),
    )?;
    Ok(r.value)
}

pub fn composite_pdt_build(stats: &BeamStats, a: f64, opts: BuildOptions) -> Result<CompositePdt, PdtError> {
    stats.check().map_err(PdtError::InvalidInput)?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(PdtError::InvalidInput(format!("aperture radius {a} must be positive")));
    }
    if opts.samples == 0 {
        return Err(PdtError::InvalidInput("sample count must be positive".into()));
    }
    let wp = weibull_params(a, stats.wst())?;
    let s = stats.sigma_bw() / wp.r_scale;
    let eta0 = stats.mean_eta / displacement_normalization(s, wp.shape_lambda, 1.0)?;
    let zeta0_sq = stats.mean_eta2 / displacement_normalization(s, wp.shape_lambda, 2.0)?;
    let ratio = zeta0_sq / (eta0 * eta0);
    let sigma_r0 = if (ratio - 1.0).abs() <= DEGENERATE_RATIO {
        0.0
    } else if ratio < 1.0 {
        return Err(PdtError::ApproximationBreakdown {
            eta0_sq: eta0 * eta0,
            zeta0_sq,
        });
    } else {
        ratio.ln().sqrt()
    };
    Ok(CompositePdt {
        format_version: FORMAT_VERSION,
        eta0_norm: eta0,
        zeta0_sq,
        weibull: wp,
        sigma_bw2: stats.sigma_bw2,
        radius_variance: stats.sigma_bw2,
        sigma_r0,
        sample_count: opts.samples,
        seed: opts.seed,
        radii: rayleigh_radii(opts.samples, stats.sigma_bw2, opts.seed),
    })
}

impl CompositePdt {
    /// Same mixture with the radii redrawn for another displacement variance.
    pub fn with_radius_variance(&self, variance: f64) -> CompositePdt {
        CompositePdt {
            radius_variance: variance,
            radii: rayleigh_radii(self.sample_count, variance, self.seed),
            ..self.clone()
        }
    }

    pub fn is_point_mass_branch(&self) -> bool {
        self.sigma_r0 == 0.0
    }

    /// `μ` of the centered beam, `-ln(η0²/ζ0)`.
    pub fn mu0(&self) -> f64 {
        -2.0 * self.eta0_norm.ln() + 0.5 * self.zeta0_sq.ln()
    }

    pub fn mu_r0(&self, r0: f64) -> f64 {
        self.mu0() + (r0 / self.weibull.r_scale).powf(self.weibull.shape_lambda)
    }

    /// Conditional law for displacement `r0`; `None` on the point-mass branch.
    pub fn conditional(&self, r0: f64) -> Option<TruncLogNormal> {
        if self.is_point_mass_branch() {
            return None;
        }
        TruncLogNormal::new(self.mu_r0(r0), self.sigma_r0).ok()
    }

    /// Transmittance of the point mass at displacement `r0`.
    fn point(&self, r0: f64) -> f64 {
        self.eta0_norm * (-(r0 / self.weibull.r_scale).powf(self.weibull.shape_lambda)).exp()
    }

    fn components(&self) -> Vec<TruncLogNormal> {
        self.radii.iter().filter_map(|&r| self.conditional(r)).collect()
    }

    /// On the point-mass branch the limit `N → ∞` is used, which is the
    /// log-negative Weibull law with peak `η0`.
    pub fn density(&self, eta: f64) -> f64 {
        if self.is_point_mass_branch() {
            return weibull_density_at(eta, self.eta0_norm, &self.weibull, self.radius_variance);
        }
        let comps = self.components();
        mean_over(comps.len(), |i| comps[i].density(eta)).0
    }

    /// Densities on a grid, sharing the component setup.
    pub fn density_grid(&self, etas: &[f64]) -> Vec<f64> {
        if self.is_point_mass_branch() {
            return etas.iter().map(|&e| self.density(e)).collect();
        }
        let comps = self.components();
        etas.iter().map(|&e| mean_over(comps.len(), |i| comps[i].density(e)).0).collect()
    }

    /// `P(η' > η)`.
    pub fn exceedance(&self, eta: f64) -> f64 {
        if self.is_point_mass_branch() {
            if self.radius_variance == 0.0 {
                return if eta < self.eta0_norm { 1.0 } else { 0.0 };
            }
            return weibull_exceedance_at(eta, self.eta0_norm, &self.weibull, self.radius_variance);
        }
        let comps = self.components();
        mean_over(comps.len(), |i| comps[i].exceedance(eta)).0
    }

    /// `E[η^k ; η > lo]` under the truncated components.
    pub fn partial_moment(&self, k: f64, lo: f64) -> MeanEstimate {
        let (mean, std_error) = if self.is_point_mass_branch() {
            mean_over(self.radii.len(), |i| {
                let e = self.point(self.radii[i]);
                if e > lo {
                    e.powf(k)
                } else {
                    0.0
                }
            })
        } else {
            let comps = self.components();
            mean_over(comps.len(), |i| comps[i].partial_moment(k, lo))
        };
        MeanEstimate { mean, std_error }
    }

    pub fn moment(&self, k: f64) -> MeanEstimate {
        self.partial_moment(k, 0.0)
    }

    /// Moments with each conditional law taken before truncation to `[0, 1]`.
    /// These reproduce the input `⟨η⟩` and `⟨η²⟩` up to the sampling error of
    /// the radii; the truncated moments of [`Self::moment`] fall below them
    /// by the mass the truncation removes.
    pub fn untruncated_moment(&self, k: f64) -> MeanEstimate {
        let (mean, std_error) = if self.is_point_mass_branch() {
            mean_over(self.radii.len(), |i| self.point(self.radii[i]).powf(k))
        } else {
            let s2 = self.sigma_r0 * self.sigma_r0;
            mean_over(self.radii.len(), |i| (-k * self.mu_r0(self.radii[i]) + 0.5 * k * k * s2).exp())
        };
        MeanEstimate { mean, std_error }
    }

    /// `E f(η)` with each component integrated by quadrature.
    pub fn expectation<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> Result<MeanEstimate, PdtError> {
        if self.is_point_mass_branch() {
            let (mean, std_error) = mean_over(self.radii.len(), |i| f(self.point(self.radii[i])));
            return Ok(MeanEstimate { mean, std_error });
        }
        let comps = self.components();
        let vals: Vec<Result<f64, PdtError>> = {
            use rayon::prelude::*;
            comps.par_iter().map(|c| component_expectation(c, &f)).collect()
        };
        let vals = vals.into_iter().collect::<Result<Vec<f64>, _>>()?;
        let (mean, std_error) = mean_over(vals.len(), |i| vals[i]);
        Ok(MeanEstimate { mean, std_error })
    }

    /// Draws `n` transmittances: a uniform component, then its conditional law.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>, PdtError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.radii.len();
        (0..n)
            .map(|_| {
                let r = self.radii[rng.gen_range(0..m)];
                match self.conditional(r) {
                    Some(c) => c.draw(&mut rng),
                    None => Ok(self.point(r)),
                }
            })
            .collect()
    }

    /// Grid point of largest density among `points` equally spaced values in `(0, 1)`.
    pub fn mode(&self, points: usize) -> f64 {
        let etas: Vec<f64> = (1..points).map(|i| i as f64 / points as f64).collect();
        let d = self.density_grid(&etas);
        let best = (0..d.len()).fold(0, |b, i| if d[i] > d[b] { i } else { b });
        etas[best]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("PDT serializes")
    }

    pub fn from_json(text: &str) -> Result<CompositePdt, PdtError> {
        let c: CompositePdt = serde_json::from_str(text).map_err(|e| PdtError::Format(e.to_string()))?;
        if c.format_version != FORMAT_VERSION {
            return Err(PdtError::Format(format!(
                "version {} not supported, expected {FORMAT_VERSION}",
                c.format_version
            )));
        }
        if c.radii.len() != c.sample_count {
            return Err(PdtError::Format(format!(
                "{} radii stored for sample count {}",
                c.radii.len(),
                c.sample_count
            )));
        }
        Ok(c)
    }
}

/// `E f(η)` for one truncated log-normal, integrating over `z` with
/// `η = exp(-μ + σ z)`.
fn component_expectation<F: Fn(f64) -> f64>(c: &TruncLogNormal, f: &F) -> Result<f64, PdtError> {
    let hi = c.mu / c.sigma;
    let lo = hi.min(0.0) - 12.0;
    let norm = 1.0 / ((2.0 * PI).sqrt() * c.normalizer);
    let r = adaptive(
        |z| f((-c.mu + c.sigma * z).exp()) * (-0.5 * z * z).exp(),
        lo,
        hi,
        Tolerance::new(1e-14 / norm, 1e-10),
    )?;
    Ok(r.value * norm)
}

pub fn composite_pdt_density(eta: f64, c: &CompositePdt) -> f64 {
    c.density(eta)
}

pub fn composite_pdt_sample(c: &CompositePdt, n: usize, seed: u64) -> Result<Vec<f64>, PdtError> {
    c.sample(n, seed)
}

pub fn composite_expectation<F: Fn(f64) -> f64 + Sync>(c: &CompositePdt, f: F) -> Result<MeanEstimate, PdtError> {
    c.expectation(f)
}
