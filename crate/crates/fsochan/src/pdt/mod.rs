//! Probability distributions of transmittance: truncated log-normal,
//! log-negative Weibull, and their composition over beam displacements.

mod composite;
mod lognormal;
mod weibull;

pub use composite::{
    composite_expectation, composite_pdt_build, composite_pdt_density, composite_pdt_sample, displacement_normalization,
    BuildOptions,
    CompositePdt, MeanEstimate, DEFAULT_SAMPLES, FORMAT_VERSION,
};
pub use lognormal::{
    trunc_lognormal_density, trunc_lognormal_from_moments, trunc_lognormal_sample, TruncLogNormal, MIN_ACCEPTANCE,
};
pub use weibull::{weibull_params, weibull_pdt_density, WeibullParams, VALIDATED_RATIO};

use rayon::prelude::*;

use crate::quad::NotConverged;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdtError {
    #[error("aperture-to-width ratio {ratio} outside the validated range [0.01, 10]")]
    DomainError { ratio: f64 },
    #[error("zero-variance transmittance at mean {mean}")]
    DegenerateDistribution { mean: f64 },
    #[error("rejection sampler acceptance {acceptance:e} is below 1e-3")]
    RejectionStall { acceptance: f64 },
    #[error("weak-wandering approximation fails: zeta0^2 = {zeta0_sq} < eta0^2 = {eta0_sq}")]
    ApproximationBreakdown { eta0_sq: f64, zeta0_sq: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("normalization integral did not converge: {0}")]
    Quadrature(#[from] NotConverged),
    #[error("PDT file: {0}")]
    Format(String),
}

const CHUNK: usize = 1024;

/// Mean and standard error of `f(i)` over `i < n`, reduced in fixed chunks so
/// the result does not depend on the thread count.
pub(crate) fn mean_over<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    // per-chunk (count, mean, M2), merged in order
    let parts: Vec<(f64, f64, f64)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).fold((0.0, 0.0, 0.0), |(k, m, m2), i| {
                let v = f(i);
                let k1 = k + 1.0;
                let d = v - m;
                let m1 = m + d / k1;
                (k1, m1, m2 + d * (v - m1))
            })
        })
        .collect();
    let (k, mean, m2) = parts.iter().fold((0.0, 0.0, 0.0), |(ka, ma, sa), &(kb, mb, sb)| {
        let k = ka + kb;
        let d = mb - ma;
        (k, ma + d * kb / k, sa + sb + d * d * ka * kb / k)
    });
    let var = if n > 1 { m2 / (k - 1.0) } else { 0.0 };
    (mean, (var / k).sqrt())
}
