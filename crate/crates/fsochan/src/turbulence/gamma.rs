use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::structure::StructureFunction;
use super::{ChannelParams, KernelError};
use crate::qmc::{self, Budget, Estimate};
use crate::quad::{adaptive, Tolerance};
use crate::special::{bessel_j0, bessel_j1, norm_inv};

/// Source-plane cutoff in units of `w0`; the Gaussian envelope is below
/// `exp(-72)` there.
const CUTOFF_W0: f64 = 12.0;

/// Radial source profile `exp(-ρ²/(2 w0²) - D(0, ρ)/2)`.
fn source_profile(params: &ChannelParams) -> impl Fn(f64) -> f64 {
    let w2 = 2.0 * params.w0 * params.w0;
    let b = 0.375 * params.beta();
    move |rho: f64| (-rho * rho / w2 - b * rho.powf(5.0 / 3.0)).exp()
}

/// Mean intensity `Γ2(r)` at receiver radius `|r|`, in m⁻².
///
/// The source-plane integral is isotropic, so it reduces to a Hankel
/// transform of order zero evaluated by adaptive quadrature.
pub fn gamma2(r: [f64; 2], params: &ChannelParams) -> Result<f64, KernelError> {
    params.validate()?;
    let kappa = params.kappa();
    let rr = r[0].hypot(r[1]);
    let g = source_profile(params);
    let top = CUTOFF_W0 * params.w0;
    let scale = top * top;
    let res = adaptive(
        |rho| rho * g(rho) * bessel_j0(kappa * rr * rho),
        0.0,
        top,
        Tolerance {
            abs: 1e-13 * scale,
            rel: 1e-10,
            max_intervals: 4000,
        },
    )
    .map_err(|e| KernelError::quad("gamma2", e))?;
    Ok(kappa * kappa / (2.0 * PI) * res.value)
}

/// `Γ2(0)` together with its quadrature error.
pub fn gamma2_peak(params: &ChannelParams) -> Result<(f64, f64), KernelError> {
    params.validate()?;
    let kappa = params.kappa();
    let g = source_profile(params);
    let res = adaptive(|rho| rho * g(rho), 0.0, CUTOFF_W0 * params.w0, Tolerance::new(0.0, 1e-12))
        .map_err(|e| KernelError::quad("gamma2 peak", e))?;
    let c = kappa * kappa / (2.0 * PI);
    Ok((c * res.value, c * res.error))
}

/// Mean transmittance `⟨η⟩` of a centered circular aperture, with the
/// quadrature error estimate.
pub fn mean_eta(params: &ChannelParams) -> Result<(f64, f64), KernelError> {
    mean_eta_radius(params, params.aperture_radius)
}

pub(crate) fn mean_eta_radius(params: &ChannelParams, a: f64) -> Result<(f64, f64), KernelError> {
    params.validate()?;
    let ka = params.kappa() * a;
    let g = source_profile(params);
    let res = adaptive(
        |rho| g(rho) * bessel_j1(ka * rho),
        0.0,
        CUTOFF_W0 * params.w0,
        Tolerance {
            abs: 1e-14 / ka,
            rel: 1e-12,
            max_intervals: 8000,
        },
    )
    .map_err(|e| KernelError::quad("mean transmittance", e))?;
    Ok((ka * res.value, ka * res.error))
}

/// Estimate of the intensity correlation `Γ4(r1, r2)`, in m⁻⁴.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma4 {
    pub value: Estimate,
    /// Imaginary part left by sampling; zero in expectation.
    pub imag: Estimate,
}

/// `Γ4(r1, r2)` by scrambled-Sobol importance sampling of the six source
/// coordinates from the Gaussian envelope.
///
/// The imaginary residue is accepted when it is below `1e-3 |Re|` or within
/// three of its own standard errors; otherwise the estimate is rejected.
pub fn gamma4(
    r1: [f64; 2],
    r2: [f64; 2],
    params: &ChannelParams,
    budget: Budget,
    seed: u64,
) -> Result<Gamma4, KernelError> {
    params.validate()?;
    let kappa = params.kappa();
    let sf = StructureFunction::new(params);
    let sd = params.w0 * FRAC_1_SQRT_2;
    let u = [r1[0] - r2[0], r1[1] - r2[1]];
    let v = [r1[0] + r2[0], r1[1] + r2[1]];
    let [re, im] = qmc::estimate(6, budget, seed, |x, y: &mut [f64; 2]| {
        let z: [f64; 6] = std::array::from_fn(|i| sd * norm_inv(x[i]));
        let (p, s, t) = ([z[0], z[1]], [z[2], z[3]], [z[4], z[5]]);
        let e = (log_mutual(&sf, u, p, s, t) + log_factor(&sf, s, t)).exp();
        let phase = kappa * (u[0] * s[0] + u[1] * s[1] + v[0] * t[0] + v[1] * t[1]);
        y[0] = e * phase.cos();
        y[1] = e * phase.sin();
    });
    let scale = (kappa * params.w0).powi(4) / (4.0 * PI * PI);
    let value = scaled(re, scale);
    let imag = scaled(im, scale);
    if imag.mean.abs() > 1e-3 * value.mean.abs() && imag.mean.abs() > 3.0 * imag.std_error {
        return Err(KernelError::QuadratureNotConverged {
            quantity: "gamma4 imaginary residue",
            value: imag.mean,
            error: imag.std_error,
        });
    }
    Ok(Gamma4 { value, imag })
}

pub(crate) fn scaled(e: Estimate, c: f64) -> Estimate {
    Estimate {
        mean: e.mean * c,
        std_error: e.std_error * c.abs(),
        ..e
    }
}

/// Terms of the fourth-order exponent that couple the two receiver points:
/// `½[D(u, p+s) + D(u, p-s) - D(u, p+t) - D(u, p-t)]`.
#[inline]
pub(crate) fn log_mutual(
    sf: &StructureFunction,
    u: [f64; 2],
    p: [f64; 2],
    s: [f64; 2],
    t: [f64; 2],
) -> f64 {
    let f = |a: f64, b: f64| sf.path_integral(u[0], u[1], a, b);
    sf.beta()
        * (f(p[0] + s[0], p[1] + s[1]) + f(p[0] - s[0], p[1] - s[1])
            - f(p[0] + t[0], p[1] + t[1])
            - f(p[0] - t[0], p[1] - t[1]))
}

/// The part that survives factorization: `-½[D(0, s+t) + D(0, s-t)]`.
#[inline]
pub(crate) fn log_factor(sf: &StructureFunction, s: [f64; 2], t: [f64; 2]) -> f64 {
    -0.5 * (sf.on_axis(s[0] + t[0], s[1] + t[1]) + sf.on_axis(s[0] - t[0], s[1] - t[1]))
}
