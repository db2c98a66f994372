//! Two-decoy BB84 key rate over a fluctuating-loss channel.

use serde::{Deserialize, Serialize};

use crate::pdt::{CompositePdt, PdtError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QkdError {
    #[error("decoy intensities out of order: need 0 < mu_s ({mu_s}) < mu_d ({mu_d}) < 1")]
    DecoyOrderingViolation { mu_s: f64, mu_d: f64 },
    #[error("invalid decoy parameter `{field}` = {value}")]
    InvalidParams { field: &'static str, value: f64 },
    #[error("reference key rate {rate:e} is not positive")]
    DivisionByZeroRate { rate: f64 },
    #[error(transparent)]
    Pdt(#[from] PdtError),
}

/// Signal and weak-decoy intensities (the second decoy is vacuum) and the
/// detection-side constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyParams {
    pub mu_s: f64,
    pub mu_d: f64,
    /// Background yield.
    pub y0: f64,
    /// Misalignment error probability.
    pub e_det: f64,
    /// Error-correction inefficiency.
    pub f: f64,
    /// Deterministic transmittance: extinction and detector efficiency.
    pub eta_d: f64,
}

impl Default for DecoyParams {
    fn default() -> Self {
        DecoyParams {
            mu_s: 0.27,
            mu_d: 0.39,
            y0: 1.7e-6,
            e_det: 0.01,
            f: 1.2,
            eta_d: 1.0,
        }
    }
}

impl DecoyParams {
    pub const MU_VACUUM: f64 = 0.0;

    pub fn validate(&self) -> Result<(), QkdError> {
        if !(self.mu_s > 0.0 && self.mu_s < self.mu_d && self.mu_d < 1.0) {
            return Err(QkdError::DecoyOrderingViolation {
                mu_s: self.mu_s,
                mu_d: self.mu_d,
            });
        }
        let checks: [(&'static str, f64, bool); 4] = [
            ("y0", self.y0, self.y0 >= 0.0 && self.y0 < 1.0),
            ("e_det", self.e_det, (0.0..=0.5).contains(&self.e_det)),
            ("f", self.f, self.f >= 1.0 && self.f.is_finite()),
            ("eta_d", self.eta_d, self.eta_d > 0.0 && self.eta_d <= 1.0),
        ];
        for (field, value, ok) in checks {
            if !ok {
                return Err(QkdError::InvalidParams { field, value });
            }
        }
        Ok(())
    }
}

pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -(x * x.log2() + (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2)
}

/// `1 - exp(-η_d η μ)`, the signal part of the gain.
fn detection(eta: f64, mu: f64, p: &DecoyParams) -> f64 {
    -(-p.eta_d * eta * mu).exp_m1()
}

pub fn gain(eta: f64, mu: f64, p: &DecoyParams) -> f64 {
    p.y0 + detection(eta, mu, p)
}

pub fn qber(eta: f64, mu: f64, p: &DecoyParams) -> f64 {
    let d = detection(eta, mu, p);
    (0.5 * p.y0 + p.e_det * d) / (p.y0 + d)
}

/// Lower bound on the single-photon gain of the signal before clamping.
pub fn one_photon_gain_raw(eta: f64, p: &DecoyParams) -> Result<f64, QkdError> {
    p.validate()?;
    let (s, d) = (p.mu_s, p.mu_d);
    let qs = gain(eta, s, p);
    let qd = gain(eta, d, p);
    let r = d * d / (s * s);
    let bracket = qd * d.exp() - qs * s.exp() * r - (1.0 - r) * p.y0;
    Ok(s * s * (-s).exp() / (s * d - d * d) * bracket)
}

/// The bound clamped to `[0, Q_μs]`.
pub fn one_photon_gain_lower(eta: f64, p: &DecoyParams) -> Result<f64, QkdError> {
    Ok(one_photon_gain_raw(eta, p)?.clamp(0.0, gain(eta, p.mu_s, p)))
}

/// `½ [Q1 (1 - h(E)) - Q f h(E)]` with the phase error taken equal to the QBER.
pub fn key_rate_raw(eta: f64, p: &DecoyParams) -> Result<f64, QkdError> {
    let q1 = one_photon_gain_lower(eta, p)?;
    let q = gain(eta, p.mu_s, p);
    let h = binary_entropy(qber(eta, p.mu_s, p));
    Ok(0.5 * (q1 * (1.0 - h) - q * p.f * h))
}

pub fn key_rate_integrand(eta: f64, p: &DecoyParams) -> Result<f64, QkdError> {
    Ok(key_rate_raw(eta, p)?.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub rate: f64,
    pub std_error: f64,
    pub draws: usize,
    /// Draws whose single-photon bound was clamped.
    pub q1_clamped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RateOptions {
    /// Average the raw integrand, negative values included.
    pub unclamped: bool,
}

fn integrand(eta: f64, p: &DecoyParams, o: RateOptions) -> Result<(f64, bool), QkdError> {
    let raw = one_photon_gain_raw(eta, p)?;
    let clamped = raw < 0.0 || raw > gain(eta, p.mu_s, p);
    let r = key_rate_raw(eta, p)?;
    Ok((if o.unclamped { r } else { r.max(0.0) }, clamped))
}

/// Average over transmittance draws.
pub fn averaged_key_rate(etas: &[f64], p: &DecoyParams, o: RateOptions) -> Result<KeyRateResult, QkdError> {
    p.validate()?;
    if etas.is_empty() {
        return Err(QkdError::InvalidParams {
            field: "draws",
            value: 0.0,
        });
    }
    let vals = etas
        .iter()
        .map(|&e| integrand(e, p, o))
        .collect::<Result<Vec<_>, _>>()?;
    let q1_clamped = vals.iter().filter(|v| v.1).count();
    let (rate, std_error) = crate::pdt::mean_over(vals.len(), |i| vals[i].0);
    Ok(KeyRateResult {
        rate,
        std_error,
        draws: etas.len(),
        q1_clamped,
    })
}

/// Average over `draws` samples of a PDT.
pub fn averaged_key_rate_pdt(
    c: &CompositePdt,
    p: &DecoyParams,
    draws: usize,
    seed: u64,
    o: RateOptions,
) -> Result<KeyRateResult, QkdError> {
    averaged_key_rate(&c.sample(draws, seed)?, p, o)
}

/// `Σ w_i R(η_i)` for a discrete PDT with weights summing to one.
pub fn averaged_key_rate_discrete(points: &[(f64, f64)], p: &DecoyParams, o: RateOptions) -> Result<f64, QkdError> {
    p.validate()?;
    let mut total = 0.0;
    for &(eta, w) in points {
        total += w * integrand(eta, p, o)?.0;
    }
    Ok(total)
}

/// Mixture average with each conditional law integrated by quadrature; the
/// error is the spread over the displacement radii.
pub fn averaged_key_rate_quadrature(c: &CompositePdt, p: &DecoyParams) -> Result<KeyRateResult, QkdError> {
    p.validate()?;
    let e = c.expectation(|eta| key_rate_integrand(eta, p).unwrap_or(0.0))?;
    Ok(KeyRateResult {
        rate: e.mean,
        std_error: e.std_error,
        draws: c.sample_count,
        q1_clamped: 0,
    })
}

/// `1 - R(Δ = σ_bw) / R(Δ = 0)`: the share of the perfectly tracked rate that
/// is lost without tracking.
pub fn relative_improvement(rate_tracked: f64, rate_untracked: f64) -> Result<f64, QkdError> {
    if !(rate_tracked > 0.0) {
        return Err(QkdError::DivisionByZeroRate { rate: rate_tracked });
    }
    Ok(1.0 - rate_untracked / rate_tracked)
}

/// `-10 log10(η_d ⟨η⟩)`.
pub fn mean_loss_db(eta_d: f64, mean_eta: f64) -> f64 {
    -10.0 * (eta_d * mean_eta).log10()
}
