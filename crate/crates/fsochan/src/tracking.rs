//! Beam tracking, postselection, and the squeezing that survives a
//! fluctuating-loss channel.

use serde::{Deserialize, Serialize};

use crate::pdt::{CompositePdt, PdtError};

/// Postselection with acceptance at or below this is treated as empty.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrackingError {
    #[error("tracking variance {sigma_tr2:e} exceeds wandering variance {available:e}")]
    InvalidTracking { sigma_tr2: f64, available: f64 },
    #[error("postselection above {eta_min} accepts only {acceptance:e}")]
    EmptyPostselection { eta_min: f64, acceptance: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Pdt(#[from] PdtError),
}

/// Removed variance `σ_tr²` and the residual `Δ² = σ_bw² + jitter² - σ_tr²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingConfig {
    pub sigma_bw2: f64,
    pub sigma_tr2: f64,
    /// Extra pointing jitter added to the wandering before correction.
    pub jitter2: f64,
    pub delta2: f64,
}

impl TrackingConfig {
    pub fn new(sigma_bw2: f64, sigma_tr2: f64) -> Result<Self, TrackingError> {
        Self::with_jitter(sigma_bw2, sigma_tr2, 0.0)
    }

    pub fn with_jitter(sigma_bw2: f64, sigma_tr2: f64, jitter2: f64) -> Result<Self, TrackingError> {
        if !(sigma_bw2 >= 0.0 && sigma_tr2 >= 0.0 && jitter2 >= 0.0) {
            return Err(TrackingError::InvalidInput(format!(
                "variances must be non-negative: bw {sigma_bw2}, tr {sigma_tr2}, jitter {jitter2}"
            )));
        }
        let available = sigma_bw2 + jitter2;
        if sigma_tr2 > available {
            return Err(TrackingError::InvalidTracking { sigma_tr2, available });
        }
        Ok(TrackingConfig {
            sigma_bw2,
            sigma_tr2,
            jitter2,
            delta2: available - sigma_tr2,
        })
    }

    pub fn untracked(sigma_bw2: f64) -> Self {
        TrackingConfig {
            sigma_bw2,
            sigma_tr2: 0.0,
            jitter2: 0.0,
            delta2: sigma_bw2,
        }
    }

    /// `σ_tr = fraction · σ_bw`; one is perfect tracking.
    pub fn fraction(sigma_bw2: f64, fraction: f64) -> Result<Self, TrackingError> {
        if fraction == 1.0 {
            return Self::new(sigma_bw2, sigma_bw2);
        }
        Self::new(sigma_bw2, fraction * fraction * sigma_bw2)
    }
}

pub fn tracked_pdt(c: &CompositePdt, t: &TrackingConfig) -> Result<CompositePdt, TrackingError> {
    let available = c.sigma_bw2 + t.jitter2;
    if t.sigma_tr2 > available {
        return Err(TrackingError::InvalidTracking {
            sigma_tr2: t.sigma_tr2,
            available,
        });
    }
    Ok(c.with_radius_variance(available - t.sigma_tr2))
}

pub fn tracked_exceedance(eta: f64, c: &CompositePdt, t: &TrackingConfig) -> Result<f64, TrackingError> {
    Ok(tracked_pdt(c, t)?.exceedance(eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Postselected {
    pub mean_eta: f64,
    pub mean_eta2: f64,
    pub acceptance: f64,
}

/// Moments of an already tracked PDT conditioned on `η > eta_min`.
pub fn postselect(c: &CompositePdt, eta_min: f64) -> Result<Postselected, TrackingError> {
    if !(0.0..1.0).contains(&eta_min) {
        return Err(TrackingError::InvalidInput(format!("threshold {eta_min} outside [0, 1)")));
    }
    let acceptance = c.partial_moment(0.0, eta_min).mean;
    if acceptance <= MIN_ACCEPTANCE {
        return Err(TrackingError::EmptyPostselection { eta_min, acceptance });
    }
    Ok(Postselected {
        mean_eta: c.partial_moment(1.0, eta_min).mean / acceptance,
        mean_eta2: c.partial_moment(2.0, eta_min).mean / acceptance,
        acceptance,
    })
}

pub fn postselected_moments(c: &CompositePdt, t: &TrackingConfig, eta_min: f64) -> Result<Postselected, TrackingError> {
    postselect(&tracked_pdt(c, t)?, eta_min)
}

/// Quadrature variance in dB relative to shot noise after loss `1 - eta`.
pub fn squeezing_after_loss_db(v_in_db: f64, eta: f64) -> f64 {
    let v_in = 10f64.powf(v_in_db / 10.0);
    10.0 * (1.0 + eta * (v_in - 1.0)).log10()
}

pub fn transmitted_squeezing_db(
    v_in_db: f64,
    c: &CompositePdt,
    t: &TrackingConfig,
    eta_min: f64,
) -> Result<f64, TrackingError> {
    if !(v_in_db < 0.0) {
        return Err(TrackingError::InvalidInput(format!("input {v_in_db} dB is not squeezed")));
    }
    let ps = postselected_moments(c, t, eta_min)?;
    Ok(squeezing_after_loss_db(v_in_db, ps.mean_eta))
}
