//! Field-correlation kernels of a focused Gaussian beam in Kolmogorov
//! turbulence and the beam statistics derived from them.

mod gamma;
mod stats;
mod structure;

pub use gamma::{gamma2, gamma2_peak, gamma4, mean_eta, Gamma4};
pub use stats::{
    beam_wander_variance, channel_stats, BeamStats, ChannelStats, StatsDiagnostics, StatsErrors,
    KERNEL_VERSION, VALIDATED_FRESNEL,
};
pub use structure::{phase_structure_function, rytov_parameter, StructureFunction};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::quad::NotConverged;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("invalid channel parameter `{field}` = {value}")]
    InvalidParams { field: &'static str, value: f64 },
    #[error("{quantity} did not converge: estimate {value:e}, error {error:e}")]
    QuadratureNotConverged {
        quantity: &'static str,
        value: f64,
        error: f64,
    },
    #[error("beam statistics violate {what}: {detail}")]
    StatsInvariantViolation { what: &'static str, detail: String },
}

impl KernelError {
    pub(crate) fn quad(quantity: &'static str, e: NotConverged) -> Self {
        KernelError::QuadratureNotConverged {
            quantity,
            value: e.value,
            error: e.error,
        }
    }
}

/// Physical description of one horizontal link. Lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Refractive-index structure constant, m^(-2/3).
    pub cn2: f64,
    pub wavelength: f64,
    pub length: f64,
    /// Beam-spot radius at the transmitter.
    pub w0: f64,
    pub aperture_radius: f64,
    pub extinction_db_per_km: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), KernelError> {
        let checks: [(&'static str, f64, bool); 6] = [
            ("cn2", self.cn2, self.cn2 >= 0.0),
            ("wavelength", self.wavelength, self.wavelength > 0.0),
            ("length", self.length, self.length > 0.0),
            ("w0", self.w0, self.w0 > 0.0),
            ("aperture_radius", self.aperture_radius, self.aperture_radius > 0.0),
            (
                "extinction_db_per_km",
                self.extinction_db_per_km,
                self.extinction_db_per_km >= 0.0,
            ),
        ];
        for (field, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(KernelError::InvalidParams { field, value });
            }
        }
        Ok(())
    }

    pub fn wave_number(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Fresnel parameter `k w0^2 / (2 L)`.
    pub fn fresnel(&self) -> f64 {
        self.wave_number() * self.w0 * self.w0 / (2.0 * self.length)
    }

    /// `k / L`, the receiver-plane spatial frequency per unit source offset.
    pub fn kappa(&self) -> f64 {
        self.wave_number() / self.length
    }

    /// `Cn2 k^2 L`, the prefactor scale of the phase structure function.
    pub fn beta(&self) -> f64 {
        let k = self.wave_number();
        self.cn2 * k * k * self.length
    }

    /// Vacuum beam radius at the receiver, `2L/(k w0)`.
    pub fn vacuum_width(&self) -> f64 {
        2.0 * self.length / (self.wave_number() * self.w0)
    }

    /// Deterministic extinction transmittance.
    pub fn extinction_transmittance(&self) -> f64 {
        10f64.powf(-self.extinction_db_per_km * self.length / 1e4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn moderate_link() -> ChannelParams {
        ChannelParams {
            cn2: 4e-14,
            wavelength: 800e-9,
            length: 1000.0,
            w0: 0.02,
            aperture_radius: 0.04,
            extinction_db_per_km: 1.0,
        }
    }

    #[test]
    fn derived_quantities() {
        let p = moderate_link();
        assert!((p.fresnel() - 1.570796326794897).abs() < 1e-12);
        assert!((p.vacuum_width() - 0.0127323954473516).abs() < 1e-15);
        assert!((p.kappa() * p.w0 * p.w0 - 2.0 * p.fresnel()).abs() < 1e-12);
        assert!((p.extinction_transmittance() - 10f64.powf(-0.1)).abs() < 1e-15);
        let mut q = p;
        q.length = 2000.0;
        assert!((q.fresnel() - 0.5 * p.fresnel()).abs() < 1e-12);
    }

    #[test]
    fn validation_names_the_field() {
        let mut p = moderate_link();
        p.aperture_radius = 0.0;
        assert_eq!(
            p.validate(),
            Err(KernelError::InvalidParams {
                field: "aperture_radius",
                value: 0.0
            })
        );
        p = moderate_link();
        p.cn2 = f64::NAN;
        assert!(p.validate().is_err());
    }
}
