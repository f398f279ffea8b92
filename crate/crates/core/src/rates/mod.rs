//! Electron-driven transition rates between chain eigenstates and the
//! magnetization lifetimes that follow from them.

pub mod current_fit;
pub mod elements;
pub mod kernel;
pub mod lifetime;
pub mod matrix;
pub mod pockets;
pub mod steady;

use serde::{Deserialize, Serialize};

use crate::constants::{E_CHARGE, K_B};
use crate::error::{Error, Result};

pub use current_fit::{current_decomposition_fit, CurrentFit, CurrentSeries};
pub use elements::{scattering_intensity, transition_elements, SiteElements};
pub use kernel::rate_kernel;
pub use lifetime::{lifetime_curve, lifetime_curve_crystal, lifetime_point, LifetimeModel, LifetimePrediction};
pub use matrix::{build_rate_matrix, RateMatrix};
pub use pockets::{
    classify_pockets, mean_first_passage, pocket_lifetimes, two_level_lifetimes, Pocket,
    PocketAssignment,
};
pub use steady::{generator_residual, steady_state, SteadyState};

/// Tunnel-junction and bath parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportParams {
    pub temperature_k: f64,
    pub bias_mv: f64,
    pub current_pa: f64,
    /// Substrate-substrate conductance (uS).
    pub g_ss_us: f64,
    /// Tip spin polarization in `[-1, 1]`.
    pub eta: f64,
    pub probed_site: usize,
    /// Dimensionless exchange-coupling prefactor `u0^2`.
    pub rate_scale: f64,
    /// Tip conductance (uS); defaults to `I / V`. Required when `V = 0`.
    pub tip_conductance_us: Option<f64>,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            temperature_k: 1.3,
            bias_mv: 3.0,
            current_pa: 10.0,
            g_ss_us: 1.0,
            eta: 0.0,
            probed_site: 0,
            rate_scale: 1.0,
            tip_conductance_us: None,
        }
    }
}

impl TransportParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature_k > 0.0) || !self.temperature_k.is_finite() {
            return Err(Error::invalid("temperature must be positive"));
        }
        if !(self.eta.abs() <= 1.0) {
            return Err(Error::invalid("tip polarization must lie in [-1, 1]"));
        }
        if !(self.g_ss_us >= 0.0) || !self.g_ss_us.is_finite() {
            return Err(Error::invalid("G_ss must be non-negative"));
        }
        if !(self.rate_scale > 0.0) || !self.rate_scale.is_finite() {
            return Err(Error::invalid("rate scale must be positive"));
        }
        if !self.bias_mv.is_finite() || !self.current_pa.is_finite() || self.current_pa < 0.0 {
            return Err(Error::invalid("bias and current must be finite, current >= 0"));
        }
        if let Some(g) = self.tip_conductance_us {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::invalid("tip conductance must be non-negative"));
            }
        } else if self.bias_mv == 0.0 && self.current_pa != 0.0 {
            return Err(Error::invalid(
                "zero bias with nonzero current needs an explicit tip conductance",
            ));
        }
        Ok(())
    }

    /// `k_B T` in meV.
    pub fn kt(&self) -> f64 {
        K_B * self.temperature_k
    }

    /// Tip-sample conductance in siemens.
    pub fn tip_conductance(&self) -> f64 {
        match self.tip_conductance_us {
            Some(g) => g * 1e-6,
            None if self.bias_mv == 0.0 => 0.0,
            None => (self.current_pa * 1e-12 / (self.bias_mv * 1e-3)).abs(),
        }
    }

    /// Substrate conductance in siemens.
    pub fn substrate_conductance(&self) -> f64 {
        self.g_ss_us * 1e-6
    }

    /// Bath electron current `I0 = G_ss k_B T / e` in pA.
    pub fn bath_current_pa(&self) -> f64 {
        self.substrate_conductance() * self.kt() * 1e-3 * 1e12
    }

    /// Converts `G[S] * energy[meV]` into a rate in 1/s.
    pub(crate) fn prefactor(&self, conductance: f64) -> f64 {
        self.rate_scale * conductance * 1e-3 / E_CHARGE
    }
}

/// `T_avg = (1/T_A + 1/T_B)^-1`.
pub fn harmonic_lifetime(t_a: f64, t_b: f64) -> f64 {
    1.0 / (1.0 / t_a + 1.0 / t_b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bath_current_at_one_microsiemens() {
        let tp = TransportParams {
            temperature_k: 3.0,
            ..Default::default()
        };
        // 1 uS * 0.2585 mV
        assert!((tp.bath_current_pa() - 258.52).abs() < 0.01);
    }

    #[test]
    fn tip_conductance_from_setpoint() {
        let tp = TransportParams::default();
        assert!((tp.tip_conductance() - 10e-12 / 3e-3).abs() < 1e-20);
        let zero = TransportParams {
            bias_mv: 0.0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
        let ok = TransportParams {
            tip_conductance_us: Some(0.01),
            ..zero
        };
        assert!(ok.validate().is_ok());
        assert!((ok.tip_conductance() - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn validation() {
        let bad = [
            TransportParams { temperature_k: 0.0, ..Default::default() },
            TransportParams { eta: 1.5, ..Default::default() },
            TransportParams { g_ss_us: -1.0, ..Default::default() },
        ];
        for tp in bad {
            assert!(tp.validate().is_err());
        }
    }

    #[test]
    fn harmonic_mean() {
        assert_eq!(harmonic_lifetime(2.0, 2.0), 1.0);
        assert_eq!(harmonic_lifetime(3.0, f64::INFINITY), 3.0);
    }
}
