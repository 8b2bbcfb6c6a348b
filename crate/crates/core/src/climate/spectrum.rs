use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// JONSWAP parameters for one sea state.
///
/// `alpha_s` holds the frequency-independent part of the scale,
/// `beta_s / 4 * Hs^2 * C(gamma)`; the peak enhancement `gamma^r(omega)` is
/// applied in [`SpectrumParams::density`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub gamma: f64,
    pub alpha_s: f64,
    pub beta_s: f64,
    pub omega_p: f64,
}

/// Peak enhancement factor as a function of the steepness ratio `Tp / sqrt(Hs)`.
pub fn peak_enhancement(hs: f64, tp: f64) -> f64 {
    let ratio = tp / hs.sqrt();
    if ratio <= 3.6 {
        5.0
    } else if ratio <= 5.0 {
        (5.75 - 1.15 * ratio).exp()
    } else {
        1.0
    }
}

/// Normalising factor C(gamma).
pub fn normalising_factor(gamma: f64) -> f64 {
    1.0 - 0.287 * gamma.ln()
}

impl SpectrumParams {
    pub fn new(hs: f64, tp: f64) -> Result<Self> {
        if !(hs > 0.0 && hs.is_finite()) || !(tp > 0.0 && tp.is_finite()) {
            return Err(invalid(format!("sea state must be positive, got hs={hs}, tp={tp}")));
        }
        let omega_p = 2.0 * std::f64::consts::PI / tp;
        let gamma = peak_enhancement(hs, tp);
        let beta_s = 1.25 * omega_p.powi(4);
        let alpha_s = beta_s / 4.0 * hs * hs * normalising_factor(gamma);
        Ok(Self {
            gamma,
            alpha_s,
            beta_s,
            omega_p,
        })
    }

    /// Spectral density in m^2 s / rad. Zero for non-positive frequencies.
    pub fn density(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        let sigma = if omega <= self.omega_p { 0.07 } else { 0.09 };
        let dev = omega / self.omega_p - 1.0;
        let r = (-dev * dev / (2.0 * sigma * sigma)).exp();
        self.alpha_s * self.gamma.powf(r) * omega.powi(-5) * (-self.beta_s * omega.powi(-4)).exp()
    }
}

/// JONSWAP spectral density S(Hs, Tp, omega).
pub fn jonswap(hs: f64, tp: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(invalid(format!("frequency must be positive, got {omega}")));
    }
    Ok(SpectrumParams::new(hs, tp)?.density(omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn steep_sea_uses_gamma_five() {
        let p = SpectrumParams::new(4.0, 7.0).unwrap();
        assert_eq!(p.gamma, 5.0);
    }

    #[test]
    fn swell_uses_gamma_one() {
        let p = SpectrumParams::new(2.0, 8.0).unwrap();
        assert_eq!(p.gamma, 1.0);
        assert_eq!(normalising_factor(p.gamma), 1.0);
    }

    #[test]
    fn thresholds_follow_the_branches() {
        // Tp/sqrt(Hs) == 3.6 and == 5 exactly.
        assert_eq!(peak_enhancement(1.0, 3.6), 5.0);
        assert_eq!(peak_enhancement(1.0, 5.0), 1.0);
        assert_relative_eq!(peak_enhancement(1.0, 4.3), (5.75f64 - 1.15 * 4.3).exp());
    }

    #[test]
    fn peak_value_matches_closed_form() {
        // gamma = 1, C = 1, r = 1 at the peak:
        // S(wp) = (5/16) wp^4 Hs^2 wp^-5 exp(-5/4)
        let (hs, tp) = (2.0, 8.0);
        let wp = 2.0 * PI / tp;
        let expected = 1.25 * wp.powi(4) / 4.0 * hs * hs * wp.powi(-5) * (-1.25f64).exp();
        assert_relative_eq!(jonswap(hs, tp, wp).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, 0.455_986_546_398_385_9, max_relative = 1e-12);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        assert!(jonswap(0.0, 8.0, 1.0).is_err());
        assert!(jonswap(1.0, -8.0, 1.0).is_err());
        assert!(jonswap(1.0, 8.0, 0.0).is_err());
    }

    #[test]
    fn continuous_across_the_peak() {
        let p = SpectrumParams::new(4.0, 7.0).unwrap();
        let left = p.density(p.omega_p * (1.0 - 1e-9));
        let right = p.density(p.omega_p * (1.0 + 1e-9));
        assert_relative_eq!(left, right, max_relative = 1e-6);
    }
}
