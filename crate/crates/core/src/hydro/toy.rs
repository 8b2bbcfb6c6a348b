//! Closed-form test fixture. The constants carry no physical meaning; they
//! only give smooth, cheap, nontrivial coefficients with the right signs.

use num_complex::Complex64;

/// Dimensionless frequency `s = ω sqrt(R/g)`.
pub fn frequency_scale(omega: f64, radius: f64, g: f64) -> f64 {
    omega * (radius / g).sqrt()
}

pub fn added_mass(s: f64, slenderness: f64) -> f64 {
    (0.4 + 0.3 / (1.0 + s * s)) * (1.0 + 0.2 / slenderness)
}

pub fn damping(s: f64, slenderness: f64) -> f64 {
    0.8 * s * (-s * s).exp() * (1.0 + 0.2 / slenderness)
}

pub fn excitation(s: f64, draft: f64) -> Complex64 {
    let e = (-s * s).exp();
    Complex64::new(e / draft, -0.5 * s * e / draft)
}

pub fn scattering_strength(s: f64) -> f64 {
    0.3 * s * (-s).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_values() {
        assert_eq!(added_mass(0.0, 1.0), 0.7 * 1.2);
        assert_eq!(damping(0.0, 1.0), 0.0);
        assert_eq!(excitation(0.0, 2.0), Complex64::new(0.5, 0.0));
        assert_eq!(scattering_strength(0.0), 0.0);
        assert!(damping(1.3, 0.4) > 0.0);
    }
}
