use rand::Rng as _;

use super::spectrum::SpectrumParams;
use crate::error::{invalid, Error, Result};
use crate::rng;

pub const DEFAULT_DEPTH: f64 = 50.0;
pub const GRAVITY: f64 = 9.81;

/// Positive root k of omega^2 = g k tanh(k h).
///
/// Safeguarded Newton iteration inside a bracket; the residual is driven
/// below 1e-12 omega^2.
pub fn dispersion(omega: f64, h: f64, g: f64) -> Result<f64> {
    for (name, v) in [("omega", omega), ("depth", h), ("gravity", g)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    let w2 = omega * omega;
    let f = |k: f64| g * k * (k * h).tanh() - w2;
    // Both limits are lower bounds since tanh(x) < min(1, x).
    let mut lo = (w2 / g).max(omega / (g * h).sqrt());
    let mut hi = 2.0 * lo;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    if f(lo) >= 0.0 {
        return Ok(lo);
    }
    let tol = 1e-12 * w2;
    let mut k = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = f(k);
        if r.abs() <= tol {
            return Ok(k);
        }
        if r < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
        let th = (k * h).tanh();
        let dr = g * th + g * k * h * (1.0 - th * th);
        let newton = k - r / dr;
        k = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if f(k).abs() <= 1e-10 * w2 {
        Ok(k)
    } else {
        Err(Error::Numerical(format!(
            "dispersion relation did not converge for omega={omega}, h={h}"
        )))
    }
}

/// One regular component of an irregular sea.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveComponent {
    /// Wave height H_i (twice the amplitude).
    pub height: f64,
    pub omega: f64,
    pub wavenumber: f64,
    pub phase: f64,
}

/// Unidirectional irregular sea built by superposing regular components
/// travelling along +x.
#[derive(Debug, Clone, PartialEq)]
pub struct IrregularWave {
    pub components: Vec<WaveComponent>,
}

impl IrregularWave {
    /// Components drawn from a JONSWAP spectrum.
    ///
    /// The band `[0.2, 5] * omega_p` is split into `n_r` equal bins; bin
    /// midpoints carry height `2 sqrt(2 S(omega) d_omega)` and a uniform random
    /// phase from `seed`.
    pub fn jonswap(hs: f64, tp: f64, n_r: usize, seed: u64, depth: f64, g: f64) -> Result<Self> {
        if n_r == 0 {
            return Err(invalid("at least one wave component is required"));
        }
        let spectrum = SpectrumParams::new(hs, tp)?;
        let lo = 0.2 * spectrum.omega_p;
        let hi = 5.0 * spectrum.omega_p;
        let dw = (hi - lo) / n_r as f64;
        let mut rng = rng::stream(seed, 0);
        let mut components = Vec::with_capacity(n_r);
        for i in 0..n_r {
            let omega = lo + (i as f64 + 0.5) * dw;
            let height = 2.0 * (2.0 * spectrum.density(omega) * dw).sqrt();
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            components.push(WaveComponent {
                height,
                omega,
                wavenumber: dispersion(omega, depth, g)?,
                phase,
            });
        }
        Ok(Self { components })
    }

    pub fn from_components(components: Vec<WaveComponent>) -> Self {
        Self { components }
    }

    /// Free-surface elevation at position `x` and time `t`.
    pub fn elevation(&self, x: f64, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| 0.5 * c.height * (c.wavenumber * x - c.omega * t + c.phase).cos())
            .sum()
    }
}

/// Elevation of a seeded JONSWAP sea in 50 m of water.
pub fn synth_elevation(hs: f64, tp: f64, n_r: usize, seed: u64, x: f64, t: f64) -> Result<f64> {
    Ok(IrregularWave::jonswap(hs, tp, n_r, seed, DEFAULT_DEPTH, GRAVITY)?.elevation(x, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Plain bisection on the dispersion residual, independent of the
    /// Newton path above.
    fn bisect(omega: f64, h: f64, g: f64) -> f64 {
        let (mut lo, mut hi) = (1e-12, 100.0);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if g * mid * (mid * h).tanh() < omega * omega {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn deep_water_limit() {
        let k = dispersion(2.0, 50.0, 9.81).unwrap();
        assert_relative_eq!(k, bisect(2.0, 50.0, 9.81), max_relative = 1e-12);
        assert_relative_eq!(k, 4.0 / 9.81, max_relative = 1e-6);
        assert_relative_eq!(k, 0.407_747_196_738_022_4, max_relative = 1e-9);
    }

    #[test]
    fn shallow_water_limit() {
        let k = dispersion(0.05, 1.0, 9.81).unwrap();
        assert_relative_eq!(k, 0.05 / 9.81f64.sqrt(), max_relative = 1e-3);
        assert_relative_eq!(k, bisect(0.05, 1.0, 9.81), max_relative = 1e-12);
    }

    #[test]
    fn residual_and_monotonicity_over_a_sweep() {
        let mut prev = 0.0;
        for i in 1..400 {
            let w = i as f64 * 0.01;
            let k = dispersion(w, 50.0, 9.81).unwrap();
            let res = (w * w - 9.81 * k * (k * 50.0).tanh()).abs();
            assert!(res <= 1e-10 * w * w, "omega {w}: residual {res}");
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert!(dispersion(0.0, 50.0, 9.81).is_err());
        assert!(dispersion(1.0, -1.0, 9.81).is_err());
        assert!(dispersion(1.0, 50.0, 0.0).is_err());
    }

    #[test]
    fn single_forced_component() {
        let wave = IrregularWave::from_components(vec![WaveComponent {
            height: 2.0,
            omega: 1.0,
            wavenumber: 0.2,
            phase: 0.0,
        }]);
        assert_eq!(wave.elevation(0.0, 0.0), 1.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_elevation(2.0, 8.0, 50, 7, 3.0, 11.0).unwrap();
        let b = synth_elevation(2.0, 8.0, 50, 7, 3.0, 11.0).unwrap();
        let c = synth_elevation(2.0, 8.0, 50, 8, 3.0, 11.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn long_record_mean_and_variance() {
        let (hs, tp) = (2.0, 8.0);
        let wave = IrregularWave::jonswap(hs, tp, 200, 42, 50.0, 9.81).unwrap();
        // 1e4 peak periods sampled every tp/20.
        let n = 200_000usize;
        let dt = tp / 20.0;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for i in 0..n {
            let eta = wave.elevation(0.0, i as f64 * dt);
            sum += eta;
            sum2 += eta * eta;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!(mean.abs() <= 0.01 * hs, "mean {mean}");

        // Trapezoidal quadrature of the spectrum on a fine grid.
        let s = SpectrumParams::new(hs, tp).unwrap();
        let (a, b, m) = (0.01, 20.0, 200_000);
        let h = (b - a) / m as f64;
        let m0: f64 = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                w * s.density(a + i as f64 * h)
            })
            .sum::<f64>()
            * h;
        assert!((var - m0).abs() <= 0.1 * m0, "var {var} vs m0 {m0}");
    }
}
