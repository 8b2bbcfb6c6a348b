//! Eigenfunction-matching solution for a heaving truncated vertical
//! cylinder in water of finite depth.
//!
//! The fluid is split at r = a into an exterior region (full depth) and an
//! interior region below the body (gap g = h - d). Internally the solver works
//! with time dependence e^{-iωt}; [`solve`] converts the excitation force to
//! the e^{+iωt} convention used by the rest of the crate.
//!
//! Exterior modes are `cosh k(z+h)/cosh kh` with `H0(kr)` and
//! `cos k_n(z+h)` with `K0(k_n r)`; interior modes are `cos λ_j(z+h)` with
//! `I0(λ_j r)`, `λ_j = jπ/g`. Potential continuity on the gap and the
//! radial-velocity condition on the full depth are projected onto the
//! interior and exterior bases, and the interior coefficients are eliminated
//! through a Schur complement.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use puruspe::{In, Jn, Kn, Yn};

use crate::error::{Error, Result};

/// Radiation and diffraction results at one frequency, dimensional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeaveCoefficients {
    pub added_mass: f64,
    pub damping: f64,
    /// Heave excitation per unit wave amplitude, e^{+iωt} convention.
    pub excitation: Complex64,
    /// Axisymmetric scattered-wave coefficient: the diffracted potential far
    /// from the body behaves as `alpha0 * H0(kr)` relative to a unit incident
    /// `J0(kr)` component.
    pub alpha0: Complex64,
}

/// Roots `k_n`, n = 1..count, of `ω² = -g k tan(kh)`, one in each interval
/// `((n - 1/2)π/h, nπ/h)`.
pub fn evanescent_roots(omega: f64, h: f64, g: f64, count: usize) -> Vec<f64> {
    let nu = omega * omega / g;
    let pi = std::f64::consts::PI;
    (1..=count)
        .map(|n| {
            // Solve f(x) = x tan(x) + nu h = 0 for x = k h.
            let f = |x: f64| x * x.tan() + nu * h;
            let mut lo = (n as f64 - 0.5) * pi + 1e-14;
            let mut hi = n as f64 * pi;
            let mut x = hi - nu * h / (n as f64 * pi);
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
            for _ in 0..100 {
                let fx = f(x);
                if fx < 0.0 {
                    lo = x;
                } else {
                    hi = x;
                }
                let c = x.cos();
                let d = x.tan() + x / (c * c);
                let step = x - fx / d;
                let next = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
                if (next - x).abs() <= 1e-15 * x {
                    x = next;
                    break;
                }
                x = next;
            }
            x / h
        })
        .collect()
}

fn hankel0(x: f64) -> Complex64 {
    Complex64::new(Jn(0, x), Yn(0, x))
}

fn hankel1(x: f64) -> Complex64 {
    Complex64::new(Jn(1, x), Yn(1, x))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Solves the heave radiation and diffraction problems at one frequency.
///
/// `k` is the propagating wavenumber and `roots` the first evanescent
/// wavenumbers; their count plus one sets the exterior truncation, and the
/// interior uses `max(2, round(M (h - d)/h))` modes.
#[allow(clippy::too_many_arguments)]
pub fn solve_with_roots(
    radius: f64,
    draft: f64,
    omega: f64,
    k: f64,
    roots: &[f64],
    h: f64,
    g: f64,
    rho: f64,
) -> Result<HeaveCoefficients> {
    let a = radius;
    let gap = h - draft;
    if !(gap > 0.0) {
        return Err(Error::GeometryBounds(format!(
            "draft {draft} m must be smaller than the depth {h} m"
        )));
    }
    let m_ext = roots.len() + 1;
    let n_int = ((m_ext as f64 * gap / h).round() as usize).max(2);
    let pi = std::f64::consts::PI;

    let lambda: Vec<f64> = (0..n_int).map(|j| j as f64 * pi / gap).collect();
    let sign = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
    let norm_int: Vec<f64> = (0..n_int).map(|j| if j == 0 { gap } else { gap / 2.0 }).collect();
    // τ_j = λ_j I1(λ_j a)/I0(λ_j a)
    let tau: Vec<f64> = (0..n_int)
        .map(|j| {
            if j == 0 {
                0.0
            } else {
                let x = lambda[j] * a;
                lambda[j] * In(1, x) / In(0, x)
            }
        })
        .collect();

    let kh = k * h;
    let ch = kh.cosh();
    // L[m][j] = ∫_0^g Z_m(u) cos(λ_j u) du, with u = z + h.
    let mut l = vec![vec![0.0; n_int]; m_ext];
    for j in 0..n_int {
        l[0][j] = k * (k * gap).sinh() * sign(j) / ((k * k + lambda[j] * lambda[j]) * ch);
        for (m, &km) in roots.iter().enumerate() {
            let lj = lambda[j];
            l[m + 1][j] = km * gap * sinc((km - lj) * gap) / (km + lj);
        }
    }
    let q0 = h / (2.0 * ch * ch) + kh.tanh() / (2.0 * k);
    let q: Vec<f64> = std::iter::once(q0)
        .chain(roots.iter().map(|&km| h / 2.0 + (2.0 * km * h).sin() / (4.0 * km)))
        .collect();
    let h0 = hankel0(k * a);
    let mut rho_ext = vec![-k * hankel1(k * a) / h0];
    for &km in roots {
        let x = km * a;
        rho_ext.push(Complex64::new(-km * Kn(1, x) / Kn(0, x), 0.0));
    }

    // Schur complement S = diag(ρ_m Q_m) - Σ_j τ_j L_mj L_m'j / N_j.
    let mut s = DMatrix::<Complex64>::zeros(m_ext, m_ext);
    for m in 0..m_ext {
        for mp in 0..m_ext {
            let mut acc = 0.0;
            for j in 1..n_int {
                acc += tau[j] * l[m][j] * l[mp][j] / norm_int[j];
            }
            s[(m, mp)] = Complex64::new(-acc, 0.0);
        }
        s[(m, m)] += rho_ext[m] * q[m];
    }
    let lu = s.lu();

    let p: Vec<f64> = (0..n_int)
        .map(|j| {
            if j == 0 {
                gap * gap / 6.0 - a * a / 4.0
            } else {
                sign(j) / (lambda[j] * lambda[j])
            }
        })
        .collect();
    let j0 = Jn(0, k * a);
    let j1 = Jn(1, k * a);

    // Column 0: radiation (unit heave velocity). Column 1: diffraction of the
    // axisymmetric part of a unit incident wave.
    let mut solutions = Vec::with_capacity(2);
    for (rad, inc) in [(1.0, 0.0), (0.0, 1.0)] {
        let r1: Vec<f64> = (0..n_int).map(|i| p[i] * rad - inc * j0 * l[0][i]).collect();
        let mut rhs = DVector::<Complex64>::zeros(m_ext);
        for m in 0..m_ext {
            let mut v = -(a / (2.0 * gap)) * l[m][0] * rad;
            if m == 0 {
                v += inc * k * j1 * q0;
            }
            for j in 1..n_int {
                v -= tau[j] * l[m][j] * r1[j] / norm_int[j];
            }
            rhs[m] = Complex64::new(v, 0.0);
        }
        let coef = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical(format!("singular matching system at omega={omega}")))?;
        let b: Vec<Complex64> = (0..n_int)
            .map(|i| {
                let sum: Complex64 = (0..m_ext).map(|m| coef[m] * l[m][i]).sum();
                (sum - r1[i]) / norm_int[i]
            })
            .collect();
        // ∫ φ dA over the body bottom.
        let mut integral = b[0] * (a * a / 2.0);
        for j in 1..n_int {
            let x = lambda[j] * a;
            integral += b[j] * (sign(j) * a * In(1, x) / (lambda[j] * In(0, x)));
        }
        integral += rad * (gap * gap * a * a / 2.0 - a.powi(4) / 8.0) / (2.0 * gap);
        integral *= 2.0 * pi;
        if !(integral.re.is_finite() && integral.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite solution at omega={omega}")));
        }
        solutions.push((coef[0], integral));
    }
    let (_, rad_int) = solutions[0];
    let (diff_a0, diff_int) = solutions[1];
    Ok(HeaveCoefficients {
        added_mass: rho * rad_int.re,
        damping: omega * rho * rad_int.im,
        excitation: (rho * g * diff_int).conj(),
        alpha0: diff_a0 / h0,
    })
}

/// Convenience wrapper that computes the wavenumbers itself.
pub fn solve(
    radius: f64,
    draft: f64,
    omega: f64,
    h: f64,
    g: f64,
    rho: f64,
    modes: usize,
) -> Result<HeaveCoefficients> {
    if modes < 2 {
        return Err(Error::InvalidArgument("at least two vertical modes are required".into()));
    }
    let k = crate::climate::dispersion(omega, h, g)?;
    let roots = evanescent_roots(omega, h, g, modes - 1);
    solve_with_roots(radius, draft, omega, k, &roots, h, g, rho)
}
