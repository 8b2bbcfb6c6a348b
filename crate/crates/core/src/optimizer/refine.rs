use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ga::FEASIBLE;
use super::{max_violation, values, Objective, SearchOutcome};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineOptions {
    pub max_iter: usize,
    /// Stop before a gradient would push the evaluation count past this.
    pub max_evaluations: usize,
    /// Smallest line-search step, unit-cube units.
    pub step_tol: f64,
    /// Relative objective change treated as convergence.
    pub f_tol: f64,
    /// Central-difference step relative to `max(1, |u|)`.
    pub fd_step: f64,
    pub initial_step: f64,
    /// Constraints with residual above `-active_tol` are treated as active.
    pub active_tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            max_evaluations: 5000,
            step_tol: 1e-8,
            f_tol: 1e-10,
            fd_step: 1e-6,
            initial_step: 0.05,
            active_tol: 1e-3,
        }
    }
}

fn gradient(obj: &dyn Objective, u: &[f64], f0: f64, h_rel: f64) -> (Vec<f64>, usize) {
    let n = u.len();
    let mut pts = Vec::with_capacity(2 * n);
    let mut steps = Vec::with_capacity(n);
    for i in 0..n {
        let h = h_rel * u[i].abs().max(1.0);
        let (mut a, mut b) = (u.to_vec(), u.to_vec());
        let (lo, hi) = if u[i] + h > 1.0 {
            (u[i] - h, u[i])
        } else if u[i] - h < 0.0 {
            (u[i], u[i] + h)
        } else {
            (u[i] - h, u[i] + h)
        };
        a[i] = lo;
        b[i] = hi;
        steps.push((lo, hi));
        pts.push(a);
        pts.push(b);
    }
    // One-sided stencils reuse f0 instead of re-evaluating u.
    let need: Vec<usize> = (0..2 * n).filter(|&k| pts[k][k / 2] != u[k / 2]).collect();
    let eval_pts: Vec<Vec<f64>> = need.iter().map(|&k| pts[k].clone()).collect();
    let vals = values(obj, &eval_pts);
    let mut f = vec![f0; 2 * n];
    for (&k, v) in need.iter().zip(vals) {
        f[k] = v.unwrap_or(f64::NAN);
    }
    let g = (0..n)
        .map(|i| {
            let d = (f[2 * i + 1] - f[2 * i]) / (steps[i].1 - steps[i].0);
            if d.is_finite() {
                d
            } else {
                0.0
            }
        })
        .collect();
    (g, need.len())
}

/// Projects `g` so that it neither leaves the cube at active bounds nor
/// increases active constraints to first order.
fn project(obj: &dyn Objective, u: &[f64], g: &[f64], active_tol: f64) -> Vec<f64> {
    let n = u.len();
    let r0 = obj.residuals(u);
    let active: Vec<usize> = (0..r0.len()).filter(|&j| r0[j] > -active_tol).collect();
    let h = 1e-7;
    let mut jac = DMatrix::zeros(active.len(), n);
    for i in 0..n {
        let mut v = u.to_vec();
        let step = if v[i] + h <= 1.0 { h } else { -h };
        v[i] += step;
        let r = obj.residuals(&v);
        for (row, &j) in active.iter().enumerate() {
            jac[(row, i)] = (r[j] - r0[j]) / step;
        }
    }
    let mut d = g.to_vec();
    let mut blocked = vec![false; n];
    for _ in 0..=n {
        for i in 0..n {
            if (u[i] <= 0.0 && d[i] < 0.0) || (u[i] >= 1.0 && d[i] > 0.0) {
                blocked[i] = true;
            }
            if blocked[i] {
                d[i] = 0.0;
            }
        }
        let dv = DVector::from_column_slice(&d);
        let rows: Vec<usize> = (0..active.len())
            .filter(|&row| (jac.row(row) * &dv)[0] > 1e-12 * dv.norm())
            .collect();
        if rows.is_empty() {
            break;
        }
        let mut a = DMatrix::zeros(rows.len(), n);
        for (k, &row) in rows.iter().enumerate() {
            for i in 0..n {
                a[(k, i)] = if blocked[i] { 0.0 } else { jac[(row, i)] };
            }
        }
        let gram = &a * a.transpose();
        let Some(lambda) = gram.pseudo_inverse(1e-12).ok().map(|p| p * (&a * &dv)) else {
            break;
        };
        let next = dv - a.transpose() * lambda;
        d = next.iter().copied().collect();
    }
    d
}

/// Monotone projected-gradient ascent with central finite differences.
///
/// An infeasible start is repaired once with [`Objective::repair`]; if it
/// stays infeasible the call fails. Only strictly improving, feasible
/// iterates are accepted, so the returned value is never below the start.
pub fn gradient_refine(obj: &dyn Objective, u0: &[f64], opts: &RefineOptions) -> Result<SearchOutcome> {
    let mut u: Vec<f64> = u0.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    if max_violation(&obj.residuals(&u)) > FEASIBLE {
        u = obj.repair(&u, &mut rng::stream(0, 0x7e));
        if max_violation(&obj.residuals(&u)) > FEASIBLE {
            return Err(Error::Infeasible("refinement start is infeasible and could not be repaired".into()));
        }
    }
    let mut f = obj.value(&u)?;
    let mut evaluations = 1;
    let mut history = vec![f];
    let mut accepted = 0;
    let mut step = opts.initial_step;
    let n = u.len();

    for _ in 0..opts.max_iter {
        if evaluations + 2 * n > opts.max_evaluations {
            break;
        }
        let (g, e) = gradient(obj, &u, f, opts.fd_step);
        evaluations += e;
        let d = project(obj, &u, &g, opts.active_tol);
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            break;
        }
        let mut s = step;
        let mut moved = None;
        while s >= opts.step_tol && evaluations < opts.max_evaluations {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| (a + s * b / norm).clamp(0.0, 1.0)).collect();
            if max_violation(&obj.residuals(&trial)) <= FEASIBLE {
                evaluations += 1;
                if let Ok(ft) = obj.value(&trial) {
                    if ft > f {
                        moved = Some((trial, ft, s));
                        break;
                    }
                }
            }
            s *= 0.5;
        }
        let Some((trial, ft, s)) = moved else { break };
        let gain = ft - f;
        let dist = u.iter().zip(&trial).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        u = trial;
        f = ft;
        accepted += 1;
        history.push(f);
        step = (2.0 * s).min(0.25);
        if gain <= opts.f_tol * f.abs().max(1.0) || dist < opts.step_tol {
            break;
        }
    }
    Ok(SearchOutcome {
        u,
        value: f,
        history,
        evaluations,
        stationary: accepted == 0,
    })
}
