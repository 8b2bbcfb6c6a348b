//! Frequency-domain heave response, absorbed power, and lifetime power.
//!
//! Per frequency the farm obeys `Z ξ = Fe` with
//! `Z = -ω²(M + A) + G + K_pto + iω(B + B_pto)`, `M = ρπR²D`, `G = ρgπR²`.
//! Mechanical power for a unit-amplitude wave is `p_m = ½ω² Σ b_i |ξ_i|²`;
//! sea-state power integrates it against the JONSWAP spectrum.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::climate::{ClimateModel, SpectrumParams};
use crate::error::{invalid, Error, Result};
use crate::hydro::{FrequencyGrid, WecGeometry};
use crate::mbe::{compose_farm, FarmLayout, HydroSource, HydroTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Farm,
    Device,
}

/// Linear PTO stiffness and damping. Farm-level control holds a single value
/// broadcast to every device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub mode: ControlMode,
    pub k_pto: Vec<f64>,
    pub b_pto: Vec<f64>,
}

impl ControlParams {
    pub const K_PTO: (f64, f64) = (-5.0e5, 5.0e5);
    pub const B_PTO: (f64, f64) = (0.0, 5.0e5);

    pub fn farm(k_pto: f64, b_pto: f64) -> Self {
        Self {
            mode: ControlMode::Farm,
            k_pto: vec![k_pto],
            b_pto: vec![b_pto],
        }
    }

    pub fn device(k_pto: Vec<f64>, b_pto: Vec<f64>) -> Self {
        Self {
            mode: ControlMode::Device,
            k_pto,
            b_pto,
        }
    }

    pub fn k(&self, i: usize) -> f64 {
        match self.mode {
            ControlMode::Farm => self.k_pto[0],
            ControlMode::Device => self.k_pto[i],
        }
    }

    pub fn b(&self, i: usize) -> f64 {
        match self.mode {
            ControlMode::Farm => self.b_pto[0],
            ControlMode::Device => self.b_pto[i],
        }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        let want = match self.mode {
            ControlMode::Farm => 1,
            ControlMode::Device => n,
        };
        if self.k_pto.len() != want || self.b_pto.len() != want {
            return Err(invalid(format!(
                "{:?} control needs {want} stiffness and damping values",
                self.mode
            )));
        }
        let (klo, khi) = Self::K_PTO;
        let (blo, bhi) = Self::B_PTO;
        if self.k_pto.iter().any(|k| !(*k >= klo && *k <= khi)) {
            return Err(invalid(format!("PTO stiffness outside [{klo}, {khi}]")));
        }
        if self.b_pto.iter().any(|b| !(*b >= blo && *b <= bhi)) {
            return Err(invalid(format!("PTO damping outside [{blo}, {bhi}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerConfig {
    pub eta_pcc: f64,
    pub eta_oa: f64,
    pub eta_t: f64,
    /// Farm-level saturation of each sea-state entry, watts.
    pub p_lim: Option<f64>,
    /// Multiplier on `S(ω)Δω` turning unit-amplitude power into spectral
    /// power. 2 corresponds to the energy-equivalent amplitude `sqrt(2SΔω)`.
    pub amplitude_weighting: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            eta_pcc: 0.8,
            eta_oa: 0.95,
            eta_t: 0.98,
            p_lim: None,
            amplitude_weighting: 2.0,
        }
    }
}

impl PowerConfig {
    pub fn check(&self) -> Result<()> {
        for (name, v) in [("eta_pcc", self.eta_pcc), ("eta_oa", self.eta_oa), ("eta_t", self.eta_t)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if let Some(p) = self.p_lim {
            if !(p > 0.0) {
                return Err(invalid(format!("p_lim must be positive, got {p}")));
            }
        }
        if !(self.amplitude_weighting > 0.0) {
            return Err(invalid("amplitude weighting must be positive"));
        }
        Ok(())
    }

    pub fn efficiency(&self) -> f64 {
        self.eta_pcc * self.eta_oa * self.eta_t
    }
}

/// Mass `ρπR²D` and hydrostatic stiffness `ρgπR²` of one device.
pub fn mass_and_stiffness(geom: &WecGeometry, grid: &FrequencyGrid) -> (f64, f64) {
    let area = std::f64::consts::PI * geom.radius * geom.radius;
    (grid.density * area * geom.draft, grid.density * grid.gravity * area)
}

/// Impedance `Z(ω)` for the added mass and damping at one frequency.
pub fn assemble_system(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    geom: &WecGeometry,
    control: &ControlParams,
    omega: f64,
    grid: &FrequencyGrid,
) -> DMatrix<Complex64> {
    let n = a.nrows();
    let (m, g) = mass_and_stiffness(geom, grid);
    let w2 = omega * omega;
    DMatrix::from_fn(n, n, |p, q| {
        let mut re = -w2 * a[(p, q)];
        let mut im = omega * b[(p, q)];
        if p == q {
            re += -w2 * m + g + control.k(p);
            im += omega * control.b(p);
        }
        Complex64::new(re, im)
    })
}

/// Transfer matrix `H = Z⁻¹`. Only meant for diagnostics; responses are
/// computed with [`response`], which solves instead of inverting.
pub fn transfer_matrix(z: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    z.clone().try_inverse()
}

/// Heave response `ξ = Z⁻¹ Fe`, or `None` when `Z` is singular.
pub fn response(z: DMatrix<Complex64>, fe: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let x = z.lu().solve(fe)?;
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(x)
}

/// Unit-amplitude absorbed power per grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerResponse {
    pub omega: Vec<f64>,
    pub p_m: Vec<f64>,
    /// Frequencies dropped because the system was singular.
    pub skipped: Vec<usize>,
}

pub fn power_response(
    table: &HydroTable,
    geom: &WecGeometry,
    control: &ControlParams,
    grid: &FrequencyGrid,
) -> Result<PowerResponse> {
    let n = table.n_bodies();
    control.check(n)?;
    let mut p_m = Vec::with_capacity(table.len());
    let mut skipped = Vec::new();
    for i in 0..table.len() {
        let w = table.omega[i];
        let z = assemble_system(&table.added_mass[i], &table.damping[i], geom, control, w, grid);
        match response(z, &table.excitation[i]) {
            Some(xi) => {
                let p: f64 = (0..n).map(|d| control.b(d) * xi[d].norm_sqr()).sum();
                p_m.push(0.5 * w * w * p);
            }
            None => {
                log::warn!("singular farm system at omega = {w}; frequency skipped");
                skipped.push(i);
                p_m.push(0.0);
            }
        }
    }
    Ok(PowerResponse {
        omega: table.omega.clone(),
        p_m,
        skipped,
    })
}

/// Spectral weights `c·Δω_k·S(hs, tp, ω_k)` for one sea state.
pub fn spectral_weights(hs: f64, tp: f64, grid: &FrequencyGrid, config: &PowerConfig) -> Result<Vec<f64>> {
    let s = SpectrumParams::new(hs, tp)?;
    Ok(grid
        .values
        .iter()
        .zip(grid.spacing())
        .map(|(&w, dw)| config.amplitude_weighting * dw * s.density(w))
        .collect())
}

/// Sea-state power before and after saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeaStatePower {
    pub raw: f64,
    pub p_i: f64,
    pub saturated: bool,
}

fn saturate(raw: f64, config: &PowerConfig) -> SeaStatePower {
    match config.p_lim {
        Some(lim) if raw > lim => SeaStatePower {
            raw,
            p_i: lim,
            saturated: true,
        },
        _ => SeaStatePower {
            raw,
            p_i: raw,
            saturated: false,
        },
    }
}

pub fn sea_state_power(
    resp: &PowerResponse,
    hs: f64,
    tp: f64,
    grid: &FrequencyGrid,
    config: &PowerConfig,
) -> Result<SeaStatePower> {
    let w = spectral_weights(hs, tp, grid, config)?;
    let raw = w.iter().zip(&resp.p_m).map(|(a, b)| a * b).sum();
    Ok(saturate(raw, config))
}

/// Spectral weights for every climate node carrying probability, with the
/// year-summed masses.
#[derive(Debug, Clone)]
pub struct ClimateWeights {
    pub nodes: Vec<(f64, f64)>,
    pub mass: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl ClimateWeights {
    pub fn new(climate: &ClimateModel, grid: &FrequencyGrid, config: &PowerConfig) -> Result<Self> {
        let all = climate.nodes();
        let mass = climate.total_mass_per_node();
        let mut out = Self {
            nodes: Vec::new(),
            mass: Vec::new(),
            weights: Vec::new(),
        };
        for (node, m) in all.into_iter().zip(mass) {
            if m > 0.0 {
                out.weights.push(spectral_weights(node.0, node.1, grid, config)?);
                out.nodes.push(node);
                out.mass.push(m);
            }
        }
        Ok(out)
    }
}

/// `p_a = η Σ_y Σ_nodes p_i(node) prob_y(node)`.
pub fn lifetime_power(resp: &PowerResponse, weights: &ClimateWeights, config: &PowerConfig) -> f64 {
    let total: f64 = weights
        .weights
        .iter()
        .zip(&weights.mass)
        .map(|(w, m)| {
            let raw: f64 = w.iter().zip(&resp.p_m).map(|(a, b)| a * b).sum();
            saturate(raw, config).p_i * m
        })
        .sum();
    config.efficiency() * total
}

/// Power per unit displaced volume.
pub fn objective_pv(p_a: f64, geom: &WecGeometry) -> f64 {
    p_a / geom.volume()
}

pub fn q_factor(farm_p_a: f64, isolated_p_a: f64, n: usize) -> Result<f64> {
    if isolated_p_a == 0.0 || n == 0 {
        return Err(Error::Numerical("q factor needs nonzero isolated power and N >= 1".into()));
    }
    Ok(farm_p_a / (n as f64 * isolated_p_a))
}

/// Power of a complete design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPower {
    pub p_a: f64,
    pub p_v: f64,
}

pub fn evaluate_design(
    source: &dyn HydroSource,
    geom: &WecGeometry,
    control: &ControlParams,
    layout: &FarmLayout,
    weights: &ClimateWeights,
    config: &PowerConfig,
) -> Result<DesignPower> {
    let table = compose_farm(geom, layout, source)?;
    let resp = power_response(&table, geom, control, source.grid())?;
    let p_a = lifetime_power(&resp, weights, config);
    Ok(DesignPower {
        p_a,
        p_v: objective_pv(p_a, geom),
    })
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 || x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|v| *v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Fixed point of `ω = sqrt((k_pto + G)/(M + A_ii(ω)))`, with `A_ii`
/// interpolated linearly on the table's grid. `None` when the numerator is
/// not positive or the iteration fails.
pub fn natural_frequency(
    geom: &WecGeometry,
    control: &ControlParams,
    device: usize,
    table: &HydroTable,
    grid: &FrequencyGrid,
) -> Option<f64> {
    let (m, g) = mass_and_stiffness(geom, grid);
    let num = control.k(device) + g;
    if !(num > 0.0) {
        return None;
    }
    let a: Vec<f64> = table.added_mass.iter().map(|am| am[(device, device)]).collect();
    let f = |w: f64| {
        let denom = m + interpolate(&table.omega, &a, w);
        (denom > 0.0).then(|| (num / denom).sqrt())
    };
    let mut w = (num / m).sqrt();
    let mut relax = 1.0;
    let mut prev_step = f64::INFINITY;
    for _ in 0..1000 {
        let next = f(w)?;
        let step = next - w;
        if step.abs() <= 1e-8 * w.max(1.0) {
            return Some(next);
        }
        if step.abs() >= prev_step {
            relax *= 0.5;
        }
        prev_step = step.abs();
        w += relax * step;
    }
    None
}

/// Writes `hs,tp,year,p_i_watts,saturated` for every year and node.
pub fn write_power_matrix(
    path: impl AsRef<Path>,
    resp: &PowerResponse,
    climate: &ClimateModel,
    grid: &FrequencyGrid,
    config: &PowerConfig,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["hs", "tp", "year", "p_i_watts", "saturated"])?;
    let nodes = climate.nodes();
    let powers: Vec<SeaStatePower> = nodes
        .iter()
        .map(|&(hs, tp)| sea_state_power(resp, hs, tp, grid, config))
        .collect::<Result<_>>()?;
    for year in &climate.years {
        for ((hs, tp), p) in nodes.iter().zip(&powers) {
            w.write_record([
                hs.to_string(),
                tp.to_string(),
                year.to_string(),
                p.p_i.to_string(),
                p.saturated.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
