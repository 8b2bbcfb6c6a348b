//! Wave climate: sea-state samples, per-year joint (Hs, Tp) probability
//! masses on a Gauss-Legendre grid, JONSWAP spectra, and irregular waves.

mod quadrature;
mod spectrum;
mod synth;
mod waves;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use quadrature::gauss_legendre;
pub use spectrum::{jonswap, normalising_factor, peak_enhancement, SpectrumParams};
pub use synth::{synth_climate, SyntheticSite};
pub use waves::{dispersion, synth_elevation, IrregularWave, WaveComponent, DEFAULT_DEPTH, GRAVITY};

use crate::error::{invalid, Error, Result};
use crate::par;

/// One observed sea state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeaSample {
    pub year: i32,
    #[serde(rename = "hs_m")]
    pub hs: f64,
    #[serde(rename = "tp_s")]
    pub tp: f64,
}

impl SeaSample {
    pub fn new(year: i32, hs: f64, tp: f64) -> Result<Self> {
        if !(hs > 0.0 && hs.is_finite() && tp > 0.0 && tp.is_finite()) {
            return Err(invalid(format!("sea state needs hs, tp > 0, got ({hs}, {tp})")));
        }
        Ok(Self { year, hs, tp })
    }
}

/// Integration box for the (Hs, Tp) density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaStateBox {
    pub hs_min: f64,
    pub hs_max: f64,
    pub tp_min: f64,
    pub tp_max: f64,
}

impl Default for SeaStateBox {
    fn default() -> Self {
        Self {
            hs_min: 0.25,
            hs_max: 10.0,
            tp_min: 3.0,
            tp_max: 17.0,
        }
    }
}

impl SeaStateBox {
    fn validate(&self) -> Result<()> {
        let ok = self.hs_min > 0.0
            && self.hs_min < self.hs_max
            && self.tp_min > 0.0
            && self.tp_min < self.tp_max
            && self.hs_max.is_finite()
            && self.tp_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid sea-state box {self:?}")))
        }
    }

    pub fn clamp(&self, hs: f64, tp: f64) -> (f64, f64) {
        (hs.clamp(self.hs_min, self.hs_max), tp.clamp(self.tp_min, self.tp_max))
    }
}

/// Options for [`fit_climate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub n_gq: usize,
    /// Kernel bandwidth per dimension `[hs, tp]`; Silverman's rule when absent.
    pub bandwidth: Option<[f64; 2]>,
    pub bounds: SeaStateBox,
    /// Inclusive year span; every year inside must have samples.
    pub years: Option<(i32, i32)>,
    pub min_samples: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_gq: 40,
            bandwidth: None,
            bounds: SeaStateBox::default(),
            years: None,
            min_samples: 10,
        }
    }
}

/// Per-year joint probability of (Hs, Tp) on a tensor Gauss-Legendre grid.
///
/// `pdf[y][i][j]` and `prob[y][i][j]` index year `years[y]`, Hs node `i`, and
/// Tp node `j`. `raw_mass[y]` is the mass captured by the box before
/// renormalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimateModel {
    pub years: Vec<i32>,
    pub hs_nodes: Vec<f64>,
    pub hs_weights: Vec<f64>,
    pub tp_nodes: Vec<f64>,
    pub tp_weights: Vec<f64>,
    pub pdf: Vec<Vec<Vec<f64>>>,
    pub prob: Vec<Vec<Vec<f64>>>,
    pub raw_mass: Vec<f64>,
}

impl ClimateModel {
    /// A single year concentrated on one sea state.
    pub fn single_state(hs: f64, tp: f64) -> Result<Self> {
        SeaSample::new(0, hs, tp)?;
        Ok(Self {
            years: vec![0],
            hs_nodes: vec![hs],
            hs_weights: vec![1.0],
            tp_nodes: vec![tp],
            tp_weights: vec![1.0],
            pdf: vec![vec![vec![1.0]]],
            prob: vec![vec![vec![1.0]]],
            raw_mass: vec![1.0],
        })
    }

    /// Builds a model from explicit masses on given nodes. Masses are
    /// renormalised per year; unit weights are recorded.
    pub fn from_masses(
        years: Vec<i32>,
        hs_nodes: Vec<f64>,
        tp_nodes: Vec<f64>,
        masses: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if masses.len() != years.len() {
            return Err(invalid("one mass matrix per year is required"));
        }
        for m in &masses {
            if m.len() != hs_nodes.len() || m.iter().any(|row| row.len() != tp_nodes.len()) {
                return Err(invalid("mass matrix shape does not match the nodes"));
            }
            if m.iter().flatten().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(invalid("probability masses must be finite and nonnegative"));
            }
        }
        let model = Self {
            years,
            hs_weights: vec![1.0; hs_nodes.len()],
            tp_weights: vec![1.0; tp_nodes.len()],
            hs_nodes,
            tp_nodes,
            pdf: masses.clone(),
            raw_mass: masses.iter().map(|m| m.iter().flatten().sum()).collect(),
            prob: masses,
        };
        model.renormalized()
    }

    /// Rescales every year's masses to sum to one.
    pub fn renormalized(mut self) -> Result<Self> {
        for (y, m) in self.prob.iter_mut().enumerate() {
            let total: f64 = m.iter().flatten().sum();
            if !(total > 0.0 && total.is_finite()) {
                return Err(Error::Numerical(format!(
                    "year {} has no probability mass inside the box",
                    self.years[y]
                )));
            }
            m.iter_mut().flatten().for_each(|v| *v /= total);
        }
        Ok(self)
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    /// Sea states `(hs, tp)` in row-major node order.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        self.hs_nodes
            .iter()
            .flat_map(|&hs| self.tp_nodes.iter().map(move |&tp| (hs, tp)))
            .collect()
    }

    /// Masses summed over years, in the order of [`Self::nodes`].
    pub fn total_mass_per_node(&self) -> Vec<f64> {
        let n_tp = self.tp_nodes.len();
        let mut out = vec![0.0; self.hs_nodes.len() * n_tp];
        for m in &self.prob {
            for (i, row) in m.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    out[i * n_tp + j] += v;
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Silverman's rule for a product Gaussian kernel in two dimensions.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let (_, sd) = mean_std(xs);
    sd * (xs.len() as f64).powf(-1.0 / 6.0)
}

fn kde_grid(hs: &[f64], tp: &[f64], bw: [f64; 2], hs_nodes: &[f64], tp_nodes: &[f64]) -> Vec<Vec<f64>> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * bw[0] * bw[1] * hs.len() as f64);
    let kernel = |nodes: &[f64], data: &[f64], h: f64| -> Vec<Vec<f64>> {
        nodes
            .iter()
            .map(|&x| data.iter().map(|&d| (-0.5 * ((x - d) / h).powi(2)).exp()).collect())
            .collect()
    };
    let kh = kernel(hs_nodes, hs, bw[0]);
    let kt = kernel(tp_nodes, tp, bw[1]);
    kh.iter()
        .map(|ki| {
            kt.iter()
                .map(|kj| norm * ki.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Fits a Gaussian kernel density per year and tabulates it on the tensor
/// Gauss-Legendre grid of the box.
pub fn fit_climate(samples: &[SeaSample], options: &FitOptions) -> Result<ClimateModel> {
    if options.n_gq < 2 {
        return Err(invalid("n_gq must be at least 2"));
    }
    options.bounds.validate()?;
    if let Some(bw) = options.bandwidth {
        if !bw.iter().all(|b| *b > 0.0 && b.is_finite()) {
            return Err(invalid(format!("bandwidth must be positive, got {bw:?}")));
        }
    }
    for s in samples {
        SeaSample::new(s.year, s.hs, s.tp)?;
    }
    let mut years: Vec<i32> = samples.iter().map(|s| s.year).collect();
    years.sort_unstable();
    years.dedup();
    if let Some((first, last)) = options.years {
        if first > last {
            return Err(invalid("year span is empty"));
        }
        if let Some(y) = years.iter().find(|y| **y < first || **y > last) {
            return Err(invalid(format!("sample year {y} outside {first}..={last}")));
        }
        if let Some(y) = (first..=last).find(|y| years.binary_search(y).is_err()) {
            return Err(Error::EmptyYear(y));
        }
    }
    if years.is_empty() {
        return Err(invalid("no samples"));
    }

    let b = options.bounds;
    let (hs_nodes, hs_weights) = gauss_legendre(options.n_gq, b.hs_min, b.hs_max)?;
    let (tp_nodes, tp_weights) = gauss_legendre(options.n_gq, b.tp_min, b.tp_max)?;

    let mut per_year = Vec::with_capacity(years.len());
    for &year in &years {
        let hs: Vec<f64> = samples.iter().filter(|s| s.year == year).map(|s| s.hs).collect();
        let tp: Vec<f64> = samples.iter().filter(|s| s.year == year).map(|s| s.tp).collect();
        if hs.len() < options.min_samples {
            return Err(Error::TooFewSamples {
                year,
                count: hs.len(),
                min: options.min_samples,
            });
        }
        let bw = match options.bandwidth {
            Some(bw) => bw,
            None => {
                let bh = silverman_bandwidth(&hs);
                let bt = silverman_bandwidth(&tp);
                if bh <= 1e-9 * mean_std(&hs).0 {
                    return Err(Error::DegenerateSamples { year, dimension: "hs" });
                }
                if bt <= 1e-9 * mean_std(&tp).0 {
                    return Err(Error::DegenerateSamples { year, dimension: "tp" });
                }
                [bh, bt]
            }
        };
        per_year.push((hs, tp, bw));
    }

    let pdf = par::map(&per_year, |(hs, tp, bw)| kde_grid(hs, tp, *bw, &hs_nodes, &tp_nodes));
    let prob: Vec<Vec<Vec<f64>>> = pdf
        .iter()
        .map(|m| {
            m.iter()
                .zip(&hs_weights)
                .map(|(row, wh)| row.iter().zip(&tp_weights).map(|(p, wt)| p * wh * wt).collect())
                .collect()
        })
        .collect();
    let raw_mass = prob.iter().map(|m| m.iter().flatten().sum()).collect();
    ClimateModel {
        years,
        hs_nodes,
        hs_weights,
        tp_nodes,
        tp_weights,
        pdf,
        prob,
        raw_mass,
    }
    .renormalized()
}

/// Reads `year,hs_m,tp_s` rows.
pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<SeaSample>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let s: SeaSample = row?;
        out.push(SeaSample::new(s.year, s.hs, s.tp)?);
    }
    Ok(out)
}

pub fn write_samples(path: impl AsRef<Path>, samples: &[SeaSample]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for s in samples {
        writer.serialize(s)?;
    }
    writer.flush()?;
    Ok(())
}
