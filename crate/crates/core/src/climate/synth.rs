use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{SeaSample, SeaStateBox};
use crate::error::{invalid, Result};
use crate::rng;

/// Correlated bivariate-lognormal (Hs, Tp) site used in place of buoy data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSite {
    pub hs_median: f64,
    pub tp_median: f64,
    pub hs_log_sd: f64,
    pub tp_log_sd: f64,
    pub correlation: f64,
    pub first_year: i32,
    pub bounds: SeaStateBox,
}

impl Default for SyntheticSite {
    fn default() -> Self {
        Self {
            hs_median: 1.6,
            tp_median: 8.5,
            hs_log_sd: 0.45,
            tp_log_sd: 0.2,
            correlation: 0.6,
            first_year: 2000,
            bounds: SeaStateBox::default(),
        }
    }
}

/// Draws `n` samples for each of `years` consecutive years, clipped to the
/// site box.
pub fn synth_climate(site: &SyntheticSite, years: usize, n: usize, seed: u64) -> Result<Vec<SeaSample>> {
    if years == 0 || n < 10 {
        return Err(invalid("synthetic climate needs years >= 1 and n >= 10"));
    }
    if !(site.hs_median > 0.0 && site.tp_median > 0.0) {
        return Err(invalid("medians must be positive"));
    }
    if !(site.hs_log_sd >= 0.0 && site.tp_log_sd >= 0.0 && site.correlation.abs() <= 1.0) {
        return Err(invalid("log standard deviations must be >= 0 and |correlation| <= 1"));
    }
    site.bounds.validate()?;
    let rho = site.correlation;
    let tail = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(years * n);
    for y in 0..years {
        let mut rng = rng::stream(seed, y as u64);
        let year = site.first_year + y as i32;
        for _ in 0..n {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let hs = site.hs_median * (site.hs_log_sd * z1).exp();
            let tp = site.tp_median * (site.tp_log_sd * (rho * z1 + tail * z2)).exp();
            let (hs, tp) = site.bounds.clamp(hs, tp);
            out.push(SeaSample { year, hs, tp });
        }
    }
    Ok(out)
}
