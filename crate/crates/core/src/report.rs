//! Run configuration, artifact metadata, and validation studies.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::climate::{synth_climate, SyntheticSite};
use crate::climate::{fit_climate, read_samples, ClimateModel, FitOptions};
use crate::error::{invalid, Error, Result};
use crate::farm::{evaluate_design, ClimateWeights, ControlParams, PowerConfig};
use crate::hydro::{BackendKind, FrequencyGrid, Oracle, WecGeometry};
use crate::mbe::{FarmLayout, HydroSource};
use crate::optimizer::{random_layouts, CaseSettings, GaOptions, ProblemSpec, RefineOptions};
use crate::par;
use crate::rng;
use crate::surrogate::{holdout_error, holdout_set, QbcConfig, Qoi, SurrogateBundle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HydroConfig {
    pub backend: BackendKind,
    /// Evanescent modes of the reference solver.
    pub modes: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub depth: f64,
}

impl Default for HydroConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Reference,
            modes: 40,
            omega_min: 0.3,
            omega_max: 2.0,
            n_omega: 100,
            depth: crate::climate::DEFAULT_DEPTH,
        }
    }
}

impl HydroConfig {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        let g = FrequencyGrid::uniform(self.omega_min, self.omega_max, self.n_omega)?;
        FrequencyGrid::new(g.values, self.depth, g.gravity, g.density)
    }

    pub fn oracle(&self) -> Result<Oracle> {
        Oracle::new(self.backend, self.modes, self.grid()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticClimate {
    pub site: SyntheticSite,
    pub years: usize,
    pub samples_per_year: usize,
}

impl Default for SyntheticClimate {
    fn default() -> Self {
        Self {
            site: SyntheticSite::default(),
            years: 5,
            samples_per_year: 400,
        }
    }
}

/// Where the wave climate comes from: a fitted model (`.json`), raw samples
/// (`.csv`, fitted with `fit`), or a synthetic site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClimateConfig {
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticClimate>,
    pub fit: FitOptions,
}

impl Default for ClimateConfig {
    fn default() -> Self {
        Self {
            path: None,
            synthetic: Some(SyntheticClimate::default()),
            fit: FitOptions::default(),
        }
    }
}

impl ClimateConfig {
    pub fn load(&self, seed: u64) -> Result<ClimateModel> {
        match (&self.path, &self.synthetic) {
            (Some(p), _) => {
                if p.extension().is_some_and(|e| e == "json") {
                    // Accept both a bare model and a command artifact wrapping one.
                    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p)?)?;
                    ClimateModel::from_json(&v.get("result").unwrap_or(&v).to_string())
                } else {
                    fit_climate(&read_samples(p)?, &self.fit)
                }
            }
            (None, Some(s)) => fit_climate(&synth_climate(&s.site, s.years, s.samples_per_year, seed)?, &self.fit),
            (None, None) => Err(Error::Config("climate needs `path` or `synthetic`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    /// Trained bundle used by surrogate-driven commands.
    pub bundle: Option<PathBuf>,
    pub one_body: QbcConfig,
    pub two_body: QbcConfig,
    /// Held-out points per quantity for `validate-sm`.
    pub holdout: usize,
    pub mean_mse_max: f64,
    pub worst_mse_max: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            bundle: None,
            one_body: QbcConfig::one_body(),
            two_body: QbcConfig::two_body(),
            holdout: 500,
            mean_mse_max: 1e-2,
            worst_mse_max: 1e-1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub p_lim_sweep_kw: Vec<f64>,
    pub random_layouts: usize,
    /// Designs compared by the objective validation.
    pub validation_designs: usize,
    /// Farm size of the objective validation designs.
    pub validation_n_wec: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let c = CaseSettings::default();
        Self {
            p_lim_sweep_kw: c.p_lim_sweep_kw,
            random_layouts: c.random_layouts,
            validation_designs: 500,
            validation_n_wec: 5,
        }
    }
}

/// Complete JSON configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub hydro: HydroConfig,
    pub climate: ClimateConfig,
    pub power: PowerConfig,
    pub problem: ProblemSpec,
    pub ga: GaOptions,
    pub refine: RefineOptions,
    pub surrogate: SurrogateConfig,
    pub study: StudyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            hydro: HydroConfig::default(),
            climate: ClimateConfig::default(),
            power: PowerConfig::default(),
            problem: ProblemSpec::default(),
            ga: CaseSettings::default().ga,
            refine: RefineOptions::default(),
            surrogate: SurrogateConfig::default(),
            study: StudyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.check()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        self.power.check()?;
        self.problem.check()?;
        self.surrogate.one_body.check()?;
        self.surrogate.two_body.check()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_string(self)?.as_bytes())))
    }

    pub fn seed(&self) -> u64 {
        self.seeds[0]
    }

    pub fn case_settings(&self, seed: u64) -> CaseSettings {
        CaseSettings {
            ga: GaOptions {
                seed,
                ..self.ga.clone()
            },
            refine: self.refine.clone(),
            power: self.power.clone(),
            p_lim_sweep_kw: self.study.p_lim_sweep_kw.clone(),
            random_layouts: self.study.random_layouts,
            n_wec: None,
        }
    }

    pub fn qbc(&self, qoi: Qoi, seed: u64) -> QbcConfig {
        let base = if qoi.is_pair() {
            &self.surrogate.two_body
        } else {
            &self.surrogate.one_body
        };
        QbcConfig {
            seed: rng::derive(seed, qoi as u64),
            ..base.clone()
        }
    }
}

/// Provenance embedded in every artifact. No timestamps, so re-runs are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub seed: u64,
    pub backend: String,
    pub code_version: String,
}

impl Metadata {
    pub fn new(config: &RunConfig, seed: u64, backend: String) -> Result<Self> {
        Ok(Self {
            config_hash: config.hash()?,
            seed,
            backend,
            code_version: crate::CODE_VERSION.to_string(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub meta: Metadata,
    pub result: T,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-quantity held-out error of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoiValidation {
    pub qoi: Qoi,
    pub points: usize,
    pub mean_mse: f64,
    pub worst_mse: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmValidation {
    pub quantities: Vec<QoiValidation>,
    pub pass: bool,
}

/// Error of every committee against the oracle on `n` seeded random inputs.
pub fn validate_sm(
    bundle: &SurrogateBundle,
    oracle: &dyn HydroSource,
    n: usize,
    seed: u64,
    mean_max: f64,
    worst_max: f64,
) -> Result<SmValidation> {
    bundle.grid.check_same(oracle.grid())?;
    let mut quantities = Vec::new();
    for q in Qoi::ONE_BODY.iter().chain(&Qoi::TWO_BODY) {
        let (x, y) = holdout_set(*q, oracle, n, rng::derive(seed, *q as u64));
        let e = holdout_error(bundle.committee(*q), &x, &y);
        quantities.push(QoiValidation {
            qoi: *q,
            points: x.len(),
            mean_mse: e.mean,
            worst_mse: e.worst,
            pass: e.mean <= mean_max && e.worst <= worst_max,
        });
    }
    Ok(SmValidation {
        pass: quantities.iter().all(|q| q.pass),
        quantities,
    })
}

/// Paired surrogate/oracle objective values over random full designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValidation {
    pub oracle_p_v: Vec<f64>,
    pub surrogate_p_v: Vec<f64>,
    pub p99_abs_error: f64,
    /// 90th minus 10th percentile of the oracle values.
    pub oracle_interdecile: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

/// Random plant, farm-level control, and feasible layout.
pub fn random_design(n_wec: usize, rng: &mut rng::Rng) -> Result<(WecGeometry, ControlParams, Vec<(f64, f64)>)> {
    let space = crate::surrogate::DesignSpace::OneBody;
    let v = space.sample(rng);
    let geom = WecGeometry::new(v[0], v[1])?;
    let (k, b) = (ControlParams::K_PTO, ControlParams::B_PTO);
    let control = ControlParams::farm(rng.random_range(k.0..=k.1), rng.random_range(b.0..=b.1));
    let problem = ProblemSpec {
        n_wec,
        ..ProblemSpec::default()
    };
    let layout = random_layouts(&problem, geom.radius, 1, rng.random())?.remove(0);
    Ok((geom, control, layout))
}

pub fn objective_validation(
    surrogate: &dyn HydroSource,
    oracle: &dyn HydroSource,
    weights: &ClimateWeights,
    power: &PowerConfig,
    n: usize,
    n_wec: usize,
    seed: u64,
) -> Result<ObjectiveValidation> {
    let mut r = rng::stream(seed, 0x0b);
    let designs = (0..n).map(|_| random_design(n_wec, &mut r)).collect::<Result<Vec<_>>>()?;
    let eval = |source: &dyn HydroSource| -> Result<Vec<f64>> {
        par::map(&designs, |(g, c, l)| {
            Ok(evaluate_design(source, g, c, &FarmLayout::new(l.clone())?, weights, power)?.p_v)
        })
        .into_iter()
        .collect()
    };
    let oracle_p_v = eval(oracle)?;
    let surrogate_p_v = eval(surrogate)?;
    let mut err: Vec<f64> = oracle_p_v.iter().zip(&surrogate_p_v).map(|(a, b)| (a - b).abs()).collect();
    err.sort_by(f64::total_cmp);
    let mut sorted = oracle_p_v.clone();
    sorted.sort_by(f64::total_cmp);
    let (p99, spread) = if n == 0 {
        (0.0, 0.0)
    } else {
        (quantile(&err, 0.99), quantile(&sorted, 0.9) - quantile(&sorted, 0.1))
    };
    Ok(ObjectiveValidation {
        oracle_p_v,
        surrogate_p_v,
        p99_abs_error: p99,
        oracle_interdecile: spread,
    })
}

/// Writes the identity-line scatter `oracle_p_v,surrogate_p_v` and an
/// absolute-error histogram `bin_lo,bin_hi,count` with `bins` equal bins.
pub fn write_objective_csvs(
    v: &ObjectiveValidation,
    scatter: impl AsRef<Path>,
    histogram: impl AsRef<Path>,
    bins: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_path(scatter)?;
    w.write_record(["oracle_p_v", "surrogate_p_v"])?;
    for (a, b) in v.oracle_p_v.iter().zip(&v.surrogate_p_v) {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    if bins == 0 {
        return Err(invalid("histogram needs at least one bin"));
    }
    let err: Vec<f64> = v.oracle_p_v.iter().zip(&v.surrogate_p_v).map(|(a, b)| (a - b).abs()).collect();
    let top = err.iter().copied().fold(0.0, f64::max);
    let width = if top > 0.0 { top / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for e in &err {
        counts[((e / width) as usize).min(bins - 1)] += 1;
    }
    let mut w = csv::Writer::from_path(histogram)?;
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (i, c) in counts.iter().enumerate() {
        w.write_record([(i as f64 * width).to_string(), ((i + 1) as f64 * width).to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
