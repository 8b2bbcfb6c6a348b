use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::committee::{init_committee, Committee, CommitteeTrainOptions, Dataset, NetSpec, RoundRecord};
use super::kmeans::kmeans;
use super::net::TrainOptions;
use crate::error::{invalid, Error, Result};
use crate::hydro::WecGeometry;
use crate::mbe::HydroSource;
use crate::par;
use crate::rng::{self, Rng};

/// Upper bound on pair separation covered by two-body models, metres.
pub const MAX_SEPARATION: f64 = 1000.0;

/// Quantity of interest: one network committee per entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qoi {
    A,
    B,
    FeRe,
    FeIm,
    Da11,
    Da12,
    Db11,
    Db12,
    DfeRe,
    DfeIm,
}

impl Qoi {
    pub const ONE_BODY: [Qoi; 4] = [Qoi::A, Qoi::B, Qoi::FeRe, Qoi::FeIm];
    pub const TWO_BODY: [Qoi; 6] = [Qoi::Da11, Qoi::Da12, Qoi::Db11, Qoi::Db12, Qoi::DfeRe, Qoi::DfeIm];

    pub fn tag(self) -> &'static str {
        match self {
            Qoi::A => "a",
            Qoi::B => "b",
            Qoi::FeRe => "fe_re",
            Qoi::FeIm => "fe_im",
            Qoi::Da11 => "da11",
            Qoi::Da12 => "da12",
            Qoi::Db11 => "db11",
            Qoi::Db12 => "db12",
            Qoi::DfeRe => "dfe_re",
            Qoi::DfeIm => "dfe_im",
        }
    }

    pub fn is_pair(self) -> bool {
        Qoi::TWO_BODY.contains(&self)
    }

    pub fn space(self) -> DesignSpace {
        if self.is_pair() {
            DesignSpace::TwoBody
        } else {
            DesignSpace::OneBody
        }
    }

    /// Normalised oracle outputs at `x` = `[R, R/D]` or `[R, R/D, l, theta]`.
    pub fn evaluate(self, source: &dyn HydroSource, x: &[f64]) -> Result<Vec<f64>> {
        let geom = WecGeometry::unchecked(x[0], x[1]);
        if self.is_pair() {
            let t = source.pair_terms(&geom, x[2], x[3])?;
            Ok(match self {
                Qoi::Da11 => t.da11,
                Qoi::Da12 => t.da12,
                Qoi::Db11 => t.db11,
                Qoi::Db12 => t.db12,
                Qoi::DfeRe => t.dfe_re,
                _ => t.dfe_im,
            })
        } else {
            let o = source.one_body(&geom)?;
            Ok(match self {
                Qoi::A => o.a,
                Qoi::B => o.b,
                Qoi::FeRe => o.fe_re,
                _ => o.fe_im,
            })
        }
    }
}

impl std::str::FromStr for Qoi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Qoi::ONE_BODY
            .iter()
            .chain(&Qoi::TWO_BODY)
            .copied()
            .find(|q| q.tag() == s)
            .ok_or_else(|| invalid(format!("unknown quantity `{s}`")))
    }
}

/// Feasible model inputs: the geometry bounds, plus `2R ≤ l ≤ MAX_SEPARATION`
/// and `0 ≤ θ ≤ π` for pairs.
///
/// The unit-cube coordinate of `l` is logarithmic, so sampling, pools, and
/// k-means all see separations log-uniformly; interaction terms vary on the
/// scale of `l` itself and are strongest at short range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignSpace {
    OneBody,
    TwoBody,
}

impl DesignSpace {
    pub fn dim(self) -> usize {
        match self {
            DesignSpace::OneBody => 2,
            DesignSpace::TwoBody => 4,
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(self) -> (Vec<f64>, Vec<f64>) {
        let (r, s) = (WecGeometry::RADIUS, WecGeometry::SLENDERNESS);
        let mut lo = vec![r.0, s.0];
        let mut hi = vec![r.1, s.1];
        if self == DesignSpace::TwoBody {
            lo.extend([2.0 * r.0, 0.0]);
            hi.extend([MAX_SEPARATION, std::f64::consts::PI]);
        }
        (lo, hi)
    }

    pub fn is_feasible(self, x: &[f64]) -> bool {
        let (lo, hi) = self.bounds();
        if x.len() != self.dim() || x.iter().zip(lo.iter().zip(&hi)).any(|(v, (a, b))| !(*v >= *a && *v <= *b)) {
            return false;
        }
        let d = WecGeometry::DRAFT;
        let draft = x[0] / x[1];
        let eps = 1e-12;
        if draft < d.0 * (1.0 - eps) || draft > d.1 * (1.0 + eps) {
            return false;
        }
        self == DesignSpace::OneBody || x[2] >= 2.0 * x[0] * (1.0 - eps)
    }

    /// Clamps `x` onto the feasible region coordinate by coordinate.
    pub fn project(self, x: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        let mut v: Vec<f64> = x.iter().zip(lo.iter().zip(&hi)).map(|(v, (a, b))| v.clamp(*a, *b)).collect();
        let d = WecGeometry::DRAFT;
        let s_lo = (v[0] / d.1).max(lo[1]);
        let s_hi = (v[0] / d.0).min(hi[1]);
        v[1] = v[1].clamp(s_lo, s_hi);
        if self == DesignSpace::TwoBody {
            v[2] = v[2].clamp(2.0 * v[0], hi[2]);
        }
        v
    }

    /// Uniform draw over the feasible part of the unit cube (rejection).
    pub fn sample(self, rng: &mut Rng) -> Vec<f64> {
        loop {
            let u: Vec<f64> = (0..self.dim()).map(|_| rng.random_range(0.0..=1.0)).collect();
            let x = self.from_unit(&u);
            if self.is_feasible(&x) {
                return x;
            }
        }
    }

    pub fn pool(self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, 0x9001);
        (0..n).map(|_| self.sample(&mut r)).collect()
    }

    /// Initial design: the `2^d` box corners projected onto the feasible
    /// region (duplicates removed) followed by `interior` Latin-hypercube
    /// points, also projected.
    pub fn initial_design(self, interior: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        let d = self.dim();
        let (lo, hi) = self.bounds();
        let mut pts: Vec<Vec<f64>> = Vec::new();
        for mask in 0..(1usize << d) {
            let c: Vec<f64> = (0..d).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
            let p = self.project(&c);
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        let strata: Vec<Vec<usize>> = (0..d)
            .map(|_| {
                let mut s: Vec<usize> = (0..interior).collect();
                s.shuffle(rng);
                s
            })
            .collect();
        for j in 0..interior {
            let u: Vec<f64> = (0..d)
                .map(|i| (strata[i][j] as f64 + rng.random::<f64>()) / interior as f64)
                .collect();
            pts.push(self.project(&self.from_unit(&u)));
        }
        pts
    }

    pub fn unit(self, x: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        (0..x.len())
            .map(|i| {
                if i == 2 {
                    (x[i] / lo[i]).ln() / (hi[i] / lo[i]).ln()
                } else {
                    (x[i] - lo[i]) / (hi[i] - lo[i])
                }
            })
            .collect()
    }

    pub fn from_unit(self, u: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        (0..u.len())
            .map(|i| {
                if i == 2 {
                    lo[i] * (hi[i] / lo[i]).powf(u[i])
                } else {
                    lo[i] + u[i] * (hi[i] - lo[i])
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QbcConfig {
    pub pool_size: usize,
    /// Oracle queries per round (k-means clusters).
    pub batch: usize,
    pub members: usize,
    pub hidden: Vec<usize>,
    /// Fraction of the pool, ranked by committee variance, handed to k-means.
    pub top_fraction: f64,
    pub max_rounds: usize,
    pub var_tol: f64,
    pub mse_tol: f64,
    /// Latin-hypercube points in the initial design.
    pub interior: usize,
    /// Trainer settings for the first fit.
    pub train: CommitteeTrainOptions,
    /// Epoch budget for warm-started refits in later rounds.
    pub round_epochs: usize,
    /// Feed `ln l` rather than `l` to two-body networks.
    pub log_separation: bool,
    pub kmeans_iter: usize,
    pub seed: u64,
}

impl Default for QbcConfig {
    fn default() -> Self {
        Self::one_body()
    }
}

impl QbcConfig {
    pub fn one_body() -> Self {
        Self {
            pool_size: 10_000,
            batch: 50,
            members: 10,
            hidden: vec![32, 32],
            top_fraction: 0.2,
            max_rounds: 20,
            var_tol: 1e-3,
            mse_tol: 1e-3,
            interior: 50,
            train: CommitteeTrainOptions::default(),
            round_epochs: 150,
            log_separation: true,
            kmeans_iter: 50,
            seed: 0,
        }
    }

    pub fn two_body() -> Self {
        Self {
            pool_size: 100_000,
            batch: 200,
            members: 5,
            interior: 200,
            ..Self::one_body()
        }
    }

    pub fn for_qoi(qoi: Qoi) -> Self {
        if qoi.is_pair() {
            Self::two_body()
        } else {
            Self::one_body()
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.pool_size == 0 || self.batch == 0 || self.members < 2 {
            return Err(invalid("pool, batch, and committee sizes must be positive (members ≥ 2)"));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(invalid("top fraction must be in (0, 1]"));
        }
        if self.batch > ((self.pool_size as f64 * self.top_fraction).ceil() as usize) {
            return Err(invalid("batch exceeds the number of candidate points"));
        }
        Ok(())
    }

    pub fn net_spec(&self, qoi: Qoi, outputs: usize) -> NetSpec {
        let mut spec = NetSpec::new(qoi.space().dim(), outputs);
        spec.hidden = self.hidden.clone();
        if qoi.is_pair() && self.log_separation {
            spec.log_inputs = vec![2];
        }
        spec
    }
}

#[derive(Debug, Clone)]
pub struct QbcOutcome {
    pub committee: Committee,
    pub dataset: Dataset,
    /// Oracle queries that failed and were dropped.
    pub dropped: usize,
}

const CHUNK: usize = 2048;

/// Mean committee variance per pool point, evaluated in parallel chunks.
pub fn pool_scores(committee: &Committee, pool: &[Vec<f64>]) -> Vec<f64> {
    let chunks: Vec<&[Vec<f64>]> = pool.chunks(CHUNK).collect();
    par::map(&chunks, |c| committee.predict_quiet(c).score()).concat()
}

fn measure(qoi: Qoi, source: &dyn HydroSource, points: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, usize) {
    let results = par::map(points, |x| qoi.evaluate(source, x));
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut dropped = 0;
    for (x, r) in points.iter().zip(results) {
        match r {
            Ok(y) if y.iter().all(|v| v.is_finite()) => {
                xs.push(x.clone());
                ys.push(y);
            }
            Ok(_) => {
                log::warn!("{}: non-finite oracle output at {x:?}, dropped", qoi.tag());
                dropped += 1;
            }
            Err(e) => {
                log::warn!("{}: oracle failed at {x:?} ({e}), dropped", qoi.tag());
                dropped += 1;
            }
        }
    }
    (xs, ys, dropped)
}

/// Committee-mean error over every measured row, chunked like the pool.
pub fn measured_error(committee: &Committee, data: &Dataset) -> HoldoutError {
    let idx: Vec<usize> = (0..data.len()).collect();
    let parts = par::map(&idx.chunks(CHUNK).collect::<Vec<_>>(), |c| {
        let xs: Vec<Vec<f64>> = c.iter().map(|&i| data.inputs[i].clone()).collect();
        let ys: Vec<Vec<f64>> = c.iter().map(|&i| data.targets[i].clone()).collect();
        (holdout_error(committee, &xs, &ys), c.len())
    });
    let n = data.len().max(1) as f64;
    HoldoutError {
        mean: parts.iter().map(|(e, k)| e.mean * *k as f64).sum::<f64>() / n,
        worst: parts.iter().map(|(e, _)| e.worst).fold(0.0, f64::max),
    }
}

/// Pool-based batch-mode query-by-committee.
///
/// Each round trains the committee (warm-started after the first), scores
/// the pool by committee variance, clusters the highest-variance fraction
/// with k-means and queries the oracle at the centroids. Stops once the mean
/// pool variance and the worst per-point error of the committee mean over
/// the measured set are both within tolerance, or after `max_rounds` query
/// rounds.
pub fn qbc_run(qoi: Qoi, source: &dyn HydroSource, config: &QbcConfig) -> Result<QbcOutcome> {
    config.check()?;
    let space = qoi.space();
    let mut split_rng = rng::stream(config.seed, 0x5b1);
    let mut design_rng = rng::stream(config.seed, 0xd0);
    let (xs, ys, mut dropped) = measure(qoi, source, &space.initial_design(config.interior, &mut design_rng));
    if xs.is_empty() {
        return Err(Error::Numerical(format!("{}: oracle failed on every initial point", qoi.tag())));
    }
    let mut dataset = Dataset::default();
    dataset.push_batch(xs, ys, &mut split_rng);

    let spec = config.net_spec(qoi, source.grid().len());
    let mut committee = init_committee(qoi.tag(), spec, config.members, rng::derive(config.seed, 1))?;
    let pool = space.pool(config.pool_size, config.seed);
    let n_top = ((config.pool_size as f64 * config.top_fraction).ceil() as usize).max(config.batch);

    let mut round = 0;
    loop {
        let mut opts = config.train.clone();
        if round > 0 {
            opts.net.epochs = config.round_epochs;
        }
        committee.train(&dataset, &opts, rng::derive(config.seed, 100 + round as u64))?;
        let scores = pool_scores(&committee, &pool);
        let pool_var = scores.iter().sum::<f64>() / scores.len() as f64;
        let pool_var_max = scores.iter().copied().fold(0.0, f64::max);
        let max_mse = measured_error(&committee, &dataset).worst;
        committee.history.push(RoundRecord {
            round,
            pool_var,
            pool_var_max,
            max_mse,
            n_samples: dataset.len(),
        });
        log::info!(
            "{} round {round}: pool var {pool_var:.3e} (max {pool_var_max:.3e}), max mse {max_mse:.3e}, {} samples",
            qoi.tag(),
            dataset.len()
        );
        if (pool_var <= config.var_tol && max_mse <= config.mse_tol) || round >= config.max_rounds {
            break;
        }

        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let top: Vec<Vec<f64>> = order[..n_top].iter().map(|&i| space.unit(&pool[i])).collect();
        let centroids = kmeans(&top, config.batch, rng::derive(config.seed, 200 + round as u64), config.kmeans_iter)?;
        let queries: Vec<Vec<f64>> = centroids.iter().map(|u| space.project(&space.from_unit(u))).collect();
        let (xs, ys, d) = measure(qoi, source, &queries);
        dropped += d;
        dataset.push_batch(xs, ys, &mut split_rng);
        round += 1;
    }
    Ok(QbcOutcome {
        committee,
        dataset,
        dropped,
    })
}

/// Passive baseline: `n` uniform draws from the design space, trained with
/// the same committee settings.
pub fn random_run(qoi: Qoi, source: &dyn HydroSource, config: &QbcConfig, n: usize) -> Result<QbcOutcome> {
    let space = qoi.space();
    let mut r = rng::stream(config.seed, 0x7a4d);
    let points: Vec<Vec<f64>> = (0..n).map(|_| space.sample(&mut r)).collect();
    let (xs, ys, dropped) = measure(qoi, source, &points);
    let mut dataset = Dataset::default();
    dataset.push_batch(xs, ys, &mut rng::stream(config.seed, 0x5b1));
    let spec = config.net_spec(qoi, source.grid().len());
    let mut committee = init_committee(qoi.tag(), spec, config.members, rng::derive(config.seed, 1))?;
    committee.train(&dataset, &config.train, rng::derive(config.seed, 100))?;
    Ok(QbcOutcome {
        committee,
        dataset,
        dropped,
    })
}

/// Held-out error of a committee mean against the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldoutError {
    /// Output-averaged squared error, averaged over points.
    pub mean: f64,
    /// Largest per-point output-averaged squared error.
    pub worst: f64,
}

pub fn holdout_error(committee: &Committee, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> HoldoutError {
    let p = committee.predict_quiet(inputs);
    let per_point: Vec<f64> = targets
        .iter()
        .enumerate()
        .map(|(j, y)| y.iter().enumerate().map(|(o, v)| (p.mean[(o, j)] - v).powi(2)).sum::<f64>() / y.len() as f64)
        .collect();
    HoldoutError {
        mean: per_point.iter().sum::<f64>() / per_point.len().max(1) as f64,
        worst: per_point.iter().copied().fold(0.0, f64::max),
    }
}

/// Seeded held-out inputs with their oracle targets.
pub fn holdout_set(qoi: Qoi, source: &dyn HydroSource, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let space = qoi.space();
    let mut r = rng::stream(seed, 0x4e1d);
    let points: Vec<Vec<f64>> = (0..n).map(|_| space.sample(&mut r)).collect();
    let (xs, ys, _) = measure(qoi, source, &points);
    (xs, ys)
}

/// Writes `round,pool_var,max_mse,n_samples,pool_var_max`.
pub fn write_history_csv(path: impl AsRef<Path>, history: &[RoundRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "round,pool_var,max_mse,n_samples,pool_var_max")?;
    for r in history {
        writeln!(f, "{},{:e},{:e},{},{:e}", r.round, r.pool_var, r.max_mse, r.n_samples, r.pool_var_max)?;
    }
    f.flush()?;
    Ok(())
}

/// Trainer settings small enough for unit tests.
pub fn quick_options(epochs: usize) -> CommitteeTrainOptions {
    CommitteeTrainOptions {
        net: TrainOptions {
            epochs,
            ..TrainOptions::default()
        },
        ..CommitteeTrainOptions::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::{FrequencyGrid, Oracle};

    fn toy() -> Oracle {
        Oracle::toy(FrequencyGrid::uniform(0.3, 2.0, 12).unwrap()).unwrap()
    }

    fn small(qoi: Qoi) -> QbcConfig {
        QbcConfig {
            pool_size: 400,
            batch: 6,
            members: 3,
            hidden: vec![8],
            interior: 10,
            train: quick_options(60),
            round_epochs: 30,
            ..QbcConfig::for_qoi(qoi)
        }
    }

    #[test]
    fn design_space_geometry() {
        let s = DesignSpace::OneBody;
        let mut r = rng::stream(0, 0);
        for _ in 0..500 {
            let x = s.sample(&mut r);
            assert!(s.is_feasible(&x));
            assert!(WecGeometry::unchecked(x[0], x[1]).check().is_ok());
        }
        let t = DesignSpace::TwoBody;
        for _ in 0..500 {
            let x = t.project(&[r.random_range(-5.0..15.0), r.random_range(-1.0..12.0), r.random_range(0.0..2000.0), 4.0]);
            assert!(t.is_feasible(&x), "{x:?}");
        }
        let d0 = s.initial_design(50, &mut r);
        assert!(d0.len() <= 54 && d0.len() > 50);
        assert!(d0.iter().all(|x| s.is_feasible(x)));
        let d0 = t.initial_design(200, &mut r);
        assert!(d0.iter().all(|x| t.is_feasible(x)));
    }

    #[test]
    fn separation_axis_is_logarithmic() {
        let t = DesignSpace::TwoBody;
        let (lo, hi) = t.bounds();
        let x = t.from_unit(&[0.5, 0.5, 0.5, 0.5]);
        assert!((x[2] - (lo[2] * hi[2]).sqrt()).abs() < 1e-9);
        assert!((x[0] - 0.5 * (lo[0] + hi[0])).abs() < 1e-12);
        let u = t.unit(&x);
        assert!(u.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let mut r = rng::stream(2, 0);
        let short = (0..2000).filter(|_| t.sample(&mut r)[2] < 100.0).count();
        // Under a uniform draw fewer than 10% of separations fall below 100 m.
        assert!(short > 400, "{short}");
    }

    #[test]
    fn qoi_tags_round_trip() {
        for q in Qoi::ONE_BODY.iter().chain(&Qoi::TWO_BODY) {
            assert_eq!(q.tag().parse::<Qoi>().unwrap(), *q);
        }
        assert!("zz".parse::<Qoi>().is_err());
    }

    #[test]
    fn dataset_bookkeeping() {
        let o = toy();
        let cfg = QbcConfig {
            max_rounds: 3,
            var_tol: 0.0,
            ..small(Qoi::B)
        };
        let out = qbc_run(Qoi::B, &o, &cfg).unwrap();
        let d0 = out.committee.history[0].n_samples;
        assert_eq!(out.committee.history.len(), 4);
        assert_eq!(out.dataset.len(), d0 + 3 * cfg.batch);
        for (r, rec) in out.committee.history.iter().enumerate() {
            assert_eq!(rec.n_samples, d0 + r * cfg.batch);
        }
    }

    #[test]
    fn tolerances_met_on_initial_design() {
        let o = toy();
        let cfg = QbcConfig {
            var_tol: f64::INFINITY,
            mse_tol: f64::INFINITY,
            ..small(Qoi::A)
        };
        let out = qbc_run(Qoi::A, &o, &cfg).unwrap();
        assert_eq!(out.committee.history.len(), 1);
        assert_eq!(out.dataset.len(), out.committee.history[0].n_samples);
    }

    #[test]
    fn round_cap_honoured() {
        let o = toy();
        let cfg = QbcConfig {
            max_rounds: 2,
            var_tol: 0.0,
            mse_tol: 0.0,
            ..small(Qoi::Db12)
        };
        let out = qbc_run(Qoi::Db12, &o, &cfg).unwrap();
        assert_eq!(out.committee.history.len(), 3);
    }

    #[test]
    fn queries_stay_in_pool_box() {
        let o = toy();
        let cfg = QbcConfig {
            max_rounds: 2,
            var_tol: 0.0,
            ..small(Qoi::DfeRe)
        };
        let out = qbc_run(Qoi::DfeRe, &o, &cfg).unwrap();
        let pool = DesignSpace::TwoBody.pool(cfg.pool_size, cfg.seed);
        let d0 = out.committee.history[0].n_samples;
        for d in 0..4 {
            let lo = pool.iter().map(|x| x[d]).fold(f64::INFINITY, f64::min);
            let hi = pool.iter().map(|x| x[d]).fold(f64::NEG_INFINITY, f64::max);
            for x in &out.dataset.inputs[d0..] {
                assert!(x[d] >= lo && x[d] <= hi);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let o = toy();
        let cfg = QbcConfig {
            max_rounds: 1,
            var_tol: 0.0,
            ..small(Qoi::FeRe)
        };
        let a = qbc_run(Qoi::FeRe, &o, &cfg).unwrap();
        let b = qbc_run(Qoi::FeRe, &o, &cfg).unwrap();
        assert_eq!(a.committee, b.committee);
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn history_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let rec = RoundRecord {
            round: 0,
            pool_var: 0.5,
            pool_var_max: 1.0,
            max_mse: 0.25,
            n_samples: 7,
        };
        write_history_csv(&p, &[rec]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("round,pool_var,max_mse,n_samples"));
        assert!(text.lines().nth(1).unwrap().starts_with("0,5e-1,2.5e-1,7"));
    }
}
