//! Plant, control, and layout optimisation of a farm.
//!
//! Designs are encoded as `[R, R/D | control | x_2, y_2, …, x_N, y_N]`, where
//! each block is present only when optimised. WEC 1 is pinned at the origin.
//! The search layers work on the unit cube obtained by scaling each variable
//! with its bounds; see [`Objective`].

mod ga;
mod refine;
mod studies;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

pub use ga::{ga_search, GaOptions};
pub use refine::{gradient_refine, RefineOptions};
pub use studies::{
    case_study, perturb_sensitivity, random_layouts, write_perturb_csv, CaseId, CaseReport, CaseSettings,
    PerturbRow, SweepRow,
};

use crate::error::{invalid, Result};
use crate::farm::{evaluate_design, ClimateWeights, ControlMode, ControlParams, PowerConfig};
use crate::hydro::WecGeometry;
use crate::mbe::{FarmLayout, HydroSource};
use crate::par;

/// Which blocks of the design vector are free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSpec {
    pub n_wec: usize,
    pub control_mode: ControlMode,
    pub optimize_plant: bool,
    pub optimize_control: bool,
    pub optimize_layout: bool,
    /// Frozen plant, used when `optimize_plant` is false.
    pub radius: f64,
    pub slenderness: f64,
    /// Frozen farm-level control, N/m and N·s/m.
    pub k_pto: f64,
    pub b_pto: f64,
    /// Frozen layout; a line along y when absent.
    pub layout: Option<Vec<(f64, f64)>>,
    pub safety_distance: f64,
    /// Layout box is `x ∈ [0, W]`, `y ∈ [-W, W]`; `W = 0.5·sqrt(2N·10⁴)`
    /// when absent.
    pub box_width: Option<f64>,
    /// Saturation limit in watts; overrides the evaluator's power settings.
    pub p_lim_w: Option<f64>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            n_wec: 5,
            control_mode: ControlMode::Farm,
            optimize_plant: true,
            optimize_control: true,
            optimize_layout: true,
            radius: 2.0,
            slenderness: 1.0,
            k_pto: -5.0e3,
            b_pto: 5.0e5,
            layout: None,
            safety_distance: 10.0,
            box_width: None,
            p_lim_w: None,
        }
    }
}

/// Decoded design.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub geom: WecGeometry,
    pub control: ControlParams,
    pub centers: Vec<(f64, f64)>,
}

impl ProblemSpec {
    pub fn check(&self) -> Result<()> {
        if self.n_wec == 0 {
            return Err(invalid("n_wec must be at least 1"));
        }
        if !(self.safety_distance >= 0.0) {
            return Err(invalid("safety distance must be non-negative"));
        }
        if let Some(l) = &self.layout {
            if l.len() != self.n_wec {
                return Err(invalid(format!("frozen layout has {} centres, expected {}", l.len(), self.n_wec)));
            }
        }
        if self.n_var() == 0 {
            return Err(invalid("no free variables"));
        }
        Ok(())
    }

    /// `base` with this problem's saturation limit applied.
    pub fn power(&self, base: &PowerConfig) -> PowerConfig {
        PowerConfig {
            p_lim: self.p_lim_w.or(base.p_lim),
            ..base.clone()
        }
    }

    pub fn box_width(&self) -> f64 {
        self.box_width
            .unwrap_or_else(|| 0.5 * (2.0 * self.n_wec as f64 * 1.0e4).sqrt())
    }

    fn n_control(&self) -> usize {
        match (self.optimize_control, self.control_mode) {
            (false, _) => 0,
            (true, ControlMode::Farm) => 2,
            (true, ControlMode::Device) => 2 * self.n_wec,
        }
    }

    fn n_layout(&self) -> usize {
        if self.optimize_layout {
            2 * (self.n_wec - 1)
        } else {
            0
        }
    }

    pub fn n_var(&self) -> usize {
        2 * self.optimize_plant as usize + self.n_control() + self.n_layout()
    }

    /// Lower and upper bound of every variable.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::with_capacity(self.n_var());
        let mut hi = Vec::with_capacity(self.n_var());
        if self.optimize_plant {
            lo.extend([WecGeometry::RADIUS.0, WecGeometry::SLENDERNESS.0]);
            hi.extend([WecGeometry::RADIUS.1, WecGeometry::SLENDERNESS.1]);
        }
        let n_dev = self.n_control() / 2;
        lo.extend(std::iter::repeat_n(ControlParams::K_PTO.0, n_dev));
        hi.extend(std::iter::repeat_n(ControlParams::K_PTO.1, n_dev));
        lo.extend(std::iter::repeat_n(ControlParams::B_PTO.0, n_dev));
        hi.extend(std::iter::repeat_n(ControlParams::B_PTO.1, n_dev));
        let w = self.box_width();
        for _ in 0..self.n_layout() / 2 {
            lo.extend([0.0, -w]);
            hi.extend([w, w]);
        }
        (lo, hi)
    }

    fn frozen_layout(&self, radius: f64) -> Vec<(f64, f64)> {
        match &self.layout {
            Some(l) => l.clone(),
            None => {
                let step = 2.0 * radius + self.safety_distance;
                (0..self.n_wec)
                    .map(|i| {
                        let k = i.div_ceil(2) as f64;
                        (0.0, if i % 2 == 1 { k * step } else { -k * step })
                    })
                    .collect()
            }
        }
    }

    pub fn decode(&self, x: &[f64]) -> Result<Design> {
        if x.len() != self.n_var() {
            return Err(invalid(format!("design vector has {} entries, expected {}", x.len(), self.n_var())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("design vector is not finite"));
        }
        let mut at = 0;
        let geom = if self.optimize_plant {
            at = 2;
            WecGeometry::unchecked(x[0], x[1])
        } else {
            WecGeometry::unchecked(self.radius, self.slenderness)
        };
        let n_dev = self.n_control() / 2;
        let control = match (self.optimize_control, self.control_mode) {
            (false, ControlMode::Farm) => ControlParams::farm(self.k_pto, self.b_pto),
            (false, ControlMode::Device) => {
                ControlParams::device(vec![self.k_pto; self.n_wec], vec![self.b_pto; self.n_wec])
            }
            (true, ControlMode::Farm) => ControlParams::farm(x[at], x[at + 1]),
            (true, ControlMode::Device) => {
                ControlParams::device(x[at..at + n_dev].to_vec(), x[at + n_dev..at + 2 * n_dev].to_vec())
            }
        };
        at += 2 * n_dev;
        let centers = if self.optimize_layout {
            std::iter::once((0.0, 0.0))
                .chain(x[at..].chunks(2).map(|c| (c[0], c[1])))
                .collect()
        } else {
            self.frozen_layout(geom.radius)
        };
        Ok(Design { geom, control, centers })
    }

    /// Inverse of [`Self::decode`] for the free blocks.
    pub fn encode(&self, d: &Design) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_var());
        if self.optimize_plant {
            x.extend([d.geom.radius, d.geom.slenderness]);
        }
        if self.optimize_control {
            match self.control_mode {
                ControlMode::Farm => x.extend([d.control.k(0), d.control.b(0)]),
                ControlMode::Device => {
                    x.extend((0..self.n_wec).map(|i| d.control.k(i)));
                    x.extend((0..self.n_wec).map(|i| d.control.b(i)));
                }
            }
        }
        if self.optimize_layout {
            for c in &d.centers[1..] {
                x.extend([c.0, c.1]);
            }
        }
        x
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        x.iter().zip(lo.iter().zip(&hi)).map(|(v, (a, b))| (v - a) / (b - a)).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        u.iter().zip(lo.iter().zip(&hi)).map(|(v, (a, b))| a + v * (b - a)).collect()
    }
}

/// Pair-distance residuals `2R + s_d − l_pq` for `p < q` (layout problems
/// only), then draft residuals, then `lo − x` and `x − hi` per variable.
/// Feasible iff every entry is ≤ 0.
pub fn constraints(x: &[f64], problem: &ProblemSpec) -> Result<Vec<f64>> {
    let d = problem.decode(x)?;
    Ok(residuals_of(&d, x, problem))
}

fn residuals_of(d: &Design, x: &[f64], problem: &ProblemSpec) -> Vec<f64> {
    let mut r = Vec::new();
    if problem.optimize_layout {
        r.extend(pair_residuals(&d.centers, d.geom.radius, problem.safety_distance));
    }
    let (dlo, dhi) = WecGeometry::DRAFT;
    r.extend([dlo - d.geom.draft, d.geom.draft - dhi]);
    let (lo, hi) = problem.bounds();
    for ((v, a), b) in x.iter().zip(&lo).zip(&hi) {
        r.extend([a - v, v - b]);
    }
    r
}

pub fn pair_residuals(centers: &[(f64, f64)], radius: f64, safety: f64) -> Vec<f64> {
    let n = centers.len();
    let mut r = Vec::with_capacity(n * (n - 1) / 2);
    for p in 0..n {
        for q in p + 1..n {
            let l = (centers[q].0 - centers[p].0).hypot(centers[q].1 - centers[p].1);
            r.push(2.0 * radius + safety - l);
        }
    }
    r
}

pub fn violation(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r.max(0.0)).sum()
}

pub fn max_violation(residuals: &[f64]) -> f64 {
    residuals.iter().copied().fold(0.0, f64::max)
}

/// Hydrodynamic source, climate, and power settings for evaluating designs.
pub struct Evaluator<'a> {
    pub source: &'a dyn HydroSource,
    pub weights: &'a ClimateWeights,
    pub power: &'a PowerConfig,
    count: AtomicUsize,
}

impl<'a> Evaluator<'a> {
    pub fn new(source: &'a dyn HydroSource, weights: &'a ClimateWeights, power: &'a PowerConfig) -> Self {
        Self {
            source,
            weights,
            power,
            count: AtomicUsize::new(0),
        }
    }

    /// Designs evaluated so far.
    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateValue {
    pub p_v: f64,
    pub p_a: f64,
    pub residuals: Vec<f64>,
}

/// Lifetime power per unit volume of `x`. Infeasible designs are evaluated
/// too; their residuals are positive.
pub fn evaluate_candidate(x: &[f64], problem: &ProblemSpec, eval: &Evaluator) -> Result<CandidateValue> {
    let d = problem.decode(x)?;
    let residuals = residuals_of(&d, x, problem);
    let layout = FarmLayout::new(d.centers.clone())?;
    eval.count.fetch_add(1, Ordering::Relaxed);
    let power = problem.power(eval.power);
    let p = evaluate_design(eval.source, &d.geom, &d.control, &layout, eval.weights, &power)?;
    Ok(CandidateValue {
        p_v: p.p_v,
        p_a: p.p_a,
        residuals,
    })
}

/// A maximisation problem on the unit cube with inequality constraints
/// `g(u) ≤ 0`. Bounds are implied by the cube.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Inequality residuals excluding the cube bounds.
    fn residuals(&self, u: &[f64]) -> Vec<f64>;

    fn value(&self, u: &[f64]) -> Result<f64>;

    /// Moves `u` towards feasibility; the default leaves it unchanged.
    fn repair(&self, u: &[f64], _rng: &mut crate::rng::Rng) -> Vec<f64> {
        u.to_vec()
    }
}

/// [`ProblemSpec`] + [`Evaluator`] as an [`Objective`] maximising `p_v`.
pub struct FarmObjective<'a> {
    pub problem: &'a ProblemSpec,
    pub eval: &'a Evaluator<'a>,
}

impl Objective for FarmObjective<'_> {
    fn dim(&self) -> usize {
        self.problem.n_var()
    }

    fn residuals(&self, u: &[f64]) -> Vec<f64> {
        let x = self.problem.from_unit(u);
        let Ok(d) = self.problem.decode(&x) else {
            return vec![f64::INFINITY];
        };
        let mut r = Vec::new();
        if self.problem.optimize_layout {
            r.extend(pair_residuals(&d.centers, d.geom.radius, self.problem.safety_distance));
        }
        let (dlo, dhi) = WecGeometry::DRAFT;
        r.extend([dlo - d.geom.draft, d.geom.draft - dhi]);
        r
    }

    fn value(&self, u: &[f64]) -> Result<f64> {
        Ok(evaluate_candidate(&self.problem.from_unit(u), self.problem, self.eval)?.p_v)
    }

    fn repair(&self, u: &[f64], rng: &mut crate::rng::Rng) -> Vec<f64> {
        use rand::Rng as _;
        let p = self.problem;
        let mut x = p.from_unit(u);
        if p.optimize_plant {
            let (dlo, dhi) = WecGeometry::DRAFT;
            let (slo, shi) = WecGeometry::SLENDERNESS;
            x[1] = x[1].clamp((x[0] / dhi).max(slo), (x[0] / dlo).min(shi));
        }
        if p.optimize_layout {
            let Ok(d) = p.decode(&x) else { return u.to_vec() };
            let min = 2.0 * d.geom.radius + p.safety_distance;
            let w = p.box_width();
            let start = p.n_var() - p.n_layout();
            let mut placed = vec![(0.0, 0.0)];
            for (i, c) in d.centers[1..].iter().enumerate() {
                let mut c = *c;
                for _ in 0..200 {
                    if placed.iter().all(|q| (c.0 - q.0).hypot(c.1 - q.1) >= min) {
                        break;
                    }
                    c = (rng.random_range(0.0..=w), rng.random_range(-w..=w));
                }
                placed.push(c);
                x[start + 2 * i] = c.0;
                x[start + 2 * i + 1] = c.1;
            }
        }
        p.to_unit(&x).into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
    }
}

/// Raw result of a search on the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub u: Vec<f64>,
    pub value: f64,
    pub history: Vec<f64>,
    /// Calls to [`Objective::value`].
    pub evaluations: usize,
    pub stationary: bool,
}

/// Outcome of one search stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub stage: String,
    /// Best design in physical units.
    pub x: Vec<f64>,
    pub p_v: f64,
    pub residuals: Vec<f64>,
    pub max_violation: f64,
    pub evaluations: usize,
    pub seed: u64,
    /// Incumbent objective after each generation or accepted iterate.
    pub history: Vec<f64>,
    /// Set when the refiner could not improve on its start.
    pub stationary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridResult {
    pub ga: OptResult,
    /// GA optimum re-evaluated with the refinement evaluator.
    pub ga_refit_p_v: f64,
    pub refined: OptResult,
}

/// Global search with `global` followed by gradient refinement with `local`.
pub fn hybrid(
    problem: &ProblemSpec,
    global: &Evaluator,
    local: &Evaluator,
    ga_opts: &GaOptions,
    refine_opts: &RefineOptions,
) -> Result<HybridResult> {
    problem.check()?;
    let ga = ga_search(&FarmObjective { problem, eval: global }, ga_opts)?;
    let ga_result = finish("ga", problem, &ga, ga_opts.seed)?;
    let obj = FarmObjective { problem, eval: local };
    let ga_refit_p_v = obj.value(&ga.u)?;
    let r = gradient_refine(&obj, &ga.u, refine_opts)?;
    let refined = finish("refine", problem, &r, ga_opts.seed)?;
    Ok(HybridResult {
        ga: ga_result,
        ga_refit_p_v,
        refined,
    })
}

pub(crate) fn finish(stage: &str, problem: &ProblemSpec, out: &SearchOutcome, seed: u64) -> Result<OptResult> {
    let x = problem.from_unit(&out.u);
    let residuals = constraints(&x, problem)?;
    Ok(OptResult {
        stage: stage.into(),
        x,
        p_v: out.value,
        max_violation: max_violation(&residuals),
        residuals,
        evaluations: out.evaluations,
        seed,
        history: out.history.clone(),
        stationary: out.stationary,
    })
}

/// Evaluates many unit-cube points, in parallel.
pub(crate) fn values(obj: &dyn Objective, us: &[Vec<f64>]) -> Vec<Result<f64>> {
    par::map(us, |u| obj.value(u))
}

/// Writes `wec,x_m,y_m`.
pub fn write_layout_csv(path: impl AsRef<std::path::Path>, centers: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["wec", "x_m", "y_m"])?;
    for (i, (x, y)) in centers.iter().enumerate() {
        w.write_record([(i + 1).to_string(), x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
