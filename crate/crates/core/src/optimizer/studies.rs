use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{hybrid, pair_residuals, Evaluator, GaOptions, HybridResult, ProblemSpec, RefineOptions};
use crate::error::{invalid, Error, Result};
use crate::farm::{evaluate_design, q_factor, ClimateWeights, ControlMode, ControlParams, PowerConfig};
use crate::mbe::{FarmLayout, HydroSource};
use crate::par;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseId {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl std::str::FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "I" | "1" => CaseId::I,
            "II" | "2" => CaseId::II,
            "III" | "3" => CaseId::III,
            "IV" | "4" => CaseId::IV,
            "V" | "5" => CaseId::V,
            "VI" | "6" => CaseId::VI,
            _ => return Err(invalid(format!("unknown case study `{s}` (expected I..VI)"))),
        })
    }
}

impl CaseId {
    /// Variable set, frozen values, and farm size of each study.
    pub fn problem(self) -> ProblemSpec {
        let base = ProblemSpec {
            radius: 2.0,
            slenderness: 1.0,
            k_pto: -5.0e3,
            b_pto: 5.0e5,
            ..ProblemSpec::default()
        };
        match self {
            CaseId::I => ProblemSpec {
                n_wec: 1,
                optimize_control: false,
                optimize_layout: false,
                k_pto: -0.5e3,
                ..base
            },
            CaseId::II => ProblemSpec {
                optimize_plant: false,
                optimize_control: false,
                ..base
            },
            CaseId::III => ProblemSpec {
                optimize_control: false,
                ..base
            },
            CaseId::IV => base,
            CaseId::V => ProblemSpec {
                control_mode: ControlMode::Device,
                ..base
            },
            CaseId::VI => ProblemSpec { n_wec: 25, ..base },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseSettings {
    pub ga: GaOptions,
    pub refine: RefineOptions,
    pub power: PowerConfig,
    /// Saturation limits swept by study I, kW.
    pub p_lim_sweep_kw: Vec<f64>,
    /// Random feasible layouts evaluated as a baseline for layout studies.
    pub random_layouts: usize,
    /// Overrides the study's farm size.
    pub n_wec: Option<usize>,
}

impl Default for CaseSettings {
    fn default() -> Self {
        Self {
            ga: GaOptions {
                population: Some(60),
                generations: 40,
                ..GaOptions::default()
            },
            refine: RefineOptions::default(),
            power: PowerConfig::default(),
            p_lim_sweep_kw: vec![1.0, 10.0, 1e2, 1e3, 1e6],
            random_layouts: 500,
            n_wec: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub radius: f64,
    pub slenderness: f64,
    pub draft: f64,
    pub k_pto: Vec<f64>,
    pub b_pto: Vec<f64>,
    pub centers: Vec<(f64, f64)>,
    pub p_a: f64,
    pub p_v: f64,
    /// Farm power over `N` times the isolated device, same plant and control.
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRun {
    pub label: String,
    pub p_lim_w: Option<f64>,
    pub result: HybridResult,
    pub design: DesignSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_lim_kw: f64,
    pub radius: f64,
    pub slenderness: f64,
    pub draft: f64,
    pub p_v: f64,
    pub p_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutBaseline {
    /// Oracle `p_v` of the random feasible layouts, ascending.
    pub p_v: Vec<f64>,
    /// Fraction of random layouts the refined design beats or equals.
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: CaseId,
    pub problem: ProblemSpec,
    pub global_source: String,
    pub local_source: String,
    pub runs: Vec<CaseRun>,
    pub sweep: Vec<SweepRow>,
    pub baseline: Option<LayoutBaseline>,
}

/// Uniform random layouts with WEC 1 at the origin, inside the layout box,
/// satisfying the spacing constraint (sequential rejection per WEC).
pub fn random_layouts(problem: &ProblemSpec, radius: f64, count: usize, seed: u64) -> Result<Vec<Vec<(f64, f64)>>> {
    let w = problem.box_width();
    let min = 2.0 * radius + problem.safety_distance;
    let mut r = rng::stream(seed, 0x1a);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut centers = vec![(0.0, 0.0)];
        for _ in 1..problem.n_wec {
            let mut placed = false;
            for _ in 0..10_000 {
                let c = (r.random_range(0.0..=w), r.random_range(-w..=w));
                if centers.iter().all(|q| (c.0 - q.0).hypot(c.1 - q.1) >= min) {
                    centers.push(c);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Infeasible("could not place a random feasible layout".into()));
            }
        }
        out.push(centers);
    }
    Ok(out)
}

fn summarize(
    problem: &ProblemSpec,
    x: &[f64],
    source: &dyn HydroSource,
    weights: &ClimateWeights,
    power: &PowerConfig,
) -> Result<DesignSummary> {
    let d = problem.decode(x)?;
    let layout = FarmLayout::new(d.centers.clone())?;
    let farm = evaluate_design(source, &d.geom, &d.control, &layout, weights, power)?;
    let n = d.centers.len();
    let q = if n == 1 {
        1.0
    } else {
        // Isolated reference: device 1's control, no saturation interplay.
        let single = FarmLayout::new(vec![(0.0, 0.0)])?;
        let control = ControlParams::farm(d.control.k(0), d.control.b(0));
        let iso = evaluate_design(source, &d.geom, &control, &single, weights, power)?;
        q_factor(farm.p_a, iso.p_a, n)?
    };
    Ok(DesignSummary {
        radius: d.geom.radius,
        slenderness: d.geom.slenderness,
        draft: d.geom.draft,
        k_pto: (0..n).map(|i| d.control.k(i)).collect(),
        b_pto: (0..n).map(|i| d.control.b(i)).collect(),
        centers: d.centers,
        p_a: farm.p_a,
        p_v: farm.p_v,
        q,
    })
}

/// Runs one study: the hybrid strategy with `global` driving the genetic
/// stage and `local` the refinement. Study I sweeps the saturation limits;
/// layout studies also score random feasible layouts with `local`.
pub fn case_study(
    id: CaseId,
    settings: &CaseSettings,
    global: &dyn HydroSource,
    local: &dyn HydroSource,
    weights: &ClimateWeights,
) -> Result<CaseReport> {
    let mut problem = id.problem();
    if let Some(n) = settings.n_wec {
        problem.n_wec = n;
    }
    problem.check()?;
    let limits: Vec<Option<f64>> = if id == CaseId::I {
        settings.p_lim_sweep_kw.iter().map(|kw| Some(kw * 1e3)).collect()
    } else {
        vec![problem.p_lim_w.or(settings.power.p_lim)]
    };
    let mut runs = Vec::new();
    let mut sweep = Vec::new();
    for p_lim in limits {
        let run_problem = ProblemSpec {
            p_lim_w: p_lim,
            ..problem.clone()
        };
        let power = run_problem.power(&settings.power);
        let ge = Evaluator::new(global, weights, &settings.power);
        let le = Evaluator::new(local, weights, &settings.power);
        let result = hybrid(&run_problem, &ge, &le, &settings.ga, &settings.refine)?;
        let design = summarize(&run_problem, &result.refined.x, local, weights, &power)?;
        if id == CaseId::I {
            sweep.push(SweepRow {
                p_lim_kw: p_lim.map_or(f64::INFINITY, |p| p / 1e3),
                radius: design.radius,
                slenderness: design.slenderness,
                draft: design.draft,
                p_v: design.p_v,
                p_a: design.p_a,
            });
        }
        runs.push(CaseRun {
            label: match p_lim {
                Some(p) => format!("p_lim={} kW", p / 1e3),
                None => "no saturation".into(),
            },
            p_lim_w: p_lim,
            result,
            design,
        });
    }
    let baseline = if problem.optimize_layout && problem.n_wec > 1 && settings.random_layouts > 0 {
        let best = &runs[0];
        let d = problem.decode(&best.result.refined.x)?;
        let layouts = random_layouts(&problem, d.geom.radius, settings.random_layouts, settings.ga.seed)?;
        let power = ProblemSpec {
            p_lim_w: best.p_lim_w,
            ..problem.clone()
        }
        .power(&settings.power);
        let scores: Vec<Result<f64>> = par::map(&layouts, |c| {
            let layout = FarmLayout::new(c.clone())?;
            Ok(evaluate_design(local, &d.geom, &d.control, &layout, weights, &power)?.p_v)
        });
        let mut p_v = scores.into_iter().collect::<Result<Vec<f64>>>()?;
        p_v.sort_by(f64::total_cmp);
        let beaten = p_v.iter().filter(|v| **v <= best.result.refined.p_v).count();
        Some(LayoutBaseline {
            percentile: beaten as f64 / p_v.len() as f64,
            p_v,
        })
    } else {
        None
    };
    Ok(CaseReport {
        case: id,
        problem,
        global_source: global.id(),
        local_source: local.id(),
        runs,
        sweep,
        baseline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbRow {
    pub dx: f64,
    pub dy: f64,
    pub feasible: bool,
    pub p_v: Option<f64>,
}

/// Moves WEC `wec` to `n` uniform random points of the disc of `radius`
/// about its position, keeping the others fixed. Moves that break the
/// spacing constraint are recorded as infeasible and not evaluated.
pub fn perturb_sensitivity(
    problem: &ProblemSpec,
    x: &[f64],
    wec: usize,
    radius: f64,
    n: usize,
    seed: u64,
    eval: &Evaluator,
) -> Result<Vec<PerturbRow>> {
    let d = problem.decode(x)?;
    if wec >= d.centers.len() {
        return Err(invalid(format!("WEC index {wec} out of range")));
    }
    if !(radius >= 0.0) {
        return Err(invalid("perturbation radius must be non-negative"));
    }
    let mut r = rng::stream(seed, 0x9e);
    let moves: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let rho = radius * r.random::<f64>().sqrt();
            let phi = r.random_range(0.0..std::f64::consts::TAU);
            (rho * phi.cos(), rho * phi.sin())
        })
        .collect();
    let rows = par::map(&moves, |&(dx, dy)| -> Result<PerturbRow> {
        let mut c = d.centers.clone();
        c[wec] = (c[wec].0 + dx, c[wec].1 + dy);
        let feasible = pair_residuals(&c, d.geom.radius, problem.safety_distance).iter().all(|v| *v <= 0.0);
        let p_v = if feasible {
            let layout = FarmLayout::new(c)?;
            let power = problem.power(eval.power);
            Some(evaluate_design(eval.source, &d.geom, &d.control, &layout, eval.weights, &power)?.p_v)
        } else {
            None
        };
        Ok(PerturbRow { dx, dy, feasible, p_v })
    });
    rows.into_iter().collect()
}

/// Writes `dx_m,dy_m,feasible,p_v` (empty `p_v` for infeasible rows).
pub fn write_perturb_csv(path: impl AsRef<Path>, rows: &[PerturbRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["dx_m", "dy_m", "feasible", "p_v"])?;
    for r in rows {
        w.write_record([
            r.dx.to_string(),
            r.dy.to_string(),
            r.feasible.to_string(),
            r.p_v.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
