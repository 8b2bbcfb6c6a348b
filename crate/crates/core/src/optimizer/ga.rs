use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{max_violation, values, Objective, SearchOutcome};
use crate::error::{Error, Result};
use crate::par;
use crate::rng;

/// Residuals up to this value count as satisfied.
pub(crate) const FEASIBLE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaOptions {
    /// `20·n_vars` capped at 400 when absent.
    pub population: Option<usize>,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// BLX-α extension on each side of the parents' interval.
    pub blend_alpha: f64,
    /// Per-gene mutation probability; `1/n_vars` when absent.
    pub mutation_rate: Option<f64>,
    /// Standard deviation of Gaussian mutation, unit-cube units.
    pub mutation_sigma: f64,
    pub elite: usize,
    pub seed: u64,
}

impl Default for GaOptions {
    fn default() -> Self {
        Self {
            population: None,
            generations: 100,
            tournament: 2,
            crossover_rate: 0.9,
            blend_alpha: 0.5,
            mutation_rate: None,
            mutation_sigma: 0.1,
            elite: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Individual {
    u: Vec<f64>,
    violation: f64,
    value: f64,
}

impl Individual {
    fn feasible(&self) -> bool {
        self.violation <= FEASIBLE
    }

    /// Feasibility rule: feasible beats infeasible, feasible pairs compare by
    /// objective, infeasible pairs by violation.
    fn beats(&self, other: &Individual) -> bool {
        match (self.feasible(), other.feasible()) {
            (true, true) => self.value > other.value,
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.violation < other.violation,
        }
    }
}

fn rank(a: &Individual, b: &Individual) -> std::cmp::Ordering {
    if a.beats(b) {
        std::cmp::Ordering::Less
    } else if b.beats(a) {
        std::cmp::Ordering::Greater
    } else {
        std::cmp::Ordering::Equal
    }
}

fn assess(obj: &dyn Objective, us: Vec<Vec<f64>>) -> (Vec<Individual>, usize) {
    let viol: Vec<f64> = par::map(&us, |u| max_violation(&obj.residuals(u)));
    let feasible: Vec<usize> = (0..us.len()).filter(|&i| viol[i] <= FEASIBLE).collect();
    let pts: Vec<Vec<f64>> = feasible.iter().map(|&i| us[i].clone()).collect();
    let vals = values(obj, &pts);
    let mut value = vec![f64::NEG_INFINITY; us.len()];
    let mut violation = viol;
    for (&i, v) in feasible.iter().zip(vals) {
        match v {
            Ok(v) if v.is_finite() => value[i] = v,
            _ => violation[i] = f64::MAX,
        }
    }
    let n = pts.len();
    let pop = us
        .into_iter()
        .zip(violation.into_iter().zip(value))
        .map(|(u, (violation, value))| Individual { u, violation, value })
        .collect();
    (pop, n)
}

/// Real-coded genetic algorithm maximising `obj` on the unit cube:
/// tournament selection under the feasibility rule, BLX-α crossover,
/// Gaussian mutation, and elitism. Only feasible individuals are passed to
/// [`Objective::value`].
pub fn ga_search(obj: &dyn Objective, opts: &GaOptions) -> Result<SearchOutcome> {
    let n = obj.dim();
    let size = opts.population.unwrap_or((20 * n).min(400)).max(4);
    let elite = opts.elite.min(size);
    let pm = opts.mutation_rate.unwrap_or(1.0 / n as f64);
    let noise = Normal::new(0.0, opts.mutation_sigma.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut r = rng::stream(opts.seed, 0x6a);

    let init: Vec<Vec<f64>> = (0..size)
        .map(|_| {
            let u: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            obj.repair(&u, &mut r)
        })
        .collect();
    let (mut pop, mut evaluations) = assess(obj, init);
    let mut best: Option<Individual> = None;
    let mut history = Vec::new();

    let update = |pop: &[Individual], best: &mut Option<Individual>, history: &mut Vec<f64>| {
        for ind in pop.iter().filter(|i| i.feasible()) {
            if best.as_ref().is_none_or(|b| ind.value > b.value) {
                *best = Some(ind.clone());
            }
        }
        if let Some(b) = best {
            history.push(b.value);
        }
    };
    update(&pop, &mut best, &mut history);

    for _ in 0..opts.generations {
        pop.sort_by(rank);
        let mut next: Vec<Vec<f64>> = pop[..elite].iter().map(|i| i.u.clone()).collect();
        let n_children = size - elite;
        let mut children = Vec::with_capacity(n_children);
        while children.len() < n_children {
            let mut pick = || {
                let mut w = r.random_range(0..size);
                for _ in 1..opts.tournament.max(1) {
                    let c = r.random_range(0..size);
                    if pop[c].beats(&pop[w]) {
                        w = c;
                    }
                }
                w
            };
            let (a, b) = (pick(), pick());
            let (mut c1, mut c2) = (pop[a].u.clone(), pop[b].u.clone());
            if r.random::<f64>() < opts.crossover_rate {
                for i in 0..n {
                    let (lo, hi) = (pop[a].u[i].min(pop[b].u[i]), pop[a].u[i].max(pop[b].u[i]));
                    let ext = opts.blend_alpha * (hi - lo);
                    let (lo, hi) = (lo - ext, hi + ext);
                    c1[i] = if hi > lo { r.random_range(lo..=hi) } else { lo }.clamp(0.0, 1.0);
                    c2[i] = if hi > lo { r.random_range(lo..=hi) } else { lo }.clamp(0.0, 1.0);
                }
            }
            for c in [&mut c1, &mut c2] {
                for v in c.iter_mut() {
                    if r.random::<f64>() < pm {
                        *v = (*v + noise.sample(&mut r)).clamp(0.0, 1.0);
                    }
                }
            }
            children.push(obj.repair(&c1, &mut r));
            if children.len() < n_children {
                children.push(obj.repair(&c2, &mut r));
            }
        }
        let (kids, e) = assess(obj, children);
        evaluations += e;
        let elites: Vec<Individual> = pop.drain(..elite).collect();
        next.clear();
        pop = elites.into_iter().chain(kids).collect();
        update(&pop, &mut best, &mut history);
    }

    match best {
        Some(b) => Ok(SearchOutcome {
            u: b.u,
            value: b.value,
            history,
            evaluations,
            stationary: false,
        }),
        None => {
            let least = pop.iter().map(|i| i.violation).fold(f64::INFINITY, f64::min);
            Err(Error::Infeasible(format!(
                "no feasible individual in {} generations of {size}; smallest violation {least:.3e}",
                opts.generations
            )))
        }
    }
}
