//! Ground-truth hydrodynamic coefficients for isolated cylinders and
//! cylinder pairs.
//!
//! Two backends share one interface: the eigenfunction-matching reference
//! solver with a large-spacing (plane-wave) pair model, and a closed-form
//! toy fixture. All one- and two-body outputs are normalised:
//! `Ã = A/(ρπR³)`, `B̃ = B/(ωρπR³)`, `F̃e = Fe/(ρgπR²D)`.

pub mod eigen;
pub mod toy;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use puruspe::{Jn, Yn};
use serde::{Deserialize, Serialize};

use crate::climate::dispersion;
use crate::error::{invalid, Error, Result};
use crate::mbe::{self, FarmLayout, HydroSource, HydroTable, PairTerms};
use crate::par;

pub const WATER_DENSITY: f64 = 1025.0;

/// Uniform vertical cylinder. The draft is derived as radius/slenderness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WecGeometry {
    pub radius: f64,
    pub slenderness: f64,
    pub draft: f64,
}

impl WecGeometry {
    pub const RADIUS: (f64, f64) = (0.5, 10.0);
    pub const SLENDERNESS: (f64, f64) = (0.2, 10.0);
    pub const DRAFT: (f64, f64) = (0.5, 20.0);

    pub fn new(radius: f64, slenderness: f64) -> Result<Self> {
        let g = Self::unchecked(radius, slenderness);
        g.check()?;
        Ok(g)
    }

    /// Builds the geometry without enforcing the design bounds.
    pub fn unchecked(radius: f64, slenderness: f64) -> Self {
        Self {
            radius,
            slenderness,
            draft: radius / slenderness,
        }
    }

    pub fn check(&self) -> Result<()> {
        let within = |v: f64, (lo, hi): (f64, f64)| v.is_finite() && v >= lo && v <= hi;
        if within(self.radius, Self::RADIUS)
            && within(self.slenderness, Self::SLENDERNESS)
            && within(self.draft, Self::DRAFT)
        {
            Ok(())
        } else {
            Err(Error::GeometryBounds(format!(
                "R={} m, R/D={}, D={} m",
                self.radius, self.slenderness, self.draft
            )))
        }
    }

    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius * self.draft
    }
}

/// Frequencies and the fluid constants they are evaluated with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub values: Vec<f64>,
    pub depth: f64,
    pub gravity: f64,
    pub density: f64,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self::uniform(0.3, 2.0, 100).expect("default grid is valid")
    }
}

impl FrequencyGrid {
    pub fn new(values: Vec<f64>, depth: f64, gravity: f64, density: f64) -> Result<Self> {
        if values.is_empty() || values[0] <= 0.0 || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("frequencies must be positive and strictly increasing"));
        }
        if !(depth > 0.0 && gravity > 0.0 && density > 0.0) {
            return Err(invalid("depth, gravity, and density must be positive"));
        }
        Ok(Self {
            values,
            depth,
            gravity,
            density,
        })
    }

    /// `n` evenly spaced frequencies on `[lo, hi]` in 50 m of sea water.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo > 0.0 && hi >= lo) || (n > 1 && hi == lo) {
            return Err(invalid(format!("bad frequency range [{lo}, {hi}] with {n} points")));
        }
        let values = if n == 1 {
            vec![lo]
        } else {
            (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    (1.0 - t) * lo + t * hi
                })
                .collect()
        };
        Self::new(values, 50.0, 9.81, WATER_DENSITY)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Quadrature width of each frequency: half the distance to each
    /// neighbour, with the end cells mirrored so a uniform grid gets a
    /// constant spacing. A single frequency gets unit width.
    pub fn spacing(&self) -> Vec<f64> {
        let v = &self.values;
        let n = v.len();
        if n == 1 {
            return vec![1.0];
        }
        (0..n)
            .map(|i| {
                if i == 0 {
                    v[1] - v[0]
                } else if i == n - 1 {
                    v[n - 1] - v[n - 2]
                } else {
                    0.5 * (v[i + 1] - v[i - 1])
                }
            })
            .collect()
    }

    pub fn wavenumbers(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|&w| dispersion(w, self.depth, self.gravity))
            .collect()
    }

    pub fn check_same(&self, other: &FrequencyGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{} vs {} frequencies or differing fluid constants",
                self.len(),
                other.len()
            )))
        }
    }
}

/// Normalised isolated-body coefficients, one entry per grid frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneBodyOutputs {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub fe_re: Vec<f64>,
    pub fe_im: Vec<f64>,
}

impl OneBodyOutputs {
    pub fn fe(&self, i: usize) -> Complex64 {
        Complex64::new(self.fe_re[i], self.fe_im[i])
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Normalised coefficients of body 1 in a pair: body 1 at the origin, body 2
/// at distance `l` and angle `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutputs {
    pub a11: Vec<f64>,
    pub a12: Vec<f64>,
    pub b11: Vec<f64>,
    pub b12: Vec<f64>,
    pub fe1_re: Vec<f64>,
    pub fe1_im: Vec<f64>,
}

impl PairOutputs {
    pub fn fe1(&self, i: usize) -> Complex64 {
        Complex64::new(self.fe1_re[i], self.fe1_im[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Reference,
    Toy,
}

impl BackendKind {
    pub fn name(&self) -> &'static str {
        match self {
            BackendKind::Reference => "reference",
            BackendKind::Toy => "toy",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(BackendKind::Reference),
            "toy" => Ok(BackendKind::Toy),
            other => Err(Error::Config(format!("unknown hydro backend `{other}`"))),
        }
    }
}

struct Isolated {
    outputs: OneBodyOutputs,
    /// Far-field scattering strength in normalised force units.
    sigma: Vec<f64>,
}

const CACHE_LIMIT: usize = 4096;

/// Hydrodynamic oracle bound to one frequency grid.
///
/// Isolated-body solutions are memoised per geometry, so repeated pair
/// evaluations at a fixed geometry only pay for the Bessel interaction terms.
pub struct Oracle {
    kind: BackendKind,
    modes: usize,
    grid: FrequencyGrid,
    wavenumbers: Vec<f64>,
    roots: Vec<Vec<f64>>,
    cache: Mutex<HashMap<(u64, u64), Arc<Isolated>>>,
}

impl std::fmt::Debug for Oracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Oracle")
            .field("kind", &self.kind)
            .field("modes", &self.modes)
            .field("frequencies", &self.grid.len())
            .finish()
    }
}

impl Oracle {
    pub fn new(kind: BackendKind, modes: usize, grid: FrequencyGrid) -> Result<Self> {
        if modes < 2 {
            return Err(invalid("hydro.modes must be at least 2"));
        }
        let wavenumbers = grid.wavenumbers()?;
        let roots = match kind {
            BackendKind::Reference => grid
                .values
                .iter()
                .map(|&w| eigen::evanescent_roots(w, grid.depth, grid.gravity, modes - 1))
                .collect(),
            BackendKind::Toy => Vec::new(),
        };
        Ok(Self {
            kind,
            modes,
            grid,
            wavenumbers,
            roots,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn reference(grid: FrequencyGrid) -> Result<Self> {
        Self::new(BackendKind::Reference, 40, grid)
    }

    pub fn toy(grid: FrequencyGrid) -> Result<Self> {
        Self::new(BackendKind::Toy, 40, grid)
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    fn isolated(&self, geom: &WecGeometry) -> Result<Arc<Isolated>> {
        geom.check()?;
        let key = (geom.radius.to_bits(), geom.slenderness.to_bits());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let solved = Arc::new(self.solve_isolated(geom)?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, solved.clone());
        Ok(solved)
    }

    fn solve_isolated(&self, geom: &WecGeometry) -> Result<Isolated> {
        let grid = &self.grid;
        let (r, d) = (geom.radius, geom.draft);
        let n = grid.len();
        let mut out = OneBodyOutputs {
            a: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            fe_re: Vec::with_capacity(n),
            fe_im: Vec::with_capacity(n),
        };
        let mut sigma = Vec::with_capacity(n);
        match self.kind {
            BackendKind::Toy => {
                for &w in &grid.values {
                    let s = toy::frequency_scale(w, r, grid.gravity);
                    let fe = toy::excitation(s, d);
                    out.a.push(toy::added_mass(s, geom.slenderness));
                    out.b.push(toy::damping(s, geom.slenderness));
                    out.fe_re.push(fe.re);
                    out.fe_im.push(fe.im);
                    sigma.push(toy::scattering_strength(s));
                }
            }
            BackendKind::Reference => {
                let solved = par::map_range(n, |i| {
                    eigen::solve_with_roots(
                        r,
                        d,
                        grid.values[i],
                        self.wavenumbers[i],
                        &self.roots[i],
                        grid.depth,
                        grid.gravity,
                        grid.density,
                    )
                });
                for (i, c) in solved.into_iter().enumerate() {
                    let c = c?;
                    let w = grid.values[i];
                    let fe = c.excitation / force_scale(geom, grid);
                    out.a.push(c.added_mass / mass_scale(geom, grid));
                    out.b.push(c.damping / (w * mass_scale(geom, grid)));
                    out.fe_re.push(fe.re);
                    out.fe_im.push(fe.im);
                    sigma.push(c.alpha0.norm() * fe.norm());
                }
            }
        }
        Ok(Isolated { outputs: out, sigma })
    }

    pub fn single_body(&self, geom: &WecGeometry) -> Result<OneBodyOutputs> {
        Ok(self.isolated(geom)?.outputs.clone())
    }

    /// Far-field scattering strength σ(ω) used by the pair excitation model.
    pub fn scattering_strength(&self, geom: &WecGeometry) -> Result<Vec<f64>> {
        Ok(self.isolated(geom)?.sigma.clone())
    }

    pub fn pair_body(&self, geom: &WecGeometry, l: f64, theta: f64) -> Result<PairOutputs> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(invalid(format!("pair distance must be positive, got {l}")));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(invalid(format!("pair angle {theta} outside [0, pi]")));
        }
        let iso = self.isolated(geom)?;
        let o = &iso.outputs;
        let n = self.grid.len();
        let mut out = PairOutputs {
            a11: o.a.clone(),
            a12: Vec::with_capacity(n),
            b11: o.b.clone(),
            b12: Vec::with_capacity(n),
            fe1_re: Vec::with_capacity(n),
            fe1_im: Vec::with_capacity(n),
        };
        let phase0 = -0.75 * std::f64::consts::PI;
        for i in 0..n {
            let kl = self.wavenumbers[i] * l;
            out.a12.push(-o.b[i] * Yn(0, kl));
            out.b12.push(o.b[i] * Jn(0, kl));
            let spread = iso.sigma[i] * (2.0 / (std::f64::consts::PI * kl)).sqrt();
            let fe = o.fe(i) + Complex64::from_polar(spread, kl + phase0 - kl * theta.cos());
            out.fe1_re.push(fe.re);
            out.fe1_im.push(fe.im);
        }
        Ok(out)
    }

    /// Assembles farm matrices directly in dimensional units from isolated
    /// and pair evaluations, without going through [`mbe::compose_farm`].
    pub fn farm_direct(&self, geom: &WecGeometry, layout: &FarmLayout) -> Result<HydroTable> {
        let grid = &self.grid;
        let n = layout.len();
        let iso = self.isolated(geom)?;
        let mut pairs = Vec::new();
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    let (l, theta) = mbe::pair_features(layout.centers[p], layout.centers[q])?;
                    pairs.push((p, q, self.pair_body(geom, l, theta)?));
                }
            }
        }
        let ms = mass_scale(geom, grid);
        let fs = force_scale(geom, grid);
        let mut table = HydroTable::with_capacity(grid, &self.wavenumbers, n);
        for (i, &w) in grid.values.iter().enumerate() {
            let a_iso = iso.outputs.a[i] * ms;
            let b_iso = iso.outputs.b[i] * w * ms;
            let fe_iso = iso.outputs.fe(i) * fs;
            let mut a = DMatrix::from_diagonal_element(n, n, a_iso);
            let mut b = DMatrix::from_diagonal_element(n, n, b_iso);
            let mut fe = DVector::from_element(n, fe_iso);
            for (p, q, pair) in &pairs {
                a[(*p, *p)] += pair.a11[i] * ms - a_iso;
                b[(*p, *p)] += pair.b11[i] * w * ms - b_iso;
                a[(*p, *q)] = pair.a12[i] * ms;
                b[(*p, *q)] = pair.b12[i] * w * ms;
                fe[*p] += pair.fe1(i) * fs - fe_iso;
            }
            let k = self.wavenumbers[i];
            for (p, &(x, _)) in layout.centers.iter().enumerate() {
                fe[p] *= Complex64::from_polar(1.0, -k * x);
            }
            table.push(mbe::symmetrize(&a), mbe::symmetrize(&b), fe);
        }
        Ok(table)
    }
}

impl HydroSource for Oracle {
    fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    fn id(&self) -> String {
        format!("{}-m{}", self.kind.name(), self.modes)
    }

    fn one_body(&self, geom: &WecGeometry) -> Result<OneBodyOutputs> {
        self.single_body(geom)
    }

    fn pair_terms(&self, geom: &WecGeometry, l: f64, theta: f64) -> Result<PairTerms> {
        let iso = self.isolated(geom)?;
        let pair = self.pair_body(geom, l, theta)?;
        mbe::additive_terms(&iso.outputs, &pair)
    }
}

/// ρπR³, the added-mass scale.
pub fn mass_scale(geom: &WecGeometry, grid: &FrequencyGrid) -> f64 {
    grid.density * std::f64::consts::PI * geom.radius.powi(3)
}

/// ρgπR²D, the excitation scale.
pub fn force_scale(geom: &WecGeometry, grid: &FrequencyGrid) -> f64 {
    grid.density * grid.gravity * std::f64::consts::PI * geom.radius.powi(2) * geom.draft
}

pub fn write_one_body_csv(path: impl AsRef<Path>, grid: &FrequencyGrid, out: &OneBodyOutputs) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["omega", "a", "b", "fe_re", "fe_im"])?;
    for (i, omega) in grid.values.iter().enumerate() {
        w.write_record(
            [*omega, out.a[i], out.b[i], out.fe_re[i], out.fe_im[i]]
                .iter()
                .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pair_csv(path: impl AsRef<Path>, grid: &FrequencyGrid, out: &PairOutputs) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["omega", "a11", "a12", "b11", "b12", "fe1_re", "fe1_im"])?;
    for (i, omega) in grid.values.iter().enumerate() {
        w.write_record(
            [
                *omega,
                out.a11[i],
                out.a12[i],
                out.b11[i],
                out.b12[i],
                out.fe1_re[i],
                out.fe1_im[i],
            ]
            .iter()
            .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}
