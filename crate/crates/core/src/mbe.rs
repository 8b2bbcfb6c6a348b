//! Second-order many-body expansion of farm hydrodynamics.
//!
//! Farm matrices are composed from isolated-body outputs plus additive
//! two-body terms, `A_pp = Ã + Σ_q ΔÃ11(p,q)`, `A_pq = ΔÃ12(p,q)`, and
//! likewise for damping and excitation. Two-body terms are generated with
//! body 1 at the origin; the incident-wave phase `e^{-ik x_p}` is applied
//! here.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hydro::{force_scale, mass_scale, FrequencyGrid, OneBodyOutputs, PairOutputs, WecGeometry};

/// Anything that can supply normalised one-body outputs and two-body
/// additive terms on a fixed frequency grid.
pub trait HydroSource: Sync {
    fn grid(&self) -> &FrequencyGrid;

    /// Short identifier written into artifacts.
    fn id(&self) -> String;

    fn one_body(&self, geom: &WecGeometry) -> Result<OneBodyOutputs>;

    fn pair_terms(&self, geom: &WecGeometry, l: f64, theta: f64) -> Result<PairTerms>;

    /// Evaluates many `(l, theta)` pairs at one geometry.
    fn pair_terms_batch(&self, geom: &WecGeometry, pairs: &[(f64, f64)]) -> Result<Vec<PairTerms>> {
        pairs.iter().map(|&(l, t)| self.pair_terms(geom, l, t)).collect()
    }
}

/// WEC centres in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarmLayout {
    pub centers: Vec<(f64, f64)>,
}

impl FarmLayout {
    pub fn new(centers: Vec<(f64, f64)>) -> Result<Self> {
        if centers.is_empty() {
            return Err(invalid("a farm needs at least one WEC"));
        }
        if centers.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(invalid("WEC centres must be finite"));
        }
        for p in 0..centers.len() {
            for q in p + 1..centers.len() {
                if centers[p] == centers[q] {
                    return Err(invalid(format!("WECs {p} and {q} coincide")));
                }
            }
        }
        Ok(Self { centers })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            centers: self.centers.iter().map(|(x, y)| (x + dx, y + dy)).collect(),
        }
    }

    /// Mirror image across the x axis.
    pub fn reflected(&self) -> Self {
        Self {
            centers: self.centers.iter().map(|(x, y)| (*x, -y)).collect(),
        }
    }

    /// Ordered pairs `(p, q, l, theta)` for all `p != q`.
    pub fn ordered_pairs(&self) -> Result<Vec<(usize, usize, f64, f64)>> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1));
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    let (l, t) = pair_features(self.centers[p], self.centers[q])?;
                    out.push((p, q, l, t));
                }
            }
        }
        Ok(out)
    }
}

/// Distance and folded angle of `q` as seen from `p`.
pub fn pair_features(p: (f64, f64), q: (f64, f64)) -> Result<(f64, f64)> {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let l = dx.hypot(dy);
    if l == 0.0 {
        return Err(invalid("coincident WEC centres"));
    }
    Ok((l, dy.atan2(dx).abs()))
}

/// Farm hydrodynamics per frequency: added mass (kg), damping (kg/s), and
/// excitation per unit wave amplitude (N/m).
#[derive(Debug, Clone, PartialEq)]
pub struct HydroTable {
    pub omega: Vec<f64>,
    pub wavenumber: Vec<f64>,
    pub added_mass: Vec<DMatrix<f64>>,
    pub damping: Vec<DMatrix<f64>>,
    pub excitation: Vec<DVector<Complex64>>,
}

impl HydroTable {
    pub(crate) fn with_capacity(grid: &FrequencyGrid, wavenumber: &[f64], _bodies: usize) -> Self {
        Self {
            omega: grid.values.clone(),
            wavenumber: wavenumber.to_vec(),
            added_mass: Vec::with_capacity(grid.len()),
            damping: Vec::with_capacity(grid.len()),
            excitation: Vec::with_capacity(grid.len()),
        }
    }

    pub(crate) fn push(&mut self, a: DMatrix<f64>, b: DMatrix<f64>, fe: DVector<Complex64>) {
        self.added_mass.push(a);
        self.damping.push(b);
        self.excitation.push(fe);
    }

    /// Number of frequencies.
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn n_bodies(&self) -> usize {
        self.excitation.first().map_or(0, |f| f.len())
    }

    /// Writes one row per frequency and matrix entry:
    /// `omega,p,q,a,b,fe_re,fe_im`, where the excitation columns repeat the
    /// force on body `p`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["omega", "p", "q", "a", "b", "fe_re", "fe_im"])?;
        let n = self.n_bodies();
        for i in 0..self.len() {
            for p in 0..n {
                for q in 0..n {
                    let fe = self.excitation[i][p];
                    w.write_record([
                        self.omega[i].to_string(),
                        p.to_string(),
                        q.to_string(),
                        self.added_mass[i][(p, q)].to_string(),
                        self.damping[i][(p, q)].to_string(),
                        fe.re.to_string(),
                        fe.im.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Added mass, damping, and excitation of one body at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub fe: Complex64,
}

pub fn normalize(raw: Coefficients, geom: &WecGeometry, omega: f64, grid: &FrequencyGrid) -> Result<Coefficients> {
    if !(omega > 0.0) {
        return Err(invalid("damping normalisation needs omega > 0"));
    }
    let ms = mass_scale(geom, grid);
    Ok(Coefficients {
        a: raw.a / ms,
        b: raw.b / (omega * ms),
        fe: raw.fe / force_scale(geom, grid),
    })
}

pub fn denormalize(n: Coefficients, geom: &WecGeometry, omega: f64, grid: &FrequencyGrid) -> Result<Coefficients> {
    if !(omega > 0.0) {
        return Err(invalid("damping normalisation needs omega > 0"));
    }
    let ms = mass_scale(geom, grid);
    Ok(Coefficients {
        a: n.a * ms,
        b: n.b * omega * ms,
        fe: n.fe * force_scale(geom, grid),
    })
}

/// Normalised two-body corrections to body 1, per frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerms {
    pub da11: Vec<f64>,
    pub da12: Vec<f64>,
    pub db11: Vec<f64>,
    pub db12: Vec<f64>,
    pub dfe_re: Vec<f64>,
    pub dfe_im: Vec<f64>,
}

impl PairTerms {
    pub fn dfe(&self, i: usize) -> Complex64 {
        Complex64::new(self.dfe_re[i], self.dfe_im[i])
    }
}

/// Differences between pair outputs and the isolated body. The translation
/// phase is unity because pairs are generated with body 1 at the origin.
pub fn additive_terms(one: &OneBodyOutputs, pair: &PairOutputs) -> Result<PairTerms> {
    let n = one.len();
    let lens = [
        pair.a11.len(),
        pair.a12.len(),
        pair.b11.len(),
        pair.b12.len(),
        pair.fe1_re.len(),
        pair.fe1_im.len(),
    ];
    if lens.iter().any(|&l| l != n) {
        return Err(Error::GridMismatch(format!("one-body has {n} frequencies, pair has {lens:?}")));
    }
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>();
    Ok(PairTerms {
        da11: diff(&pair.a11, &one.a),
        da12: pair.a12.clone(),
        db11: diff(&pair.b11, &one.b),
        db12: pair.b12.clone(),
        dfe_re: diff(&pair.fe1_re, &one.fe_re),
        dfe_im: diff(&pair.fe1_im, &one.fe_im),
    })
}

/// Order-2 composition of farm matrices from `source`.
pub fn compose_farm(geom: &WecGeometry, layout: &FarmLayout, source: &dyn HydroSource) -> Result<HydroTable> {
    let grid = source.grid();
    let k = grid.wavenumbers()?;
    let one = source.one_body(geom)?;
    if one.len() != grid.len() {
        return Err(Error::GridMismatch("one-body output length".into()));
    }
    let pairs = layout.ordered_pairs()?;
    let features: Vec<(f64, f64)> = pairs.iter().map(|&(_, _, l, t)| (l, t)).collect();
    let terms = source.pair_terms_batch(geom, &features)?;
    compose_from_terms(geom, layout, grid, &k, &one, &pairs, &terms)
}

pub(crate) fn compose_from_terms(
    geom: &WecGeometry,
    layout: &FarmLayout,
    grid: &FrequencyGrid,
    k: &[f64],
    one: &OneBodyOutputs,
    pairs: &[(usize, usize, f64, f64)],
    terms: &[PairTerms],
) -> Result<HydroTable> {
    let n = layout.len();
    let ms = mass_scale(geom, grid);
    let fs = force_scale(geom, grid);
    let mut table = HydroTable::with_capacity(grid, k, n);
    for (i, &w) in grid.values.iter().enumerate() {
        let mut a = DMatrix::from_diagonal_element(n, n, one.a[i]);
        let mut b = DMatrix::from_diagonal_element(n, n, one.b[i]);
        let mut fe = DVector::from_element(n, one.fe(i));
        for (&(p, q, _, _), t) in pairs.iter().zip(terms) {
            a[(p, p)] += t.da11[i];
            b[(p, p)] += t.db11[i];
            a[(p, q)] = t.da12[i];
            b[(p, q)] = t.db12[i];
            fe[p] += t.dfe(i);
        }
        a *= ms;
        b *= w * ms;
        for (p, &(x, _)) in layout.centers.iter().enumerate() {
            fe[p] *= fs * Complex64::from_polar(1.0, -k[i] * x);
        }
        table.push(symmetrize(&a), symmetrize(&b), fe);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::Oracle;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::uniform(0.3, 2.0, 15).unwrap()
    }

    #[test]
    fn pair_feature_examples() {
        assert_eq!(pair_features((0.0, 0.0), (10.0, 0.0)).unwrap(), (10.0, 0.0));
        let (l, t) = pair_features((0.0, 0.0), (0.0, 10.0)).unwrap();
        assert_eq!(l, 10.0);
        assert_relative_eq!(t, PI / 2.0);
        assert_eq!(
            pair_features((1.0, 2.0), (4.0, -3.0)).unwrap(),
            pair_features((1.0, 2.0), (4.0, 7.0)).unwrap()
        );
        assert!(pair_features((1.0, 1.0), (1.0, 1.0)).is_err());
    }

    #[test]
    fn normalisation_round_trip() {
        let g = grid();
        let geom = WecGeometry::new(2.0, 1.0).unwrap();
        let raw = Coefficients {
            a: 0.5 * 1025.0 * PI * 8.0,
            b: 1234.5,
            fe: Complex64::new(3.0e4, -2.0e3),
        };
        let n = normalize(raw, &geom, 0.7, &g).unwrap();
        assert_relative_eq!(n.a, 0.5, max_relative = 1e-14);
        let back = denormalize(n, &geom, 0.7, &g).unwrap();
        assert_relative_eq!(back.a, raw.a, max_relative = 1e-12);
        assert_relative_eq!(back.b, raw.b, max_relative = 1e-12);
        assert_relative_eq!(back.fe.re, raw.fe.re, max_relative = 1e-12);
        assert_relative_eq!(back.fe.im, raw.fe.im, max_relative = 1e-12);
        let zero = Coefficients { a: 0.0, b: 0.0, fe: Complex64::new(0.0, 0.0) };
        assert_eq!(normalize(zero, &geom, 1.0, &g).unwrap().fe, Complex64::new(0.0, 0.0));
        assert!(normalize(raw, &geom, 0.0, &g).is_err());
    }

    #[test]
    fn identical_outputs_give_zero_terms() {
        let oracle = Oracle::toy(grid()).unwrap();
        let one = oracle.single_body(&WecGeometry::new(2.0, 1.0).unwrap()).unwrap();
        let pair = PairOutputs {
            a11: one.a.clone(),
            a12: vec![0.0; one.len()],
            b11: one.b.clone(),
            b12: vec![0.0; one.len()],
            fe1_re: one.fe_re.clone(),
            fe1_im: one.fe_im.clone(),
        };
        let t = additive_terms(&one, &pair).unwrap();
        for v in [&t.da11, &t.da12, &t.db11, &t.db12, &t.dfe_re, &t.dfe_im] {
            assert!(v.iter().all(|x| *x == 0.0));
        }
        let mut short = pair.clone();
        short.a12.pop();
        assert!(matches!(additive_terms(&one, &short), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn reference_has_no_diagonal_corrections() {
        let oracle = Oracle::reference(grid()).unwrap();
        let t = oracle.pair_terms(&WecGeometry::new(2.0, 1.0).unwrap(), 20.0, 1.0).unwrap();
        assert!(t.da11.iter().chain(&t.db11).all(|x| *x == 0.0));
    }

    #[test]
    fn swapped_order_gives_effect_on_other_body() {
        let g = grid();
        let oracle = Oracle::reference(g.clone()).unwrap();
        let geom = WecGeometry::new(2.0, 1.0).unwrap();
        let layout = FarmLayout::new(vec![(0.0, 0.0), (12.0, 9.0)]).unwrap();
        let table = compose_farm(&geom, &layout, &oracle).unwrap();
        let (l, theta) = pair_features(layout.centers[1], layout.centers[0]).unwrap();
        let pair = oracle.pair_body(&geom, l, theta).unwrap();
        let k = g.wavenumbers().unwrap();
        for i in 0..g.len() {
            let direct = pair.fe1(i) * force_scale(&geom, &g) * Complex64::from_polar(1.0, -k[i] * 12.0);
            assert!((table.excitation[i][1] - direct).norm() <= 1e-12 * direct.norm());
        }
    }

    #[test]
    fn single_body_composition() {
        let g = grid();
        let oracle = Oracle::toy(g.clone()).unwrap();
        let geom = WecGeometry::new(1.5, 0.5).unwrap();
        let layout = FarmLayout::new(vec![(0.0, 0.0)]).unwrap();
        let table = compose_farm(&geom, &layout, &oracle).unwrap();
        let one = oracle.single_body(&geom).unwrap();
        for (i, &w) in g.values.iter().enumerate() {
            let raw = denormalize(Coefficients { a: one.a[i], b: one.b[i], fe: one.fe(i) }, &geom, w, &g).unwrap();
            assert_relative_eq!(table.added_mass[i][(0, 0)], raw.a, max_relative = 1e-14);
            assert_relative_eq!(table.damping[i][(0, 0)], raw.b, max_relative = 1e-14);
            assert_relative_eq!(table.excitation[i][0].re, raw.fe.re, max_relative = 1e-14);
        }
    }

    fn assert_tables_close(a: &HydroTable, b: &HydroTable, tol: f64) {
        for i in 0..a.len() {
            for (x, y) in a.added_mass[i].iter().zip(b.added_mass[i].iter()) {
                assert!((x - y).abs() <= tol * x.abs().max(y.abs()), "{x} vs {y}");
            }
            for (x, y) in a.damping[i].iter().zip(b.damping[i].iter()) {
                assert!((x - y).abs() <= tol * x.abs().max(y.abs()), "{x} vs {y}");
            }
            for (x, y) in a.excitation[i].iter().zip(b.excitation[i].iter()) {
                assert!((x - y).norm() <= tol * x.norm().max(y.norm()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn composition_matches_direct_assembly() {
        let g = grid();
        for oracle in [Oracle::toy(g.clone()).unwrap(), Oracle::reference(g.clone()).unwrap()] {
            let geom = WecGeometry::new(2.5, 1.2).unwrap();
            let layout =
                FarmLayout::new(vec![(0.0, 0.0), (20.0, 5.0), (-7.0, 30.0), (40.0, -25.0), (15.0, 60.0)]).unwrap();
            let composed = compose_farm(&geom, &layout, &oracle).unwrap();
            let direct = oracle.farm_direct(&geom, &layout).unwrap();
            assert_tables_close(&composed, &direct, 1e-12);
        }
    }

    #[test]
    fn translation_changes_only_phase() {
        let g = grid();
        let oracle = Oracle::reference(g.clone()).unwrap();
        let geom = WecGeometry::new(2.0, 1.0).unwrap();
        let layout = FarmLayout::new(vec![(0.0, 0.0), (20.0, 5.0), (-7.0, 30.0)]).unwrap();
        let shift = 13.0;
        let a = compose_farm(&geom, &layout, &oracle).unwrap();
        let b = compose_farm(&geom, &layout.translated(shift, -4.0), &oracle).unwrap();
        for i in 0..a.len() {
            assert!((&a.added_mass[i] - &b.added_mass[i]).abs().max() <= 1e-12 * a.added_mass[i].abs().max());
            let phase = Complex64::from_polar(1.0, -a.wavenumber[i] * shift);
            for p in 0..3 {
                let want = a.excitation[i][p] * phase;
                assert!((b.excitation[i][p] - want).norm() <= 1e-10 * want.norm());
            }
        }
        let r = compose_farm(&geom, &layout.reflected(), &oracle).unwrap();
        assert_tables_close(&a, &r, 1e-14);
    }

    #[test]
    fn layout_validation() {
        assert!(FarmLayout::new(vec![]).is_err());
        assert!(FarmLayout::new(vec![(1.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(FarmLayout::new(vec![(f64::NAN, 1.0)]).is_err());
    }
}
