use proptest::prelude::*;

use wecfarm::climate::{dispersion, fit_climate, jonswap, synth_climate, ClimateModel, FitOptions, SyntheticSite, GRAVITY};
use wecfarm::farm::{evaluate_design, power_response, sea_state_power, ClimateWeights, ControlParams, PowerConfig};
use wecfarm::hydro::{FrequencyGrid, Oracle, WecGeometry};
use wecfarm::mbe::{compose_farm, FarmLayout, HydroSource};
use wecfarm::optimizer::{constraints, max_violation, ProblemSpec};

fn toy() -> Oracle {
    Oracle::toy(FrequencyGrid::default()).unwrap()
}

fn layout_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    // Jittered grid points keep every pair at least 15 m apart.
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), n).prop_map(|jitter| {
        jitter
            .iter()
            .enumerate()
            .map(|(i, (dx, dy))| ((i % 3) as f64 * 25.0 + dx, (i / 3) as f64 * 25.0 + dy))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dispersion_increases_with_frequency(w in 0.05..5.0f64, dw in 1e-3..1.0f64, h in 1.0..500.0f64) {
        let a = dispersion(w, h, GRAVITY).unwrap();
        let b = dispersion(w + dw, h, GRAVITY).unwrap();
        prop_assert!(b > a);
        prop_assert!((GRAVITY * a * (a * h).tanh() - w * w).abs() <= 1e-10 * w * w);
    }

    #[test]
    fn jonswap_is_nonnegative(hs in 0.25..10.0f64, tp in 3.0..17.0f64, w in 0.0..20.0f64) {
        let s = jonswap(hs, tp, w).unwrap();
        prop_assert!(s >= 0.0 && s.is_finite());
    }

    #[test]
    fn geometry_draft_times_slenderness_is_radius(r in 0.5..10.0f64, s in 0.2..10.0f64) {
        let g = WecGeometry::unchecked(r, s);
        prop_assert!((g.draft * g.slenderness - g.radius).abs() <= 1e-12 * r);
    }

    #[test]
    fn composed_matrices_are_symmetric_with_nonnegative_damping(
        r in 1.0..5.0f64,
        d in 0.5..4.0f64,
        centers in layout_strategy(5),
    ) {
        let geom = WecGeometry::new(r, r / d).unwrap();
        let t = compose_farm(&geom, &FarmLayout::new(centers).unwrap(), &toy()).unwrap();
        for (a, b) in t.added_mass.iter().zip(&t.damping) {
            prop_assert_eq!(a, &a.transpose());
            prop_assert_eq!(b, &b.transpose());
            for p in 0..b.nrows() {
                prop_assert!(b[(p, p)] >= 0.0);
            }
        }
    }

    #[test]
    fn reflection_leaves_the_table_unchanged(centers in layout_strategy(4)) {
        let geom = WecGeometry::new(2.0, 1.0).unwrap();
        let layout = FarmLayout::new(centers).unwrap();
        let a = compose_farm(&geom, &layout, &toy()).unwrap();
        let b = compose_farm(&geom, &layout.reflected(), &toy()).unwrap();
        for i in 0..a.len() {
            prop_assert!((&a.added_mass[i] - &b.added_mass[i]).abs().max() <= 1e-12 * a.added_mass[i].abs().max());
            prop_assert!((&a.damping[i] - &b.damping[i]).abs().max() <= 1e-12 * a.damping[i].abs().max().max(1e-300));
            for (x, y) in a.excitation[i].iter().zip(b.excitation[i].iter()) {
                prop_assert!((x - y).norm() <= 1e-12 * x.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn power_is_translation_invariant_and_saturation_only_lowers_it(
        centers in layout_strategy(4),
        dx in -500.0..500.0f64,
        dy in -500.0..500.0f64,
        k in -5e4..5e4f64,
        b in 1e3..5e5f64,
        lim in 1e2..1e6f64,
    ) {
        let o = toy();
        let geom = WecGeometry::new(2.0, 1.0).unwrap();
        let control = ControlParams::farm(k, b);
        let layout = FarmLayout::new(centers).unwrap();
        let climate = ClimateModel::single_state(2.0, 8.0).unwrap();
        let free = PowerConfig::default();
        let capped = PowerConfig { p_lim: Some(lim), ..PowerConfig::default() };
        let w = ClimateWeights::new(&climate, o.grid(), &free).unwrap();
        let base = evaluate_design(&o, &geom, &control, &layout, &w, &free).unwrap();
        let moved = evaluate_design(&o, &geom, &control, &layout.translated(dx, dy), &w, &free).unwrap();
        prop_assert!(base.p_a >= 0.0);
        prop_assert!((base.p_v - moved.p_v).abs() <= 1e-10 * base.p_v.abs());

        let table = compose_farm(&geom, &layout, &o).unwrap();
        let resp = power_response(&table, &geom, &control, o.grid()).unwrap();
        prop_assert!(resp.p_m.iter().all(|p| *p >= 0.0 && p.is_finite()));
        let a = sea_state_power(&resp, 2.0, 8.0, o.grid(), &free).unwrap();
        let c = sea_state_power(&resp, 2.0, 8.0, o.grid(), &capped).unwrap();
        prop_assert!(a.p_i >= 0.0);
        prop_assert!(c.p_i <= a.p_i);
    }

    #[test]
    fn equal_device_control_matches_farm_control_bitwise(
        centers in layout_strategy(3),
        k in -5e4..5e4f64,
        b in 1e3..5e5f64,
    ) {
        let o = toy();
        let geom = WecGeometry::new(1.5, 2.0).unwrap();
        let layout = FarmLayout::new(centers).unwrap();
        let climate = ClimateModel::single_state(1.5, 7.0).unwrap();
        let config = PowerConfig::default();
        let w = ClimateWeights::new(&climate, o.grid(), &config).unwrap();
        let farm = evaluate_design(&o, &geom, &ControlParams::farm(k, b), &layout, &w, &config).unwrap();
        let device = ControlParams::device(vec![k; 3], vec![b; 3]);
        let dev = evaluate_design(&o, &geom, &device, &layout, &w, &config).unwrap();
        prop_assert_eq!(farm.p_v.to_bits(), dev.p_v.to_bits());
    }

    #[test]
    fn unit_cube_round_trips_and_decodes_inside_bounds(u in prop::collection::vec(0.0..1.0f64, 12)) {
        let problem = ProblemSpec { n_wec: 5, ..ProblemSpec::default() };
        let u = &u[..problem.n_var()];
        let x = problem.from_unit(u);
        let back = problem.to_unit(&x);
        for (a, b) in u.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let d = problem.decode(&x).unwrap();
        prop_assert_eq!(d.centers[0], (0.0, 0.0));
        prop_assert_eq!(problem.encode(&d), x.clone());
        let r = constraints(&x, &problem).unwrap();
        prop_assert!(max_violation(&r) >= 0.0);
    }
}

#[test]
fn fitted_climate_masses_sum_to_one_per_year() {
    for seed in 0..5 {
        let samples = synth_climate(&SyntheticSite::default(), 3, 200, seed).unwrap();
        let m = fit_climate(&samples, &FitOptions::default()).unwrap();
        for year in &m.prob {
            let total: f64 = year.iter().flatten().sum();
            assert!((total - 1.0).abs() <= 1e-6);
            assert!(year.iter().flatten().all(|p| *p >= 0.0));
        }
        assert_eq!(m.hs_nodes.len(), m.hs_weights.len());
        assert_eq!(m.tp_nodes.len(), m.tp_weights.len());
    }
}

#[test]
fn reference_pair_damping_is_positive_semidefinite() {
    let o = Oracle::reference(FrequencyGrid::default()).unwrap();
    for (r, s, l, theta) in [(0.5, 0.3, 5.0, 0.0), (2.0, 1.0, 14.0, 1.0), (8.0, 6.0, 900.0, 3.0), (4.0, 0.5, 40.0, 2.2)] {
        let geom = WecGeometry::new(r, s).unwrap();
        let one = o.single_body(&geom).unwrap();
        assert!(one.b.iter().all(|b| *b >= 0.0 && b.is_finite()));
        let pair = o.pair_body(&geom, l, theta).unwrap();
        for (b11, b12) in pair.b11.iter().zip(&pair.b12) {
            assert!(b11 + b12 >= 0.0 && b11 - b12 >= -1e-15 * b11.abs());
        }
    }
}
