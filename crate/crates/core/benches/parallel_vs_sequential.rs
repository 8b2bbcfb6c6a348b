use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wecfarm::climate::ClimateModel;
use wecfarm::farm::{evaluate_design, ClimateWeights, ControlParams, PowerConfig};
use wecfarm::hydro::{FrequencyGrid, Oracle, WecGeometry};
use wecfarm::mbe::{FarmLayout, HydroSource};
use wecfarm::{par, rng};

type Design = (WecGeometry, ControlParams, FarmLayout);

fn designs(n: usize, n_wec: usize) -> Vec<Design> {
    let mut r = rng::stream(11, 0);
    (0..n)
        .map(|_| {
            let (g, c, l) = wecfarm::report::random_design(n_wec, &mut r).unwrap();
            (g, c, FarmLayout::new(l).unwrap())
        })
        .collect()
}

fn farm_evaluations(c: &mut Criterion) {
    let power = PowerConfig::default();
    let climate = ClimateModel::single_state(2.0, 8.0).unwrap();
    let mut group = c.benchmark_group("farm_evaluations");
    group.sample_size(10);
    for (name, oracle) in [
        ("toy", Oracle::toy(FrequencyGrid::default()).unwrap()),
        ("reference", Oracle::reference(FrequencyGrid::default()).unwrap()),
    ] {
        let w = ClimateWeights::new(&climate, oracle.grid(), &power).unwrap();
        let ds = designs(32, 5);
        let eval = |d: &Design| evaluate_design(&oracle, &d.0, &d.1, &d.2, &w, &power).unwrap().p_v;
        // Fill the isolated-body cache so both arms time the same work.
        par::map_seq(&ds, eval);
        group.bench_with_input(BenchmarkId::new("parallel", name), &ds, |b, ds| {
            b.iter(|| black_box(par::map(ds, eval)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", name), &ds, |b, ds| {
            b.iter(|| black_box(par::map_seq(ds, eval)))
        });
    }
    group.finish();
}

fn pool_scoring(c: &mut Criterion) {
    use wecfarm::surrogate::{init_committee, DesignSpace, NetSpec};
    let committee = init_committee("b", NetSpec::new(2, 100), 10, 3).unwrap();
    let pool = DesignSpace::OneBody.pool(4096, 5);
    let chunks: Vec<&[Vec<f64>]> = pool.chunks(256).collect();
    let mut group = c.benchmark_group("committee_predictions");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(par::map(&chunks, |x| committee.predict_quiet(x).score())))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(par::map_seq(&chunks, |x| committee.predict_quiet(x).score())))
    });
    group.finish();
}

criterion_group!(benches, farm_evaluations, pool_scoring);
criterion_main!(benches);
