use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use twave_bench::{load, CONVECTION, DEGENERATE, FISHER};
use twave_core::bvp::{solve_bvp, BvpOptions};
use twave_core::coefficients::average_stats;
use twave_core::profile::{reconstruct, ZGrid};
use twave_core::regularization::regularize_model;
use twave_core::wave_speed::find_c_star;

fn bvp(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_bvp");
    let opts = BvpOptions::default();
    for (name, src, speed) in [("fisher", FISHER, 2.5), ("convection", CONVECTION, 3.0)] {
        let m = load(src);
        group.bench_with_input(BenchmarkId::from_parameter(name), &speed, |b, &s| {
            b.iter(|| solve_bvp(&m, black_box(s), &opts).unwrap())
        });
    }
    group.finish();
}

fn stats(c: &mut Criterion) {
    let m = load(CONVECTION);
    c.bench_function("average_stats/convection", |b| b.iter(|| average_stats(black_box(&m)).unwrap()));
}

fn speed(c: &mut Criterion) {
    let mut group = c.benchmark_group("find_c_star");
    group.sample_size(10);
    for (name, src) in [("fisher", FISHER), ("degenerate", DEGENERATE)] {
        let m = load(src);
        let s = average_stats(&m).unwrap();
        group.bench_function(name, |b| b.iter(|| find_c_star(&m, &s, 1e-3).unwrap()));
    }
    group.finish();
}

fn profile(c: &mut Criterion) {
    let m = load(DEGENERATE);
    let y = solve_bvp(&m, std::f64::consts::FRAC_1_SQRT_2, &BvpOptions::default())
        .unwrap()
        .solution()
        .cloned()
        .unwrap();
    c.bench_function("reconstruct/degenerate", |b| {
        b.iter(|| reconstruct(&m, &y, &ZGrid::default()).unwrap())
    });
}

fn regularized(c: &mut Criterion) {
    let m = load(CONVECTION);
    c.bench_function("regularize_model/convection", |b| {
        b.iter(|| regularize_model(&m, black_box(0.01)).unwrap())
    });
}

criterion_group!(benches, bvp, stats, speed, profile, regularized);
criterion_main!(benches);
