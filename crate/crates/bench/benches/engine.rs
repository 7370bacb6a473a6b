use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use morrey_lab::duhamel::DuhamelSolver;
use morrey_lab::morrey_norm::morrey_norm;
use morrey_lab::{MorreyParams, RadiusLadder, ScaleIndex};
use morrey_lab_bench::{bump, heat, heat_dims, potential, singular, solver_config};

fn semigroup_apply(c: &mut Criterion) {
    let mut g = c.benchmark_group("semigroup_apply");
    for n in [1024, 4096, 16384] {
        let sg = heat(n);
        let u = bump(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| sg.apply(black_box(&u), 0.01).unwrap()));
    }
    g.finish();
}

fn morrey(c: &mut Criterion) {
    let mut g = c.benchmark_group("morrey_norm");
    let mp = MorreyParams::finite(1.0, 0.5, &heat_dims()).unwrap();
    for n in [1024, 4096] {
        let u = singular(n);
        let ladder = RadiusLadder::standard(&u);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| morrey_norm(black_box(&u), &mp, &ladder)));
    }
    g.finish();
}

fn picard(c: &mut Criterion) {
    let mut g = c.benchmark_group("picard_solve");
    g.sample_size(10);
    let n = 2048;
    let sg = heat(n);
    let u = bump(n);
    for nodes in [64, 256] {
        let s = DuhamelSolver::new(&sg, &[potential()], solver_config(nodes)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(nodes), &nodes, |b, _| {
            b.iter(|| s.picard_solve(black_box(&u), &ScaleIndex::ZERO).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, semigroup_apply, morrey, picard);
criterion_main!(benches);
