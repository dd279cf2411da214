//! Sequential vs rayon execution of the per-node sweeps and of a full solve.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use degenerate_ma::domain::{DomainSpec, GridOptions};
use degenerate_ma::masolve::{
    default_disc, linearized_ma, ma_all, solve, BoundaryData, GridFunction, ProblemSpec, ScaleFn, SolverOptions, Stencil,
    Weight,
};
use degenerate_ma::par::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn operator_sweeps(c: &mut Criterion) {
    let d = DomainSpec::disk(vec![0.0, 0.5], 0.5, 0.25).unwrap();
    let disc = default_disc(&d, 1.0 / 256.0, 2).unwrap();
    let u = GridFunction::from_fn(&disc, |x| 0.5 * x[0] * x[0] + x[1] * x[1]);
    let mut g = c.benchmark_group("ma_sweep");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("ma_all", name), &exec, |b, &e| b.iter(|| ma_all(&u, e)));
        g.bench_with_input(BenchmarkId::new("jacobian", name), &exec, |b, &e| b.iter(|| linearized_ma(&u, e)));
    }
    g.finish();
}

fn full_solve(c: &mut Criterion) {
    let d = DomainSpec::disk(vec![0.0, 0.5], 0.5, 0.25).unwrap();
    let p = ProblemSpec::new(d, 0.5, Weight::Distance, ScaleFn::Constant(1.0), BoundaryData::Tangential { kappa: 1.0, slope: vec![] })
        .unwrap();
    let st = Stencil::new(2, 2).unwrap();
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = SolverOptions { exec, grid: GridOptions { exec, ..GridOptions::default() }, ..SolverOptions::default() };
        g.bench_with_input(BenchmarkId::new("disk_1_64", name), &opts, |b, o| b.iter(|| solve(&p, 1.0 / 64.0, &st, o).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, operator_sweeps, full_solve);
criterion_main!(benches);
