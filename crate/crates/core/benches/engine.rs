//! Sequential (one worker) against the default pool for the three hot paths.
//! Build with `--no-default-features` to bench the plain sequential loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use wavesync::comovement::{pair_fields, SmoothingSpec};
use wavesync::cwt::{make_scale_grid, transform, MorletParams};
use wavesync::significance::coherence_significance;
use wavesync::synth::gen_paper_sines;

fn pools() -> Vec<(&'static str, usize)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    vec![("sequential", 1), ("parallel", all)]
}

fn engine(c: &mut Criterion) {
    let (x, y) = gen_paper_sines(7);
    let (x, y) = (&x, &y);
    let p = MorletParams::default();
    let g = make_scale_grid(x.len(), 1.0, 2.0, 1.0 / 12.0).unwrap();
    let spec = SmoothingSpec::default();

    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    for (label, threads) in pools() {
        group.bench_function(BenchmarkId::new("transform", label), |b| {
            b.iter(|| wavesync::exec::with_threads(threads, || transform(x, &p, &g).unwrap()))
        });
        group.bench_function(BenchmarkId::new("coherence", label), |b| {
            b.iter(|| wavesync::exec::with_threads(threads, || pair_fields(x, y, &p, &g, &spec).unwrap()))
        });
        group.bench_function(BenchmarkId::new("significance_300", label), |b| {
            b.iter(|| {
                wavesync::exec::with_threads(threads, || coherence_significance(x, y, &p, &g, &spec, 300, 1).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, engine);
criterion_main!(benches);
