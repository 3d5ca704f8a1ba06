use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rssm::model::LatentState;
use rssm::sampler::{draw_signal, sweep};
use rssm::Priors;
use rssm_bench::{chromosome, rng};

fn signal_draw(c: &mut Criterion) {
    let mut group = c.benchmark_group("draw_signal");
    let priors = Priors::default();
    for j in [100, 1_000, 10_000] {
        let series = chromosome(j);
        let state = LatentState::initial(&series, &priors);
        let mut r = rng();
        group.throughput(Throughput::Elements(j as u64));
        group.bench_with_input(BenchmarkId::from_parameter(j), &j, |b, _| {
            b.iter(|| draw_signal(&series, &state, &priors, &mut r).unwrap())
        });
    }
    group.finish();
}

fn gibbs_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    let priors = Priors::default();
    for j in [100, 1_000] {
        let series = chromosome(j);
        let gaps = series.gaps();
        let mut state = LatentState::initial(&series, &priors);
        let mut r = rng();
        group.throughput(Throughput::Elements(j as u64));
        group.bench_with_input(BenchmarkId::from_parameter(j), &j, |b, _| {
            b.iter(|| sweep(&series, &gaps, &mut state, &priors, &mut r).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, signal_draw, gibbs_sweep);
criterion_main!(benches);
