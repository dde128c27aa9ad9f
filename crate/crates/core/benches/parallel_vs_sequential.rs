use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use langinc_core::jko::QuantileField;
use langinc_core::metrics::w1_to_gibbs_with;
use langinc_core::par::ExecMode;
use langinc_core::sampler::{run_chains, ChainConfig, SamplerKind};
use langinc_core::{example_potential, GibbsDensity};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn chains(c: &mut Criterion) {
    let p = example_potential();
    let cfg = ChainConfig { epsilon: 1e-3, n_steps: 50_000, init: vec![0.0], ..Default::default() };
    let mut group = c.benchmark_group("ula_8_chains");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_chains(SamplerKind::Ula, &p, &cfg, 8, mode).unwrap())
        });
    }
    group.finish();
}

fn w1_oracle(c: &mut Criterion) {
    let p = example_potential();
    let g = GibbsDensity::new(&p, 1.0, None).unwrap();
    let samples = g.iid_sample(200_000, 3, ExecMode::Sequential);
    let mut group = c.benchmark_group("w1_to_gibbs_200k");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| w1_to_gibbs_with(&samples, &g, mode).unwrap())
        });
    }
    group.finish();
}

fn iid_sampling(c: &mut Criterion) {
    let p = example_potential();
    let g = GibbsDensity::new(&p, 1.0, None).unwrap();
    let mut group = c.benchmark_group("gibbs_iid_100k");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| g.iid_sample(100_000, 9, mode)));
    }
    group.finish();
}

fn gibbs_quantiles(c: &mut Criterion) {
    let p = example_potential();
    let g = GibbsDensity::new(&p, 1.0, None).unwrap();
    c.bench_function("gibbs_quantiles_m2000", |b| b.iter(|| QuantileField::from_gibbs(&g, 2000).unwrap()));
}

criterion_group!(benches, chains, w1_oracle, iid_sampling, gibbs_quantiles);
criterion_main!(benches);
