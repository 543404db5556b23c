use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use imd_core::engine::{run_imd, ImdConfig};
use imd_core::harness::{build_benchmark, build_scene, ExperimentConfig};
use imd_core::par::Execution;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn imd_loop(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    let scene = build_scene(&cfg, 0, cfg.target_rate).unwrap();
    let gen = scene.oracle(cfg.oracle);
    let mut group = c.benchmark_group("run_imd");
    for samples in [5u32, 16] {
        let imd = ImdConfig { samples, ..cfg.imd };
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, samples), &imd, |b, imd| {
                b.iter(|| run_imd(&scene, &gen, &cfg.segmenter, imd, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn benchmark_build(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        scene_count: 16,
        ..Default::default()
    };
    let mut group = c.benchmark_group("build_benchmark");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| build_benchmark(&cfg, cfg.target_rate, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, imd_loop, benchmark_build);
criterion_main!(benches);
