//! Benchmarks the data-parallel stages (forward drives, sensitivity
//! assembly, per-pixel indicators) on the default rayon pool versus a
//! single-thread pool, to measure what the parallelism buys.

use criterion::{criterion_group, criterion_main, Criterion};

use eit::forward::{self, ConductivityField};
use eit::geometry;
use eit::harness::{self, ExperimentConfig};
use eit::reconstruct::{self, NoiseSpec};
use eit::sensitivity;

fn bench_pipeline(c: &mut Criterion) {
    let config = ExperimentConfig::default();
    let scene = harness::build_scene(&config, 16).unwrap();
    let sigma = harness::phantom_conductivity(
        &scene.forward_mesh,
        harness::PhantomId::ThreeInclusions,
        1.0,
    )
    .unwrap();
    let sigma0_recon = ConductivityField::constant(&scene.recon_mesh, 1.0, "reference").unwrap();
    let partition = geometry::build_pixel_partition(&scene.recon_mesh);
    let delta = 1e-3;
    let noisy = reconstruct::add_noise(&scene.v_true, NoiseSpec::new(delta, 1)).unwrap();

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();

    let mut group = c.benchmark_group("measure_m16");
    group.bench_function("parallel", |b| {
        b.iter(|| forward::measure(&scene.forward_mesh, &scene.forward_layout, &sigma).unwrap())
    });
    group.bench_function("single_thread", |b| {
        b.iter(|| {
            single.install(|| {
                forward::measure(&scene.forward_mesh, &scene.forward_layout, &sigma).unwrap()
            })
        })
    });
    group.finish();

    let mut group = c.benchmark_group("sensitivity_m16");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            sensitivity::assemble_sensitivity(
                &scene.recon_mesh,
                &scene.recon_layout,
                &partition,
                &sigma0_recon,
            )
            .unwrap()
        })
    });
    group.bench_function("single_thread", |b| {
        b.iter(|| {
            single.install(|| {
                sensitivity::assemble_sensitivity(
                    &scene.recon_mesh,
                    &scene.recon_layout,
                    &partition,
                    &sigma0_recon,
                )
                .unwrap()
            })
        })
    });
    group.finish();

    let mut group = c.benchmark_group("beta_indicator_m16");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            reconstruct::beta_indicator(&noisy, &scene.sensitivity, delta, &scene.partition)
                .unwrap()
        })
    });
    group.bench_function("single_thread", |b| {
        b.iter(|| {
            single.install(|| {
                reconstruct::beta_indicator(&noisy, &scene.sensitivity, delta, &scene.partition)
                    .unwrap()
            })
        })
    });
    group.finish();
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
