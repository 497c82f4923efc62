//! Compares the data-parallel stages against a single-worker run.
//!
//! With the default `parallel` feature the same binary measures a 1-thread
//! rayon pool versus the default pool; build with `--no-default-features`
//! to measure the true sequential fallback code path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pcad::features::{fpfh, intensity_histogram, fuse_multimodal};
use pcad::normals::{estimate_normals, NormalConvention};
use pcad::patchcore::{build_memory, score, CoresetInit};
use pcad::synthgen::{generate, preset};
use pcad::{FeatureMatrix, PointCloud, SpatialIndex};

struct Fixture {
    cloud: PointCloud,
    index: SpatialIndex,
    features: FeatureMatrix,
}

fn fixture() -> Fixture {
    let mut spec = preset("water_only").unwrap();
    spec.spacing = 0.05;
    let pair = generate(&spec).unwrap();
    let cloud = pcad::cloud::voxel_downsample(&pair.reference, 0.05).unwrap();
    let index = SpatialIndex::build(&cloud);
    let normals =
        estimate_normals(&cloud, &index, 0.12, NormalConvention::PlusZ).unwrap();
    let geo = fpfh(&cloud, &normals, &index, 0.3, 30).unwrap();
    let inten =
        intensity_histogram(&cloud, &index, 0.3, 30, Some(&normals.valid)).unwrap();
    let features = fuse_multimodal(&geo, &inten, 1.0).unwrap();
    Fixture {
        cloud,
        index,
        features,
    }
}

fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        return rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(f);
    }
    let _ = workers;
    f()
}

fn bench_stages(c: &mut Criterion) {
    let fx = fixture();
    let variants: &[(&str, Option<usize>)] = if cfg!(feature = "parallel") {
        &[("pool-1", Some(1)), ("pool-default", None)]
    } else {
        &[("sequential", None)]
    };

    let mut group = c.benchmark_group("fpfh");
    for &(name, workers) in variants {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                with_workers(workers, || {
                    let normals = estimate_normals(
                        &fx.cloud,
                        &fx.index,
                        0.12,
                        NormalConvention::PlusZ,
                    )
                    .unwrap();
                    fpfh(&fx.cloud, &normals, &fx.index, 0.3, 30).unwrap()
                })
            })
        });
    }
    group.finish();

    let bank = build_memory(&fx.features, 200, 7, CoresetInit::SeededRandom, "bench").unwrap();
    let mut group = c.benchmark_group("score");
    for &(name, workers) in variants {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| with_workers(workers, || score(&fx.features, &bank).unwrap()))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("coreset");
    group.sample_size(10);
    for &(name, workers) in variants {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                with_workers(workers, || {
                    build_memory(&fx.features, 200, 7, CoresetInit::SeededRandom, "bench")
                        .unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_stages);
criterion_main!(benches);
