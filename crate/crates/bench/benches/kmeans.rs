use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use gpq_core::rng::SplitMix64;
use gpq_core::{
    compress, kmeans, CompressParams, EmbeddingMatrix, KMeansParams, Method, PartitionScheme,
};

fn gaussian(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    (0..rows * cols).map(|_| rng.next_normal()).collect()
}

fn bench_kmeans(c: &mut Criterion) {
    let mut group = c.benchmark_group("kmeans");
    for &clusters in &[16usize, 64] {
        let points = gaussian(4096, 8, 1);
        group.bench_with_input(BenchmarkId::new("4096x8", clusters), &clusters, |b, &k| {
            b.iter(|| kmeans(black_box(&points), 8, &KMeansParams::new(k, 7)).unwrap())
        });
    }
    group.finish();
}

fn bench_compress(c: &mut Criterion) {
    let values = gaussian(2000, 64, 2);
    let matrix = EmbeddingMatrix::from_f64(2000, 64, &values).unwrap();
    let mut group = c.benchmark_group("compress");
    group.sample_size(10);
    for scheme in [
        PartitionScheme::structured(16),
        PartitionScheme::unified(16),
    ] {
        let name = format!("{:?}", scheme.kind).to_lowercase();
        group.bench_function(format!("gpq_2000x64_g16_c32_{name}"), |b| {
            b.iter(|| {
                compress(
                    black_box(&matrix),
                    Method::Gpq,
                    &CompressParams::new(scheme, 32, 3),
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_kmeans, bench_compress);
criterion_main!(benches);
