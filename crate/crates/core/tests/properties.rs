use gpq_core::codec::{decode, encode, CRC_LEN, HEADER_LEN};
use gpq_core::quantizer::{concat_columns, partition, unstack_rows};
use gpq_core::rng::SplitMix64;
use gpq_core::{
    compress, reconstruct, size_report, CompressParams, EmbeddingMatrix, Method, PartitionKind,
    PartitionScheme, QuantizedEmbedding, ReconstructMode,
};
use proptest::prelude::*;

fn gaussian(rows: usize, cols: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = SplitMix64::new(seed);
    let v: Vec<f64> = (0..rows * cols).map(|_| rng.next_normal()).collect();
    EmbeddingMatrix::from_f64(rows, cols, &v).unwrap()
}

fn frobenius_sq(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum()
}

fn matrix_and_groups() -> impl Strategy<Value = (EmbeddingMatrix, usize)> {
    (1usize..10, 1usize..5, 1usize..5).prop_flat_map(|(rows, width, groups)| {
        prop::collection::vec(-100.0f32..100.0, rows * width * groups).prop_map(move |v| {
            (
                EmbeddingMatrix::new(rows, width * groups, v, None).unwrap(),
                groups,
            )
        })
    })
}

fn quantized_strategy() -> impl Strategy<Value = QuantizedEmbedding> {
    (
        1usize..=64,
        1usize..=4,
        1usize..=4,
        1usize..=9,
        any::<bool>(),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_flat_map(|(rows, width, groups, clusters, unified, gpq, seed)| {
            let scheme = if unified {
                PartitionScheme::unified(groups)
            } else {
                PartitionScheme::structured(groups)
            };
            let book = scheme.codebook_blocks() * clusters * width;
            (
                prop::collection::vec(0..clusters as u32, rows * groups),
                prop::collection::vec(-10.0f32..10.0, book),
                if gpq {
                    prop::collection::vec(0.0f32..4.0, book)
                        .prop_map(Some)
                        .boxed()
                } else {
                    Just(None).boxed()
                },
            )
                .prop_map(move |(indices, means, vars)| {
                    QuantizedEmbedding::from_parts(
                        scheme,
                        rows,
                        width * groups,
                        clusters,
                        indices,
                        means,
                        vars,
                        seed,
                        None,
                    )
                    .unwrap()
                })
        })
}

proptest! {
    #[test]
    fn partition_round_trips((m, g) in matrix_and_groups()) {
        let structured = partition(&m, PartitionScheme::structured(g)).unwrap();
        let joined = concat_columns(&structured).unwrap();
        prop_assert_eq!(joined.values(), m.values());
        let unified = partition(&m, PartitionScheme::unified(g)).unwrap();
        prop_assert_eq!(unified.len(), 1);
        prop_assert_eq!(unstack_rows(&unified[0], g).unwrap(), structured);
    }

    #[test]
    fn codec_round_trip_and_size(q in quantized_strategy()) {
        let bytes = encode(&q);
        prop_assert_eq!(decode(&bytes).unwrap(), q.clone());
        let payload = (bytes.len() - HEADER_LEN - CRC_LEN) as u64;
        prop_assert_eq!(payload * 8, size_report(&q).storable_bits);
        prop_assert!(size_report(&q).storable_bits as f64 >= size_report(&q).theoretical_bits - 1e-6);
        prop_assert_eq!(encode(&q), bytes);
    }
}

#[test]
fn single_group_structured_equals_unified() {
    let m = gaussian(50, 6, 1);
    for method in [Method::Pq, Method::Gpq] {
        let s = compress(
            &m,
            method,
            &CompressParams::new(PartitionScheme::structured(1), 7, 3).restarts(3),
        )
        .unwrap();
        let u = compress(
            &m,
            method,
            &CompressParams::new(PartitionScheme::unified(1), 7, 3).restarts(3),
        )
        .unwrap();
        assert_eq!(s.quantized.indices(), u.quantized.indices());
        assert_eq!(s.quantized.means(), u.quantized.means());
        assert_eq!(s.quantized.variances(), u.quantized.variances());
        assert_eq!(s.objectives, u.objectives);
        assert_eq!(size_report(&s.quantized), size_report(&u.quantized));
    }
}

#[test]
fn mean_reconstruction_error_equals_clustering_objective() {
    let m = gaussian(80, 12, 9);
    for scheme in [
        PartitionScheme::structured(3),
        PartitionScheme::structured(12),
        PartitionScheme::unified(4),
        PartitionScheme::unified(12),
    ] {
        let c = compress(
            &m,
            Method::Gpq,
            &CompressParams::new(scheme, 6, 5).restarts(2),
        )
        .unwrap();
        let r = reconstruct(&c.quantized, ReconstructMode::Mean, 0).unwrap();
        let err = frobenius_sq(&m, &r);
        let total: f64 = c.objectives.iter().sum();
        assert!(
            (err - total).abs() <= 1e-5 * total,
            "{scheme:?}: error {err} vs objective {total}"
        );
        assert_eq!(
            c.objectives.len(),
            if scheme.kind == PartitionKind::Unified {
                1
            } else {
                scheme.groups
            }
        );
    }
}

#[test]
fn decode_reconstructs_identically() {
    let m = gaussian(40, 8, 2);
    let q = compress(
        &m,
        Method::Gpq,
        &CompressParams::new(PartitionScheme::unified(4), 5, 1),
    )
    .unwrap()
    .quantized;
    let back = decode(&encode(&q)).unwrap();
    for mode in [ReconstructMode::Mean, ReconstructMode::Sample] {
        assert_eq!(
            reconstruct(&q, mode, 17).unwrap(),
            reconstruct(&back, mode, 17).unwrap()
        );
    }
}

#[test]
fn structured_groups_are_independent_of_thread_count() {
    let m = gaussian(300, 16, 4);
    let params = CompressParams::new(PartitionScheme::structured(8), 10, 21).restarts(2);
    let a = compress(&m, Method::Gpq, &params).unwrap().quantized;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let b = pool.install(|| compress(&m, Method::Gpq, &params).unwrap().quantized);
    assert_eq!(a, b);
}
