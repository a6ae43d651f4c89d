//! Compression of token-embedding matrices with product quantization (PQ)
//! and Gaussian product quantization (GPQ), random word embeddings, and
//! exact size accounting.
//!
//! The pieces:
//!
//! - [`embio`]: the [`EmbeddingMatrix`] type and word2vec text / raw binary32 I/O.
//! - [`kmeans`]: seeded Lloyd's K-means returning means, per-dimension
//!   variances and assignments.
//! - [`quantizer`]: structured and unified partitioning, PQ/GPQ compression,
//!   mean or sampled reconstruction, and [`SizeReport`] accounting.
//! - [`rwe`]: unit-norm random embeddings and projection initialization.
//! - [`codec`]: the bit-packed `GPQE` container.
//! - [`metrics`]: reconstruction fidelity.

pub mod codec;
pub mod embio;
mod error;
pub mod kmeans;
pub mod metrics;
pub mod quantizer;
pub mod rng;
pub mod rwe;

pub use embio::EmbeddingMatrix;
pub use error::{Error, Result};
pub use kmeans::{kmeans, kmeans_best_of, ClusterResult, KMeansParams};
pub use metrics::{fidelity, FidelityReport};
pub use quantizer::{
    compress, gpq_compress, pq_compress, reconstruct, size_report, CompressParams, Compression,
    Method, PartitionKind, PartitionScheme, QuantizedEmbedding, ReconstructMode, SizeReport,
};
pub use rwe::{projection_init, rwe_generate, RweConfig};
