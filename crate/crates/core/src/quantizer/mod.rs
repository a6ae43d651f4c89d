//! Product quantization (PQ) and Gaussian product quantization (GPQ) of
//! embedding matrices.
//!
//! A matrix is split into `g` column groups. Under structured partitioning
//! every group is clustered on its own; under unified partitioning the groups
//! are stacked into one tall matrix and share a single codebook. Each
//! sub-vector is then stored as the index of its cluster. GPQ additionally
//! keeps the per-dimension variance of every cluster so that a codebook can
//! be sampled from the cluster Gaussians at reconstruction time.

mod partition;
mod size;

pub use partition::{concat_columns, partition, unstack_rows, PartitionKind, PartitionScheme};
pub use size::{index_bit_width, mib_2dp, SizeReport, FLOAT_BITS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embio::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::kmeans::{
    kmeans_best_of, ClusterResult, KMeansParams, DEFAULT_MAX_ITER, DEFAULT_REL_TOL,
};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pq,
    Gpq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconstructMode {
    /// Look up cluster means.
    Mean,
    /// Draw one codebook from the cluster Gaussians, then look up.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressParams {
    pub scheme: PartitionScheme,
    pub clusters: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl CompressParams {
    pub fn new(scheme: PartitionScheme, clusters: usize, seed: u64) -> Self {
        Self {
            scheme,
            clusters,
            seed,
            restarts: 1,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
        }
    }

    pub fn restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

/// Index matrix plus codebook(s) for a quantized embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedEmbedding {
    scheme: PartitionScheme,
    rows: usize,
    cols: usize,
    clusters: usize,
    indices: Vec<u32>,
    means: Vec<f32>,
    variances: Option<Vec<f32>>,
    seed: u64,
    vocab: Option<Vec<String>>,
}

impl QuantizedEmbedding {
    /// Assembles a quantized embedding from its parts, checking every shape
    /// and range invariant.
    ///
    /// `indices` is `rows x groups`, row-major. `means` (and `variances`)
    /// hold the codebook blocks in group order, each `clusters x cols/groups`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        scheme: PartitionScheme,
        rows: usize,
        cols: usize,
        clusters: usize,
        indices: Vec<u32>,
        means: Vec<f32>,
        variances: Option<Vec<f32>>,
        seed: u64,
        vocab: Option<Vec<String>>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("{rows}x{cols} matrix")));
        }
        let width = scheme.group_width(cols)?;
        if clusters == 0 || clusters > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("cluster count {clusters}")));
        }
        if indices.len() != rows * scheme.groups {
            return Err(Error::InvalidShape(format!(
                "index matrix has {} entries, expected {}",
                indices.len(),
                rows * scheme.groups
            )));
        }
        if let Some((position, &index)) = indices
            .iter()
            .enumerate()
            .find(|(_, &i)| i as usize >= clusters)
        {
            return Err(Error::IndexOutOfRange {
                position,
                index,
                clusters,
            });
        }
        let codebook_len = scheme.codebook_blocks() * clusters * width;
        if means.len() != codebook_len {
            return Err(Error::InvalidShape(format!(
                "codebook has {} entries, expected {codebook_len}",
                means.len()
            )));
        }
        if let Some(pos) = means.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / width,
                col: pos % width,
            });
        }
        if let Some(vars) = &variances {
            if vars.len() != codebook_len {
                return Err(Error::InvalidShape(format!(
                    "variance table has {} entries, expected {codebook_len}",
                    vars.len()
                )));
            }
            if let Some(pos) = vars.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "variance at entry {pos} is {}",
                    vars[pos]
                )));
            }
        }
        if let Some(tokens) = &vocab {
            if tokens.len() != rows {
                return Err(Error::InvalidShape(format!(
                    "vocabulary has {} tokens for {rows} rows",
                    tokens.len()
                )));
            }
        }
        Ok(Self {
            scheme,
            rows,
            cols,
            clusters,
            indices,
            means,
            variances,
            seed,
            vocab,
        })
    }

    pub fn scheme(&self) -> PartitionScheme {
        self.scheme
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn groups(&self) -> usize {
        self.scheme.groups
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    /// Sub-vector width `n / g`.
    pub fn group_width(&self) -> usize {
        self.cols / self.scheme.groups
    }

    /// Total number of clusters (Gaussians when variances are present):
    /// `c * g` for structured, `c` for unified.
    pub fn total_clusters(&self) -> usize {
        self.clusters * self.scheme.codebook_blocks()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// Cluster index of word `w` in group `i`.
    pub fn index(&self, w: usize, i: usize) -> u32 {
        self.indices[w * self.scheme.groups + i]
    }

    pub fn means(&self) -> &[f32] {
        &self.means
    }

    pub fn variances(&self) -> Option<&[f32]> {
        self.variances.as_deref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vocab(&self) -> Option<&[String]> {
        self.vocab.as_deref()
    }

    pub fn method(&self) -> Method {
        if self.variances.is_some() {
            Method::Gpq
        } else {
            Method::Pq
        }
    }

    pub fn with_vocab(mut self, vocab: Option<Vec<String>>) -> Result<Self> {
        if let Some(tokens) = &vocab {
            if tokens.len() != self.rows {
                return Err(Error::InvalidShape(format!(
                    "vocabulary has {} tokens for {} rows",
                    tokens.len(),
                    self.rows
                )));
            }
        }
        self.vocab = vocab;
        Ok(self)
    }

    fn codebook_offset(&self, group: usize, cluster: u32) -> usize {
        let block = match self.scheme.kind {
            PartitionKind::Structured => group,
            PartitionKind::Unified => 0,
        };
        (block * self.clusters + cluster as usize) * self.group_width()
    }
}

/// Result of a compression run, with the clustering objective of every
/// clustering performed (one per group for structured, one for unified).
#[derive(Debug, Clone)]
pub struct Compression {
    pub quantized: QuantizedEmbedding,
    pub objectives: Vec<f64>,
}

fn to_f64(m: &EmbeddingMatrix) -> Vec<f64> {
    m.values().iter().map(|&v| f64::from(v)).collect()
}

fn cluster(group: &EmbeddingMatrix, params: &CompressParams, stream: u64) -> Result<ClusterResult> {
    let kp = KMeansParams {
        clusters: params.clusters,
        seed: derive_seed(params.seed, stream),
        max_iter: params.max_iter,
        rel_tol: params.rel_tol,
    };
    kmeans_best_of(&to_f64(group), group.cols(), &kp, params.restarts)
}

/// Quantizes `matrix`. PQ and GPQ run the same clustering; GPQ also keeps the
/// per-dimension cluster variances.
pub fn compress(
    matrix: &EmbeddingMatrix,
    method: Method,
    params: &CompressParams,
) -> Result<Compression> {
    let scheme = params.scheme;
    let width = scheme.group_width(matrix.cols())?;
    let g = scheme.groups;
    let rows = matrix.rows();
    let groups = partition(matrix, scheme)?;

    // Structured group i uses seed stream i; unified uses stream 0, so g = 1
    // gives the same result under either scheme.
    let results: Vec<ClusterResult> = groups
        .par_iter()
        .enumerate()
        .map(|(i, group)| cluster(group, params, i as u64))
        .collect::<Result<_>>()?;

    let mut indices = vec![0u32; rows * g];
    match scheme.kind {
        PartitionKind::Structured => {
            for (i, r) in results.iter().enumerate() {
                for (w, &a) in r.assignments.iter().enumerate() {
                    indices[w * g + i] = a as u32;
                }
            }
        }
        PartitionKind::Unified => {
            for (s, &a) in results[0].assignments.iter().enumerate() {
                let (i, w) = (s / rows, s % rows);
                indices[w * g + i] = a as u32;
            }
        }
    }

    let means: Vec<f32> = results
        .iter()
        .flat_map(|r| r.centroids.iter().map(|&v| v as f32))
        .collect();
    let variances = match method {
        Method::Pq => None,
        Method::Gpq => Some(
            results
                .iter()
                .flat_map(|r| r.variances.iter().map(|&v| v as f32))
                .collect(),
        ),
    };
    debug_assert_eq!(
        means.len(),
        scheme.codebook_blocks() * params.clusters * width
    );

    let quantized = QuantizedEmbedding::from_parts(
        scheme,
        rows,
        matrix.cols(),
        params.clusters,
        indices,
        means,
        variances,
        params.seed,
        matrix.vocab().map(<[String]>::to_vec),
    )?;
    Ok(Compression {
        quantized,
        objectives: results.iter().map(|r| r.objective).collect(),
    })
}

pub fn pq_compress(
    matrix: &EmbeddingMatrix,
    params: &CompressParams,
) -> Result<QuantizedEmbedding> {
    compress(matrix, Method::Pq, params).map(|c| c.quantized)
}

pub fn gpq_compress(
    matrix: &EmbeddingMatrix,
    params: &CompressParams,
) -> Result<QuantizedEmbedding> {
    compress(matrix, Method::Gpq, params).map(|c| c.quantized)
}

/// Draws one codebook from the cluster Gaussians, entry by entry in storage
/// order. A zero variance reproduces the mean exactly.
pub fn sample_codebook(means: &[f32], variances: &[f32], seed: u64) -> Vec<f32> {
    let mut rng = SplitMix64::new(seed);
    means
        .iter()
        .zip(variances)
        .map(|(&mu, &var)| {
            let z = rng.next_normal();
            (f64::from(mu) + f64::from(var).sqrt() * z) as f32
        })
        .collect()
}

/// Rebuilds a `|V| x n` matrix by codebook lookup.
pub fn reconstruct(
    q: &QuantizedEmbedding,
    mode: ReconstructMode,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let sampled;
    let codebook: &[f32] = match mode {
        ReconstructMode::Mean => &q.means,
        ReconstructMode::Sample => {
            let vars = q.variances.as_deref().ok_or(Error::MissingVariances)?;
            sampled = sample_codebook(&q.means, vars, seed);
            &sampled
        }
    };
    let width = q.group_width();
    let mut values = Vec::with_capacity(q.rows * q.cols);
    for w in 0..q.rows {
        for i in 0..q.scheme.groups {
            let off = q.codebook_offset(i, q.index(w, i));
            values.extend_from_slice(&codebook[off..off + width]);
        }
    }
    EmbeddingMatrix::new(q.rows, q.cols, values, q.vocab.clone())
}

/// Size accounting for `q`.
pub fn size_report(q: &QuantizedEmbedding) -> SizeReport {
    SizeReport::compute(q.rows, q.cols, q.scheme, q.clusters, q.variances.is_some())
}
