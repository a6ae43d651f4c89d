//! Random word embeddings: standard-normal rows scaled to unit length, plus
//! an optional Glorot-initialized projection.

use serde::{Deserialize, Serialize};

use crate::embio::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::quantizer::{SizeReport, FLOAT_BITS};
use crate::rng::{derive_seed, SplitMix64};

// Seed stream reserved for the projection matrix.
const PROJECTION_STREAM: u64 = 0x5052_4F4A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RweConfig {
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub projection_dim: Option<usize>,
}

impl RweConfig {
    pub fn new(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            rows,
            cols,
            seed,
            projection_dim: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidShape(format!(
                "random embedding must be at least 1x1, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.projection_dim == Some(0) {
            return Err(Error::InvalidParameter(
                "projection dimension must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Samples every entry from N(0, 1) and divides each row by its L2 norm.
/// A row with zero norm is drawn again.
pub fn rwe_generate(cfg: &RweConfig) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut values = Vec::with_capacity(cfg.rows * cfg.cols);
    let mut row = vec![0.0f64; cfg.cols];
    for _ in 0..cfg.rows {
        let norm = loop {
            row.iter_mut().for_each(|x| *x = rng.next_normal());
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break norm;
            }
        };
        values.extend(row.iter().map(|x| (x / norm) as f32));
    }
    EmbeddingMatrix::new(cfg.rows, cfg.cols, values, None)
}

/// Glorot-uniform `n x m` matrix in `[-sqrt(6/(n+m)), sqrt(6/(n+m))]`.
/// Only initialized here; training it is up to the consumer.
pub fn projection_init(n: usize, m: usize, seed: u64) -> Result<EmbeddingMatrix> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidShape(format!(
            "projection must be at least 1x1, got {n}x{m}"
        )));
    }
    let bound = (6.0 / (n + m) as f64).sqrt();
    // Largest binary32 not above the bound, so rounding cannot escape it.
    let mut bound32 = bound as f32;
    if f64::from(bound32) > bound {
        bound32 = f32::from_bits(bound32.to_bits() - 1);
    }
    let mut rng = SplitMix64::new(seed);
    let values = (0..n * m)
        .map(|_| (((2.0 * rng.next_f64() - 1.0) * bound) as f32).clamp(-bound32, bound32))
        .collect();
    EmbeddingMatrix::new(n, m, values, None)
}

/// Projection for a config, seeded independently of the embedding itself.
pub fn projection_for(cfg: &RweConfig) -> Result<Option<EmbeddingMatrix>> {
    cfg.validate()?;
    cfg.projection_dim
        .map(|m| projection_init(cfg.cols, m, derive_seed(cfg.seed, PROJECTION_STREAM)))
        .transpose()
}

/// Parameter accounting: the Gaussian's mean and variance, plus `n*m` for a
/// projection when configured. No integer parameters are stored.
pub fn rwe_size_report(cfg: &RweConfig) -> SizeReport {
    let (rows, cols) = (cfg.rows as u64, cfg.cols as u64);
    let float_params = 2 + cfg.projection_dim.map_or(0, |m| cols * m as u64);
    let storable_bits = float_params * FLOAT_BITS;
    let baseline_bits = rows * cols * FLOAT_BITS;
    SizeReport {
        theoretical_bits: storable_bits as f64,
        storable_bits,
        float_params,
        int_params: 0,
        baseline_bits,
        compression_ratio: baseline_bits as f64 / storable_bits as f64,
    }
}
