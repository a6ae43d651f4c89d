use serde::{Deserialize, Serialize};

use super::partition::{PartitionKind, PartitionScheme};

/// Bits per stored floating-point parameter.
pub const FLOAT_BITS: u64 = 32;

/// Integer bit width of one stored cluster index: `ceil(log2 c)`, and 0 for a
/// single cluster.
pub fn index_bit_width(clusters: usize) -> u32 {
    if clusters <= 1 {
        0
    } else {
        usize::BITS - (clusters - 1).leading_zeros()
    }
}

/// Parameter and size accounting for one compressed embedding.
///
/// `theoretical_bits` uses the exact `log2(c)` per index. `storable_bits` is
/// what the container actually holds: `ceil(log2 c)` bits per index, the
/// index section padded to a whole byte, and 32-bit codebook floats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub theoretical_bits: f64,
    pub storable_bits: u64,
    pub float_params: u64,
    pub int_params: u64,
    pub baseline_bits: u64,
    pub compression_ratio: f64,
}

impl SizeReport {
    /// Accounting for a `rows x cols` matrix quantized with `clusters`
    /// clusters under `scheme`; `with_variances` selects the Gaussian variant.
    pub fn compute(
        rows: usize,
        cols: usize,
        scheme: PartitionScheme,
        clusters: usize,
        with_variances: bool,
    ) -> Self {
        let (rows, cols, g, c) = (
            rows as u64,
            cols as u64,
            scheme.groups as u64,
            clusters as u64,
        );
        let codebook_cols = match scheme.kind {
            PartitionKind::Structured => cols,
            PartitionKind::Unified => cols / g,
        };
        let tables = if with_variances { 2 } else { 1 };
        let float_params = tables * c * codebook_cols;
        let int_params = rows * g;

        let theoretical_bits =
            (c as f64).log2() * int_params as f64 + (float_params * FLOAT_BITS) as f64;
        let index_bits = u64::from(index_bit_width(clusters)) * int_params;
        let storable_bits = index_bits.div_ceil(8) * 8 + float_params * FLOAT_BITS;
        let baseline_bits = rows * cols * FLOAT_BITS;
        Self {
            theoretical_bits,
            storable_bits,
            float_params,
            int_params,
            baseline_bits,
            compression_ratio: baseline_bits as f64 / storable_bits as f64,
        }
    }

    pub fn storable_bytes(&self) -> u64 {
        self.storable_bits / 8
    }

    pub fn baseline_bytes(&self) -> u64 {
        self.baseline_bits / 8
    }
}

/// Bytes expressed in mebibytes, rounded to two decimals.
pub fn mib_2dp(bytes: u64) -> f64 {
    (bytes as f64 / (1u64 << 20) as f64 * 100.0).round() / 100.0
}
