//! Reconstruction fidelity: RMSE, mean row cosine and cosine nearest-neighbour
//! overlap between an original and a reconstructed embedding table.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embio::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::quantizer::SizeReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub rmse: f64,
    pub mean_cosine: f64,
    pub nn_overlap_at_k: f64,
    pub k: usize,
    /// Filled in when the reconstruction came from a known compression.
    pub size: Option<SizeReport>,
}

impl FidelityReport {
    pub fn with_size(mut self, size: SizeReport) -> Self {
        self.size = Some(size);
        self
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Unit-normalised rows in f64; zero rows stay zero.
fn unit_rows(m: &EmbeddingMatrix) -> Vec<f64> {
    let mut out: Vec<f64> = m.values().iter().map(|&v| f64::from(v)).collect();
    for row in out.chunks_exact_mut(m.cols()) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    out
}

/// Indices of the `k` rows most cosine-similar to `w`, excluding `w` itself.
/// Ties go to the lower row index.
fn top_k(unit: &[f64], cols: usize, w: usize, k: usize) -> Vec<usize> {
    let q = &unit[w * cols..(w + 1) * cols];
    let mut scored: Vec<(f64, usize)> = unit
        .chunks_exact(cols)
        .enumerate()
        .filter(|&(j, _)| j != w)
        .map(|(j, r)| (q.iter().zip(r).map(|(a, b)| a * b).sum(), j))
        .collect();
    let by_rank = |a: &(f64, usize), b: &(f64, usize)| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    };
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_rank);
        scored.truncate(k);
    }
    scored.into_iter().map(|(_, j)| j).collect()
}

pub fn fidelity(
    original: &EmbeddingMatrix,
    other: &EmbeddingMatrix,
    k: usize,
) -> Result<FidelityReport> {
    if original.rows() != other.rows() || original.cols() != other.cols() {
        return Err(Error::InvalidShape(format!(
            "shape mismatch: {}x{} vs {}x{}",
            original.rows(),
            original.cols(),
            other.rows(),
            other.cols()
        )));
    }
    let (rows, cols) = (original.rows(), original.cols());
    if k == 0 || k >= rows {
        return Err(Error::InvalidParameter(format!(
            "k must be in [1, {}), got {k}",
            rows
        )));
    }

    let sq: f64 = original
        .values()
        .iter()
        .zip(other.values())
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
        .sum();
    let rmse = (sq / (rows * cols) as f64).sqrt();

    let ua = unit_rows(original);
    let ub = unit_rows(other);
    let cos_sum: f64 = ua
        .chunks_exact(cols)
        .zip(ub.chunks_exact(cols))
        .map(|(a, b)| {
            if a.iter().all(|&x| x == 0.0) || b.iter().all(|&x| x == 0.0) {
                0.0
            } else {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    .clamp(-1.0, 1.0)
            }
        })
        .sum();

    // Per-row overlaps are computed in parallel and summed in row order.
    let overlaps: Vec<usize> = (0..rows)
        .into_par_iter()
        .map(|w| {
            let a = top_k(&ua, cols, w, k);
            let b = top_k(&ub, cols, w, k);
            a.iter().filter(|j| b.contains(j)).count()
        })
        .collect();
    let overlap_sum: f64 = overlaps.iter().map(|&n| n as f64 / k as f64).sum();

    Ok(FidelityReport {
        rmse,
        mean_cosine: cos_sum / rows as f64,
        nn_overlap_at_k: overlap_sum / rows as f64,
        k,
        size: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random(rows: usize, cols: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = SplitMix64::new(seed);
        let v: Vec<f64> = (0..rows * cols).map(|_| rng.next_normal()).collect();
        EmbeddingMatrix::from_f64(rows, cols, &v).unwrap()
    }

    fn negate(m: &EmbeddingMatrix) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            m.rows(),
            m.cols(),
            m.values().iter().map(|v| -v).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn identity() {
        let m = random(20, 5, 1);
        let r = fidelity(&m, &m, 3).unwrap();
        assert_eq!(r.rmse, 0.0);
        assert!((r.mean_cosine - 1.0).abs() < 1e-12);
        assert_eq!(r.nn_overlap_at_k, 1.0);
    }

    #[test]
    fn sign_flip() {
        let m = random(20, 5, 2);
        let r = fidelity(&m, &negate(&m), 4).unwrap();
        assert!((r.mean_cosine + 1.0).abs() < 1e-12);
        let direct: f64 = m
            .values()
            .iter()
            .map(|&v| (2.0 * f64::from(v)).powi(2))
            .sum::<f64>();
        assert!((r.rmse - (direct / 100.0).sqrt()).abs() < 1e-12);
        // Negating every row keeps all pairwise cosines.
        assert_eq!(r.nn_overlap_at_k, 1.0);
    }

    #[test]
    fn rmse_is_symmetric() {
        let a = random(10, 4, 3);
        let b = random(10, 4, 4);
        assert_eq!(
            fidelity(&a, &b, 2).unwrap().rmse,
            fidelity(&b, &a, 2).unwrap().rmse
        );
    }

    #[test]
    fn argument_checks() {
        let a = random(10, 4, 3);
        let b = random(9, 4, 3);
        assert!(fidelity(&a, &b, 1).is_err());
        assert!(fidelity(&a, &a, 0).is_err());
        assert!(fidelity(&a, &a, 10).is_err());
        assert!(fidelity(&a, &a, 9).is_ok());
    }

    #[test]
    fn zero_rows_have_zero_cosine() {
        let z = EmbeddingMatrix::new(2, 2, vec![0.0, 0.0, 1.0, 0.0], None).unwrap();
        let r = fidelity(&z, &z, 1).unwrap();
        assert_eq!(r.mean_cosine, 0.5);
    }
}
