use serde::{Deserialize, Serialize};

use crate::embio::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    /// Each column group is clustered on its own, with its own codebook.
    Structured,
    /// All column groups are stacked along rows and share one codebook.
    Unified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionScheme {
    pub kind: PartitionKind,
    pub groups: usize,
}

impl PartitionScheme {
    pub fn structured(groups: usize) -> Self {
        Self {
            kind: PartitionKind::Structured,
            groups,
        }
    }

    pub fn unified(groups: usize) -> Self {
        Self {
            kind: PartitionKind::Unified,
            groups,
        }
    }

    /// Checks the scheme against a matrix width and returns the sub-vector
    /// width `cols / groups`.
    pub fn group_width(&self, cols: usize) -> Result<usize> {
        if self.groups == 0 || !cols.is_multiple_of(self.groups) {
            return Err(Error::GroupsDoNotDivide {
                groups: self.groups,
                cols,
            });
        }
        Ok(cols / self.groups)
    }

    /// Number of codebook blocks: one per group when structured, one shared
    /// block when unified.
    pub fn codebook_blocks(&self) -> usize {
        match self.kind {
            PartitionKind::Structured => self.groups,
            PartitionKind::Unified => 1,
        }
    }
}

/// Contiguous column block `[i*w, (i+1)*w)` of `matrix`, row-major.
fn column_block(matrix: &EmbeddingMatrix, i: usize, width: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(matrix.rows() * width);
    for w in 0..matrix.rows() {
        out.extend_from_slice(&matrix.row(w)[i * width..(i + 1) * width]);
    }
    out
}

/// Splits `matrix` into column groups.
///
/// Structured returns `g` matrices of shape `|V| x n/g`. Unified returns a
/// single `g|V| x n/g` matrix holding the groups stacked in order.
pub fn partition(
    matrix: &EmbeddingMatrix,
    scheme: PartitionScheme,
) -> Result<Vec<EmbeddingMatrix>> {
    let width = scheme.group_width(matrix.cols())?;
    let rows = matrix.rows();
    match scheme.kind {
        PartitionKind::Structured => (0..scheme.groups)
            .map(|i| EmbeddingMatrix::new(rows, width, column_block(matrix, i, width), None))
            .collect(),
        PartitionKind::Unified => {
            let mut stacked = Vec::with_capacity(matrix.values().len());
            for i in 0..scheme.groups {
                stacked.extend(column_block(matrix, i, width));
            }
            Ok(vec![EmbeddingMatrix::new(
                rows * scheme.groups,
                width,
                stacked,
                None,
            )?])
        }
    }
}

/// Concatenates equally tall matrices along columns.
pub fn concat_columns(groups: &[EmbeddingMatrix]) -> Result<EmbeddingMatrix> {
    let first = groups
        .first()
        .ok_or_else(|| Error::InvalidShape("no groups to concatenate".into()))?;
    let rows = first.rows();
    if groups.iter().any(|g| g.rows() != rows) {
        return Err(Error::InvalidShape("groups differ in row count".into()));
    }
    let cols: usize = groups.iter().map(EmbeddingMatrix::cols).sum();
    let mut values = Vec::with_capacity(rows * cols);
    for w in 0..rows {
        for g in groups {
            values.extend_from_slice(g.row(w));
        }
    }
    EmbeddingMatrix::new(rows, cols, values, None)
}

/// Splits a row-stacked matrix back into `groups` equal blocks.
pub fn unstack_rows(stacked: &EmbeddingMatrix, groups: usize) -> Result<Vec<EmbeddingMatrix>> {
    if groups == 0 || !stacked.rows().is_multiple_of(groups) {
        return Err(Error::InvalidShape(format!(
            "{} rows do not split into {groups} blocks",
            stacked.rows()
        )));
    }
    let rows = stacked.rows() / groups;
    let block = rows * stacked.cols();
    stacked
        .values()
        .chunks_exact(block)
        .map(|c| EmbeddingMatrix::new(rows, stacked.cols(), c.to_vec(), None))
        .collect()
}
