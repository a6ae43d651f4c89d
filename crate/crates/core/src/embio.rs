//! Embedding matrix type and the word2vec text / raw binary32 formats.

use std::collections::HashSet;
use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

/// A dense `rows x cols` embedding table, row-major, with an optional
/// vocabulary naming each row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
    vocab: Option<Vec<String>>,
}

impl EmbeddingMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        values: Vec<f32>,
        vocab: Option<Vec<String>>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidShape(format!("{rows}x{cols} overflows")))?;
        if values.len() != expected {
            return Err(Error::InvalidShape(format!(
                "{rows}x{cols} matrix needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        if let Some(tokens) = &vocab {
            if tokens.len() != rows {
                return Err(Error::InvalidShape(format!(
                    "vocabulary has {} tokens for {rows} rows",
                    tokens.len()
                )));
            }
            validate_tokens(tokens)?;
        }
        Ok(Self {
            rows,
            cols,
            values,
            vocab,
        })
    }

    /// Builds a matrix from `f64` values, rounding each to binary32.
    pub fn from_f64(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, cols, values.iter().map(|&v| v as f32).collect(), None)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn vocab(&self) -> Option<&[String]> {
        self.vocab.as_deref()
    }

    /// Embedding of the `w`-th token.
    pub fn row(&self, w: usize) -> &[f32] {
        &self.values[w * self.cols..(w + 1) * self.cols]
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }

    pub fn with_vocab(self, vocab: Option<Vec<String>>) -> Result<Self> {
        Self::new(self.rows, self.cols, self.values, vocab)
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

fn validate_tokens(tokens: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(tokens.len());
    for token in tokens {
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::InvalidToken(token.clone()));
        }
        if !seen.insert(token.as_str()) {
            return Err(Error::DuplicateToken(token.clone()));
        }
    }
    Ok(())
}

/// Reads the word2vec text format: a `<count> <dim>` header followed by one
/// line per token. LF and CRLF line endings are accepted.
pub fn load_word2vec_text<R: BufRead>(reader: R) -> Result<EmbeddingMatrix> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::MalformedHeader("empty input".into())),
    };
    let header = header.trim_end_matches('\r');
    let mut fields = header.split_whitespace();
    let (count, dim) = match (fields.next(), fields.next(), fields.next()) {
        (Some(a), Some(b), None) => (
            a.parse::<usize>()
                .map_err(|_| Error::MalformedHeader(header.to_string()))?,
            b.parse::<usize>()
                .map_err(|_| Error::MalformedHeader(header.to_string()))?,
        ),
        _ => return Err(Error::MalformedHeader(header.to_string())),
    };
    if count == 0 || dim == 0 {
        return Err(Error::MalformedHeader(header.to_string()));
    }

    let mut vocab = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count.saturating_mul(dim));
    let mut seen = HashSet::with_capacity(count);
    let mut pending_blank = false;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            pending_blank = true;
            continue;
        }
        if pending_blank {
            // Blank lines are only tolerated at the end of the file.
            return Err(Error::InvalidValue {
                line: line_no - 1,
                value: String::new(),
            });
        }
        if vocab.len() == count {
            return Err(Error::RowCountMismatch {
                expected: count,
                found: count + 1,
            });
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default();
        let start = values.len();
        for field in fields {
            let v: f32 = field.parse().map_err(|_| Error::InvalidValue {
                line: line_no,
                value: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: vocab.len(),
                    col: values.len() - start,
                });
            }
            values.push(v);
        }
        if values.len() - start != dim {
            return Err(Error::DimMismatch {
                line: line_no,
                expected: dim,
                found: values.len() - start,
            });
        }
        if !seen.insert(token.to_string()) {
            return Err(Error::DuplicateToken(token.to_string()));
        }
        vocab.push(token.to_string());
    }
    if vocab.len() != count {
        return Err(Error::RowCountMismatch {
            expected: count,
            found: vocab.len(),
        });
    }
    EmbeddingMatrix::new(count, dim, values, Some(vocab))
}

/// Writes the word2vec text format. Values are printed with the shortest
/// decimal that parses back to the same binary32.
pub fn save_word2vec_text<W: Write>(matrix: &EmbeddingMatrix, mut writer: W) -> Result<()> {
    let vocab = matrix.vocab().ok_or(Error::MissingVocab)?;
    writeln!(writer, "{} {}", matrix.rows(), matrix.cols())?;
    for (w, token) in vocab.iter().enumerate() {
        write!(writer, "{token}")?;
        for v in matrix.row(w) {
            write!(writer, " {v}")?;
        }
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a headerless little-endian binary32 payload of `rows x cols` values.
pub fn load_raw<R: Read>(mut reader: R, rows: usize, cols: usize) -> Result<EmbeddingMatrix> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::InvalidShape(format!("{rows}x{cols} overflows")))?;
    if bytes.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    EmbeddingMatrix::new(rows, cols, values, None)
}

pub fn save_raw<W: Write>(matrix: &EmbeddingMatrix, mut writer: W) -> Result<()> {
    let mut bytes = Vec::with_capacity(matrix.values().len() * 4);
    for v in matrix.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<EmbeddingMatrix> {
        load_word2vec_text(text.as_bytes())
    }

    #[test]
    fn parses_small_text_file() {
        let m = parse("2 3\na 1 0 0\nb 0 1 0\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert_eq!(m.values(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(m.vocab().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn parses_minimal_and_crlf() {
        let m = parse("1 1\r\nx 0.5\r\n").unwrap();
        assert_eq!(m.values(), &[0.5]);
        assert_eq!(m.row(0), &[0.5]);
    }

    #[test]
    fn row_count_mismatch() {
        assert!(matches!(
            parse("3 2\na 1 2\nb 3 4\n"),
            Err(Error::RowCountMismatch {
                expected: 3,
                found: 2
            })
        ));
        assert!(matches!(
            parse("1 2\na 1 2\nb 3 4\n"),
            Err(Error::RowCountMismatch { .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse("2\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(parse("x y\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(parse(""), Err(Error::MalformedHeader(_))));
        assert!(matches!(
            parse("2 2\na 1 2\nb 3\n"),
            Err(Error::DimMismatch { line: 3, .. })
        ));
        assert!(matches!(
            parse("2 1\na 1\na 2\n"),
            Err(Error::DuplicateToken(_))
        ));
        assert!(matches!(
            parse("1 2\na 1 NaN\n"),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            parse("1 1\na inf\n"),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            parse("1 1\na one\n"),
            Err(Error::InvalidValue { .. })
        ));
    }

    #[test]
    fn raw_decode_and_length_check() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&2.0f32.to_le_bytes());
        let m = load_raw(&bytes[..], 1, 2).unwrap();
        assert_eq!(m.values(), &[1.0, 2.0]);
        assert!(m.vocab().is_none());
        assert!(matches!(
            load_raw(&bytes[..7], 1, 2),
            Err(Error::LengthMismatch {
                expected: 8,
                found: 7
            })
        ));
        let nan = f32::NAN.to_le_bytes();
        assert!(matches!(
            load_raw(&nan[..], 1, 1),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn raw_identity_round_trip() {
        let eye: Vec<f32> = (0..9).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let m = EmbeddingMatrix::new(3, 3, eye, None).unwrap();
        let mut first = Vec::new();
        save_raw(&m, &mut first).unwrap();
        let back = load_raw(&first[..], 3, 3).unwrap();
        let mut second = Vec::new();
        save_raw(&back, &mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(back, m);
    }

    #[test]
    fn text_round_trips_point_one() {
        let m = EmbeddingMatrix::new(1, 1, vec![0.1], Some(vec!["t".into()])).unwrap();
        let mut out = Vec::new();
        save_word2vec_text(&m, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "1 1\nt 0.1\n");
        let back = parse(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back.values()[0].to_bits(), 0.1f32.to_bits());
    }

    #[test]
    fn text_save_requires_vocab() {
        let m = EmbeddingMatrix::new(1, 1, vec![0.1], None).unwrap();
        assert!(matches!(
            save_word2vec_text(&m, Vec::new()),
            Err(Error::MissingVocab)
        ));
    }

    #[test]
    fn constructor_enforces_invariants() {
        assert!(EmbeddingMatrix::new(0, 1, vec![], None).is_err());
        assert!(EmbeddingMatrix::new(1, 2, vec![1.0], None).is_err());
        assert!(EmbeddingMatrix::new(1, 1, vec![f32::INFINITY], None).is_err());
        assert!(EmbeddingMatrix::new(1, 1, vec![1.0], Some(vec!["a b".into()])).is_err());
        assert!(EmbeddingMatrix::new(1, 1, vec![1.0], Some(vec![])).is_err());
        assert!(matches!(
            EmbeddingMatrix::new(2, 1, vec![1.0, 2.0], Some(vec!["a".into(), "a".into()])),
            Err(Error::DuplicateToken(_))
        ));
    }

    fn finite_f32() -> impl Strategy<Value = f32> {
        any::<u32>()
            .prop_map(f32::from_bits)
            .prop_filter("finite", |v| v.is_finite())
    }

    proptest! {
        #[test]
        fn raw_round_trip_is_bit_exact(
            (rows, cols, values) in (1usize..6, 1usize..6)
                .prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(finite_f32(), r * c)))
        ) {
            let m = EmbeddingMatrix::new(rows, cols, values, None).unwrap();
            let mut bytes = Vec::new();
            save_raw(&m, &mut bytes).unwrap();
            let back = load_raw(&bytes[..], rows, cols).unwrap();
            let a: Vec<u32> = m.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn text_round_trip_is_bit_exact(values in prop::collection::vec(finite_f32(), 6)) {
            let vocab = (0..3).map(|i| format!("w{i}")).collect();
            let m = EmbeddingMatrix::new(3, 2, values, Some(vocab)).unwrap();
            let mut out = Vec::new();
            save_word2vec_text(&m, &mut out).unwrap();
            let back = load_word2vec_text(&out[..]).unwrap();
            let a: Vec<u32> = m.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back.vocab(), m.vocab());
        }
    }
}
