//! The GPQE container: a fixed header, binary32 codebooks, a bit-packed index
//! matrix and a trailing CRC-32.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "GPQE"
//!      4     1  version (1)
//!      5     1  flags: bit0 variances present, bit1 unified partitioning
//!      6     8  rows, u64 LE
//!     14     4  cols, u32 LE
//!     18     4  groups, u32 LE
//!     22     4  clusters, u32 LE
//!     26     1  float width in bits (32)
//!     27     8  seed, u64 LE
//!     35        codebook means, f32 LE, block by block, row-major
//!               codebook variances (if flagged), same layout
//!               indices, ceil(log2 c) bits each, word-major then
//!               group-major, MSB first, zero-padded to a byte at the end
//!               CRC-32/ISO-HDLC of all preceding bytes, u32 LE
//! ```
//!
//! Everything between the header and the CRC is the payload; its length in
//! bits equals [`SizeReport::storable_bits`](crate::quantizer::SizeReport).

use crate::error::{Error, Result};
use crate::quantizer::{index_bit_width, PartitionKind, PartitionScheme, QuantizedEmbedding};

pub const MAGIC: [u8; 4] = *b"GPQE";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 35;
pub const CRC_LEN: usize = 4;

const FLAG_VARIANCES: u8 = 0b01;
const FLAG_UNIFIED: u8 = 0b10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub version: u8,
    pub flags: u8,
    pub rows: u64,
    pub cols: u32,
    pub groups: u32,
    pub clusters: u32,
    pub float_bits: u8,
    pub seed: u64,
}

impl ContainerHeader {
    pub fn for_quantized(q: &QuantizedEmbedding) -> Self {
        let mut flags = 0;
        if q.variances().is_some() {
            flags |= FLAG_VARIANCES;
        }
        if q.scheme().kind == PartitionKind::Unified {
            flags |= FLAG_UNIFIED;
        }
        Self {
            version: VERSION,
            flags,
            rows: q.rows() as u64,
            cols: q.cols() as u32,
            groups: q.groups() as u32,
            clusters: q.clusters() as u32,
            float_bits: 32,
            seed: q.seed(),
        }
    }

    pub fn has_variances(&self) -> bool {
        self.flags & FLAG_VARIANCES != 0
    }

    pub fn scheme(&self) -> PartitionScheme {
        let kind = if self.flags & FLAG_UNIFIED != 0 {
            PartitionKind::Unified
        } else {
            PartitionKind::Structured
        };
        PartitionScheme {
            kind,
            groups: self.groups as usize,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4] = self.version;
        out[5] = self.flags;
        out[6..14].copy_from_slice(&self.rows.to_le_bytes());
        out[14..18].copy_from_slice(&self.cols.to_le_bytes());
        out[18..22].copy_from_slice(&self.groups.to_le_bytes());
        out[22..26].copy_from_slice(&self.clusters.to_le_bytes());
        out[26] = self.float_bits;
        out[27..35].copy_from_slice(&self.seed.to_le_bytes());
        out
    }

    /// Parses and validates the fixed header at the start of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated {
                expected: HEADER_LEN + CRC_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let header = Self {
            version: bytes[4],
            flags: bytes[5],
            rows: u64_at(6),
            cols: u32_at(14),
            groups: u32_at(18),
            clusters: u32_at(22),
            float_bits: bytes[26],
            seed: u64_at(27),
        };
        if header.version != VERSION {
            return Err(Error::UnsupportedVersion(header.version));
        }
        if header.float_bits != 32 {
            return Err(Error::UnsupportedFloatWidth(header.float_bits));
        }
        if header.flags & !(FLAG_VARIANCES | FLAG_UNIFIED) != 0 {
            return Err(Error::InvalidHeader(format!(
                "unknown flags {:#04x}",
                header.flags
            )));
        }
        if header.rows == 0 || header.cols == 0 {
            return Err(Error::InvalidHeader(format!(
                "empty matrix {}x{}",
                header.rows, header.cols
            )));
        }
        if header.groups == 0 || !header.cols.is_multiple_of(header.groups) {
            return Err(Error::GroupsDoNotDivide {
                groups: header.groups as usize,
                cols: header.cols as usize,
            });
        }
        if header.clusters == 0 {
            return Err(Error::InvalidHeader("zero clusters".into()));
        }
        Ok(header)
    }

    fn codebook_len(&self) -> u64 {
        let blocks = self.scheme().codebook_blocks() as u64;
        blocks * u64::from(self.clusters) * u64::from(self.cols / self.groups)
    }

    fn index_count(&self) -> Option<u64> {
        self.rows.checked_mul(u64::from(self.groups))
    }

    /// Payload length in bytes (codebooks and packed indices).
    pub fn payload_len(&self) -> Option<u64> {
        let tables = if self.has_variances() { 2 } else { 1 };
        let floats = self.codebook_len() * tables * 4;
        let bits = self
            .index_count()?
            .checked_mul(u64::from(index_bit_width(self.clusters as usize)))?;
        floats.checked_add(bits.div_ceil(8))
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    filled: u32,
}

impl BitWriter {
    fn new(capacity: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(capacity),
            acc: 0,
            filled: 0,
        }
    }

    fn push(&mut self, value: u32, width: u32) {
        if width == 0 {
            return;
        }
        self.acc = (self.acc << width) | u64::from(value);
        self.filled += width;
        while self.filled >= 8 {
            self.filled -= 8;
            self.bytes.push((self.acc >> self.filled) as u8);
        }
        self.acc &= (1u64 << self.filled) - 1;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.bytes.push((self.acc << (8 - self.filled)) as u8);
        }
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    acc: u64,
    filled: u32,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            pos: 0,
            acc: 0,
            filled: 0,
        }
    }

    fn read(&mut self, width: u32) -> u32 {
        if width == 0 {
            return 0;
        }
        while self.filled < width {
            self.acc = (self.acc << 8) | u64::from(self.bytes[self.pos]);
            self.pos += 1;
            self.filled += 8;
        }
        self.filled -= width;
        let v = (self.acc >> self.filled) as u32;
        self.acc &= (1u64 << self.filled) - 1;
        v
    }
}

/// Packs `indices` at `width` bits each, MSB first.
pub fn pack_indices(indices: &[u32], width: u32) -> Vec<u8> {
    let mut w = BitWriter::new((indices.len() * width as usize).div_ceil(8));
    for &i in indices {
        w.push(i, width);
    }
    w.finish()
}

/// Inverse of [`pack_indices`]. `bytes` must hold at least `count * width` bits.
pub fn unpack_indices(bytes: &[u8], count: usize, width: u32) -> Vec<u32> {
    let mut r = BitReader::new(bytes);
    (0..count).map(|_| r.read(width)).collect()
}

fn push_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(q: &QuantizedEmbedding) -> Vec<u8> {
    let header = ContainerHeader::for_quantized(q);
    let payload = header.payload_len().expect("valid quantized embedding") as usize;
    let mut out = Vec::with_capacity(HEADER_LEN + payload + CRC_LEN);
    out.extend_from_slice(&header.to_bytes());
    push_f32s(&mut out, q.means());
    if let Some(vars) = q.variances() {
        push_f32s(&mut out, vars);
    }
    out.extend(pack_indices(q.indices(), index_bit_width(q.clusters())));
    debug_assert_eq!(out.len(), HEADER_LEN + payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

pub fn decode(bytes: &[u8]) -> Result<QuantizedEmbedding> {
    let header = ContainerHeader::parse(bytes)?;
    let too_large = || Error::InvalidHeader("declared sizes overflow".into());
    let payload = header.payload_len().ok_or_else(too_large)?;
    let expected = usize::try_from(payload)
        .ok()
        .and_then(|p| p.checked_add(HEADER_LEN + CRC_LEN))
        .ok_or_else(too_large)?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes {
            expected,
            found: bytes.len(),
        });
    }
    let body = &bytes[..expected - CRC_LEN];
    let stored = u32::from_le_bytes(bytes[expected - CRC_LEN..].try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let table = header.codebook_len() as usize * 4;
    let mut cursor = HEADER_LEN;
    let means = read_f32s(&body[cursor..cursor + table]);
    cursor += table;
    let variances = if header.has_variances() {
        let v = read_f32s(&body[cursor..cursor + table]);
        cursor += table;
        Some(v)
    } else {
        None
    };
    let count = header.index_count().ok_or_else(too_large)? as usize;
    let indices = unpack_indices(
        &body[cursor..],
        count,
        index_bit_width(header.clusters as usize),
    );

    let rows = usize::try_from(header.rows).map_err(|_| too_large())?;
    QuantizedEmbedding::from_parts(
        header.scheme(),
        rows,
        header.cols as usize,
        header.clusters as usize,
        indices,
        means,
        variances,
        header.seed,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embio::EmbeddingMatrix;
    use crate::quantizer::{gpq_compress, size_report, CompressParams};

    fn sample() -> QuantizedEmbedding {
        let vals: Vec<f32> = (0..24).map(|i| (i % 5) as f32 * 0.5).collect();
        let m = EmbeddingMatrix::new(6, 4, vals, None).unwrap();
        gpq_compress(&m, &CompressParams::new(PartitionScheme::unified(2), 3, 99)).unwrap()
    }

    #[test]
    fn header_is_35_bytes_and_round_trips() {
        let q = sample();
        let h = ContainerHeader::for_quantized(&q);
        let bytes = h.to_bytes();
        assert_eq!(bytes.len(), 35);
        assert_eq!(&bytes[..4], b"GPQE");
        assert_eq!(bytes[5], 0b11);
        assert_eq!(ContainerHeader::parse(&bytes).unwrap(), h);
    }

    #[test]
    fn packing_is_msb_first() {
        // 3-bit values 5 (101), 3 (011), 7 (111) -> 10101111 1.......
        assert_eq!(pack_indices(&[5, 3, 7], 3), vec![0b1010_1111, 0b1000_0000]);
        assert_eq!(
            unpack_indices(&[0b1010_1111, 0b1000_0000], 3, 3),
            vec![5, 3, 7]
        );
        assert!(pack_indices(&[0, 0, 0], 0).is_empty());
        assert_eq!(unpack_indices(&[], 3, 0), vec![0, 0, 0]);
    }

    #[test]
    fn single_cluster_has_empty_index_section() {
        let m = EmbeddingMatrix::new(4, 2, vec![1.0; 8], None).unwrap();
        let q = gpq_compress(
            &m,
            &CompressParams::new(PartitionScheme::structured(1), 1, 0),
        )
        .unwrap();
        let bytes = encode(&q);
        // header + 2 means + 2 variances + no indices + crc
        assert_eq!(bytes.len(), HEADER_LEN + 16 + CRC_LEN);
        assert_eq!(decode(&bytes).unwrap(), q);
    }

    #[test]
    fn round_trip_and_payload_size() {
        let q = sample();
        let bytes = encode(&q);
        let payload = bytes.len() - HEADER_LEN - CRC_LEN;
        assert_eq!(payload as u64 * 8, size_report(&q).storable_bits);
        assert_eq!(decode(&bytes).unwrap(), q);
    }

    #[test]
    fn detects_corruption_and_truncation() {
        let bytes = encode(&sample());
        for pos in HEADER_LEN..bytes.len() {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x01;
            assert!(
                matches!(decode(&bad), Err(Error::ChecksumMismatch { .. })),
                "pos {pos}"
            );
        }
        assert!(matches!(
            decode(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode(&long), Err(Error::TrailingBytes { .. })));
    }

    #[test]
    fn header_errors() {
        let bytes = encode(&sample());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::UnsupportedVersion(2))));
        let mut bad = bytes.clone();
        bad[26] = 16;
        assert!(matches!(
            decode(&bad),
            Err(Error::UnsupportedFloatWidth(16))
        ));
        let mut bad = bytes.clone();
        bad[18..22].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(
            decode(&bad),
            Err(Error::GroupsDoNotDivide { groups: 3, cols: 4 })
        ));
        assert!(matches!(decode(&bytes[..10]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn rejects_out_of_range_index_with_valid_crc() {
        // c = 3 uses 2-bit indices, so the value 3 is representable but invalid.
        let q = QuantizedEmbedding::from_parts(
            PartitionScheme::structured(1),
            2,
            1,
            3,
            vec![0, 2],
            vec![0.0, 1.0, 2.0],
            None,
            0,
            None,
        )
        .unwrap();
        let mut bytes = encode(&q);
        let idx = HEADER_LEN + 12;
        bytes[idx] = 0b1111_0000;
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            decode(&bytes),
            Err(Error::IndexOutOfRange {
                position: 0,
                index: 3,
                clusters: 3
            })
        ));
    }

    #[test]
    fn crc_is_iso_hdlc() {
        // Standard check value for "123456789".
        assert_eq!(crc32fast::hash(b"123456789"), 0xCBF4_3926);
    }
}
