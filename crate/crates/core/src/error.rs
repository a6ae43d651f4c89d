use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
///
/// Variants split into two families: data errors (bad inputs, invalid
/// parameters) and format errors (a container that fails to decode). The CLI
/// maps them onto different exit codes through [`Error::is_format`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("row count mismatch: header declares {expected}, found {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("dim mismatch on line {line}: expected {expected} values, found {found}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid value on line {line}: {value:?}")]
    InvalidValue { line: usize, value: String },
    #[error("duplicate token {0:?}")]
    DuplicateToken(String),
    #[error("invalid token {0:?}: tokens must be non-empty and contain no whitespace")]
    InvalidToken(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("vocabulary required for word2vec text output")]
    MissingVocab,

    #[error("invalid cluster count {clusters} for {points} points")]
    InvalidClusterCount { clusters: usize, points: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{groups} groups do not divide {cols} columns")]
    GroupsDoNotDivide { groups: usize, cols: usize },
    #[error("sample mode requires codebook variances")]
    MissingVariances,

    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported float width {0}")]
    UnsupportedFloatWidth(u8),
    #[error("invalid container header: {0}")]
    InvalidHeader(String),
    #[error("truncated stream: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("trailing bytes: expected {expected} bytes, found {found}")]
    TrailingBytes { expected: usize, found: usize },
    #[error("crc mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("index {index} at position {position} is out of range for {clusters} clusters")]
    IndexOutOfRange {
        position: usize,
        index: u32,
        clusters: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that describe a malformed or corrupted container.
    pub fn is_format(&self) -> bool {
        matches!(
            self,
            Error::BadMagic(_)
                | Error::UnsupportedVersion(_)
                | Error::UnsupportedFloatWidth(_)
                | Error::InvalidHeader(_)
                | Error::Truncated { .. }
                | Error::TrailingBytes { .. }
                | Error::ChecksumMismatch { .. }
                | Error::IndexOutOfRange { .. }
        )
    }

    /// Short stable identifier, used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedHeader(_) => "malformed_header",
            Error::RowCountMismatch { .. } => "row_count_mismatch",
            Error::DimMismatch { .. } => "dim_mismatch",
            Error::InvalidValue { .. } => "invalid_value",
            Error::DuplicateToken(_) => "duplicate_token",
            Error::InvalidToken(_) => "invalid_token",
            Error::NonFinite { .. } => "non_finite",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidShape(_) => "invalid_shape",
            Error::MissingVocab => "missing_vocab",
            Error::InvalidClusterCount { .. } => "invalid_cluster_count",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::GroupsDoNotDivide { .. } => "groups_do_not_divide",
            Error::MissingVariances => "missing_variances",
            Error::BadMagic(_) => "bad_magic",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::UnsupportedFloatWidth(_) => "unsupported_float_width",
            Error::InvalidHeader(_) => "invalid_header",
            Error::Truncated { .. } => "truncated",
            Error::TrailingBytes { .. } => "trailing_bytes",
            Error::ChecksumMismatch { .. } => "crc_mismatch",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::Io(_) => "io",
        }
    }
}
