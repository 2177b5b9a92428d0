use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    /// The digest has run out of bits for the next address-space doubling.
    #[error("capacity exhausted: {0}")]
    Capacity(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown filter type tag {0}")]
    UnknownType(u8),
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("malformed filter file: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
