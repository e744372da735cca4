use thiserror::Error;

/// Errors raised by the library layers below the protocols.
///
/// Protocol rejections are reported separately through
/// [`RejectReason`](crate::protocols::RejectReason); de-signcryption failures
/// through the opaque [`Failure`](crate::signcryption::Failure).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported security parameter: {0} bits")]
    UnsupportedSecurity(u32),

    #[error("unknown parameter profile {0:?}")]
    UnknownProfile(String),

    #[error("invalid length for {what}: expected {expected} bytes, got {got}")]
    InvalidLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid encoding: {0}")]
    InvalidEncoding(&'static str),

    #[error("output length must be a positive multiple of 8 bits, got {0}")]
    InvalidBitLength(usize),

    #[error("zero scalar where a nonzero one is required")]
    ZeroScalar,

    #[error("chameleon triple is not compatible with the public key")]
    IncompatibleTriple,

    #[error("message must not be empty")]
    EmptyMessage,

    #[error("invalid Mid: {0}")]
    InvalidMid(String),

    #[error("noise rate {0} outside [0, 0.5)")]
    NoiseRate(f64),

    #[error("iris code length mismatch: {0} vs {1} bits")]
    IrisLength(usize, usize),

    #[error("profile tag mismatch: expected {expected:?}, found {found:?}")]
    ProfileMismatch { expected: String, found: String },

    #[error("trailing bytes after {0}")]
    TrailingBytes(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
