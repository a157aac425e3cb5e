use std::fmt;

/// Errors surfaced by sequence synthesis, codec, decoder, and channel routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An index does not fit the requested binary expansion width.
    IndexOutOfRange { value: u64, limit: u64 },
    /// A transform or fold was asked to operate on a non power-of-two length.
    LengthNotPowerOfTwo { len: usize },
    /// A vector had the wrong length for the operation.
    LengthMismatch { expected: usize, got: usize },
    /// A sub-block order `s` outside `2..=m`.
    SubOrderOutOfRange { s: usize, m: usize },
    /// A matrix or vector entry was not a bit.
    NotABit { value: u8 },
    /// The quadratic-form matrix is not symmetric.
    AsymmetricMatrix,
    /// Configuration rejected at construction.
    InvalidConfig(String),
    /// Polarity of an identically-zero spectrum peak is undecidable.
    ZeroPeak,
    /// Input too short for a fold (needs at least 4 samples).
    InputTooShort { len: usize },
    /// Out-of-cell interference power diverges for path-loss exponents <= 2.
    DivergentInterference { alpha: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::IndexOutOfRange { value, limit } => {
                write!(f, "index {value} out of range (must be < {limit})")
            }
            Error::LengthNotPowerOfTwo { len } => {
                write!(f, "length {len} is not a power of two")
            }
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::SubOrderOutOfRange { s, m } => {
                write!(f, "sub-block order {s} outside 2..={m}")
            }
            Error::NotABit { value } => write!(f, "entry {value} is not a bit"),
            Error::AsymmetricMatrix => write!(f, "matrix is not symmetric"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::ZeroPeak => write!(f, "spectrum peak is zero; polarity undecidable"),
            Error::InputTooShort { len } => {
                write!(f, "input of length {len} too short to fold (need >= 4)")
            }
            Error::DivergentInterference { alpha } => {
                write!(f, "interference power diverges for path-loss exponent {alpha} <= 2")
            }
        }
    }
}

impl std::error::Error for Error {}
