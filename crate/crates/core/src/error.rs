//! Error type shared by all modules.

use core::fmt;

/// Alias for `core::result::Result` with this crate's [`Error`].
pub type Result<T> = core::result::Result<T, Error>;

/// Errors produced by the counting-statistics routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A count vector and a bin partition have different numbers of bins.
    DimensionMismatch { expected: usize, got: usize },
    /// A partition must have at least one bin and at least one port per bin.
    InvalidPartition(&'static str),
    /// The operation is undefined for the requested particle kind.
    UnsupportedKind(&'static str),
    /// Fermions allow at most one particle per port, so `N <= M`.
    TooManyFermions { particles: u64, ports: u64 },
    /// Particle density `alpha = N/M` outside the admissible range.
    InvalidDensity { alpha: f64, reason: &'static str },
    /// Window parameters must satisfy `A > 0` and `0 < epsilon < 1/6`.
    InvalidWindow(&'static str),
    /// The count vector violates the concentration window in some bin.
    OutsideWindow,
    /// The count vector lies inside the concentration window.
    InsideWindow,
    /// An argument is outside the operation's domain.
    InvalidArgument(&'static str),
    /// The problem size exceeds a hard cost guard.
    SizeGuard {
        what: &'static str,
        limit: u64,
        got: u64,
    },
    /// Two exact evaluation routes that must agree produced different values.
    RouteMismatch(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "expected {expected} bins, got {got}")
            }
            Error::InvalidPartition(msg) => write!(f, "invalid bin partition: {msg}"),
            Error::UnsupportedKind(msg) => write!(f, "unsupported particle kind: {msg}"),
            Error::TooManyFermions { particles, ports } => {
                write!(f, "{particles} fermions do not fit into {ports} ports")
            }
            Error::InvalidDensity { alpha, reason } => {
                write!(f, "invalid particle density alpha = {alpha}: {reason}")
            }
            Error::InvalidWindow(msg) => write!(f, "invalid window: {msg}"),
            Error::OutsideWindow => write!(f, "count vector lies outside the window"),
            Error::InsideWindow => write!(f, "count vector lies inside the window"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::SizeGuard { what, limit, got } => {
                write!(f, "cost guard: {what} limited to {limit}, got {got}")
            }
            Error::RouteMismatch(msg) => write!(f, "internal route mismatch: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
