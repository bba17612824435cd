//! Domain types: particle kinds, bin partitions, count vectors, and the
//! dual-mode probability value.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Exchange statistics of the identical particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParticleKind {
    /// Particles sent one at a time; no quantum interference survives the
    /// Haar average.
    Distinguishable,
    /// Bosons (symmetric statistics).
    Boson,
    /// Fermions (antisymmetric statistics, at most one particle per port).
    Fermion,
}

impl ParticleKind {
    /// Sign of the statistics: `+1` for bosons, `-1` for fermions, `0` for
    /// distinguishable particles.
    pub fn sign(self) -> i32 {
        match self {
            ParticleKind::Distinguishable => 0,
            ParticleKind::Boson => 1,
            ParticleKind::Fermion => -1,
        }
    }

    /// Whether the kind carries quantum statistics.
    pub fn is_quantum(self) -> bool {
        !matches!(self, ParticleKind::Distinguishable)
    }

    pub fn label(self) -> &'static str {
        match self {
            ParticleKind::Distinguishable => "distinguishable",
            ParticleKind::Boson => "boson",
            ParticleKind::Fermion => "fermion",
        }
    }
}

impl fmt::Display for ParticleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ParticleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" | "0" | "dist" | "distinguishable" | "classical" => {
                Ok(ParticleKind::Distinguishable)
            }
            "b" | "+" | "boson" | "bosons" => Ok(ParticleKind::Boson),
            "f" | "-" | "fermion" | "fermions" => Ok(ParticleKind::Fermion),
            _ => Err(Error::InvalidArgument(
                "particle kind must be one of distinguishable|boson|fermion",
            )),
        }
    }
}

/// A partition of the `M` output ports into `r` bins of `K_1, ..., K_r`
/// ports each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinPartition {
    ports: Vec<u64>,
    total: u64,
}

impl BinPartition {
    /// Builds a partition from the per-bin port counts. Every bin needs at
    /// least one port.
    pub fn new(ports: Vec<u64>) -> Result<Self> {
        if ports.is_empty() {
            return Err(Error::InvalidPartition("need at least one bin"));
        }
        if ports.iter().any(|&k| k == 0) {
            return Err(Error::InvalidPartition("every bin needs at least one port"));
        }
        let total = ports
            .iter()
            .try_fold(0u64, |acc, &k| acc.checked_add(k))
            .ok_or(Error::InvalidPartition("total port count overflows u64"))?;
        Ok(BinPartition { ports, total })
    }

    /// Binary partition `(K, M - K)` of `M` ports; requires `1 <= K < M`.
    pub fn binary(k: u64, m: u64) -> Result<Self> {
        if k == 0 || k >= m {
            return Err(Error::InvalidPartition("binary split needs 1 <= K < M"));
        }
        BinPartition::new(alloc::vec![k, m - k])
    }

    pub fn num_bins(&self) -> usize {
        self.ports.len()
    }

    pub fn ports(&self) -> &[u64] {
        &self.ports
    }

    /// Total number of ports `M`.
    pub fn total_ports(&self) -> u64 {
        self.total
    }

    /// Bin fraction `q_i = K_i / M` as a float.
    pub fn fraction(&self, bin: usize) -> f64 {
        self.ports[bin] as f64 / self.total as f64
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.ports.iter().map(|&k| k as f64 / self.total as f64).collect()
    }

    /// Bin fraction `q_i` as an exact rational.
    pub fn fraction_exact(&self, bin: usize) -> BigRational {
        BigRational::new(BigInt::from(self.ports[bin]), BigInt::from(self.total))
    }

    /// Errors unless `counts` has the same number of bins as the partition.
    pub fn check_counts(&self, counts: &CountVector) -> Result<()> {
        if counts.num_bins() != self.num_bins() {
            return Err(Error::DimensionMismatch {
                expected: self.num_bins(),
                got: counts.num_bins(),
            });
        }
        Ok(())
    }
}

/// A particle-count outcome `(n_1, ..., n_r)` with total `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        CountVector { counts, total }
    }

    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of particles `N`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Count fractions `x_i = n_i / N`; defined only for `N > 0`.
    pub fn fractions(&self) -> Result<Vec<f64>> {
        if self.total == 0 {
            return Err(Error::InvalidArgument("count fractions need N > 0"));
        }
        Ok(self
            .counts
            .iter()
            .map(|&n| n as f64 / self.total as f64)
            .collect())
    }
}

impl fmt::Display for CountVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.counts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

/// Numeric mode selector for probability computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericMode {
    /// Arbitrary-precision rationals; exact, practical up to a few hundred
    /// particles.
    Exact,
    /// Natural-log floating point; scales to large `N`.
    Log,
}

/// A probability carried either as an exact rational in `[0, 1]` or as its
/// natural logarithm (`-inf` encodes probability zero).
#[derive(Debug, Clone, PartialEq)]
pub enum Prob {
    Exact(BigRational),
    Log(f64),
}

impl Prob {
    /// Wraps an exact rational probability, checking it lies in `[0, 1]`.
    pub fn exact(value: BigRational) -> Result<Self> {
        if value.is_negative() || value > BigRational::from(BigInt::from(1)) {
            return Err(Error::InvalidArgument("exact probability must lie in [0, 1]"));
        }
        Ok(Prob::Exact(value))
    }

    /// Wraps a log-space probability; the log must be `<= 0` (or `-inf`).
    pub fn from_ln(ln: f64) -> Result<Self> {
        if ln.is_nan() || ln > 0.0 {
            return Err(Error::InvalidArgument("log probability must be <= 0 or -inf"));
        }
        Ok(Prob::Log(ln))
    }

    /// Natural logarithm of the probability; `-inf` for zero.
    pub fn ln(&self) -> f64 {
        match self {
            Prob::Exact(r) => ln_ratio(r),
            Prob::Log(l) => *l,
        }
    }

    /// Linear value as `f64`; underflows to `0.0` for very small
    /// probabilities.
    pub fn value(&self) -> f64 {
        match self {
            Prob::Exact(r) => r.to_f64().unwrap_or_else(|| self.ln().exp()),
            Prob::Log(l) => l.exp(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Prob::Exact(r) => r.is_zero(),
            Prob::Log(l) => *l == f64::NEG_INFINITY,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Prob::Exact(r) => Some(r),
            Prob::Log(_) => None,
        }
    }
}

/// Natural log of a positive big integer, usable far beyond the `f64` range.
pub(crate) fn ln_bigint(x: &BigInt) -> f64 {
    debug_assert!(x.is_positive());
    let bits = x.bits();
    if bits <= 960 {
        // Fits comfortably in a finite f64.
        return x.to_f64().expect("positive bigint").ln();
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().expect("shifted bigint").ln() + shift as f64 * core::f64::consts::LN_2
}

/// Natural log of a non-negative rational; `-inf` for zero.
pub(crate) fn ln_ratio(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    debug_assert!(r.is_positive());
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}
