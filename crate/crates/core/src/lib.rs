//! Counting statistics of identical particles in the binned output ports of
//! Haar-random unitary multiport networks.
//!
//! The crate computes, for `N` noninteracting identical particles sent through
//! an `M`-port network drawn from the Haar measure, the average probability of
//! counting `(n_1, ..., n_r)` particles in `r` bins of output ports. It covers
//! distinguishable particles (a multinomial law), bosons, and fermions, in
//! exact big-rational arithmetic and in log-space floating point, together
//! with:
//!
//! * the exact layered factorization of the `r`-bin probability into `r - 1`
//!   binary counting probabilities ([`binned::factorize`]),
//! * the asymptotic Gaussian law, its high-density variant, explicit tail
//!   bounds outside the concentration window, and the Kullback-Leibler
//!   machinery behind them ([`asymptotic`]),
//! * a Monte Carlo verification engine with Haar-unitary sampling, matrix
//!   permanents, and reproducible seeded streams ([`montecarlo`]),
//! * exact small-order unitary-group integrals via Weingarten tables
//!   ([`weingarten`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); the companion CLI crate
//! carries all IO and file formats.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod asymptotic;
pub mod binned;
pub mod combinatorics;
pub mod error;
pub mod factorial;
pub mod linalg;
pub mod montecarlo;
pub mod types;
pub mod weingarten;

pub use error::{Error, Result};
pub use types::{BinPartition, CountVector, NumericMode, ParticleKind, Prob};
