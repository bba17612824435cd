//! Exact average counting probabilities for binned output ports: the
//! multinomial law for distinguishable particles, its boson/fermion
//! counterparts, the quantum statistics factor, and the layered binary
//! factorization.
//!
//! Every probability is available in exact big-rational arithmetic and in
//! log-space floating point. The exact route goes through binomial
//! coefficients (`prod_i C(K_i + n_i - 1, n_i) / C(M + N - 1, N)` for bosons,
//! `prod_i C(K_i, n_i) / C(M, N)` for fermions), while the statistics factor
//! is evaluated from its defining product — the two routes agreeing exactly is
//! one of the crate's invariants.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
#[allow(unused_imports)]
use num_traits::Float;

use crate::combinatorics::{big_binomial, big_multinomial, big_pow};
use crate::error::{Error, Result};
use crate::factorial::{ln_binomial, ln_factorial};
use crate::types::{BinPartition, CountVector, NumericMode, ParticleKind, Prob};

fn validate(counts: &CountVector, bins: &BinPartition, kind: ParticleKind) -> Result<()> {
    bins.check_counts(counts)?;
    if kind == ParticleKind::Fermion && counts.total() > bins.total_ports() {
        return Err(Error::TooManyFermions {
            particles: counts.total(),
            ports: bins.total_ports(),
        });
    }
    Ok(())
}

/// Multinomial probability of counting `n` distinguishable particles in the
/// bins: `N!/(prod n_i!) prod q_i^{n_i}` with `q_i = K_i/M`.
pub fn classical_prob_exact(counts: &CountVector, bins: &BinPartition) -> Result<BigRational> {
    bins.check_counts(counts)?;
    let n_total = counts.total();
    let numer = big_multinomial(counts.counts())
        * counts
            .counts()
            .iter()
            .zip(bins.ports())
            .map(|(&n, &k)| big_pow(k, n))
            .product::<BigInt>();
    let denom = big_pow(bins.total_ports(), n_total);
    Ok(BigRational::new(numer, denom))
}

/// Log-space version of [`classical_prob_exact`].
pub fn classical_prob_ln(counts: &CountVector, bins: &BinPartition) -> Result<f64> {
    bins.check_counts(counts)?;
    let n_total = counts.total();
    let ln_m = (bins.total_ports() as f64).ln();
    let mut acc = ln_factorial(n_total);
    for (&n, &k) in counts.counts().iter().zip(bins.ports()) {
        acc -= ln_factorial(n);
        if n > 0 {
            acc += n as f64 * ((k as f64).ln() - ln_m);
        }
    }
    Ok(acc)
}

/// The quantum statistics factor
/// `Q^(s)(n|K) = prod_i prod_{l<n_i} [1 + s l/K_i] / prod_{l<N} [1 + s l/M]`
/// with `s = +1` for bosons and `s = -1` for fermions, evaluated exactly from
/// the defining product.
///
/// For fermions the factor vanishes whenever some bin is overfilled
/// (`n_i > K_i`).
pub fn quantum_factor_exact(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
) -> Result<BigRational> {
    if !kind.is_quantum() {
        return Err(Error::UnsupportedKind(
            "the statistics factor is identically 1 for distinguishable particles",
        ));
    }
    validate(counts, bins, kind)?;
    let sign = kind.sign() as i64;
    let mut numer = BigInt::one();
    let mut numer_den = BigInt::one();
    for (&n, &k) in counts.counts().iter().zip(bins.ports()) {
        for l in 0..n {
            let factor = k as i64 + sign * l as i64;
            if factor <= 0 {
                // Fermion bin overfilled: the product contains a zero factor.
                return Ok(BigRational::zero());
            }
            numer *= factor;
        }
        numer_den *= big_pow(k, n);
    }
    let mut denom = BigInt::one();
    for l in 0..counts.total() {
        // For fermions l <= N - 1 <= M - 1, so M - l >= 1.
        denom *= bins.total_ports() as i64 + sign * l as i64;
    }
    let denom_den = big_pow(bins.total_ports(), counts.total());
    Ok(BigRational::new(numer * denom_den, numer_den * denom))
}

/// Log of the quantum statistics factor; `-inf` when it vanishes.
pub fn quantum_factor_ln(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
) -> Result<f64> {
    if !kind.is_quantum() {
        return Err(Error::UnsupportedKind(
            "the statistics factor is identically 1 for distinguishable particles",
        ));
    }
    validate(counts, bins, kind)?;
    let n_total = counts.total();
    let m_total = bins.total_ports();
    let ln_m = (m_total as f64).ln();
    let mut acc = 0.0f64;
    match kind {
        ParticleKind::Boson => {
            for (&n, &k) in counts.counts().iter().zip(bins.ports()) {
                // prod_{l<n} (k + l)/k = (k + n - 1)! / ((k - 1)! k^n)
                acc += ln_factorial(k + n - 1) - ln_factorial(k - 1) - n as f64 * (k as f64).ln();
            }
            acc -= ln_factorial(m_total + n_total - 1)
                - ln_factorial(m_total - 1)
                - n_total as f64 * ln_m;
        }
        ParticleKind::Fermion => {
            for (&n, &k) in counts.counts().iter().zip(bins.ports()) {
                if n > k {
                    return Ok(f64::NEG_INFINITY);
                }
                // prod_{l<n} (k - l)/k = k! / ((k - n)! k^n)
                acc += ln_factorial(k) - ln_factorial(k - n) - n as f64 * (k as f64).ln();
            }
            acc -= ln_factorial(m_total) - ln_factorial(m_total - n_total) - n_total as f64 * ln_m;
        }
        ParticleKind::Distinguishable => unreachable!(),
    }
    Ok(acc)
}

/// Average probability of the count vector `n` for the given particle kind.
///
/// Distinguishable particles reduce to [`classical_prob_exact`]; bosons count
/// Fock states per bin (`prod_i C(K_i + n_i - 1, n_i) / C(M + N - 1, N)`) and
/// fermions port subsets (`prod_i C(K_i, n_i) / C(M, N)`).
pub fn counting_prob_exact(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
) -> Result<BigRational> {
    validate(counts, bins, kind)?;
    let n_total = counts.total();
    let m_total = bins.total_ports();
    match kind {
        ParticleKind::Distinguishable => classical_prob_exact(counts, bins),
        ParticleKind::Boson => {
            let numer: BigInt = counts
                .counts()
                .iter()
                .zip(bins.ports())
                .map(|(&n, &k)| big_binomial(k + n - 1, n))
                .product();
            Ok(BigRational::new(numer, big_binomial(m_total + n_total - 1, n_total)))
        }
        ParticleKind::Fermion => {
            if counts.counts().iter().zip(bins.ports()).any(|(&n, &k)| n > k) {
                return Ok(BigRational::zero());
            }
            let numer: BigInt = counts
                .counts()
                .iter()
                .zip(bins.ports())
                .map(|(&n, &k)| big_binomial(k, n))
                .product();
            Ok(BigRational::new(numer, big_binomial(m_total, n_total)))
        }
    }
}

/// Log-space version of [`counting_prob_exact`]; `-inf` for fermion counts
/// with an overfilled bin.
pub fn counting_prob_ln(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
) -> Result<f64> {
    validate(counts, bins, kind)?;
    let n_total = counts.total();
    let m_total = bins.total_ports();
    match kind {
        ParticleKind::Distinguishable => classical_prob_ln(counts, bins),
        ParticleKind::Boson => {
            let mut acc = -ln_binomial(m_total + n_total - 1, n_total);
            for (&n, &k) in counts.counts().iter().zip(bins.ports()) {
                acc += ln_binomial(k + n - 1, n);
            }
            Ok(acc)
        }
        ParticleKind::Fermion => {
            let mut acc = -ln_binomial(m_total, n_total);
            for (&n, &k) in counts.counts().iter().zip(bins.ports()) {
                if n > k {
                    return Ok(f64::NEG_INFINITY);
                }
                acc += ln_binomial(k, n);
            }
            Ok(acc)
        }
    }
}

/// Mode-dispatching wrapper around the exact and log-space counting
/// probabilities.
pub fn counting_prob(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
    mode: NumericMode,
) -> Result<Prob> {
    match mode {
        NumericMode::Exact => Prob::exact(counting_prob_exact(counts, bins, kind)?),
        NumericMode::Log => Prob::from_ln(counting_prob_ln(counts, bins, kind)?.min(0.0)),
    }
}

/// Average probability of one specific output configuration: the inverse of
/// the number of Fock states (`1/C(M+N-1, N)` bosons, `1/C(M, N)` fermions)
/// or `M^-N` for distinguishable particles.
pub fn avg_configuration_prob_exact(
    particles: u64,
    ports: u64,
    kind: ParticleKind,
) -> Result<BigRational> {
    check_configuration(particles, ports, kind)?;
    let one = BigInt::one();
    Ok(match kind {
        ParticleKind::Distinguishable => BigRational::new(one, big_pow(ports, particles)),
        ParticleKind::Boson => {
            BigRational::new(one, big_binomial(ports + particles - 1, particles))
        }
        ParticleKind::Fermion => BigRational::new(one, big_binomial(ports, particles)),
    })
}

/// Log-space version of [`avg_configuration_prob_exact`].
pub fn avg_configuration_prob_ln(particles: u64, ports: u64, kind: ParticleKind) -> Result<f64> {
    check_configuration(particles, ports, kind)?;
    Ok(match kind {
        ParticleKind::Distinguishable => -(particles as f64) * (ports as f64).ln(),
        ParticleKind::Boson => -ln_binomial(ports + particles - 1, particles),
        ParticleKind::Fermion => -ln_binomial(ports, particles),
    })
}

fn check_configuration(particles: u64, ports: u64, kind: ParticleKind) -> Result<()> {
    if particles == 0 {
        return Err(Error::InvalidArgument("need at least one particle"));
    }
    if ports == 0 {
        return Err(Error::InvalidArgument("need at least one port"));
    }
    if kind == ParticleKind::Fermion && particles > ports {
        return Err(Error::TooManyFermions { particles, ports });
    }
    Ok(())
}

/// Exponential decay of the single-configuration probability at fixed
/// particle density `alpha = N/M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigurationDecay {
    /// Decay rate `gamma = ln(1/alpha) + (1 + s/alpha) ln(1 + s alpha)`.
    pub rate: f64,
    /// Leading-order `ln p = ln sqrt(2 pi N (1 + alpha)) - gamma N`.
    pub log_prob: f64,
}

/// Leading-order exponential smallness of the average single-configuration
/// probability for quantum statistics.
pub fn configuration_decay(
    alpha: f64,
    particles: u64,
    kind: ParticleKind,
) -> Result<ConfigurationDecay> {
    if !kind.is_quantum() {
        return Err(Error::UnsupportedKind(
            "the single-configuration decay rate applies to quantum statistics",
        ));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidDensity {
            alpha,
            reason: "density must be positive and finite",
        });
    }
    if kind == ParticleKind::Fermion && alpha >= 1.0 {
        return Err(Error::InvalidDensity {
            alpha,
            reason: "fermion density must be below 1",
        });
    }
    let s = kind.sign() as f64;
    let rate = -alpha.ln() + (1.0 + s / alpha) * (s * alpha).ln_1p();
    let n = particles as f64;
    let log_prob = 0.5 * (2.0 * core::f64::consts::PI * n * (1.0 + alpha)).ln() - rate * n;
    Ok(ConfigurationDecay { rate, log_prob })
}

/// One binary layer of the sequential factorization: the leading bin
/// (`K_s` ports, `n_s` counts) against everything that remains
/// (`M_s - K_s` ports, `N_s - n_s` counts).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    /// Layer index `s`, starting at 1.
    pub index: usize,
    /// Particles left before this layer, `N_s = N - sum_{i<s} n_i`.
    pub particles: u64,
    /// Ports left before this layer, `M_s = M - sum_{i<s} K_i`.
    pub ports: u64,
    /// Count in the leading bin, `n_s`.
    pub count: u64,
    /// Ports in the leading bin, `K_s`.
    pub bin_ports: u64,
}

impl Layer {
    /// Effective bin fraction of the layer, `qbar_s = K_s / M_s`.
    pub fn q_fraction(&self) -> BigRational {
        BigRational::new(BigInt::from(self.bin_ports), BigInt::from(self.ports))
    }

    /// Effective count fraction `xbar_s = n_s / N_s`; `None` when no
    /// particles remain.
    pub fn x_fraction(&self) -> Option<BigRational> {
        (self.particles > 0)
            .then(|| BigRational::new(BigInt::from(self.count), BigInt::from(self.particles)))
    }

    fn split(&self) -> (CountVector, BinPartition) {
        let counts = CountVector::new(alloc::vec![self.count, self.particles - self.count]);
        let bins = BinPartition::new(alloc::vec![self.bin_ports, self.ports - self.bin_ports])
            .expect("layer partition is valid by construction");
        (counts, bins)
    }

    /// Exact binary counting probability `P_{N_s, M_s}(n_s | K_s)` of this
    /// layer.
    pub fn prob_exact(&self, kind: ParticleKind) -> Result<BigRational> {
        let (counts, bins) = self.split();
        counting_prob_exact(&counts, &bins, kind)
    }

    /// Log-space version of [`Layer::prob_exact`].
    pub fn prob_ln(&self, kind: ParticleKind) -> Result<f64> {
        let (counts, bins) = self.split();
        counting_prob_ln(&counts, &bins, kind)
    }
}

/// The `r - 1` binary layers whose probabilities multiply to the `r`-bin
/// counting probability, in bin-index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerDecomposition {
    pub kind: ParticleKind,
    pub layers: Vec<Layer>,
}

impl LayerDecomposition {
    /// Exact product of the layer probabilities; equals the `r`-bin counting
    /// probability with exact rational equality.
    ///
    /// Stops at the first vanishing layer: for fermions a zero layer always
    /// precedes any layer whose remaining subproblem would be overfilled.
    pub fn product_exact(&self) -> Result<BigRational> {
        let mut acc = BigRational::one();
        for layer in &self.layers {
            acc *= layer.prob_exact(self.kind)?;
            if acc.is_zero() {
                return Ok(acc);
            }
        }
        Ok(acc)
    }

    /// Sum of the layer log-probabilities, `-inf` once a layer vanishes.
    pub fn product_ln(&self) -> Result<f64> {
        let mut acc = 0.0f64;
        for layer in &self.layers {
            acc += layer.prob_ln(self.kind)?;
            if acc == f64::NEG_INFINITY {
                return Ok(acc);
            }
        }
        Ok(acc)
    }
}

/// Splits the `r`-bin counting problem into its `r - 1` sequential binary
/// layers. Requires `r >= 2`.
pub fn factorize(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
) -> Result<LayerDecomposition> {
    validate(counts, bins, kind)?;
    let r = bins.num_bins();
    if r < 2 {
        return Err(Error::InvalidArgument(
            "factorization needs at least two bins",
        ));
    }
    let mut layers = Vec::with_capacity(r - 1);
    let mut particles = counts.total();
    let mut ports = bins.total_ports();
    for s in 0..r - 1 {
        layers.push(Layer {
            index: s + 1,
            particles,
            ports,
            count: counts.counts()[s],
            bin_ports: bins.ports()[s],
        });
        particles -= counts.counts()[s];
        ports -= bins.ports()[s];
    }
    Ok(LayerDecomposition { kind, layers })
}
