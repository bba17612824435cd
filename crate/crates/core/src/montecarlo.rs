//! Monte Carlo verification engine: Haar-random unitary sampling,
//! fixed-unitary transition and binned-count probabilities, averaging over
//! unitaries or input configurations, and mixed-state moment checks.
//!
//! Sampling is organized in fixed-size batches, one ChaCha stream per batch,
//! so results are bit-identical for a given master seed no matter how the
//! batches are scheduled (the CLI fans them out to a thread pool).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::binned::counting_prob_exact;
use crate::combinatorics::{compositions, compositions_bounded};
use crate::error::{Error, Result};
use crate::linalg::{determinant, permanent, CMatrix, C64};
use crate::types::{BinPartition, CountVector, ParticleKind, Prob};

/// Samples per independently seeded stream.
pub const MC_BATCH: u64 = 256;

/// Cost guards: exhaustive output enumeration and permanent evaluation.
pub const MAX_MC_PARTICLES: u64 = 8;
pub const MAX_MC_PORTS: u64 = 12;
pub const MAX_TRANSITION_PARTICLES: u64 = 10;

/// Per-port occupation numbers of `N` particles in `M` ports.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationVector {
    occ: Vec<u32>,
}

impl OccupationVector {
    pub fn new(occ: Vec<u32>) -> Self {
        OccupationVector { occ }
    }

    pub fn num_ports(&self) -> usize {
        self.occ.len()
    }

    pub fn occupations(&self) -> &[u32] {
        &self.occ
    }

    pub fn total(&self) -> u64 {
        self.occ.iter().map(|&o| o as u64).sum()
    }

    /// At most one particle per port, as fermions require.
    pub fn is_single_per_port(&self) -> bool {
        self.occ.iter().all(|&o| o <= 1)
    }

    /// Ports listed with multiplicity, ascending.
    pub fn port_list(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for (port, &o) in self.occ.iter().enumerate() {
            for _ in 0..o {
                out.push(port);
            }
        }
        out
    }

    /// `prod_i occ_i!` as `u64`; occupations are small under the MC guards.
    pub fn occ_factorial(&self) -> u64 {
        self.occ
            .iter()
            .map(|&o| (1..=o as u64).product::<u64>())
            .product()
    }

    /// Counts per bin for a partition into consecutive port ranges.
    pub fn bin_counts(&self, bins: &BinPartition) -> Result<CountVector> {
        if self.num_ports() as u64 != bins.total_ports() {
            return Err(Error::InvalidArgument(
                "occupation length must equal the total port count",
            ));
        }
        let mut counts = Vec::with_capacity(bins.num_bins());
        let mut offset = 0usize;
        for &k in bins.ports() {
            let end = offset + k as usize;
            counts.push(self.occ[offset..end].iter().map(|&o| o as u64).sum());
            offset = end;
        }
        Ok(CountVector::new(counts))
    }
}

/// All occupation vectors of `particles` particles in `ports` ports
/// (at most one per port when `single_per_port` is set), in a fixed
/// deterministic order.
pub fn output_occupations(ports: usize, particles: u64, single_per_port: bool) -> Vec<OccupationVector> {
    let lower = alloc::vec![0u64; ports];
    let upper = if single_per_port {
        alloc::vec![1u64; ports]
    } else {
        alloc::vec![particles; ports]
    };
    compositions_bounded(particles, &lower, &upper)
        .into_iter()
        .map(|c| OccupationVector::new(c.into_iter().map(|v| v as u32).collect()))
        .collect()
}

/// Draws an `M x M` Haar-distributed unitary: QR of a standard complex
/// Gaussian matrix, with the factorization made unique by a positive real
/// `R` diagonal (modified Gram-Schmidt with one reorthogonalization pass).
pub fn sample_haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<CMatrix> {
    if dim == 0 {
        return Err(Error::InvalidArgument("a unitary needs dimension >= 1"));
    }
    let mut a = CMatrix::zeros(dim);
    let scale = core::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in 0..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            a[(i, j)] = C64::new(re * scale, im * scale);
        }
    }
    for col in 0..dim {
        // Two projection passes keep the columns orthogonal to ~1e-15 even
        // when the Gaussian draw is poorly conditioned.
        for _ in 0..2 {
            for prev in 0..col {
                let mut proj = C64::new(0.0, 0.0);
                for row in 0..dim {
                    proj += a[(row, prev)].conj() * a[(row, col)];
                }
                for row in 0..dim {
                    let sub = proj * a[(row, prev)];
                    a[(row, col)] -= sub;
                }
            }
        }
        let mut norm2 = 0.0;
        for row in 0..dim {
            norm2 += a[(row, col)].norm_sqr();
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("degenerate Gaussian sample"));
        }
        for row in 0..dim {
            a[(row, col)] /= norm;
        }
    }
    Ok(a)
}

/// Probability of the transition `input -> output` through the fixed
/// network `u`: `|per(U[n|s])|^2/(n! s!)` for bosons, `|det(U[n|s])|^2` for
/// fermions, and the permanent of the entrywise `|u|^2` submatrix over `s!`
/// for distinguishable particles.
pub fn transition_prob(
    u: &CMatrix,
    input: &OccupationVector,
    output: &OccupationVector,
    kind: ParticleKind,
) -> Result<f64> {
    if input.num_ports() != u.dim() || output.num_ports() != u.dim() {
        return Err(Error::InvalidArgument(
            "occupation length must equal the unitary dimension",
        ));
    }
    if input.total() != output.total() {
        return Err(Error::InvalidArgument(
            "input and output must carry the same number of particles",
        ));
    }
    let n = input.total();
    if n > MAX_TRANSITION_PARTICLES {
        return Err(Error::SizeGuard {
            what: "transition particle number",
            limit: MAX_TRANSITION_PARTICLES,
            got: n,
        });
    }
    if n == 0 {
        return Ok(1.0);
    }
    if kind == ParticleKind::Fermion && !(input.is_single_per_port() && output.is_single_per_port())
    {
        return Err(Error::InvalidArgument(
            "fermion occupations allow at most one particle per port",
        ));
    }
    let rows = input.port_list();
    let cols = output.port_list();
    let sub = u.submatrix(&rows, &cols)?;
    Ok(match kind {
        ParticleKind::Boson => {
            let p = permanent(&sub)?;
            p.norm_sqr() / (input.occ_factorial() * output.occ_factorial()) as f64
        }
        ParticleKind::Fermion => determinant(&sub).norm_sqr(),
        ParticleKind::Distinguishable => {
            let p = permanent(&sub.abs2())?;
            p.re / output.occ_factorial() as f64
        }
    })
}

fn check_mc_size(particles: u64, ports: u64) -> Result<()> {
    if particles > MAX_MC_PARTICLES {
        return Err(Error::SizeGuard {
            what: "Monte Carlo particle number",
            limit: MAX_MC_PARTICLES,
            got: particles,
        });
    }
    if ports > MAX_MC_PORTS {
        return Err(Error::SizeGuard {
            what: "Monte Carlo port number",
            limit: MAX_MC_PORTS,
            got: ports,
        });
    }
    Ok(())
}

/// Full binned-count distribution for a fixed unitary and input, by
/// exhaustive enumeration of the output configurations.
pub fn binned_distribution(
    u: &CMatrix,
    input: &OccupationVector,
    bins: &BinPartition,
    kind: ParticleKind,
) -> Result<Vec<(CountVector, f64)>> {
    if bins.total_ports() != u.dim() as u64 {
        return Err(Error::InvalidArgument(
            "partition must cover exactly the unitary's ports",
        ));
    }
    let n = input.total();
    check_mc_size(n, u.dim() as u64)?;
    let keys: Vec<CountVector> = compositions(n, bins.num_bins())
        .into_iter()
        .map(CountVector::new)
        .collect();
    let index: BTreeMap<&CountVector, usize> =
        keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let mut probs = alloc::vec![0.0f64; keys.len()];
    for output in output_occupations(u.dim(), n, kind == ParticleKind::Fermion) {
        let p = transition_prob(u, input, &output, kind)?;
        let counts = output.bin_counts(bins)?;
        probs[index[&counts]] += p;
    }
    Ok(keys.into_iter().zip(probs).collect())
}

/// What gets randomized per Monte Carlo sample.
#[derive(Debug, Clone)]
pub enum AverageScheme {
    /// Fixed input occupation, fresh Haar-random unitary per sample.
    ///
    /// For quantum statistics this estimates the exact counting law for any
    /// input. For simultaneous distinguishable particles the Haar average
    /// carries correlations between the `|U_kl|^2` entries, so the
    /// multinomial law holds only up to `O(1/M)` here; its exact regime is
    /// [`AverageScheme::FixedUnitaryRandomInput`], where independent uniform
    /// input ports reproduce it for any fixed unitary.
    HaarFixedInput { input: OccupationVector },
    /// Fixed unitary, input configuration drawn uniformly over the
    /// statistics-allowed occupations per sample.
    FixedUnitaryRandomInput { unitary: CMatrix, particles: u64 },
    /// Fresh Haar unitary and a uniformly random at-most-one-per-port input
    /// per sample (the heralded-input regime).
    Scattershot { particles: u64 },
}

impl AverageScheme {
    fn particles(&self) -> u64 {
        match self {
            AverageScheme::HaarFixedInput { input } => input.total(),
            AverageScheme::FixedUnitaryRandomInput { particles, .. } => *particles,
            AverageScheme::Scattershot { particles } => *particles,
        }
    }

    fn validate(&self, bins: &BinPartition, kind: ParticleKind) -> Result<()> {
        let m = bins.total_ports();
        let n = self.particles();
        check_mc_size(n, m)?;
        if n == 0 {
            return Err(Error::InvalidArgument("averaging needs at least one particle"));
        }
        if kind == ParticleKind::Fermion && n > m {
            return Err(Error::TooManyFermions { particles: n, ports: m });
        }
        match self {
            AverageScheme::HaarFixedInput { input } => {
                if input.num_ports() as u64 != m {
                    return Err(Error::InvalidArgument(
                        "input occupation must cover all ports",
                    ));
                }
                if kind == ParticleKind::Fermion && !input.is_single_per_port() {
                    return Err(Error::InvalidArgument(
                        "fermion input allows at most one particle per port",
                    ));
                }
            }
            AverageScheme::FixedUnitaryRandomInput { unitary, .. } => {
                if unitary.dim() as u64 != m {
                    return Err(Error::InvalidArgument(
                        "unitary dimension must match the partition",
                    ));
                }
                if unitary.unitarity_defect() > 1e-10 {
                    return Err(Error::InvalidArgument("matrix is not unitary"));
                }
            }
            AverageScheme::Scattershot { particles } => {
                if *particles > m {
                    return Err(Error::InvalidArgument(
                        "scattershot needs at most one particle per input port",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / total as f64;
        self.count = total;
    }

    fn estimate(&self) -> McEstimate {
        let stderr = if self.count >= 2 {
            (self.m2 / (self.count - 1) as f64).max(0.0).sqrt() / (self.count as f64).sqrt()
        } else {
            f64::NAN
        };
        McEstimate {
            mean: self.mean,
            stderr,
            samples: self.count,
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(samples)`.
    pub stderr: f64,
    pub samples: u64,
}

/// Partial sums of one batch (or a merge of several); combine with
/// [`BatchStats::merge`] in batch-index order for deterministic results.
#[derive(Debug, Clone)]
pub struct BatchStats {
    keys: Vec<CountVector>,
    stats: Vec<Welford>,
}

impl BatchStats {
    pub fn merge(&mut self, other: &BatchStats) -> Result<()> {
        if self.keys != other.keys {
            return Err(Error::InvalidArgument("cannot merge unrelated batches"));
        }
        for (a, b) in self.stats.iter_mut().zip(&other.stats) {
            a.merge(b);
        }
        Ok(())
    }

    /// Per-count estimates of the samples accumulated so far.
    pub fn estimates(&self) -> Vec<(CountVector, McEstimate)> {
        self.keys
            .iter()
            .cloned()
            .zip(self.stats.iter().map(Welford::estimate))
            .collect()
    }
}

/// Number of batches a run of `samples` splits into.
pub fn num_batches(samples: u64) -> u64 {
    samples.div_ceil(MC_BATCH)
}

/// Runs one seeded batch of the averaging scheme. Batch `index` draws from
/// ChaCha stream `index` of the master seed; `len` is `MC_BATCH` except for
/// the final partial batch.
pub fn mc_batch(
    scheme: &AverageScheme,
    bins: &BinPartition,
    kind: ParticleKind,
    seed: u64,
    index: u64,
    len: u64,
) -> Result<BatchStats> {
    scheme.validate(bins, kind)?;
    let m = bins.total_ports() as usize;
    let n = scheme.particles();
    let keys: Vec<CountVector> = compositions(n, bins.num_bins())
        .into_iter()
        .map(CountVector::new)
        .collect();
    let mut stats = alloc::vec![Welford::default(); keys.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    // Uniform input ensembles are enumerated once per batch; indexing into
    // the list keeps the draw exactly uniform.
    let input_pool: Option<Vec<OccupationVector>> = match (scheme, kind) {
        (AverageScheme::FixedUnitaryRandomInput { .. }, ParticleKind::Boson) => {
            Some(output_occupations(m, n, false))
        }
        (AverageScheme::FixedUnitaryRandomInput { .. }, ParticleKind::Fermion)
        | (AverageScheme::Scattershot { .. }, _) => Some(output_occupations(m, n, true)),
        _ => None,
    };
    let mut scratch = alloc::vec![0.0f64; keys.len()];
    for _ in 0..len {
        let (unitary, input);
        match scheme {
            AverageScheme::HaarFixedInput { input: fixed } => {
                unitary = sample_haar_unitary(m, &mut rng)?;
                input = fixed.clone();
            }
            AverageScheme::FixedUnitaryRandomInput { unitary: fixed, .. } => {
                unitary = fixed.clone();
                input = match kind {
                    ParticleKind::Distinguishable => {
                        // Each particle picks its input port independently.
                        let mut occ = alloc::vec![0u32; m];
                        for _ in 0..n {
                            occ[rng.random_range(0..m)] += 1;
                        }
                        OccupationVector::new(occ)
                    }
                    _ => {
                        let pool = input_pool.as_ref().expect("pool built above");
                        pool[rng.random_range(0..pool.len())].clone()
                    }
                };
            }
            AverageScheme::Scattershot { .. } => {
                unitary = sample_haar_unitary(m, &mut rng)?;
                let pool = input_pool.as_ref().expect("pool built above");
                input = pool[rng.random_range(0..pool.len())].clone();
            }
        }
        let dist = binned_distribution(&unitary, &input, bins, kind)?;
        for (slot, (_, p)) in scratch.iter_mut().zip(&dist) {
            *slot = *p;
        }
        for (w, &p) in stats.iter_mut().zip(&scratch) {
            w.push(p);
        }
    }
    Ok(BatchStats { keys, stats })
}

/// Monte Carlo estimates of the average binned-count distribution.
#[derive(Debug, Clone)]
pub struct McResult {
    pub seed: u64,
    pub samples: u64,
    pub estimates: Vec<(CountVector, McEstimate)>,
}

/// Averages the scheme over `samples` draws with the given master seed.
/// Results are identical to merging [`mc_batch`] outputs in index order.
pub fn mc_average(
    scheme: &AverageScheme,
    bins: &BinPartition,
    kind: ParticleKind,
    samples: u64,
    seed: u64,
) -> Result<McResult> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples"));
    }
    let mut acc: Option<BatchStats> = None;
    for index in 0..num_batches(samples) {
        let len = MC_BATCH.min(samples - index * MC_BATCH);
        let batch = mc_batch(scheme, bins, kind, seed, index, len)?;
        match &mut acc {
            None => acc = Some(batch),
            Some(a) => a.merge(&batch)?,
        }
    }
    let acc = acc.expect("at least one batch");
    Ok(McResult {
        seed,
        samples,
        estimates: acc.estimates(),
    })
}

/// One coefficient `rho_{n,m}` of a mixed input state in the Fock basis.
#[derive(Debug, Clone)]
pub struct MixedStateEntry {
    pub left: OccupationVector,
    pub right: OccupationVector,
    pub weight: C64,
}

/// Monte Carlo check of one permanent-pair (or determinant-pair) moment
/// against its exact Haar average.
#[derive(Debug, Clone)]
pub struct MomentCheck {
    /// Index into the entry list.
    pub entry: usize,
    pub output: OccupationVector,
    pub mean: C64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    /// Exact average: zero unless the entry is diagonal, then
    /// `s! n! N! / ((M+N-1)...M)` (bosons) or `N! / (M...(M-N+1))`
    /// (fermions).
    pub exact: BigRational,
    pub z_re: f64,
    pub z_im: f64,
}

/// Binned-distribution check of the mixed state against the pure-state
/// counting probability.
#[derive(Debug, Clone)]
pub struct BinnedCheck {
    pub counts: CountVector,
    pub estimate: McEstimate,
    pub exact: BigRational,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct MixedStateReport {
    pub seed: u64,
    pub samples: u64,
    pub moments: Vec<MomentCheck>,
    pub binned: Vec<BinnedCheck>,
}

fn zscore(mean: f64, exact: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        (mean - exact) / stderr
    } else if (mean - exact).abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Exact Haar average of `per(U[n|s]) per(U[n|s])^*` (bosons) or the
/// determinant analogue (fermions) for a diagonal pair.
fn pair_moment_closed_form(
    left: &OccupationVector,
    output: &OccupationVector,
    ports: u64,
    kind: ParticleKind,
) -> BigRational {
    let n = left.total();
    let mut denom = BigInt::one();
    match kind {
        ParticleKind::Boson => {
            for j in 0..n {
                denom *= ports + n - 1 - j;
            }
            let mut numer = BigInt::from(left.occ_factorial()) * output.occ_factorial();
            numer *= crate::combinatorics::big_factorial(n);
            BigRational::new(numer, denom)
        }
        ParticleKind::Fermion => {
            for j in 0..n {
                denom *= ports - j;
            }
            BigRational::new(crate::combinatorics::big_factorial(n), denom)
        }
        ParticleKind::Distinguishable => unreachable!(),
    }
}

/// Validates a mixed-state coefficient set and Monte Carlo-checks both the
/// permanent-pair moments (cross terms average to zero, diagonal terms to
/// the closed form) and the resulting binned distribution against the
/// pure-state counting probability.
pub fn mixed_state_check(
    entries: &[MixedStateEntry],
    bins: &BinPartition,
    kind: ParticleKind,
    samples: u64,
    seed: u64,
) -> Result<MixedStateReport> {
    if !kind.is_quantum() {
        return Err(Error::UnsupportedKind(
            "mixed-state moments apply to quantum statistics",
        ));
    }
    if entries.is_empty() {
        return Err(Error::InvalidArgument("need at least one coefficient"));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples"));
    }
    let m = bins.total_ports();
    let n = entries[0].left.total();
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one particle"));
    }
    if n > 4 || m > 6 {
        return Err(Error::SizeGuard {
            what: "mixed-state check size (N <= 4, M <= 6)",
            limit: 4,
            got: n.max(m),
        });
    }
    for e in entries {
        if e.left.num_ports() as u64 != m || e.right.num_ports() as u64 != m {
            return Err(Error::InvalidArgument(
                "occupations must cover all ports of the partition",
            ));
        }
        if e.left.total() != n || e.right.total() != n {
            return Err(Error::InvalidArgument(
                "all coefficients must carry the same particle number",
            ));
        }
        if kind == ParticleKind::Fermion
            && !(e.left.is_single_per_port() && e.right.is_single_per_port())
        {
            return Err(Error::InvalidArgument(
                "fermion occupations allow at most one particle per port",
            ));
        }
    }
    if kind == ParticleKind::Fermion && n > m {
        return Err(Error::TooManyFermions { particles: n, ports: m });
    }
    // Hermiticity: every off-diagonal entry needs its conjugate mirror, and
    // the diagonal weights must be real and sum to one.
    let table: BTreeMap<(&OccupationVector, &OccupationVector), C64> = entries
        .iter()
        .map(|e| ((&e.left, &e.right), e.weight))
        .collect();
    if table.len() != entries.len() {
        return Err(Error::InvalidArgument("duplicate coefficient entries"));
    }
    let mut trace = C64::new(0.0, 0.0);
    for e in entries {
        if e.left == e.right {
            trace += e.weight;
        } else {
            let mirror = table
                .get(&(&e.right, &e.left))
                .ok_or(Error::InvalidArgument(
                    "coefficients must be Hermitian: missing mirror entry",
                ))?;
            if (mirror.conj() - e.weight).norm() > 1e-12 {
                return Err(Error::InvalidArgument(
                    "coefficients must be Hermitian: mirror entry is not conjugate",
                ));
            }
        }
    }
    if (trace - C64::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(Error::InvalidArgument("coefficients must have unit trace"));
    }

    let outputs = output_occupations(m as usize, n, kind == ParticleKind::Fermion);
    let count_keys: Vec<CountVector> = compositions(n, bins.num_bins())
        .into_iter()
        .map(CountVector::new)
        .collect();
    let count_index: BTreeMap<&CountVector, usize> =
        count_keys.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let mut distinct: Vec<&OccupationVector> = Vec::new();
    for e in entries {
        for occ in [&e.left, &e.right] {
            if !distinct.contains(&occ) {
                distinct.push(occ);
            }
        }
    }
    let occ_pos =
        |occ: &OccupationVector| distinct.iter().position(|d| *d == occ).expect("collected");

    let mut moment_re = alloc::vec![Welford::default(); entries.len() * outputs.len()];
    let mut moment_im = alloc::vec![Welford::default(); entries.len() * outputs.len()];
    let mut bin_stats = alloc::vec![Welford::default(); count_keys.len()];

    let mut amps = alloc::vec![C64::new(0.0, 0.0); distinct.len() * outputs.len()];
    let mut bin_scratch = alloc::vec![0.0f64; count_keys.len()];
    let batches = num_batches(samples);
    for index in 0..batches {
        let len = MC_BATCH.min(samples - index * MC_BATCH);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut batch_re = alloc::vec![Welford::default(); moment_re.len()];
        let mut batch_im = alloc::vec![Welford::default(); moment_im.len()];
        let mut batch_bins = alloc::vec![Welford::default(); bin_stats.len()];
        for _ in 0..len {
            let u = sample_haar_unitary(m as usize, &mut rng)?;
            for (d, occ) in distinct.iter().enumerate() {
                let rows = occ.port_list();
                for (s_idx, out) in outputs.iter().enumerate() {
                    let sub = u.submatrix(&rows, &out.port_list())?;
                    amps[d * outputs.len() + s_idx] = match kind {
                        ParticleKind::Boson => permanent(&sub)?,
                        ParticleKind::Fermion => determinant(&sub),
                        ParticleKind::Distinguishable => unreachable!(),
                    };
                }
            }
            for slot in bin_scratch.iter_mut() {
                *slot = 0.0;
            }
            for (e_idx, e) in entries.iter().enumerate() {
                let l = occ_pos(&e.left);
                let r = occ_pos(&e.right);
                let norm = 1.0
                    / ((e.left.occ_factorial() as f64).sqrt()
                        * (e.right.occ_factorial() as f64).sqrt());
                for (s_idx, out) in outputs.iter().enumerate() {
                    let lhs = amps[l * outputs.len() + s_idx];
                    let rhs = amps[r * outputs.len() + s_idx];
                    let moment = lhs * rhs.conj();
                    batch_re[e_idx * outputs.len() + s_idx].push(moment.re);
                    batch_im[e_idx * outputs.len() + s_idx].push(moment.im);
                    // Contribution of this coefficient to p(s | rho).
                    let contrib = e.weight * moment * norm / out.occ_factorial() as f64;
                    let counts = out.bin_counts(bins)?;
                    bin_scratch[count_index[&counts]] += contrib.re;
                }
            }
            for (w, &p) in batch_bins.iter_mut().zip(&bin_scratch) {
                w.push(p);
            }
        }
        for (a, b) in moment_re.iter_mut().zip(&batch_re) {
            a.merge(b);
        }
        for (a, b) in moment_im.iter_mut().zip(&batch_im) {
            a.merge(b);
        }
        for (a, b) in bin_stats.iter_mut().zip(&batch_bins) {
            a.merge(b);
        }
    }

    let mut moments = Vec::with_capacity(entries.len() * outputs.len());
    for (e_idx, e) in entries.iter().enumerate() {
        for (s_idx, out) in outputs.iter().enumerate() {
            let re = moment_re[e_idx * outputs.len() + s_idx].estimate();
            let im = moment_im[e_idx * outputs.len() + s_idx].estimate();
            let exact = if e.left == e.right {
                pair_moment_closed_form(&e.left, out, m, kind)
            } else {
                BigRational::zero()
            };
            let exact_f = exact.to_f64().unwrap_or(0.0);
            moments.push(MomentCheck {
                entry: e_idx,
                output: out.clone(),
                mean: C64::new(re.mean, im.mean),
                stderr_re: re.stderr,
                stderr_im: im.stderr,
                z_re: zscore(re.mean, exact_f, re.stderr),
                z_im: zscore(im.mean, 0.0, im.stderr),
                exact,
            });
        }
    }
    let mut binned = Vec::with_capacity(count_keys.len());
    for (key, w) in count_keys.iter().zip(&bin_stats) {
        let estimate = w.estimate();
        let exact = counting_prob_exact(key, bins, kind)?;
        let exact_f = Prob::exact(exact.clone())?.value();
        binned.push(BinnedCheck {
            counts: key.clone(),
            estimate,
            z: zscore(estimate.mean, exact_f, estimate.stderr),
            exact,
        });
    }
    Ok(MixedStateReport {
        seed,
        samples,
        moments,
        binned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binned::counting_prob_exact;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn hadamard() -> CMatrix {
        let s = core::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_rows(
            2,
            alloc::vec![
                C64::new(s, 0.0),
                C64::new(s, 0.0),
                C64::new(s, 0.0),
                C64::new(-s, 0.0)
            ],
        )
        .unwrap()
    }

    #[test]
    fn haar_samples_are_unitary() {
        let mut r = rng(7);
        for dim in [1usize, 2, 5, 12] {
            let u = sample_haar_unitary(dim, &mut r).unwrap();
            assert!(
                u.unitarity_defect() <= 1e-12,
                "dim {dim}: defect {}",
                u.unitarity_defect()
            );
        }
        assert!(sample_haar_unitary(0, &mut r).is_err());
    }

    #[test]
    fn haar_first_entry_second_moment() {
        // <|U_11|^2> = 1/M.
        let mut r = rng(11);
        let m = 4usize;
        let mut w = Welford::default();
        for _ in 0..20_000 {
            let u = sample_haar_unitary(m, &mut r).unwrap();
            w.push(u[(0, 0)].norm_sqr());
        }
        let e = w.estimate();
        assert!(
            (e.mean - 0.25).abs() <= 3.0 * e.stderr,
            "mean {} stderr {}",
            e.mean,
            e.stderr
        );
    }

    #[test]
    fn haar_first_entry_fourth_moment() {
        // <|U_11|^4> = 2/(M(M+1)) = 1/10 at M = 4.
        let mut r = rng(13);
        let m = 4usize;
        let mut w = Welford::default();
        for _ in 0..20_000 {
            let u = sample_haar_unitary(m, &mut r).unwrap();
            let a = u[(0, 0)].norm_sqr();
            w.push(a * a);
        }
        let e = w.estimate();
        assert!(
            (e.mean - 0.1).abs() <= 3.0 * e.stderr,
            "mean {} stderr {}",
            e.mean,
            e.stderr
        );
    }

    #[test]
    fn single_particle_transition_is_matrix_element() {
        let mut r = rng(3);
        let u = sample_haar_unitary(3, &mut r).unwrap();
        let input = OccupationVector::new(alloc::vec![0, 1, 0]);
        let output = OccupationVector::new(alloc::vec![0, 0, 1]);
        for kind in [
            ParticleKind::Distinguishable,
            ParticleKind::Boson,
            ParticleKind::Fermion,
        ] {
            let p = transition_prob(&u, &input, &output, kind).unwrap();
            assert!((p - u[(1, 2)].norm_sqr()).abs() < 1e-14);
        }
    }

    #[test]
    fn hong_ou_mandel_dip_and_fermion_antibunching() {
        let u = hadamard();
        let pair = OccupationVector::new(alloc::vec![1, 1]);
        let boson = transition_prob(&u, &pair, &pair, ParticleKind::Boson).unwrap();
        assert!(boson.abs() < 1e-12);
        let fermion = transition_prob(&u, &pair, &pair, ParticleKind::Fermion).unwrap();
        assert!((fermion - 1.0).abs() < 1e-12);
        let classical = transition_prob(&u, &pair, &pair, ParticleKind::Distinguishable).unwrap();
        assert!((classical - 0.5).abs() < 1e-12);
    }

    #[test]
    fn transitions_normalize_over_outputs() {
        let mut r = rng(17);
        for kind in [
            ParticleKind::Distinguishable,
            ParticleKind::Boson,
            ParticleKind::Fermion,
        ] {
            let m = 5usize;
            let u = sample_haar_unitary(m, &mut r).unwrap();
            let input = OccupationVector::new(alloc::vec![1, 0, 1, 1, 0]);
            let mut total = 0.0;
            for out in output_occupations(m, 3, kind == ParticleKind::Fermion) {
                total += transition_prob(&u, &input, &out, kind).unwrap();
            }
            assert!((total - 1.0).abs() < 1e-8, "kind {kind}: {total}");
        }
    }

    #[test]
    fn binned_distribution_single_bin_and_identity() {
        let mut r = rng(23);
        let u = sample_haar_unitary(4, &mut r).unwrap();
        let input = OccupationVector::new(alloc::vec![2, 1, 0, 0]);
        let bins = BinPartition::new(alloc::vec![4]).unwrap();
        let d = binned_distribution(&u, &input, &bins, ParticleKind::Boson).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0].1 - 1.0).abs() < 1e-9);

        // Identity network does not mix ports.
        let id = CMatrix::identity(4);
        let bins2 = BinPartition::new(alloc::vec![1, 3]).unwrap();
        let input2 = OccupationVector::new(alloc::vec![3, 0, 0, 0]);
        let d2 = binned_distribution(&id, &input2, &bins2, ParticleKind::Distinguishable).unwrap();
        for (counts, p) in d2 {
            if counts.counts() == [3, 0] {
                assert!((p - 1.0).abs() < 1e-12);
            } else {
                assert!(p.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mc_average_matches_exact_boson_pair() {
        let bins = BinPartition::new(alloc::vec![1, 1]).unwrap();
        let scheme = AverageScheme::HaarFixedInput {
            input: OccupationVector::new(alloc::vec![1, 1]),
        };
        let res = mc_average(&scheme, &bins, ParticleKind::Boson, 2000, 42).unwrap();
        for (counts, est) in &res.estimates {
            let exact = counting_prob_exact(counts, &bins, ParticleKind::Boson).unwrap();
            let exact = crate::types::Prob::exact(exact).unwrap().value();
            assert!(
                (est.mean - exact).abs() <= 3.0 * est.stderr,
                "counts {counts}: {est:?} vs {exact}"
            );
        }
    }

    #[test]
    fn mc_average_seed_determinism() {
        let bins = BinPartition::new(alloc::vec![2, 2]).unwrap();
        let scheme = AverageScheme::Scattershot { particles: 2 };
        let a = mc_average(&scheme, &bins, ParticleKind::Boson, 600, 5).unwrap();
        let b = mc_average(&scheme, &bins, ParticleKind::Boson, 600, 5).unwrap();
        for ((_, x), (_, y)) in a.estimates.iter().zip(&b.estimates) {
            assert_eq!(x.mean.to_bits(), y.mean.to_bits());
            assert_eq!(x.stderr.to_bits(), y.stderr.to_bits());
        }
        let c = mc_average(&scheme, &bins, ParticleKind::Boson, 600, 6).unwrap();
        assert!(a
            .estimates
            .iter()
            .zip(&c.estimates)
            .any(|((_, x), (_, y))| x.mean != y.mean));
    }

    #[test]
    fn mc_batch_merge_equals_sequential() {
        let bins = BinPartition::new(alloc::vec![1, 2]).unwrap();
        let scheme = AverageScheme::HaarFixedInput {
            input: OccupationVector::new(alloc::vec![1, 1, 0]),
        };
        let samples = 3 * MC_BATCH / 2;
        let direct = mc_average(&scheme, &bins, ParticleKind::Fermion, samples, 9).unwrap();
        let mut acc: Option<BatchStats> = None;
        for index in (0..num_batches(samples)).rev() {
            let len = MC_BATCH.min(samples - index * MC_BATCH);
            let b = mc_batch(&scheme, &bins, ParticleKind::Fermion, 9, index, len).unwrap();
            match &mut acc {
                None => acc = Some(b),
                Some(a) => {
                    // merge in reverse order on purpose: means still agree to
                    // rounding, which the assertion tolerance absorbs
                    a.merge(&b).unwrap();
                }
            }
        }
        let acc = acc.unwrap();
        for ((_, x), w) in direct.estimates.iter().zip(&acc.stats) {
            assert!((x.mean - w.estimate().mean).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_rejects_bad_requests() {
        let bins = BinPartition::new(alloc::vec![2, 2]).unwrap();
        let scheme = AverageScheme::HaarFixedInput {
            input: OccupationVector::new(alloc::vec![1, 1, 1, 0]),
        };
        assert!(matches!(
            mc_average(&scheme, &bins, ParticleKind::Boson, 1, 0),
            Err(Error::InvalidArgument(_))
        ));
        let overfull = AverageScheme::HaarFixedInput {
            input: OccupationVector::new(alloc::vec![2, 1, 1, 1]),
        };
        assert!(matches!(
            mc_average(&overfull, &bins, ParticleKind::Fermion, 10, 0),
            Err(Error::TooManyFermions { .. } | Error::InvalidArgument(_))
        ));
        let big = AverageScheme::Scattershot { particles: 9 };
        assert!(matches!(
            mc_average(&big, &bins, ParticleKind::Boson, 10, 0),
            Err(Error::SizeGuard { .. } | Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn mixed_state_diagonal_matches_counting_prob() {
        let bins = BinPartition::new(alloc::vec![1, 2]).unwrap();
        let entries = [MixedStateEntry {
            left: OccupationVector::new(alloc::vec![1, 1, 0]),
            right: OccupationVector::new(alloc::vec![1, 1, 0]),
            weight: C64::new(1.0, 0.0),
        }];
        let rep = mixed_state_check(&entries, &bins, ParticleKind::Boson, 2000, 77).unwrap();
        for b in &rep.binned {
            assert!(
                b.z.abs() <= 3.0,
                "counts {}: z = {} (mean {}, exact {})",
                b.counts,
                b.z,
                b.estimate.mean,
                b.exact
            );
        }
    }

    #[test]
    fn mixed_state_cross_moment_vanishes() {
        let bins = BinPartition::new(alloc::vec![1, 2]).unwrap();
        let l = OccupationVector::new(alloc::vec![1, 1, 0]);
        let r = OccupationVector::new(alloc::vec![2, 0, 0]);
        let entries = [
            MixedStateEntry {
                left: l.clone(),
                right: l.clone(),
                weight: C64::new(0.5, 0.0),
            },
            MixedStateEntry {
                left: r.clone(),
                right: r.clone(),
                weight: C64::new(0.5, 0.0),
            },
            MixedStateEntry {
                left: l.clone(),
                right: r.clone(),
                weight: C64::new(0.25, 0.1),
            },
            MixedStateEntry {
                left: r,
                right: l,
                weight: C64::new(0.25, -0.1),
            },
        ];
        let rep = mixed_state_check(&entries, &bins, ParticleKind::Boson, 4000, 123).unwrap();
        for mc in rep.moments.iter().filter(|mc| mc.entry >= 2) {
            assert!(mc.exact.is_zero());
            assert!(mc.z_re.abs() <= 3.5, "z_re {}", mc.z_re);
            assert!(mc.z_im.abs() <= 3.5, "z_im {}", mc.z_im);
        }
    }

    #[test]
    fn mixed_state_rejects_non_hermitian_and_bad_trace() {
        let bins = BinPartition::new(alloc::vec![1, 2]).unwrap();
        let l = OccupationVector::new(alloc::vec![1, 1, 0]);
        let r = OccupationVector::new(alloc::vec![2, 0, 0]);
        let missing_mirror = [
            MixedStateEntry {
                left: l.clone(),
                right: l.clone(),
                weight: C64::new(1.0, 0.0),
            },
            MixedStateEntry {
                left: l.clone(),
                right: r.clone(),
                weight: C64::new(0.5, 0.0),
            },
        ];
        assert!(mixed_state_check(&missing_mirror, &bins, ParticleKind::Boson, 10, 0).is_err());
        let bad_trace = [MixedStateEntry {
            left: l.clone(),
            right: l,
            weight: C64::new(0.7, 0.0),
        }];
        assert!(mixed_state_check(&bad_trace, &bins, ParticleKind::Boson, 10, 0).is_err());
    }
}
