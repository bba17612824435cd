//! Asymptotic Gaussian laws for the binned counting probability, explicit
//! tail bounds outside the concentration window, and the Kullback-Leibler
//! machinery connecting them.
//!
//! Everything here works with floats; the exact probabilities of
//! [`crate::binned`] serve as oracles for it. Where a result carries an
//! unspecified `1 + O(1/M)` factor in its textbook form, the bound returned
//! here includes the exact Euler-Maclaurin correction constants instead, so
//! the returned value is a true bound and not just a leading-order shape.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::types::{BinPartition, CountVector, ParticleKind};

/// Concentration window `|n_i - N q_i| <= A N^(2/3 - epsilon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    a: f64,
    epsilon: f64,
}

impl Window {
    /// Requires `A > 0` and `0 < epsilon < 1/6`.
    pub fn new(a: f64, epsilon: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidWindow("A must be positive and finite"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0 / 6.0) {
            return Err(Error::InvalidWindow("epsilon must lie strictly in (0, 1/6)"));
        }
        Ok(Window { a, epsilon })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Maximal allowed deviation `A N^(2/3 - epsilon)` at `N` particles.
    pub fn half_width(&self, particles: u64) -> f64 {
        self.a * (particles as f64).powf(2.0 / 3.0 - self.epsilon)
    }

    /// Whether every bin deviation satisfies the window condition.
    pub fn contains(&self, counts: &CountVector, bins: &BinPartition) -> Result<bool> {
        Ok(self.first_violation(counts, bins)?.is_none())
    }

    /// Index of the first bin violating the window, if any.
    ///
    /// Deviations are evaluated as exact integers `|n_i M - N K_i| / M` to
    /// keep the comparison free of rounding at the boundary.
    pub fn first_violation(
        &self,
        counts: &CountVector,
        bins: &BinPartition,
    ) -> Result<Option<usize>> {
        bins.check_counts(counts)?;
        let n_total = counts.total() as i128;
        let m_total = bins.total_ports() as i128;
        let limit = self.half_width(counts.total());
        for (i, (&n, &k)) in counts.counts().iter().zip(bins.ports()).enumerate() {
            let diff = (n as i128 * m_total - n_total * k as i128).unsigned_abs();
            let deviation = diff as f64 / m_total as f64;
            if deviation > limit {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }
}

impl Default for Window {
    /// The sweep default `A = 1`, `epsilon = 0.1`.
    fn default() -> Self {
        Window { a: 1.0, epsilon: 0.1 }
    }
}

/// Parameters of the fixed-density limit: `alpha = N/M` and the bin
/// fractions `q_i = K_i/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityParams {
    alpha: f64,
    q: Vec<f64>,
}

impl DensityParams {
    pub fn new(alpha: f64, q: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidDensity {
                alpha,
                reason: "density must be positive and finite",
            });
        }
        if q.is_empty() || q.iter().any(|&qi| !(qi > 0.0 && qi <= 1.0)) {
            return Err(Error::InvalidArgument("bin fractions must lie in (0, 1]"));
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("bin fractions must sum to 1"));
        }
        Ok(DensityParams { alpha, q })
    }

    /// Additionally checks the kind-specific density range (fermions need
    /// `alpha < 1`).
    pub fn check_kind(&self, kind: ParticleKind) -> Result<()> {
        if kind == ParticleKind::Fermion && self.alpha >= 1.0 {
            return Err(Error::InvalidDensity {
                alpha: self.alpha,
                reason: "fermion density must be below 1",
            });
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }
}

/// Signed density `sigma * alpha` after validating the kind-specific range.
fn sigma_alpha(kind: ParticleKind, alpha: f64) -> Result<f64> {
    match kind {
        ParticleKind::Distinguishable => {
            if alpha.is_nan() || alpha < 0.0 {
                return Err(Error::InvalidDensity {
                    alpha,
                    reason: "density must be non-negative",
                });
            }
            Ok(0.0)
        }
        ParticleKind::Boson => {
            if !(alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::InvalidDensity {
                    alpha,
                    reason: "density must be positive and finite",
                });
            }
            Ok(alpha)
        }
        ParticleKind::Fermion => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::InvalidDensity {
                    alpha,
                    reason: "fermion density must lie in (0, 1)",
                });
            }
            Ok(-alpha)
        }
    }
}

/// Binary Kullback-Leibler divergence
/// `x ln(x/q) + (1 - x) ln((1 - x)/(1 - q))` with the `0 ln 0 = 0`
/// convention. Requires `q` strictly inside `(0, 1)` and `x` in `[0, 1]`.
pub fn kl_binary(x: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(
            "kl_binary needs q strictly inside (0, 1)",
        ));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument("kl_binary needs x in [0, 1]"));
    }
    let mut acc = 0.0;
    if x > 0.0 {
        acc += x * (x / q).ln();
    }
    if x < 1.0 {
        acc += (1.0 - x) * ((1.0 - x) / (1.0 - q)).ln();
    }
    Ok(acc.max(0.0))
}

/// `r`-outcome Kullback-Leibler divergence `sum_i x_i ln(x_i/q_i)` over the
/// probability simplex.
pub fn kl_divergence(x: &[f64], q: &[f64]) -> Result<f64> {
    if x.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: x.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("kl_divergence needs at least one bin"));
    }
    if q.iter().any(|&qi| !(qi > 0.0 && qi <= 1.0)) {
        return Err(Error::InvalidArgument("kl_divergence needs q_i in (0, 1]"));
    }
    if x.iter().any(|&xi| !(-1e-12..=1.0 + 1e-12).contains(&xi)) {
        return Err(Error::InvalidArgument("kl_divergence needs x_i in [0, 1]"));
    }
    let sx: f64 = x.iter().sum();
    let sq: f64 = q.iter().sum();
    if (sx - 1.0).abs() > 1e-9 || (sq - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("kl_divergence arguments must sum to 1"));
    }
    let mut acc = 0.0;
    for (&xi, &qi) in x.iter().zip(q) {
        if xi > 0.0 {
            acc += xi * (xi / qi).ln();
        }
    }
    Ok(acc.max(0.0))
}

/// The statistics-shifted bin fractions `X_i = (q_i + s alpha x_i)/(1 + s
/// alpha)` that replace `x_i` inside the quantum factor asymptotics; they
/// satisfy `X_i - q_i = s alpha (x_i - q_i)/(1 + s alpha)`.
pub fn shifted_fractions(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
    alpha: f64,
) -> Result<Vec<f64>> {
    if !kind.is_quantum() {
        return Err(Error::UnsupportedKind(
            "shifted fractions exist only for quantum statistics",
        ));
    }
    bins.check_counts(counts)?;
    let sa = sigma_alpha(kind, alpha)?;
    let x = counts.fractions()?;
    Ok(bins
        .fractions()
        .iter()
        .zip(&x)
        .map(|(&q, &xi)| (q + sa * xi) / (1.0 + sa))
        .collect())
}

/// The Gaussian approximation of the counting probability inside the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianApprox {
    /// Log of the Gaussian value.
    pub log_value: f64,
    /// Scale of the leading relative error,
    /// `(1 - alpha [fermion])^-3 N^(-3 eps) + alpha [boson] / N`. A scale,
    /// not a certified bound.
    pub leading_error_scale: f64,
}

/// Asymptotic Gaussian law for the average counting probability at particle
/// density `alpha = N/M`, valid inside the window. Out-of-window counts are
/// rejected; use [`tail_bound`] there.
pub fn gaussian_law(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
    alpha: f64,
    window: &Window,
) -> Result<GaussianApprox> {
    let sa = sigma_alpha(kind, alpha)?;
    if counts.total() == 0 {
        return Err(Error::InvalidArgument("the Gaussian law needs N >= 1"));
    }
    if !window.contains(counts, bins)? {
        return Err(Error::OutsideWindow);
    }
    let n = counts.total() as f64;
    let r = bins.num_bins() as f64;
    let x = counts.fractions()?;
    let q = bins.fractions();
    let mut quad = 0.0;
    let mut log_q = 0.0;
    for (&xi, &qi) in x.iter().zip(&q) {
        let d = xi - qi;
        quad += d * d / qi;
        log_q += qi.ln();
    }
    let log_value = -n * quad / (2.0 * (1.0 + sa))
        - 0.5 * (r - 1.0) * (2.0 * PI * (1.0 + sa) * n).ln()
        - 0.5 * log_q;
    let n3eps = n.powf(-3.0 * window.epsilon());
    let leading_error_scale = match kind {
        ParticleKind::Distinguishable => n3eps,
        ParticleKind::Boson => n3eps + alpha / n,
        ParticleKind::Fermion => (1.0 - alpha).powi(-3) * n3eps,
    };
    Ok(GaussianApprox {
        log_value,
        leading_error_scale,
    })
}

/// High-density boson law for `N >> M` at fixed `M`: log of
/// `(M/(2 pi N^2))^((r-1)/2) exp(-M sum (x_i - q_i)^2/(2 q_i)) / prod
/// sqrt(q_i)`.
pub fn gaussian_high_density(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
) -> Result<f64> {
    if kind != ParticleKind::Boson {
        return Err(Error::UnsupportedKind(
            "the high-density law applies to bosons",
        ));
    }
    bins.check_counts(counts)?;
    if counts.total() == 0 {
        return Err(Error::InvalidArgument("the high-density law needs N >= 1"));
    }
    if bins.total_ports() < 2 {
        return Err(Error::InvalidArgument("the high-density law needs M >= 2"));
    }
    let n = counts.total() as f64;
    let m = bins.total_ports() as f64;
    let r = bins.num_bins() as f64;
    let x = counts.fractions()?;
    let q = bins.fractions();
    let mut quad = 0.0;
    let mut log_q = 0.0;
    for (&xi, &qi) in x.iter().zip(&q) {
        let d = xi - qi;
        quad += d * d / qi;
        log_q += qi.ln();
    }
    Ok(0.5 * (r - 1.0) * (m.ln() - (2.0 * PI).ln() - 2.0 * n.ln()) - 0.5 * m * quad - 0.5 * log_q)
}

/// Joint density of the rescaled fluctuations `xi_i = sqrt(M)(x_i - q_i)`
/// (constrained to `sum xi_i = 0`):
/// `exp(-sum xi_i^2/(2 q_i)) / ((2 pi)^((r-1)/2) prod sqrt(q_i))`.
pub fn xi_density(xi: &[f64], q: &[f64]) -> Result<f64> {
    if xi.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: xi.len(),
        });
    }
    if q.is_empty() || q.iter().any(|&qi| !(qi > 0.0 && qi <= 1.0)) {
        return Err(Error::InvalidArgument("xi_density needs q_i in (0, 1]"));
    }
    let r = q.len() as f64;
    let mut quad = 0.0;
    let mut log_q = 0.0;
    for (&x, &qi) in xi.iter().zip(q) {
        quad += x * x / qi;
        log_q += qi.ln();
    }
    Ok((-0.5 * quad - 0.5 * (r - 1.0) * (2.0 * PI).ln() - 0.5 * log_q).exp())
}

/// Euler-Maclaurin constant `1 - (m + 1) ln(1 + 1/m)` of the rising product
/// bracket; negative, of size `~ -1/(2m)`.
fn euler_const_plus(m: u64) -> f64 {
    1.0 - (m as f64 + 1.0) * (1.0 / m as f64).ln_1p()
}

/// Euler-Maclaurin constant `1 + (m - 1) ln(1 - 1/m)` of the falling product
/// bracket; positive, of size `~ 1/(2m)` with maximum `1 - ln 2` at `m = 2`.
fn euler_const_minus(m: u64) -> f64 {
    if m <= 1 {
        // Degenerate single-port bin: the falling product it would bracket is
        // empty. Return the maximal constant so upper bounds stay valid.
        return 0.31;
    }
    1.0 + (m as f64 - 1.0) * (-1.0 / m as f64).ln_1p()
}

/// Log of the explicit tail bound on the counting probability for counts
/// violating the window: `2 pi sqrt(N) exp(-A^2 N^(1/3 - 2 eps))` for
/// distinguishable particles, `2 pi sqrt(N) (1 + alpha) exp(-A^2/(1 + alpha)
/// N^(1/3 - 2 eps))` for bosons, and for fermions either the saturated-bin
/// bound `alpha^K` or the composite `N^(5/2)`-prefactor form.
pub fn tail_bound(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
    alpha: f64,
    window: &Window,
) -> Result<f64> {
    sigma_alpha(kind, alpha)?;
    if counts.total() == 0 {
        return Err(Error::InvalidArgument("the tail bound needs N >= 1"));
    }
    let violating = window
        .first_violation(counts, bins)?
        .ok_or(Error::InsideWindow)?;
    let n = counts.total() as f64;
    let a2 = window.a() * window.a();
    let decay = n.powf(1.0 / 3.0 - 2.0 * window.epsilon());
    let base = (2.0 * PI).ln() + 0.5 * n.ln();
    match kind {
        ParticleKind::Distinguishable => Ok(base - a2 * decay),
        ParticleKind::Boson => Ok(base + alpha.ln_1p() - a2 / (1.0 + alpha) * decay),
        ParticleKind::Fermion => {
            let n_total = counts.total();
            let m_total = bins.total_ports();
            let k = bins.ports()[violating];
            let n_i = counts.counts()[violating];
            if n_i >= k {
                // Bin saturated (or overfilled, where the probability is 0):
                // P <= (N/M)^K.
                return Ok(k as f64 * alpha.ln());
            }
            if n_total - n_i >= m_total - k {
                // The complementary side of the binary split is saturated.
                return Ok((m_total - k) as f64 * alpha.ln());
            }
            // Both sides leave room, which forces M - N >= 2. Combine the
            // classical 2 pi sqrt(N) prefactor with the explicit bound on
            // the fermion statistics factor; 1/(X(1-X)) <= (M-N)^2/(M-N-1)
            // supplies the O(N^2) prefactor.
            let q = k as f64 / m_total as f64;
            let gap = (m_total - n_total) as f64;
            let euler = euler_const_minus(k) + euler_const_minus(m_total - k)
                - euler_const_minus(m_total);
            Ok(base
                + (q * (1.0 - q)).ln()
                - 2.0 * (-alpha).ln_1p()
                + (gap * gap / (gap - 1.0)).ln()
                + euler
                - a2 / (1.0 - alpha) * decay)
        }
    }
}

/// Exact, leading-order, and bracketing evaluations of
/// `log prod_{l=1}^n (1 + s l/m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductBounds {
    /// Direct summation of the logs.
    pub log_exact: f64,
    /// Leading-order form `(n + s m + 1/2) ln(1 + s n/m) - n`.
    pub log_asymptotic: f64,
    /// Lower bracket (exponent `n + m` rising, `n - m + 1` falling).
    pub log_lower: f64,
    /// Upper bracket (exponent `n + m + 1` rising, `n - m` falling).
    pub log_upper: f64,
}

/// Evaluates the product `prod_{l=1}^n (1 + s l/m)` with `s = +1` for bosons
/// and `s = -1` for fermions, together with its asymptotic form and its
/// explicit brackets. The falling product requires `n < m`.
pub fn product_log_bounds(n: u64, m: u64, kind: ParticleKind) -> Result<ProductBounds> {
    if !kind.is_quantum() {
        return Err(Error::UnsupportedKind(
            "the product brackets apply to quantum statistics",
        ));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("product brackets need m >= 1"));
    }
    let s = kind.sign() as f64;
    if kind == ParticleKind::Fermion && n >= m {
        return Err(Error::InvalidArgument(
            "the falling product needs n < m to stay positive",
        ));
    }
    let mf = m as f64;
    let nf = n as f64;
    let mut log_exact = 0.0;
    for l in 1..=n {
        log_exact += (s * l as f64 / mf).ln_1p();
    }
    let edge = (s * nf / mf).ln_1p();
    let log_asymptotic = (nf + s * mf + 0.5) * edge - nf;
    let (upper_shift, lower_shift) = match kind {
        ParticleKind::Boson => (1.0, 0.0),
        ParticleKind::Fermion => (0.0, 1.0),
        ParticleKind::Distinguishable => unreachable!(),
    };
    Ok(ProductBounds {
        log_exact,
        log_asymptotic,
        log_lower: (nf + s * mf + lower_shift) * edge - nf,
        log_upper: (nf + s * mf + upper_shift) * edge - nf,
    })
}

/// Leading order and certified brackets for the quantum statistics factor
/// inside the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumFactorAsymptotics {
    /// Leading-order log: `N (s alpha/(1 + s alpha)) sum (x_i - q_i)^2/(2
    /// q_i) - ((r-1)/2) ln(1 + s alpha)`.
    pub log_leading: f64,
    /// Certified upper bound on the log of the factor.
    pub log_upper: f64,
    /// Certified lower bound on the log of the factor.
    pub log_lower: f64,
}

/// Asymptotics of the quantum factor `Q` for in-window counts.
///
/// The bounds carry their Euler-Maclaurin correction constants explicitly,
/// so `log_lower <= ln Q <= log_upper` holds exactly (not just to
/// `1 + O(1/M)`), with the shifted fractions evaluated from the integer
/// counts.
pub fn quantum_factor_asymptotics(
    counts: &CountVector,
    bins: &BinPartition,
    kind: ParticleKind,
    alpha: f64,
    window: &Window,
) -> Result<QuantumFactorAsymptotics> {
    if !kind.is_quantum() {
        return Err(Error::UnsupportedKind(
            "the quantum factor is identically 1 for distinguishable particles",
        ));
    }
    let sa = sigma_alpha(kind, alpha)?;
    if counts.total() == 0 {
        return Err(Error::InvalidArgument("factor asymptotics need N >= 1"));
    }
    if !window.contains(counts, bins)? {
        return Err(Error::OutsideWindow);
    }
    let n_total = counts.total();
    let m_total = bins.total_ports();
    if kind == ParticleKind::Fermion {
        if n_total >= m_total {
            return Err(Error::TooManyFermions {
                particles: n_total,
                ports: m_total,
            });
        }
        if counts
            .counts()
            .iter()
            .zip(bins.ports())
            .any(|(&ni, &ki)| ni >= ki)
        {
            return Err(Error::InvalidArgument(
                "factor asymptotics need every fermion bin strictly below saturation",
            ));
        }
    }
    let n = n_total as f64;
    let r = bins.num_bins() as f64;
    let x = counts.fractions()?;
    let q = bins.fractions();
    let quad: f64 = x
        .iter()
        .zip(&q)
        .map(|(&xi, &qi)| (xi - qi) * (xi - qi) / qi)
        .sum();
    let log_leading = n * sa / (1.0 + sa) * quad / 2.0 - 0.5 * (r - 1.0) * sa.ln_1p();

    // Certified brackets, evaluated from the integer counts so the shifted
    // fractions X_i = (K_i + s n_i)/(M + s N) are exact.
    let s = kind.sign() as i64;
    let shifted: Vec<f64> = counts
        .counts()
        .iter()
        .zip(bins.ports())
        .map(|(&ni, &ki)| {
            (ki as i64 + s * ni as i64) as f64 / (m_total as i64 + s * n_total as i64) as f64
        })
        .collect();
    let kl_shift = kl_divergence(&shifted, &q)?;
    let coeff = (n_total as i64 + s * m_total as i64) as f64;
    let log_qas = coeff * kl_shift;
    let euler: f64 = match kind {
        ParticleKind::Boson => {
            bins.ports().iter().map(|&ki| euler_const_plus(ki)).sum::<f64>()
                - euler_const_plus(m_total)
        }
        ParticleKind::Fermion => {
            bins.ports().iter().map(|&ki| euler_const_minus(ki)).sum::<f64>()
                - euler_const_minus(m_total)
        }
        ParticleKind::Distinguishable => unreachable!(),
    };
    let sum_edges: f64 = counts
        .counts()
        .iter()
        .zip(bins.ports())
        .map(|(&ni, &ki)| (s as f64 * ni as f64 / ki as f64).ln_1p())
        .sum();
    let density_edge = (s as f64 * n_total as f64 / m_total as f64).ln_1p();
    let (log_upper, log_lower) = match kind {
        ParticleKind::Boson => (log_qas + euler + density_edge, log_qas + euler - sum_edges),
        ParticleKind::Fermion => (log_qas + euler - sum_edges, log_qas + euler + density_edge),
        ParticleKind::Distinguishable => unreachable!(),
    };
    Ok(QuantumFactorAsymptotics {
        log_leading,
        log_upper,
        log_lower,
    })
}
