//! Exact small-order unitary-group integrals: Weingarten tables obtained by
//! solving the Gram system of permutation operators, Haar moments of matrix
//! entries, and the permanent-pair average identity.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::combinatorics::big_factorial;
use crate::error::{Error, Result};
use crate::montecarlo::OccupationVector;
use crate::types::ParticleKind;

/// Largest moment order; the Gram system grows as `(N!)^2`.
pub const MAX_ORDER: usize = 4;

fn permutations(n: usize) -> Vec<Vec<u8>> {
    fn go(prefix: &mut Vec<u8>, free: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if free.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..free.len() {
            let v = free.remove(i);
            prefix.push(v);
            go(prefix, free, out);
            prefix.pop();
            free.insert(i, v);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..n as u8).collect(), &mut out);
    out
}

fn compose(p: &[u8], q: &[u8]) -> Vec<u8> {
    // (p o q)(i) = p[q[i]]
    q.iter().map(|&i| p[i as usize]).collect()
}

fn inverse(p: &[u8]) -> Vec<u8> {
    let mut inv = alloc::vec![0u8; p.len()];
    for (i, &v) in p.iter().enumerate() {
        inv[v as usize] = i as u8;
    }
    inv
}

fn cycle_count(p: &[u8]) -> usize {
    let mut seen = alloc::vec![false; p.len()];
    let mut cycles = 0;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = p[i] as usize;
        }
    }
    cycles
}

fn parity(p: &[u8]) -> i32 {
    // sign = (-1)^(n - #cycles)
    if (p.len() - cycle_count(p)) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sorted cycle lengths, the conjugacy-class label of a permutation.
pub fn cycle_type(p: &[u8]) -> Vec<usize> {
    let mut seen = alloc::vec![false; p.len()];
    let mut lens = Vec::new();
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = p[i] as usize;
            len += 1;
        }
        lens.push(len);
    }
    lens.sort_unstable();
    lens
}

/// Exact rational Gaussian elimination; the Gram matrix is positive
/// definite for `dim >= order`, so a nonzero pivot always exists there.
fn solve(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Result<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&row| !a[row][col].is_zero())
            .ok_or(Error::InvalidArgument("singular moment system"))?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for j in col..n {
            a[col][j] *= &inv;
        }
        b[col] *= &inv;
        for row in 0..n {
            if row != col && !a[row][col].is_zero() {
                let f = a[row][col].clone();
                for j in col..n {
                    let sub = &f * &a[col][j];
                    a[row][j] -= sub;
                }
                let sub = &f * &b[col];
                b[row] -= sub;
            }
        }
    }
    Ok(b)
}

/// Weingarten function of the unitary group `U(dim)` at moment order `n`:
/// exact rationals indexed by the permutations of `n` elements.
#[derive(Debug, Clone)]
pub struct WeingartenTable {
    order: usize,
    dim: u64,
    perms: Vec<Vec<u8>>,
    values: Vec<BigRational>,
}

impl WeingartenTable {
    /// Solves the orthogonality system `sum_tau W(sigma tau^-1)
    /// dim^cycles(tau) = delta_{sigma, id}` over exact rationals.
    /// Requires `order <= 4` and `dim >= order` (the system is singular
    /// below the moment order).
    pub fn new(order: usize, dim: u64) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::SizeGuard {
                what: "Weingarten moment order",
                limit: MAX_ORDER as u64,
                got: order as u64,
            });
        }
        if (dim as usize) < order {
            return Err(Error::InvalidArgument(
                "Weingarten system needs dim >= order",
            ));
        }
        let perms = permutations(order);
        let gram: Vec<Vec<BigRational>> = perms
            .iter()
            .map(|p| {
                let p_inv = inverse(p);
                perms
                    .iter()
                    .map(|q| {
                        let c = cycle_count(&compose(&p_inv, q));
                        BigRational::from(crate::combinatorics::big_pow(dim, c as u64))
                    })
                    .collect()
            })
            .collect();
        // Right-hand side: 1 at the identity (lexicographically first).
        let mut rhs = alloc::vec![BigRational::zero(); perms.len()];
        rhs[0] = BigRational::one();
        let values = solve(gram, rhs)?;
        Ok(WeingartenTable {
            order,
            dim,
            perms,
            values,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> u64 {
        self.dim
    }

    /// Permutations in the table's fixed (lexicographic) order.
    pub fn perms(&self) -> &[Vec<u8>] {
        &self.perms
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    /// Value at a specific permutation.
    pub fn value_of(&self, perm: &[u8]) -> Result<&BigRational> {
        let idx = self
            .perms
            .iter()
            .position(|p| p == perm)
            .ok_or(Error::InvalidArgument("permutation has the wrong order"))?;
        Ok(&self.values[idx])
    }

    /// `sum_sigma W(sigma)`; times `N!` this is the inverse boson Fock-state
    /// count `N!/((M+N-1)...M)`.
    pub fn sum(&self) -> BigRational {
        self.values.iter().sum()
    }

    /// `sum_sigma sgn(sigma) W(sigma)`; times `N!` this is the fermion
    /// analogue `N!/(M...(M-N+1))`.
    pub fn signed_sum(&self) -> BigRational {
        self.perms
            .iter()
            .zip(&self.values)
            .map(|(p, v)| if parity(p) > 0 { v.clone() } else { -v.clone() })
            .sum()
    }

    /// Exact Haar moment
    /// `< prod_k U[rows_k, cols_k] prod_k conj(U[conj_rows_k, conj_cols_k]) >`
    /// via the double permutation sum.
    pub fn moment(
        &self,
        rows: &[usize],
        cols: &[usize],
        conj_rows: &[usize],
        conj_cols: &[usize],
    ) -> Result<BigRational> {
        let n = self.order;
        if rows.len() != n || cols.len() != n || conj_rows.len() != n || conj_cols.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rows.len().min(cols.len()).min(conj_rows.len()).min(conj_cols.len()),
            });
        }
        if rows
            .iter()
            .chain(cols)
            .chain(conj_rows)
            .chain(conj_cols)
            .any(|&i| i as u64 >= self.dim)
        {
            return Err(Error::InvalidArgument("port index outside the group dimension"));
        }
        let mut acc = BigRational::zero();
        for sigma in &self.perms {
            if (0..n).any(|k| rows[k] != conj_rows[sigma[k] as usize]) {
                continue;
            }
            for tau in &self.perms {
                if (0..n).any(|k| cols[k] != conj_cols[tau[k] as usize]) {
                    continue;
                }
                acc += self.value_of(&compose(tau, &inverse(sigma)))?;
            }
        }
        Ok(acc)
    }
}

/// One-shot exact Haar moment of matrix entries; the moment order is the
/// common list length.
pub fn haar_moment(
    dim: u64,
    rows: &[usize],
    cols: &[usize],
    conj_rows: &[usize],
    conj_cols: &[usize],
) -> Result<BigRational> {
    if rows.len() != cols.len() || rows.len() != conj_rows.len() || rows.len() != conj_cols.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: conj_cols.len(),
        });
    }
    let table = WeingartenTable::new(rows.len(), dim)?;
    table.moment(rows, cols, conj_rows, conj_cols)
}

/// Closed form of the Haar-averaged permanent (determinant) pair:
/// `delta_{n,m} s! n! N! / ((M+N-1)...M)` for bosons,
/// `delta_{n,m} N! / (M...(M-N+1))` for fermions.
pub fn pair_average_closed_form(
    left: &OccupationVector,
    right: &OccupationVector,
    output: &OccupationVector,
    dim: u64,
    kind: ParticleKind,
) -> Result<BigRational> {
    let n = left.total();
    if left != right {
        return Ok(BigRational::zero());
    }
    let mut denom = BigInt::one();
    match kind {
        ParticleKind::Boson => {
            for j in 0..n {
                denom *= dim + n - 1 - j;
            }
            let numer = BigInt::from(left.occ_factorial())
                * BigInt::from(output.occ_factorial())
                * big_factorial(n);
            Ok(BigRational::new(numer, denom))
        }
        ParticleKind::Fermion => {
            for j in 0..n {
                denom *= dim - j;
            }
            Ok(BigRational::new(big_factorial(n), denom))
        }
        ParticleKind::Distinguishable => Err(Error::UnsupportedKind(
            "permanent pairs apply to quantum statistics",
        )),
    }
}

/// Exact Haar average of `per(U[left|output]) conj(per(U[right|output]))`
/// (bosons) or the determinant analogue (fermions), computed by term-by-term
/// Weingarten summation and cross-checked against the closed form; the two
/// routes must agree exactly.
pub fn permanent_pair_average(
    left: &OccupationVector,
    right: &OccupationVector,
    output: &OccupationVector,
    dim: u64,
    kind: ParticleKind,
) -> Result<BigRational> {
    if !kind.is_quantum() {
        return Err(Error::UnsupportedKind(
            "permanent pairs apply to quantum statistics",
        ));
    }
    let n = left.total();
    if right.total() != n || output.total() != n {
        return Err(Error::InvalidArgument(
            "all occupations must carry the same particle number",
        ));
    }
    if n == 0 || n as usize > MAX_ORDER {
        return Err(Error::SizeGuard {
            what: "permanent-pair particle number",
            limit: MAX_ORDER as u64,
            got: n,
        });
    }
    if left.num_ports() as u64 != dim
        || right.num_ports() as u64 != dim
        || output.num_ports() as u64 != dim
    {
        return Err(Error::InvalidArgument(
            "occupations must cover all ports of the group dimension",
        ));
    }
    if kind == ParticleKind::Fermion {
        if n > dim {
            return Err(Error::TooManyFermions {
                particles: n,
                ports: dim,
            });
        }
        if !(left.is_single_per_port() && right.is_single_per_port() && output.is_single_per_port())
        {
            return Err(Error::InvalidArgument(
                "fermion occupations allow at most one particle per port",
            ));
        }
    }
    let table = WeingartenTable::new(n as usize, dim)?;
    let k_left = left.port_list();
    let k_right = right.port_list();
    let l_out = output.port_list();
    let perms = permutations(n as usize);
    let mut acc = BigRational::zero();
    let mut rows = alloc::vec![0usize; n as usize];
    let mut conj_rows = alloc::vec![0usize; n as usize];
    for sigma1 in &perms {
        for (slot, &s) in rows.iter_mut().zip(sigma1.iter()) {
            *slot = k_left[s as usize];
        }
        for sigma2 in &perms {
            for (slot, &s) in conj_rows.iter_mut().zip(sigma2.iter()) {
                *slot = k_right[s as usize];
            }
            let term = table.moment(&rows, &l_out, &conj_rows, &l_out)?;
            if kind == ParticleKind::Fermion && parity(sigma1) * parity(sigma2) < 0 {
                acc -= term;
            } else {
                acc += term;
            }
        }
    }
    let closed = pair_average_closed_form(left, right, output, dim, kind)?;
    if acc != closed {
        return Err(Error::RouteMismatch(
            "Weingarten summation disagrees with the closed form",
        ));
    }
    Ok(acc)
}
