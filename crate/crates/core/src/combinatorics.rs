//! Exact big-integer combinatorics and count-vector enumeration.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Zero};

/// `n!` as a big integer.
pub fn big_factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}

/// Binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn big_binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1; // exact at every step
    }
    acc
}

/// `base^exp` as a big integer.
pub fn big_pow(base: u64, exp: u64) -> BigInt {
    let mut acc = BigInt::one();
    let b = BigInt::from(base);
    for _ in 0..exp {
        acc *= &b;
    }
    acc
}

/// Multinomial coefficient `(sum parts)! / prod(parts!)`.
pub fn big_multinomial(parts: &[u64]) -> BigInt {
    let mut acc = BigInt::one();
    let mut running = 0u64;
    for &p in parts {
        running += p;
        acc *= big_binomial(running, p);
    }
    acc
}

/// All ways to write `total` as an ordered sum of `parts` non-negative
/// integers, first coordinate descending.
pub fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    let lower = alloc::vec![0u64; parts];
    let upper = alloc::vec![total; parts];
    compositions_bounded(total, &lower, &upper)
}

/// Compositions of `total` with per-part bounds `lower[i] <= v_i <= upper[i]`,
/// enumerated with the first coordinate descending. Returns an empty list when
/// infeasible.
pub fn compositions_bounded(total: u64, lower: &[u64], upper: &[u64]) -> Vec<Vec<u64>> {
    assert_eq!(lower.len(), upper.len());
    let parts = lower.len();
    let mut out = Vec::new();
    if parts == 0 {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    // Suffix feasibility ranges.
    let mut suffix_lo = alloc::vec![0u64; parts + 1];
    let mut suffix_hi = alloc::vec![0u64; parts + 1];
    for i in (0..parts).rev() {
        suffix_lo[i] = suffix_lo[i + 1].saturating_add(lower[i]);
        suffix_hi[i] = suffix_hi[i + 1].saturating_add(upper[i]);
    }
    let mut current = alloc::vec![0u64; parts];
    fn recurse(
        idx: usize,
        remaining: u64,
        lower: &[u64],
        upper: &[u64],
        suffix_lo: &[u64],
        suffix_hi: &[u64],
        current: &mut Vec<u64>,
        out: &mut Vec<Vec<u64>>,
    ) {
        if idx == lower.len() {
            if remaining == 0 {
                out.push(current.clone());
            }
            return;
        }
        let rest_lo = suffix_lo[idx + 1];
        let rest_hi = suffix_hi[idx + 1];
        let min_v = lower[idx].max(remaining.saturating_sub(rest_hi));
        let max_v = upper[idx].min(remaining.saturating_sub(rest_lo));
        if min_v > max_v {
            return;
        }
        let mut v = max_v;
        loop {
            current[idx] = v;
            recurse(
                idx + 1,
                remaining - v,
                lower,
                upper,
                suffix_lo,
                suffix_hi,
                current,
                out,
            );
            if v == min_v {
                break;
            }
            v -= 1;
        }
    }
    recurse(0, total, lower, upper, &suffix_lo, &suffix_hi, &mut current, &mut out);
    out
}
