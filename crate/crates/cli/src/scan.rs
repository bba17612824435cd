//! Count-vector enumeration helpers with row-count guards, so oversized
//! requests fail before any long computation starts.

use anyhow::{bail, Result};

use haarcount::asymptotic::Window;
use haarcount::combinatorics::{compositions, compositions_bounded};
use haarcount::{BinPartition, CountVector};

/// Hard cap on the number of emitted rows.
pub const MAX_ROWS: u128 = 2_000_000;

fn composition_count(total: u64, parts: usize) -> u128 {
    // C(total + parts - 1, parts - 1) with saturation.
    let mut acc: u128 = 1;
    for i in 0..parts as u128 - 1 {
        acc = acc.saturating_mul(total as u128 + i + 1);
        acc /= i + 1;
        if acc > MAX_ROWS * 1000 {
            return u128::MAX;
        }
    }
    acc
}

/// Every count vector of `total` particles in the partition's bins.
pub fn all_counts(total: u64, bins: &BinPartition) -> Result<Vec<CountVector>> {
    let estimate = composition_count(total, bins.num_bins());
    if estimate > MAX_ROWS {
        bail!(
            "enumerating {estimate} count vectors exceeds the {MAX_ROWS}-row guard; \
             narrow N or r"
        );
    }
    Ok(compositions(total, bins.num_bins())
        .into_iter()
        .map(CountVector::new)
        .collect())
}

/// Count vectors inside the concentration window, enumerated from per-bin
/// deviation ranges.
pub fn in_window_counts(
    total: u64,
    bins: &BinPartition,
    window: &Window,
) -> Result<Vec<CountVector>> {
    let width = window.half_width(total);
    let m = bins.total_ports() as f64;
    let mut lower = Vec::with_capacity(bins.num_bins());
    let mut upper = Vec::with_capacity(bins.num_bins());
    let mut size: u128 = 1;
    for &k in bins.ports() {
        let mean = total as f64 * k as f64 / m;
        let lo = (mean - width).ceil().max(0.0) as u64;
        let hi = ((mean + width).floor() as u64).min(total);
        lower.push(lo);
        upper.push(hi);
        size = size.saturating_mul((hi.saturating_sub(lo) + 1) as u128);
    }
    if size > MAX_ROWS {
        bail!("window scan of ~{size} count vectors exceeds the {MAX_ROWS}-row guard");
    }
    let counts = compositions_bounded(total, &lower, &upper);
    let mut out = Vec::with_capacity(counts.len());
    for c in counts {
        let cv = CountVector::new(c);
        if window.contains(&cv, bins).map_err(anyhow::Error::msg)? {
            out.push(cv);
        }
    }
    Ok(out)
}
