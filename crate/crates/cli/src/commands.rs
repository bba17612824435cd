//! The `exact`, `gauss`, `tail`, `sweep`, and `mc` subcommands, each
//! producing a [`Table`].

use anyhow::{anyhow, bail, Result};
use num_traits::ToPrimitive;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use haarcount::asymptotic::{gaussian_high_density, gaussian_law, tail_bound};
use haarcount::binned::{counting_prob_exact, counting_prob_ln};
use haarcount::montecarlo::{
    mc_batch, num_batches, sample_haar_unitary, AverageScheme, BatchStats, McResult,
    OccupationVector, MC_BATCH,
};
use haarcount::{BinPartition, ParticleKind, Prob};

use crate::config::{ports_from_density, scale_fractions_to_ports, Config};
use crate::output::{count_cells, count_columns, linear_prob, Cell, Table};
use crate::scan::{all_counts, in_window_counts};

/// Exact probability table over every count vector.
pub fn exact(config: &Config) -> Result<Table> {
    let total = config.particles()?;
    let kind = config.kind()?;
    let bins = config.bins()?;
    if total > 200 {
        bail!("field `N`: exact rational mode is limited to N <= 200; use gauss/tail beyond");
    }
    let mut columns = count_columns(bins.num_bins());
    columns.extend(["p", "ln_p", "p_exact"].map(String::from));
    let mut table = Table::new("exact", config, None, columns);
    for counts in all_counts(total, &bins)? {
        let exact = counting_prob_exact(&counts, &bins, kind).map_err(|e| anyhow!("{e}"))?;
        let ln = Prob::exact(exact.clone()).map_err(|e| anyhow!("{e}"))?.ln();
        let mut row: Vec<Cell> = count_cells(counts.counts()).collect();
        row.push(linear_prob(ln));
        row.push(Cell::Float(ln));
        row.push(Cell::Str(exact.to_string()));
        table.push(row);
    }
    Ok(table)
}

fn resolve_alpha(config: &Config, total: u64, bins: &BinPartition) -> Result<f64> {
    match config.get("alpha") {
        Some(_) => Ok(config
            .density()?
            .to_f64()
            .ok_or_else(|| anyhow!("field `alpha` overflows"))?),
        None => Ok(total as f64 / bins.total_ports() as f64),
    }
}

/// Gaussian-law comparison against the exact probability inside the window.
pub fn gauss(config: &Config) -> Result<Table> {
    let total = config.particles()?;
    let kind = config.kind()?;
    let bins = config.bins()?;
    let window = config.window()?;
    let alpha = resolve_alpha(config, total, &bins)?;
    let boson = kind == ParticleKind::Boson;
    let mut columns = count_columns(bins.num_bins());
    columns.extend(["ln_exact", "ln_gauss", "rel_err", "error_scale"].map(String::from));
    if boson {
        columns.extend(["ln_high_density", "rel_err_high_density"].map(String::from));
    }
    let mut table = Table::new("gauss", config, None, columns);
    for counts in in_window_counts(total, &bins, &window)? {
        let exact = counting_prob_ln(&counts, &bins, kind).map_err(|e| anyhow!("{e}"))?;
        let g = gaussian_law(&counts, &bins, kind, alpha, &window).map_err(|e| anyhow!("{e}"))?;
        let mut row: Vec<Cell> = count_cells(counts.counts()).collect();
        row.push(Cell::Float(exact));
        row.push(Cell::Float(g.log_value));
        row.push(Cell::Float(((g.log_value - exact).exp() - 1.0).abs()));
        row.push(Cell::Float(g.leading_error_scale));
        if boson {
            let hd = gaussian_high_density(&counts, &bins, kind).map_err(|e| anyhow!("{e}"))?;
            row.push(Cell::Float(hd));
            row.push(Cell::Float(((hd - exact).exp() - 1.0).abs()));
        }
        table.push(row);
    }
    Ok(table)
}

/// Tail-bound audit outside the window.
pub fn tail(config: &Config) -> Result<Table> {
    let total = config.particles()?;
    let kind = config.kind()?;
    let bins = config.bins()?;
    let window = config.window()?;
    let alpha = resolve_alpha(config, total, &bins)?;
    let mut columns = count_columns(bins.num_bins());
    columns.extend(["ln_exact", "ln_bound", "log_margin", "ok"].map(String::from));
    let mut table = Table::new("tail", config, None, columns);
    for counts in all_counts(total, &bins)? {
        if window
            .contains(&counts, &bins)
            .map_err(|e| anyhow!("{e}"))?
        {
            continue;
        }
        let exact = counting_prob_ln(&counts, &bins, kind).map_err(|e| anyhow!("{e}"))?;
        let bound = tail_bound(&counts, &bins, kind, alpha, &window).map_err(|e| anyhow!("{e}"))?;
        let mut row: Vec<Cell> = count_cells(counts.counts()).collect();
        row.push(Cell::Float(exact));
        row.push(Cell::Float(bound));
        row.push(Cell::Float(bound - exact));
        row.push(Cell::Str((exact <= bound).to_string()));
        table.push(row);
    }
    Ok(table)
}

/// Max in-window relative error of the Gaussian law per N: the convergence
/// evidence for the limit theorems.
pub fn sweep(config: &Config) -> Result<Table> {
    let kind = config.kind()?;
    let alpha = config.density()?;
    let alpha_f = alpha
        .to_f64()
        .ok_or_else(|| anyhow!("field `alpha` overflows"))?;
    let q = config.fractions()?;
    let window = config.window()?;
    let columns = vec![
        "N".to_string(),
        "M".to_string(),
        "window_counts".to_string(),
        "max_rel_err".to_string(),
        "worst_n".to_string(),
    ];
    let mut table = Table::new("sweep", config, None, columns);
    for total in config.particles_list()? {
        let m = ports_from_density(total, alpha)?;
        let ports = scale_fractions_to_ports(&q, m)?;
        let bins = BinPartition::new(ports).map_err(|e| anyhow!("fields `q`/`alpha`: {e}"))?;
        let counts = in_window_counts(total, &bins, &window)?;
        if counts.is_empty() {
            bail!("no in-window counts at N = {total}; widen the window");
        }
        // Deterministic parallel max: ties break towards the smaller index.
        let (err, idx) = counts
            .par_iter()
            .enumerate()
            .map(|(idx, cv)| -> Result<(f64, usize)> {
                let exact = counting_prob_ln(cv, &bins, kind).map_err(|e| anyhow!("{e}"))?;
                let g = gaussian_law(cv, &bins, kind, alpha_f, &window)
                    .map_err(|e| anyhow!("{e}"))?;
                Ok((((g.log_value - exact).exp() - 1.0).abs(), idx))
            })
            .try_reduce(
                || (f64::NEG_INFINITY, usize::MAX),
                |a, b| {
                    Ok(if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                        b
                    } else {
                        a
                    })
                },
            )?;
        table.push(vec![
            Cell::UInt(total),
            Cell::UInt(m),
            Cell::UInt(counts.len() as u64),
            Cell::Float(err),
            Cell::Str(counts[idx].to_string()),
        ]);
    }
    Ok(table)
}

/// Runs the batches of one Monte Carlo average on the rayon pool and merges
/// them in index order; bit-identical to the sequential driver.
pub fn mc_parallel(
    scheme: &AverageScheme,
    bins: &BinPartition,
    kind: ParticleKind,
    samples: u64,
    seed: u64,
) -> Result<McResult> {
    if samples < 2 {
        bail!("field `samples` must be at least 2");
    }
    let batches: Vec<BatchStats> = (0..num_batches(samples))
        .into_par_iter()
        .map(|index| {
            let len = MC_BATCH.min(samples - index * MC_BATCH);
            mc_batch(scheme, bins, kind, seed, index, len).map_err(|e| anyhow!("{e}"))
        })
        .collect::<Result<_>>()?;
    let merged = batches
        .into_iter()
        .reduce(|mut a, b| {
            a.merge(&b).expect("batches share keys");
            a
        })
        .expect("at least one batch");
    Ok(McResult {
        seed,
        samples,
        estimates: merged.estimates(),
    })
}

/// Monte Carlo estimates with exact references.
pub fn mc(config: &Config) -> Result<Table> {
    let kind = config.kind()?;
    let bins = config.bins()?;
    let samples = config.samples()?;
    let seed = config.seed()?;
    let total = config.particles()?;
    let m = bins.total_ports();
    let mode = config.get("mode").unwrap_or("haar_average");
    let scheme = match mode {
        "haar_average" => {
            let input = match config.input_occupation()? {
                Some(occ) => occ,
                None => default_input(total, m)?,
            };
            if input.total() != total {
                bail!(
                    "field `input` carries {} particles but N = {total}",
                    input.total()
                );
            }
            AverageScheme::HaarFixedInput { input }
        }
        "input_average" => {
            // The fixed network is drawn once from a reserved stream of the
            // master seed, so the whole run stays reproducible.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX);
            let unitary =
                sample_haar_unitary(m as usize, &mut rng).map_err(|e| anyhow!("{e}"))?;
            AverageScheme::FixedUnitaryRandomInput {
                unitary,
                particles: total,
            }
        }
        "scattershot" => AverageScheme::Scattershot { particles: total },
        other => bail!("field `mode` must be haar_average|input_average|scattershot, got `{other}`"),
    };
    let result = mc_parallel(&scheme, &bins, kind, samples, seed)?;
    let mut columns = count_columns(bins.num_bins());
    columns.extend(["mc_mean", "stderr", "samples", "exact", "z"].map(String::from));
    let mut table = Table::new("mc", config, Some(seed), columns);
    for (counts, est) in result.estimates {
        let exact = counting_prob_exact(&counts, &bins, kind)
            .map_err(|e| anyhow!("{e}"))?
            .to_f64()
            .unwrap_or(f64::NAN);
        let z = if est.stderr > 0.0 {
            (est.mean - exact) / est.stderr
        } else if (est.mean - exact).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        let mut row: Vec<Cell> = count_cells(counts.counts()).collect();
        row.push(Cell::Float(est.mean));
        row.push(Cell::Float(est.stderr));
        row.push(Cell::UInt(est.samples));
        row.push(Cell::Float(exact));
        row.push(Cell::Float(z));
        table.push(row);
    }
    Ok(table)
}

/// One particle in each of the first `total` ports; works for every kind.
fn default_input(total: u64, ports: u64) -> Result<OccupationVector> {
    if total > ports {
        bail!("default input needs N <= M; pass `--input` for bunched inputs");
    }
    Ok(OccupationVector::new(
        (0..ports).map(|p| if p < total { 1 } else { 0 }).collect(),
    ))
}
