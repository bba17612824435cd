//! The `verify` subcommand: runs the full invariant suite and reports one
//! PASS/FAIL line per property.

use anyhow::{anyhow, bail, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use haarcount::asymptotic::{
    gaussian_law, kl_binary, kl_divergence, product_log_bounds, quantum_factor_asymptotics,
    tail_bound, Window,
};
use haarcount::binned::{
    avg_configuration_prob_exact, classical_prob_exact, configuration_decay, counting_prob_exact,
    counting_prob_ln, factorize, quantum_factor_ln,
};
use haarcount::combinatorics::{big_factorial, compositions};
use haarcount::factorial::stirling_ln_factorial;
use haarcount::linalg::C64;
use haarcount::montecarlo::{
    mc_average, mixed_state_check, sample_haar_unitary, AverageScheme, MixedStateEntry,
    OccupationVector,
};
use haarcount::weingarten::{permanent_pair_average, WeingartenTable};
use haarcount::{BinPartition, CountVector, ParticleKind, Prob};

use crate::config::Config;
use crate::output::{Cell, Table};

const KINDS: [ParticleKind; 3] = [
    ParticleKind::Distinguishable,
    ParticleKind::Boson,
    ParticleKind::Fermion,
];

type Check = (&'static str, fn() -> Result<String>);

const CHECKS: &[Check] = &[
    ("normalization_exact", normalization_exact),
    ("fermion_support", fermion_support),
    ("classical_reduction", classical_reduction),
    ("factorization_exact", factorization_exact),
    ("logspace_consistency", logspace_consistency),
    ("pinsker_grid", pinsker_grid),
    ("kl_layer_identities", kl_layer_identities),
    ("window_equivalence", window_equivalence),
    ("stirling_theta_bounds", stirling_theta_bounds),
    ("configuration_probabilities", configuration_probabilities),
    ("exponential_smallness", exponential_smallness),
    ("binary_gaussian_peak", binary_gaussian_peak),
    ("gaussian_factorization", gaussian_factorization),
    ("tail_bound_audit", tail_bound_audit),
    ("product_brackets", product_brackets),
    ("quantum_factor_sandwich", quantum_factor_sandwich),
    ("haar_unitarity", haar_unitarity),
    ("haar_entry_moments", haar_entry_moments),
    ("mc_vs_exact", mc_vs_exact),
    ("weingarten_identities", weingarten_identities),
    ("mixed_state_moments", mixed_state_moments),
    ("seed_determinism", seed_determinism),
];

/// Runs every check, printing one line per property. Returns the report
/// table and whether everything passed.
pub fn run(config: &Config) -> Result<(Table, bool)> {
    let columns = vec!["check".to_string(), "status".to_string(), "detail".to_string()];
    let mut table = Table::new("verify", config, None, columns);
    let mut all_ok = true;
    for (name, check) in CHECKS {
        match check() {
            Ok(detail) => {
                println!("PASS {name} ({detail})");
                table.push(vec![
                    Cell::Str((*name).to_string()),
                    Cell::Str("pass".to_string()),
                    Cell::Str(detail),
                ]);
            }
            Err(err) => {
                all_ok = false;
                println!("FAIL {name}: {err}");
                table.push(vec![
                    Cell::Str((*name).to_string()),
                    Cell::Str("fail".to_string()),
                    Cell::Str(err.to_string()),
                ]);
            }
        }
    }
    Ok((table, all_ok))
}

fn grid_partitions() -> Vec<BinPartition> {
    vec![
        BinPartition::new(vec![5]).unwrap(),
        BinPartition::new(vec![1, 1]).unwrap(),
        BinPartition::new(vec![3, 5]).unwrap(),
        BinPartition::new(vec![1, 2, 3]).unwrap(),
        BinPartition::new(vec![4, 4, 4]).unwrap(),
    ]
}

fn normalization_exact() -> Result<String> {
    let mut instances = 0;
    for bins in grid_partitions() {
        for total in [0u64, 1, 2, 3, 5, 8] {
            for kind in KINDS {
                if kind == ParticleKind::Fermion && total > bins.total_ports() {
                    continue;
                }
                let sum: BigRational = compositions(total, bins.num_bins())
                    .into_iter()
                    .map(|c| {
                        counting_prob_exact(&CountVector::new(c), &bins, kind)
                            .expect("valid instance")
                    })
                    .sum();
                if sum != BigRational::one() {
                    bail!("sum != 1 for kind {kind}, N = {total}, K = {:?}", bins.ports());
                }
                instances += 1;
            }
        }
    }
    Ok(format!("{instances} instances sum to exactly 1"))
}

fn fermion_support() -> Result<String> {
    let bins = BinPartition::new(vec![2, 3, 1]).unwrap();
    let mut zeroes = 0;
    for counts in compositions(5, 3) {
        let cv = CountVector::new(counts);
        let p = counting_prob_exact(&cv, &bins, ParticleKind::Fermion)
            .map_err(|e| anyhow!("{e}"))?;
        let overfull = cv.counts().iter().zip(bins.ports()).any(|(&n, &k)| n > k);
        if p.is_zero() != overfull {
            bail!("support mismatch at {cv}");
        }
        if overfull {
            zeroes += 1;
        }
    }
    Ok(format!("probability vanishes exactly on all {zeroes} overfilled counts"))
}

fn classical_reduction() -> Result<String> {
    let bins = BinPartition::new(vec![2, 3, 4]).unwrap();
    for counts in compositions(6, 3) {
        let cv = CountVector::new(counts);
        let a = counting_prob_exact(&cv, &bins, ParticleKind::Distinguishable)
            .map_err(|e| anyhow!("{e}"))?;
        let b = classical_prob_exact(&cv, &bins).map_err(|e| anyhow!("{e}"))?;
        if a != b {
            bail!("distinguishable counting != classical at {cv}");
        }
    }
    Ok("sigma=0 counting equals the multinomial bit-for-bit".to_string())
}

fn factorization_exact() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let mut done = 0;
    while done < 150 {
        let r = 2 + (rng.next_u32() % 3) as usize;
        let ports: Vec<u64> = (0..r).map(|_| 1 + (rng.next_u32() % 8) as u64).collect();
        let counts: Vec<u64> = (0..r).map(|_| (rng.next_u32() % 5) as u64).collect();
        let bins = BinPartition::new(ports).unwrap();
        let cv = CountVector::new(counts);
        for kind in KINDS {
            if kind == ParticleKind::Fermion && cv.total() > bins.total_ports() {
                continue;
            }
            let direct = counting_prob_exact(&cv, &bins, kind).map_err(|e| anyhow!("{e}"))?;
            let layered = factorize(&cv, &bins, kind)
                .and_then(|d| d.product_exact())
                .map_err(|e| anyhow!("{e}"))?;
            if direct != layered {
                bail!("factorization mismatch for kind {kind} at {cv} | {:?}", bins.ports());
            }
        }
        done += 1;
    }
    Ok("150 random instances factor exactly for every kind".to_string())
}

fn logspace_consistency() -> Result<String> {
    let bins = BinPartition::new(vec![3, 4, 5]).unwrap();
    let mut worst = 0.0f64;
    for total in [1u64, 4, 9, 12] {
        for counts in compositions(total, 3) {
            let cv = CountVector::new(counts);
            for kind in KINDS {
                let exact = counting_prob_exact(&cv, &bins, kind).map_err(|e| anyhow!("{e}"))?;
                let ln = counting_prob_ln(&cv, &bins, kind).map_err(|e| anyhow!("{e}"))?;
                if exact.is_zero() {
                    if ln != f64::NEG_INFINITY {
                        bail!("zero probability with finite log at {cv}");
                    }
                    continue;
                }
                let reference = Prob::exact(exact).map_err(|e| anyhow!("{e}"))?.ln();
                worst = worst.max((ln - reference).abs() / reference.abs().max(1.0));
            }
        }
    }
    if worst > 1e-10 {
        bail!("log-space drift {worst}");
    }
    Ok(format!("exact vs log-space within {worst:.2e} relative"))
}

fn pinsker_grid() -> Result<String> {
    for xi in 0..=100 {
        let x = xi as f64 / 100.0;
        for qi in 1..=99 {
            let q = qi as f64 / 100.0;
            let kl = kl_binary(x, q).map_err(|e| anyhow!("{e}"))?;
            if kl + 1e-15 < (x - q) * (x - q) {
                bail!("Pinsker violated at x = {x}, q = {q}");
            }
        }
    }
    Ok("KL >= (x-q)^2 on the 101x99 grid".to_string())
}

fn kl_layer_identities() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 200 {
        let r = 2 + (rng.next_u32() % 3) as usize;
        let ports: Vec<u64> = (0..r).map(|_| 2 + (rng.next_u32() % 30) as u64).collect();
        let counts: Vec<u64> = ports
            .iter()
            .map(|&k| 1 + (rng.next_u32() as u64 % (k - 1).max(1)))
            .collect();
        let bins = BinPartition::new(ports).unwrap();
        let cv = CountVector::new(counts);
        if cv.total() >= bins.total_ports() {
            continue;
        }
        done += 1;
        let layers = factorize(&cv, &bins, ParticleKind::Distinguishable).unwrap();
        let x = cv.fractions().unwrap();
        let q = bins.fractions();
        let rhs = cv.total() as f64 * kl_divergence(&x, &q).map_err(|e| anyhow!("{e}"))?;
        let lhs: f64 = layers
            .layers
            .iter()
            .map(|l| {
                l.particles as f64
                    * kl_binary(
                        l.count as f64 / l.particles as f64,
                        l.bin_ports as f64 / l.ports as f64,
                    )
                    .unwrap()
            })
            .sum();
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        for kind in [ParticleKind::Boson, ParticleKind::Fermion] {
            let s = kind.sign() as i64;
            let nt = cv.total() as i64;
            let mt = bins.total_ports() as i64;
            let shifted: Vec<f64> = cv
                .counts()
                .iter()
                .zip(bins.ports())
                .map(|(&ni, &ki)| (ki as i64 + s * ni as i64) as f64 / (mt + s * nt) as f64)
                .collect();
            let rhs =
                (nt + s * mt) as f64 * kl_divergence(&shifted, &q).map_err(|e| anyhow!("{e}"))?;
            let lhs: f64 = layers
                .layers
                .iter()
                .map(|l| {
                    let coeff = (l.particles as i64 + s * l.ports as i64) as f64;
                    let xbar = (l.bin_ports as i64 + s * l.count as i64) as f64
                        / (l.ports as i64 + s * l.particles as i64) as f64;
                    coeff * kl_binary(xbar, l.bin_ports as f64 / l.ports as f64).unwrap()
                })
                .sum();
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    if worst > 1e-10 {
        bail!("layer identity drift {worst:.2e}");
    }
    Ok(format!("classical and quantum layer identities within {worst:.2e}"))
}

fn window_equivalence() -> Result<String> {
    let window = Window::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut checked = 0;
    while checked < 100 {
        let r = 2 + (rng.next_u32() % 3) as usize;
        let per_bin = 100 + (rng.next_u32() % 200) as u64;
        let bins = BinPartition::new(vec![per_bin; r]).unwrap();
        let total = 60 + (rng.next_u32() as u64 % (bins.total_ports() - 60));
        let width = window.half_width(total);
        let base = total / r as u64;
        let mut counts: Vec<u64> = (0..r - 1)
            .map(|_| {
                let jitter = (rng.next_u32() as f64 / u32::MAX as f64 * width) as u64;
                if rng.next_u32() % 2 == 0 {
                    base + jitter
                } else {
                    base.saturating_sub(jitter)
                }
            })
            .collect();
        let partial: u64 = counts.iter().sum();
        if partial > total {
            continue;
        }
        counts.push(total - partial);
        let cv = CountVector::new(counts);
        if !window.contains(&cv, &bins).unwrap() {
            continue;
        }
        checked += 1;
        let layered_limit = window.a() * r as f64 * (total as f64).powf(2.0 / 3.0 - window.epsilon());
        for l in factorize(&cv, &bins, ParticleKind::Distinguishable).unwrap().layers {
            let mean = l.particles as f64 * l.bin_ports as f64 / l.ports as f64;
            if (l.count as f64 - mean).abs() > layered_limit + 1e-9 {
                bail!("layered window violated at {cv} layer {}", l.index);
            }
        }
    }
    Ok("window with A implies the layered window with Abar = A r (100 instances)".to_string())
}

fn stirling_theta_bounds() -> Result<String> {
    let t0 = stirling_ln_factorial(0).theta;
    if (t0 - 0.5 / core::f64::consts::PI).abs() > 1e-15 {
        bail!("theta_0 != 1/(2 pi): {t0}");
    }
    for n in 1..=1_000_000u64 {
        let t = stirling_ln_factorial(n).theta;
        if !(t > 1.0 / 6.0 && t < 1.77) {
            bail!("theta_{n} = {t} outside (1/6, 1.77)");
        }
    }
    Ok("theta_0 = 1/(2 pi); theta_n in (1/6, 1.77) for all n <= 1e6".to_string())
}

fn configuration_probabilities() -> Result<String> {
    let checks = [
        (1u64, 5u64, ParticleKind::Boson, (1i64, 5i64)),
        (2, 2, ParticleKind::Boson, (1, 3)),
        (2, 4, ParticleKind::Fermion, (1, 6)),
        (3, 2, ParticleKind::Distinguishable, (1, 8)),
    ];
    for (n, m, kind, (num, den)) in checks {
        let got = avg_configuration_prob_exact(n, m, kind).map_err(|e| anyhow!("{e}"))?;
        if got != BigRational::new(BigInt::from(num), BigInt::from(den)) {
            bail!("configuration probability mismatch at N={n}, M={m}, {kind}");
        }
    }
    Ok("single-configuration probabilities match the Fock-state counts".to_string())
}

fn exponential_smallness() -> Result<String> {
    let b = configuration_decay(1.0, 2, ParticleKind::Boson).map_err(|e| anyhow!("{e}"))?;
    if (b.rate - 2.0 * 2f64.ln()).abs() > 1e-12 {
        bail!("boson rate at alpha=1 is {}", b.rate);
    }
    let f = configuration_decay(0.5, 2, ParticleKind::Fermion).map_err(|e| anyhow!("{e}"))?;
    if (f.rate - 2.0 * 2f64.ln()).abs() > 1e-12 {
        bail!("fermion rate at alpha=1/2 is {}", f.rate);
    }
    let exact = avg_configuration_prob_exact(2, 2, ParticleKind::Boson)
        .unwrap()
        .to_f64()
        .unwrap();
    let rel = (b.log_prob.exp() / exact - 1.0).abs();
    if rel > 0.5 {
        bail!("leading-order config probability off by {rel}");
    }
    Ok(format!(
        "decay rates match 2 ln 2; leading order within {:.0}% of exact at N=2",
        rel * 100.0
    ))
}

fn binary_gaussian_peak() -> Result<String> {
    let bins = BinPartition::new(vec![50, 50]).unwrap();
    let counts = CountVector::new(vec![50, 50]);
    let g = gaussian_law(&counts, &bins, ParticleKind::Distinguishable, 1.0, &Window::default())
        .map_err(|e| anyhow!("{e}"))?;
    let exact = counting_prob_ln(&counts, &bins, ParticleKind::Distinguishable).unwrap();
    let rel = ((g.log_value - exact).exp() - 1.0).abs();
    if !(0.001..0.005).contains(&rel) {
        bail!("peak gap at N=100 is {rel}");
    }
    Ok(format!("peak gap {:.3}% at N = 100", rel * 100.0))
}

fn gaussian_factorization() -> Result<String> {
    let window = Window::default();
    for kind in KINDS {
        let bins = BinPartition::new(vec![800, 800, 800]).unwrap();
        let total = 1200u64;
        let alpha = total as f64 / bins.total_ports() as f64;
        let counts = CountVector::new(vec![403, 399, 398]);
        let full = gaussian_law(&counts, &bins, kind, alpha, &window).map_err(|e| anyhow!("{e}"))?;
        let mut layered = 0.0;
        let mut scale = full.leading_error_scale;
        for l in factorize(&counts, &bins, kind).unwrap().layers {
            let lc = CountVector::new(vec![l.count, l.particles - l.count]);
            let lb = BinPartition::binary(l.bin_ports, l.ports).unwrap();
            let g = gaussian_law(&lc, &lb, kind, l.particles as f64 / l.ports as f64, &window)
                .map_err(|e| anyhow!("{e}"))?;
            layered += g.log_value;
            scale += g.leading_error_scale;
        }
        let gap = ((full.log_value - layered).exp() - 1.0).abs();
        if gap > scale {
            bail!("kind {kind}: factorization gap {gap} above scale {scale}");
        }
    }
    Ok("r-bin Gaussian equals the product of binary Gaussians within scale".to_string())
}

fn tail_bound_audit() -> Result<String> {
    let window = Window::default();
    let bins = BinPartition::new(vec![500, 500]).unwrap();
    let mut audited = 0;
    for kind in KINDS {
        for n1 in 0..=500u64 {
            let counts = CountVector::new(vec![n1, 500 - n1]);
            if window.contains(&counts, &bins).unwrap() {
                continue;
            }
            let exact = counting_prob_ln(&counts, &bins, kind).unwrap();
            let bound = tail_bound(&counts, &bins, kind, 0.5, &window).unwrap();
            if exact > bound + 1e-9 {
                bail!("kind {kind}, n1 = {n1}: exact above bound");
            }
            audited += 1;
        }
    }
    Ok(format!("{audited} out-of-window counts below their bounds"))
}

fn product_brackets() -> Result<String> {
    for kind in [ParticleKind::Boson, ParticleKind::Fermion] {
        for m in [100u64, 1000] {
            for n in 0..=50 {
                let p = product_log_bounds(n, m, kind).map_err(|e| anyhow!("{e}"))?;
                let slack = 10.0 / m as f64;
                if p.log_exact < p.log_lower - slack || p.log_exact > p.log_upper + slack {
                    bail!("bracket violated for kind {kind} at n={n}, m={m}");
                }
            }
        }
    }
    Ok("rising/falling products inside their brackets (n <= 50, m in {100, 1000})".to_string())
}

fn quantum_factor_sandwich() -> Result<String> {
    let window = Window::default();
    let mut checked = 0;
    for (kind, ports) in [(ParticleKind::Boson, 100u64), (ParticleKind::Fermion, 200)] {
        let bins = BinPartition::new(vec![ports, ports]).unwrap();
        let total = 200u64;
        let alpha = total as f64 / bins.total_ports() as f64;
        let width = window.half_width(total) as u64;
        for n1 in 100 - width..=100 + width {
            let counts = CountVector::new(vec![n1, total - n1]);
            let qa = quantum_factor_asymptotics(&counts, &bins, kind, alpha, &window)
                .map_err(|e| anyhow!("{e}"))?;
            let exact = quantum_factor_ln(&counts, &bins, kind).unwrap();
            if exact > qa.log_upper + 1e-10 || exact < qa.log_lower - 1e-10 {
                bail!("sandwich violated for kind {kind} at n1 = {n1}");
            }
            checked += 1;
        }
    }
    Ok(format!("exact quantum factor inside its certified brackets ({checked} counts)"))
}

fn haar_unitarity() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut worst = 0.0f64;
    for dim in [1usize, 2, 3, 6, 10] {
        for _ in 0..40 {
            let u = sample_haar_unitary(dim, &mut rng).map_err(|e| anyhow!("{e}"))?;
            worst = worst.max(u.unitarity_defect());
        }
    }
    if worst > 1e-12 {
        bail!("unitarity defect {worst}");
    }
    Ok(format!("max unitarity defect {worst:.2e} over 200 samples"))
}

fn haar_entry_moments() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let m = 4usize;
    let samples = 4000;
    let (mut s2, mut s4) = (0.0f64, 0.0f64);
    let (mut c2, mut c4) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let u = sample_haar_unitary(m, &mut rng).unwrap();
        let a = u[(0, 0)].norm_sqr();
        s2 += a;
        c2 += (a - 0.25) * (a - 0.25);
        s4 += a * a;
        c4 += (a * a - 0.1) * (a * a - 0.1);
    }
    let n = samples as f64;
    let z2 = (s2 / n - 0.25).abs() / (c2 / n / n).sqrt();
    let z4 = (s4 / n - 0.1).abs() / (c4 / n / n).sqrt();
    if z2 > 3.0 || z4 > 3.0 {
        bail!("entry moments off: z2 = {z2:.2}, z4 = {z4:.2}");
    }
    Ok(format!(
        "<|U11|^2> and <|U11|^4> within ({z2:.2}, {z4:.2}) sigma of 1/M, 2/(M(M+1))"
    ))
}

fn mc_vs_exact() -> Result<String> {
    let bins = BinPartition::new(vec![1, 1]).unwrap();
    let scheme = AverageScheme::HaarFixedInput {
        input: OccupationVector::new(vec![1, 1]),
    };
    let res = mc_average(&scheme, &bins, ParticleKind::Boson, 3000, 4242)
        .map_err(|e| anyhow!("{e}"))?;
    for (counts, est) in &res.estimates {
        if (est.mean - 1.0 / 3.0).abs() > 3.0 * est.stderr {
            bail!("boson count {counts} off: {est:?}");
        }
    }
    let bins = BinPartition::new(vec![2, 2]).unwrap();
    let scheme = AverageScheme::HaarFixedInput {
        input: OccupationVector::new(vec![1, 0, 1, 0]),
    };
    let res = mc_average(&scheme, &bins, ParticleKind::Fermion, 3000, 2424)
        .map_err(|e| anyhow!("{e}"))?;
    let (_, est) = res
        .estimates
        .iter()
        .find(|(c, _)| c.counts() == [1, 1])
        .expect("count (1,1) exists");
    if (est.mean - 2.0 / 3.0).abs() > 3.0 * est.stderr {
        bail!("fermion P(1,1) off: {est:?}");
    }
    Ok("boson (1/3,1/3,1/3) and fermion P(1,1)=2/3 within 3 sigma".to_string())
}

fn weingarten_identities() -> Result<String> {
    let t = WeingartenTable::new(2, 3).map_err(|e| anyhow!("{e}"))?;
    if t.value_of(&[0, 1]).unwrap() != &BigRational::new(BigInt::from(1), BigInt::from(8)) {
        bail!("W(id) at N=2, M=3 mismatch");
    }
    if t.value_of(&[1, 0]).unwrap() != &BigRational::new(BigInt::from(-1), BigInt::from(24)) {
        bail!("W(swap) at N=2, M=3 mismatch");
    }
    for order in 1..=4usize {
        for dim in order as u64..=8 {
            let t = WeingartenTable::new(order, dim).unwrap();
            let n_fact = BigRational::from(big_factorial(order as u64));
            let mut boson = BigInt::one();
            let mut fermion = BigInt::one();
            for j in 0..order as u64 {
                boson *= dim + order as u64 - 1 - j;
                fermion *= dim - j;
            }
            if &n_fact * t.sum() != BigRational::new(big_factorial(order as u64), boson) {
                bail!("boson sum identity fails at N={order}, M={dim}");
            }
            if n_fact * t.signed_sum() != BigRational::new(big_factorial(order as u64), fermion) {
                bail!("fermion sum identity fails at N={order}, M={dim}");
            }
        }
    }
    for kind in [ParticleKind::Boson, ParticleKind::Fermion] {
        for m in 2..=4u64 {
            let occs = haarcount::montecarlo::output_occupations(
                m as usize,
                2,
                kind == ParticleKind::Fermion,
            );
            for left in &occs {
                for out in &occs {
                    permanent_pair_average(left, left, out, m, kind)
                        .map_err(|e| anyhow!("pair average at M={m}: {e}"))?;
                }
            }
        }
    }
    Ok("closed forms, sum identities, and dual-route pair averages all exact".to_string())
}

fn mixed_state_moments() -> Result<String> {
    let bins = BinPartition::new(vec![1, 2]).unwrap();
    let l = OccupationVector::new(vec![1, 1, 0]);
    let r = OccupationVector::new(vec![2, 0, 0]);
    let entries = [
        MixedStateEntry { left: l.clone(), right: l.clone(), weight: C64::new(0.5, 0.0) },
        MixedStateEntry { left: r.clone(), right: r.clone(), weight: C64::new(0.5, 0.0) },
        MixedStateEntry { left: l.clone(), right: r.clone(), weight: C64::new(0.5, 0.0) },
        MixedStateEntry { left: r, right: l, weight: C64::new(0.5, 0.0) },
    ];
    let rep = mixed_state_check(&entries, &bins, ParticleKind::Boson, 20_000, 4)
        .map_err(|e| anyhow!("{e}"))?;
    for mc in &rep.moments {
        if mc.z_re.abs() > 3.5 || mc.z_im.abs() > 3.5 {
            bail!(
                "moment for entry {} at {:?} off by ({:.2}, {:.2}) sigma",
                mc.entry,
                mc.output,
                mc.z_re,
                mc.z_im
            );
        }
    }
    for b in &rep.binned {
        if b.z.abs() > 3.5 {
            bail!("mixed-state binned count {} off by {:.2} sigma", b.counts, b.z);
        }
    }
    Ok("cross moments vanish and the binned law matches the pure-state one".to_string())
}

fn seed_determinism() -> Result<String> {
    let bins = BinPartition::new(vec![2, 2]).unwrap();
    let scheme = AverageScheme::Scattershot { particles: 2 };
    let a = mc_average(&scheme, &bins, ParticleKind::Boson, 500, 99).unwrap();
    let b = mc_average(&scheme, &bins, ParticleKind::Boson, 500, 99).unwrap();
    for ((_, x), (_, y)) in a.estimates.iter().zip(&b.estimates) {
        if x.mean.to_bits() != y.mean.to_bits() || x.stderr.to_bits() != y.stderr.to_bits() {
            bail!("same seed produced different estimates");
        }
    }
    let c = mc_average(&scheme, &bins, ParticleKind::Boson, 500, 100).unwrap();
    if a
        .estimates
        .iter()
        .zip(&c.estimates)
        .all(|((_, x), (_, y))| x.mean == y.mean)
    {
        bail!("different seeds produced identical estimates");
    }
    Ok("identical seed reproduces bit-identical estimates".to_string())
}
