//! Flag and config-file handling. A run is described by a flat key-value
//! map; values from `--config <file>` (TOML) are overridden by command-line
//! flags, and the merged map is echoed verbatim into every output's
//! metadata so a run can be reproduced from its artifact.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use num_rational::Ratio;
use num_traits::ToPrimitive;

use haarcount::asymptotic::Window;
use haarcount::montecarlo::OccupationVector;
use haarcount::{BinPartition, ParticleKind};

/// Common flags shared by every subcommand; unset values fall back to the
/// config file, then to per-command defaults.
#[derive(clap::Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// Particle number N (a comma-separated list for `sweep`)
    #[arg(long = "N", value_name = "N[,N...]", allow_hyphen_values = false)]
    pub n: Option<String>,

    /// Total number of output ports M
    #[arg(long = "M")]
    pub m: Option<u64>,

    /// Ports per bin, e.g. 1,2,3
    #[arg(long = "K", value_name = "K1,K2,...")]
    pub k: Option<String>,

    /// Bin fractions as exact fractions, e.g. 1/2,1/4,1/4 (with --M or for `sweep`)
    #[arg(long = "q", value_name = "q1,q2,...")]
    pub q: Option<String>,

    /// Particle kind: distinguishable | boson | fermion
    #[arg(long)]
    pub sigma: Option<String>,

    /// Particle density N/M as an exact fraction (for `sweep`)
    #[arg(long)]
    pub alpha: Option<String>,

    /// Window amplitude A (default 1)
    #[arg(long = "A")]
    pub a: Option<f64>,

    /// Window exponent offset epsilon, 0 < epsilon < 1/6 (default 0.1)
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Monte Carlo sample count
    #[arg(long)]
    pub samples: Option<u64>,

    /// Master RNG seed (mandatory for `mc`)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Monte Carlo mode: haar_average | input_average | scattershot
    #[arg(long)]
    pub mode: Option<String>,

    /// Input occupation per port for `mc`, e.g. 1,1,0,0
    #[arg(long)]
    pub input: Option<String>,

    /// Output file (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Output format: csv | json (default csv)
    #[arg(long)]
    pub format: Option<String>,

    /// Worker threads for sweeps and sampling (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,

    /// Flat key-value TOML file mirroring the flag names; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// The merged flat configuration, echoed into output metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let mut values = BTreeMap::new();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("config: cannot read {}", path.display()))?;
            let table: toml::Table = text
                .parse()
                .with_context(|| format!("config: {} is not a flat TOML table", path.display()))?;
            for (key, value) in table {
                let rendered = match value {
                    toml::Value::String(s) => s,
                    toml::Value::Integer(i) => i.to_string(),
                    toml::Value::Float(f) => f.to_string(),
                    toml::Value::Boolean(b) => b.to_string(),
                    other => bail!("config: key `{key}` has unsupported value {other}"),
                };
                values.insert(key, rendered);
            }
        }
        let mut set = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                values.insert(key.to_string(), v);
            }
        };
        set("N", args.n.clone());
        set("M", args.m.map(|v| v.to_string()));
        set("K", args.k.clone());
        set("q", args.q.clone());
        set("sigma", args.sigma.clone());
        set("alpha", args.alpha.clone());
        set("A", args.a.map(|v| v.to_string()));
        set("epsilon", args.epsilon.map(|v| v.to_string()));
        set("samples", args.samples.map(|v| v.to_string()));
        set("seed", args.seed.map(|v| v.to_string()));
        set("mode", args.mode.clone());
        set("input", args.input.clone());
        set(
            "out",
            args.out.as_ref().map(|p| p.display().to_string()),
        );
        set("format", args.format.clone());
        set("threads", args.threads.map(|v| v.to_string()));
        Ok(Config { values })
    }

    #[cfg(test)]
    pub fn from_map(values: BTreeMap<String, String>) -> Self {
        Config { values }
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| anyhow!("missing required field `{key}`"))
    }

    pub fn particles(&self) -> Result<u64> {
        parse_u64("N", self.require("N")?)
    }

    pub fn particles_list(&self) -> Result<Vec<u64>> {
        let raw = self.require("N")?;
        let list: Result<Vec<u64>> = raw.split(',').map(|s| parse_u64("N", s)).collect();
        let list = list?;
        if list.is_empty() {
            bail!("field `N` must list at least one value");
        }
        Ok(list)
    }

    pub fn kind(&self) -> Result<ParticleKind> {
        self.require("sigma")?
            .parse()
            .map_err(|_| anyhow!("field `sigma` must be distinguishable|boson|fermion"))
    }

    pub fn window(&self) -> Result<Window> {
        let a = match self.get("A") {
            Some(s) => parse_f64("A", s)?,
            None => 1.0,
        };
        let epsilon = match self.get("epsilon") {
            Some(s) => parse_f64("epsilon", s)?,
            None => 0.1,
        };
        Window::new(a, epsilon).map_err(|e| anyhow!("field `A`/`epsilon`: {e}"))
    }

    pub fn seed(&self) -> Result<u64> {
        parse_u64("seed", self.require("seed")?)
    }

    pub fn samples(&self) -> Result<u64> {
        parse_u64("samples", self.require("samples")?)
    }

    pub fn threads(&self) -> Result<Option<usize>> {
        match self.get("threads") {
            Some(s) => {
                let t = parse_u64("threads", s)? as usize;
                if t == 0 {
                    bail!("field `threads` must be positive");
                }
                Ok(Some(t))
            }
            None => Ok(None),
        }
    }

    pub fn format(&self) -> Result<OutputFormat> {
        match self.get("format").unwrap_or("csv") {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => bail!("field `format` must be csv or json, got `{other}`"),
        }
    }

    pub fn out_path(&self) -> Option<PathBuf> {
        self.get("out").map(PathBuf::from)
    }

    pub fn input_occupation(&self) -> Result<Option<OccupationVector>> {
        match self.get("input") {
            Some(raw) => {
                let occ: Result<Vec<u32>> = raw
                    .split(',')
                    .map(|s| Ok(parse_u64("input", s)? as u32))
                    .collect();
                Ok(Some(OccupationVector::new(occ?)))
            }
            None => Ok(None),
        }
    }

    /// Resolves the bin partition from `K` (checked against `M` when both
    /// are given) or from exact fractions `q` scaled by `M`.
    pub fn bins(&self) -> Result<BinPartition> {
        if let Some(k_raw) = self.get("K") {
            let ports: Result<Vec<u64>> = k_raw.split(',').map(|s| parse_u64("K", s)).collect();
            let bins = BinPartition::new(ports?).map_err(|e| anyhow!("field `K`: {e}"))?;
            if let Some(m_raw) = self.get("M") {
                let m = parse_u64("M", m_raw)?;
                if m != bins.total_ports() {
                    bail!(
                        "field `M` ({m}) disagrees with the sum of `K` ({})",
                        bins.total_ports()
                    );
                }
            }
            return Ok(bins);
        }
        let q = self.fractions()?;
        let m = parse_u64("M", self.require("M")?)?;
        let ports = scale_fractions_to_ports(&q, m)?;
        BinPartition::new(ports).map_err(|e| anyhow!("fields `q`/`M`: {e}"))
    }

    /// Exact bin fractions from the `q` field.
    pub fn fractions(&self) -> Result<Vec<Ratio<u64>>> {
        let raw = self.require("q")?;
        let q: Result<Vec<Ratio<u64>>> =
            raw.split(',').map(|s| parse_fraction("q", s)).collect();
        let q = q?;
        if q.iter().sum::<Ratio<u64>>() != Ratio::new(1, 1) {
            bail!("field `q` must sum to exactly 1");
        }
        if q.iter().any(|f| f.numer() == &0) {
            bail!("field `q` entries must be positive");
        }
        Ok(q)
    }

    pub fn density(&self) -> Result<Ratio<u64>> {
        let alpha = parse_fraction("alpha", self.require("alpha")?)?;
        if alpha.numer() == &0 {
            bail!("field `alpha` must be positive");
        }
        Ok(alpha)
    }
}

/// Output file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

fn parse_u64(field: &str, raw: &str) -> Result<u64> {
    raw.trim()
        .parse()
        .map_err(|_| anyhow!("field `{field}`: `{raw}` is not a non-negative integer"))
}

fn parse_f64(field: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse()
        .map_err(|_| anyhow!("field `{field}`: `{raw}` is not a number"))
}

/// Parses `p/q`, decimal, or integer strings into an exact fraction.
pub fn parse_fraction(field: &str, raw: &str) -> Result<Ratio<u64>> {
    let raw = raw.trim();
    if let Some((num, den)) = raw.split_once('/') {
        let n = parse_u64(field, num)?;
        let d = parse_u64(field, den)?;
        if d == 0 {
            bail!("field `{field}`: zero denominator in `{raw}`");
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((int, frac)) = raw.split_once('.') {
        let digits = frac.len() as u32;
        if digits > 18 {
            bail!("field `{field}`: too many decimal digits in `{raw}`");
        }
        let scale = 10u64.pow(digits);
        let int_part = if int.is_empty() { 0 } else { parse_u64(field, int)? };
        let frac_part = if frac.is_empty() { 0 } else { parse_u64(field, frac)? };
        let numer = int_part
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac_part))
            .ok_or_else(|| anyhow!("field `{field}`: `{raw}` overflows"))?;
        return Ok(Ratio::new(numer, scale));
    }
    Ok(Ratio::from_integer(parse_u64(field, raw)?))
}

/// Turns exact fractions into integer port counts `q_i * M`, requiring every
/// product to be an integer.
pub fn scale_fractions_to_ports(q: &[Ratio<u64>], m: u64) -> Result<Vec<u64>> {
    q.iter()
        .map(|f| {
            let scaled = f * Ratio::from_integer(m);
            if !scaled.is_integer() {
                bail!(
                    "fraction {}/{} times M = {m} is not an integer port count",
                    f.numer(),
                    f.denom()
                );
            }
            scaled
                .to_integer()
                .to_u64()
                .ok_or_else(|| anyhow!("port count overflows"))
        })
        .collect()
}

/// Derives `M = N / alpha`, requiring exact divisibility.
pub fn ports_from_density(n: u64, alpha: Ratio<u64>) -> Result<u64> {
    let m = Ratio::from_integer(n) / alpha;
    if !m.is_integer() {
        bail!("N = {n} is not divisible by alpha = {}/{}", alpha.numer(), alpha.denom());
    }
    m.to_integer()
        .to_u64()
        .ok_or_else(|| anyhow!("derived port count overflows"))
}
