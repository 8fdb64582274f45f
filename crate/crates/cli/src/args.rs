use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use orbitrep::counterexamples::OPEN_SET_CAP;
use orbitrep::{BaseKind, DensityFunction, IndexSet, PiecewiseLinear, PowerSpike, TorusPoint, TorusRegion};

pub const MAX_HORIZON: u64 = 100_000_000;
pub const MAX_PMAX: u32 = 1024;

#[derive(Parser, Debug)]
#[command(name = "orbitrep", version, about = "Sets and weights whose rotation orbits realize prescribed limit measures")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// File of `key=value` lines giving default flag values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Evaluate the acceptance thresholds; exit with 2 if any fails.
    #[arg(long, global = true)]
    pub check: bool,
    /// Also write SVG line plots.
    #[arg(long, global = true)]
    pub svg: bool,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Fourier coefficients of the transform measure of a set.
    Spectrum(SpectrumArgs),
    /// Visit set of a region, checked against the region's coefficients.
    Visit(VisitArgs),
    /// Represent an open set given as a stream of intervals.
    Represent(RepresentArgs),
    /// Represent a density by a pasted weight.
    RepresentWeight(WeightArgs),
    /// Represent a density, then flatten the weight below one.
    Flatten(WeightArgs),
    /// Random thinning: certificates for a constant weight, or the full
    /// density to set pipeline with --density.
    Thin(ThinArgs),
    /// Summation-by-parts identity on random instances.
    SbpCheck(SbpArgs),
    /// Represent a probability vector on the q-th roots of unity.
    Rational(RationalArgs),
    /// The counterexample constructions.
    #[command(subcommand)]
    Counterexample(Counterexample),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Visit(_) => "visit",
            Command::Represent(_) => "represent",
            Command::RepresentWeight(_) => "represent-weight",
            Command::Flatten(_) => "flatten",
            Command::Thin(_) => "thin",
            Command::SbpCheck(_) => "sbp-check",
            Command::Rational(_) => "rational",
            Command::Counterexample(Counterexample::Dyadic(_)) => "dyadic",
            Command::Counterexample(Counterexample::Blocks(_)) => "blocks",
            Command::Counterexample(Counterexample::OpenSet(_)) => "open-set",
        }
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Counterexample {
    /// Two good sets whose intersection has no mean.
    Dyadic(DyadicArgs),
    /// Intersection and union with means that are not good.
    Blocks(BlocksArgs),
    /// An open set whose visit set is not good.
    OpenSet(OpenSetArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OrbitArgs {
    /// Base set: naturals, primes, squares, powers:K, n2logn,
    /// progression:Q:OFFSET or file:PATH.
    #[arg(long, default_value = "naturals")]
    pub set: String,
    /// Rotation: golden, sqrt2, e, a decimal in (0,1) or 64-bit hex (0x...).
    #[arg(long, default_value = "golden")]
    pub alpha: String,
    /// Horizon N.
    #[arg(long, default_value = "1e6", value_parser = parse_horizon)]
    pub n: u64,
    /// Largest frequency |p| reported.
    #[arg(long, default_value_t = 8, value_parser = parse_pmax)]
    pub pmax: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub orbit: OrbitArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VisitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub orbit: OrbitArgs,
    /// Region as `a,b;c,d;...` (decimal or hex endpoints).
    #[arg(long, default_value = "0,0.5")]
    pub region: String,
    /// CSV file with one `a,b` interval per line; overrides --region.
    #[arg(long)]
    pub region_file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RepresentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub orbit: OrbitArgs,
    /// `rational` for the neighbourhoods of the rationals, or inline
    /// disjoint intervals `a,b;c,d;...`.
    #[arg(long, default_value = "0,0.25;0.5,0.75")]
    pub stream: String,
    /// CSV file of disjoint intervals; overrides --stream.
    #[arg(long)]
    pub stream_file: Option<PathBuf>,
    /// Number of stream pieces used.
    #[arg(long, default_value_t = 12)]
    pub pieces: usize,
    /// `truncate` drops members that do not fit before N; `strict` fails.
    #[arg(long, default_value = "truncate")]
    pub mode: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WeightArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub orbit: OrbitArgs,
    /// Density: const:C, indicator:A:B:HEIGHT, tent:HEIGHT,
    /// step:B1,B2,..:V0,V1,.. or spike:EXPONENT[:CAP].
    #[arg(long, default_value = "indicator:0:0.5:2")]
    pub density: String,
    /// Number of approximants pasted.
    #[arg(long, default_value_t = 12)]
    pub members: usize,
    /// Also export the weight as CSV (n, r_n, w); needs N <= 1e7.
    #[arg(long)]
    pub weights_csv: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ThinArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub orbit: OrbitArgs,
    /// Constant selection probability, as const:C with 0 <= C <= 1.
    #[arg(long, default_value = "const:0.5")]
    pub weight: String,
    /// Run density -> weight -> flatten -> thin for this density instead.
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long, default_value_t = 12)]
    pub members: usize,
    /// Seeds: a single value, a list `1,2,3` or a range `1..20`.
    #[arg(long, default_value = "1..20")]
    pub seeds: String,
    /// Certificate checkpoints.
    #[arg(long, default_value = "1e3,1e4,1e5")]
    pub checkpoints: String,
    #[arg(long, default_value_t = 10)]
    pub grid_multiplier: u32,
    #[arg(long, default_value = "1e7", value_parser = parse_count)]
    pub grid_cap: u64,
    /// Random frequencies probed in the pipeline report.
    #[arg(long, default_value_t = 4)]
    pub probes: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SbpArgs {
    #[arg(long, default_value_t = 100)]
    pub instances: u64,
    #[arg(long, default_value = "1e4", value_parser = parse_horizon)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RationalArgs {
    #[arg(long)]
    pub a: u64,
    #[arg(long)]
    pub q: u64,
    /// Masses nu(0/q), ..., nu((q-1)/q), comma separated.
    #[arg(long)]
    pub nu: String,
    /// Auxiliary irrational.
    #[arg(long, default_value = "sqrt2")]
    pub gamma: String,
    #[arg(long, default_value = "1e6", value_parser = parse_horizon)]
    pub n: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DyadicArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "1048576", value_parser = parse_horizon)]
    pub n: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BlocksArgs {
    /// Last outer block J_k reported.
    #[arg(long, default_value_t = 12)]
    pub kmax: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OpenSetArgs {
    #[arg(long, default_value = "golden")]
    pub alpha: String,
    #[arg(long, default_value_t = 8)]
    pub n0: u64,
    /// Induction steps after U_0.
    #[arg(long, default_value_t = 6)]
    pub steps: usize,
    /// Largest N searched for a breakpoint.
    #[arg(long, default_value_t = OPEN_SET_CAP, value_parser = parse_horizon)]
    pub cap: u64,
}

/// Integer given in plain or scientific notation, such as `1000000` or `1e6`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let x: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !(x >= 0.0 && x.fract() == 0.0 && x < 1.8e19) {
        return Err(format!("not a nonnegative integer: {s:?}"));
    }
    Ok(x as u64)
}

pub fn parse_horizon(s: &str) -> Result<u64, String> {
    let n = parse_count(s)?;
    if n == 0 || n > MAX_HORIZON {
        return Err(format!("horizon {n} must lie in 1..=1e8"));
    }
    Ok(n)
}

pub fn parse_pmax(s: &str) -> Result<u32, String> {
    let p: u32 = s.parse().map_err(|_| format!("not an integer: {s:?}"))?;
    if p > MAX_PMAX {
        return Err(format!("pmax {p} exceeds {MAX_PMAX}"));
    }
    Ok(p)
}

pub fn parse_list(s: &str) -> Result<Vec<u64>, String> {
    s.split(',').map(|t| parse_count(t.trim())).collect()
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse_count(a.trim())?, parse_count(b.trim())?);
        if a > b {
            return Err(format!("empty seed range {s:?}"));
        }
        return Ok((a..=b).collect());
    }
    parse_list(s)
}

/// Named constants, 64-bit hex fixed point, or a decimal snapped to the grid.
pub fn parse_point(s: &str) -> Result<TorusPoint, String> {
    let p = match s.trim().to_ascii_lowercase().as_str() {
        "golden" => TorusPoint::GOLDEN,
        "sqrt2" => TorusPoint::SQRT2,
        "e" => TorusPoint::E,
        t if t.starts_with("0x") => TorusPoint::from_frac(
            u64::from_str_radix(&t[2..], 16).map_err(|e| format!("bad hex fixed point {s:?}: {e}"))?,
        ),
        t => {
            let x: f64 = t.parse().map_err(|_| format!("not a rotation: {s:?}"))?;
            if !(x > 0.0 && x < 1.0) {
                return Err(format!("decimal rotation {x} must lie in (0, 1)"));
            }
            TorusPoint::from_f64(x)
        }
    };
    if p.frac() == 0 {
        return Err("the rotation must be nonzero".into());
    }
    Ok(p)
}

pub fn parse_set(s: &str) -> anyhow::Result<IndexSet> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> anyhow::Result<u64> {
        let t = parts.get(i).ok_or_else(|| anyhow::anyhow!("set {s:?} is missing a parameter"))?;
        parse_count(t).map_err(anyhow::Error::msg)
    };
    let kind = match parts[0] {
        "naturals" => BaseKind::Naturals,
        "primes" => BaseKind::Primes,
        "squares" => BaseKind::KthPowers { k: 2 },
        "powers" => BaseKind::KthPowers { k: num(1)? as u32 },
        "n2logn" => BaseKind::N2LogN,
        "progression" => BaseKind::Progression {
            q: num(1)?,
            offset: num(2)?,
        },
        "file" => {
            let path = s.strip_prefix("file:").unwrap_or_default();
            return Ok(IndexSet::read_explicit(path)?);
        }
        other => anyhow::bail!("unknown set {other:?}"),
    };
    Ok(IndexSet::base(kind)?)
}

/// `a,b;c,d` as CSV lines.
pub fn inline_csv(s: &str) -> String {
    s.split(';').map(str::trim).collect::<Vec<_>>().join("\n")
}

pub fn parse_region(s: &str) -> anyhow::Result<TorusRegion> {
    Ok(TorusRegion::parse_csv(&inline_csv(s))?)
}

fn floats(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| anyhow::anyhow!("not a number: {t:?}")))
        .collect()
}

pub fn parse_density(s: &str) -> anyhow::Result<DensityFunction> {
    let parts: Vec<&str> = s.split(':').collect();
    let f = |i: usize| -> anyhow::Result<f64> {
        let t = parts.get(i).ok_or_else(|| anyhow::anyhow!("density {s:?} is missing a parameter"))?;
        t.parse::<f64>().map_err(|_| anyhow::anyhow!("not a number: {t:?}"))
    };
    let pl = match parts[0] {
        "const" => PiecewiseLinear::constant(f(1)?)?,
        "indicator" => PiecewiseLinear::indicator(&TorusRegion::interval(f(1)?, f(2)?)?, f(3)?)?,
        "tent" => PiecewiseLinear::tent(f(1)?)?,
        "step" => {
            let (b, v) = (parts.get(1), parts.get(2));
            match (b, v) {
                (Some(b), Some(v)) => PiecewiseLinear::step(&floats(b)?, &floats(v)?)?,
                _ => anyhow::bail!("step density needs breaks and values"),
            }
        }
        "spike" => {
            let cap = if parts.len() > 2 { Some(f(2)?) } else { None };
            return Ok(DensityFunction::Spike(PowerSpike::new(f(1)?, cap)?.normalized()));
        }
        other => anyhow::bail!("unknown density {other:?}"),
    };
    Ok(DensityFunction::Piecewise(pl))
}
