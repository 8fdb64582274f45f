//! Random selection of a set from a `[0,1]`-valued weight, with deviation
//! certificates computed over a grid of frequencies.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::accum::CompensatedSum;
use crate::empirical::{spectrum, weyl_average, Spectrum};
use crate::error::{Error, Result};
use crate::rng::KeyedRng;
use crate::sequences::IndexSet;
use crate::torus::TorusPoint;
use crate::weights::Weight;

pub const DEFAULT_GRID_CAP: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinningConfig {
    pub seed: u64,
    /// Grid size is `grid_multiplier * N`, capped at `grid_cap`.
    pub grid_multiplier: u32,
    pub grid_cap: usize,
    pub checkpoints: Vec<u64>,
    /// Certificate constant; ratios are expected to stay below it.
    pub c: f64,
    /// Sublacunarity constant of the weight, recorded but not used in sampling.
    pub b: f64,
}

impl ThinningConfig {
    pub fn new(seed: u64, checkpoints: Vec<u64>) -> Self {
        ThinningConfig {
            seed,
            grid_multiplier: 10,
            grid_cap: DEFAULT_GRID_CAP,
            checkpoints,
            c: 13.0,
            b: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_multiplier == 0 {
            return Err(Error::InvalidParameter("grid multiplier must be >= 1".into()));
        }
        if self.grid_cap == 0 {
            return Err(Error::InvalidParameter("grid cap must be positive".into()));
        }
        if !(self.c >= 13.0) {
            return Err(Error::InvalidParameter("the certificate constant must be >= 13".into()));
        }
        if !(self.b > 0.0) {
            return Err(Error::InvalidParameter("b must be positive".into()));
        }
        crate::sequences::check_increasing_checkpoints(&self.checkpoints)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointCertificate {
    pub n: u64,
    pub grid_size: usize,
    pub capped: bool,
    /// `#S(N)`.
    pub selected: u64,
    /// `sigma(R(N))`.
    pub mass: f64,
    /// `max_beta |Z_N(beta)|` over the grid.
    pub max_deviation: f64,
    /// `sqrt(log N * sigma(R(N)))`.
    pub normalizer: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationCertificate {
    pub seed: u64,
    pub grid_multiplier: u32,
    pub c: f64,
    pub b: f64,
    pub checkpoints: Vec<CheckpointCertificate>,
}

impl DeviationCertificate {
    pub fn max_ratio(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.ratio).fold(0.0, f64::max)
    }

    pub fn holds(&self) -> bool {
        self.checkpoints.iter().all(|c| c.ratio <= self.c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// Keeps `r_n` with probability `sigma(n)`, independently, with randomness keyed by `(seed, r_n)`.
pub fn thin(sigma: &Weight, config: &ThinningConfig) -> Result<(IndexSet, DeviationCertificate)> {
    config.validate()?;
    let horizon = *config.checkpoints.last().expect("validated");
    for (n, _, w) in sigma.entries(horizon) {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::OutOfUnitRange {
                position: n as usize,
                value: w,
            });
        }
    }
    let rng = KeyedRng::new(config.seed);
    let s = sigma.clone();
    let set = sigma.base().filter_indexed(
        format!("thin({}; seed={})", sigma.descriptor(), config.seed),
        move |n, r| rng.bernoulli(r, s.value(n as u64, r)),
    );
    let certificate = certify(sigma, config)?;
    Ok((set, certificate))
}

/// `Z_N(beta) = sum_{r in R(N)} (X_r - sigma(r)) e(r beta)` on the grid
/// `beta = i / M`, evaluated with one inverse FFT after folding `r mod M`.
fn certify(sigma: &Weight, config: &ThinningConfig) -> Result<DeviationCertificate> {
    let rng = KeyedRng::new(config.seed);
    let horizon = *config.checkpoints.last().expect("validated");
    let entries: Vec<(u64, f64, bool)> = sigma
        .entries(horizon)
        .map(|(_, r, w)| (r, w, rng.bernoulli(r, w)))
        .collect();
    let rows = config
        .checkpoints
        .par_iter()
        .map(|&n| {
            let wanted = (config.grid_multiplier as u128 * n as u128).min(config.grid_cap as u128) as usize;
            let grid = wanted.max(1);
            let mut buf = vec![Complex64::new(0.0, 0.0); grid];
            let mut mass = CompensatedSum::new();
            let mut selected = 0u64;
            for &(r, w, x) in entries.iter().take_while(|e| e.0 <= n) {
                let c = if x { 1.0 } else { 0.0 } - w;
                buf[(r % grid as u64) as usize].re += c;
                mass.add(w);
                selected += x as u64;
            }
            let fft = FftPlanner::<f64>::new().plan_fft_inverse(grid);
            fft.process(&mut buf);
            let max_deviation = buf.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let mass = mass.value();
            let normalizer = ((n as f64).ln() * mass).sqrt();
            let ratio = if max_deviation == 0.0 {
                0.0
            } else if normalizer > 0.0 {
                max_deviation / normalizer
            } else {
                f64::INFINITY
            };
            CheckpointCertificate {
                n,
                grid_size: grid,
                capped: config.grid_multiplier as u128 * n as u128 > config.grid_cap as u128,
                selected,
                mass,
                max_deviation,
                normalizer,
                ratio,
            }
        })
        .collect();
    Ok(DeviationCertificate {
        seed: config.seed,
        grid_multiplier: config.grid_multiplier,
        c: config.c,
        b: config.b,
        checkpoints: rows,
    })
}

/// `4 max(exp(-t^2 / (8 V)), exp(-t / 3))`; the first branch is 0 when `V = 0`.
/// `k` is the number of summands and does not enter the bound.
pub fn bernstein_bound(_k: usize, variance_sum: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 4.0;
    }
    let gaussian = if variance_sum > 0.0 {
        (-t * t / 8.0 / variance_sum).exp()
    } else {
        0.0
    };
    4.0 * gaussian.max((-t / 3.0).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub beta: f64,
    pub beta_hex: String,
    pub set_average: Complex64,
    pub weight_average: Complex64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinReport {
    pub horizon: u64,
    pub weight_bound: f64,
    pub selected: u64,
    pub probes: Vec<ProbeRow>,
    pub max_deviation: f64,
    /// `sqrt(|w|_inf log N / w(R(N)))`.
    pub rate: f64,
    /// `max_deviation / rate`; the random constant in front of the rate.
    pub rate_ratio: f64,
    pub certificate: DeviationCertificate,
    /// Spectrum of the selected set at `alpha`.
    pub spectrum: Spectrum,
}

/// Normalizes a bounded weight to `sigma = w / max(1, |w|_inf)`, thins it, and
/// compares set averages with weighted averages at `beta = p alpha`
/// (`1 <= p <= pmax`) and `random_probes` random frequencies.
pub fn set_from_bounded_weight(
    w: &Weight,
    alpha: TorusPoint,
    config: &ThinningConfig,
    horizon: u64,
    pmax: u32,
    random_probes: usize,
) -> Result<(IndexSet, ThinReport)> {
    let bound = match w.bound() {
        Some(b) => b,
        None => w.scan_sup(horizon),
    };
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::EmptyPrefix { horizon });
    }
    // like flattening, never inflate: weights already below 1 are sampled as they are
    let sigma = w.scaled(1.0 / bound.max(1.0));
    let mut cfg = config.clone();
    if cfg.checkpoints.last().is_none_or(|&last| last < horizon) {
        cfg.checkpoints.push(horizon);
    }
    cfg.checkpoints.retain(|&n| n <= horizon);
    let (set, certificate) = thin(&sigma, &cfg)?;

    let probe_rng = KeyedRng::new(config.seed).split(0x70_72_6f_62_65);
    let mut betas: Vec<TorusPoint> = (1..=pmax as i64).map(|p| alpha.mul_int(p)).collect();
    betas.extend((0..random_probes as u64).map(|i| TorusPoint::from_frac(probe_rng.bits(i))));
    let probes: Vec<ProbeRow> = betas
        .par_iter()
        .map(|&beta| -> Result<ProbeRow> {
            let set_average = weyl_average(&set, horizon, beta, 1)?;
            let weight_average = weyl_average(w, horizon, beta, 1)?;
            Ok(ProbeRow {
                beta: beta.to_f64(),
                beta_hex: format!("{:#018x}", beta.frac()),
                set_average,
                weight_average,
                deviation: (set_average - weight_average).norm(),
            })
        })
        .collect::<Result<_>>()?;
    let max_deviation = probes.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let mass: f64 = w.entries(horizon).map(|(_, _, v)| v).collect::<CompensatedSum>().value();
    let rate = (bound * (horizon as f64).ln() / mass).sqrt();
    let sp = spectrum(&set, alpha, horizon, pmax)?;
    Ok((
        set,
        ThinReport {
            horizon,
            weight_bound: bound,
            selected: sp.count,
            probes,
            max_deviation,
            rate,
            rate_ratio: max_deviation / rate,
            certificate,
            spectrum: sp,
        },
    ))
}
