//! Weights on a base set: densities pulled back along the orbit, pasting of
//! weight families, blockwise flattening, and summation by parts.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::accum::{CompensatedSum, ComplexSum};
use crate::construct::{PasteMode, PasteProblem, PasteSchedule};
use crate::density::DensityFunction;
use crate::empirical::{fmt_f64, spectrum, target_distance, Carrier, Spectrum, TargetSpectrum};
use crate::error::{Error, Result};
use crate::sequences::IndexSet;
use crate::torus::{orbit_point, TorusPoint};

type WeightFn = Arc<dyn Fn(u64, u64) -> f64 + Send + Sync>;

/// A nonnegative sequence indexed by position `n` in a base set `R`.
///
/// The value function receives the position (starting at 1) and the element `r_n`.
#[derive(Clone)]
pub struct Weight {
    base: IndexSet,
    descriptor: String,
    value: WeightFn,
    bound: Option<f64>,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("descriptor", &self.descriptor)
            .field("base", &self.base.descriptor())
            .field("bound", &self.bound)
            .finish()
    }
}

impl Weight {
    pub fn new<F>(base: IndexSet, descriptor: impl Into<String>, value: F, bound: Option<f64>) -> Weight
    where
        F: Fn(u64, u64) -> f64 + Send + Sync + 'static,
    {
        Weight {
            base,
            descriptor: descriptor.into(),
            value: Arc::new(value),
            bound,
        }
    }

    pub fn constant(base: IndexSet, c: f64) -> Weight {
        Weight::new(base, format!("const({c})"), move |_, _| c, Some(c))
    }

    /// Explicit values for the first positions; zero afterwards.
    pub fn from_values(base: IndexSet, values: Vec<f64>) -> Result<Weight> {
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weight at position {} is not a finite nonnegative number",
                i + 1
            )));
        }
        let bound = values.iter().copied().fold(0.0, f64::max);
        let values = Arc::new(values);
        Ok(Weight::new(
            base,
            "explicit",
            move |n, _| values.get(n as usize - 1).copied().unwrap_or(0.0),
            Some(bound),
        ))
    }

    pub fn base(&self) -> &IndexSet {
        &self.base
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    #[inline]
    pub fn value(&self, n: u64, r: u64) -> f64 {
        (self.value)(n, r)
    }

    pub fn scaled(&self, c: f64) -> Weight {
        let inner = Arc::clone(&self.value);
        Weight {
            base: self.base.clone(),
            descriptor: format!("{c}*{}", self.descriptor),
            value: Arc::new(move |n, r| c * inner(n, r)),
            bound: self.bound.map(|b| b * c),
        }
    }

    /// `(position, element, value)` for elements up to `horizon`.
    pub fn entries(&self, horizon: u64) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        self.base
            .upto(horizon)
            .enumerate()
            .map(move |(i, r)| (i as u64 + 1, r, self.value(i as u64 + 1, r)))
    }

    /// Largest value over elements up to `horizon`.
    pub fn scan_sup(&self, horizon: u64) -> f64 {
        self.entries(horizon).map(|(_, _, w)| w).fold(0.0, f64::max)
    }

    /// `w(R(N)) / #R(N)` at each checkpoint.
    pub fn mean_trace(&self, checkpoints: &[u64]) -> Result<Vec<f64>> {
        crate::sequences::check_increasing_checkpoints(checkpoints)?;
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut sum = CompensatedSum::new();
        let mut count = 0u64;
        let mut it = self.entries(*checkpoints.last().unwrap_or(&0)).peekable();
        for &n in checkpoints {
            while let Some(&(_, r, w)) = it.peek() {
                if r > n {
                    break;
                }
                sum.add(w);
                count += 1;
                it.next();
            }
            if count == 0 {
                return Err(Error::EmptyPrefix { horizon: n });
            }
            out.push(sum.value() / count as f64);
        }
        Ok(out)
    }

    /// `n,r_n,w` rows.
    pub fn to_csv(&self, horizon: u64) -> Result<String> {
        if horizon > 10_000_000 {
            return Err(Error::InvalidParameter("weight export is limited to horizons <= 1e7".into()));
        }
        let mut out = String::from("n,r_n,w\n");
        for (n, r, w) in self.entries(horizon) {
            let _ = writeln!(out, "{n},{r},{}", fmt_f64(w));
        }
        Ok(out)
    }
}

impl Carrier for Weight {
    fn descriptor(&self) -> String {
        format!("{} on {}", self.descriptor, self.base.descriptor())
    }

    fn stream(&self, horizon: u64) -> Box<dyn Iterator<Item = (u64, f64)> + Send + '_> {
        Box::new(
            self.base
                .upto(horizon)
                .enumerate()
                .map(move |(i, r)| (r, self.value(i as u64 + 1, r))),
        )
    }
}

/// `w(n) = rho(r_n alpha)`.
pub fn weight_from_density(rho: &DensityFunction, base: &IndexSet, alpha: TorusPoint) -> Weight {
    let f = rho.clone();
    Weight::new(
        base.clone(),
        format!("density(alpha={alpha})"),
        move |_, r| f.eval(orbit_point(r, alpha)),
        rho.sup(),
    )
}

/// A weight glued from a family along a schedule.
#[derive(Clone, Debug)]
pub struct PastedWeight {
    pub weight: Weight,
    pub schedule: PasteSchedule,
    pub family: Vec<Weight>,
}

impl PastedWeight {
    /// Assembles the pasted weight for a given schedule.
    pub fn with_schedule(family: Vec<Weight>, schedule: PasteSchedule) -> Result<PastedWeight> {
        if family.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if schedule.members.iter().any(|&m| m >= family.len()) {
            return Err(Error::InvalidParameter("schedule refers to a missing member".into()));
        }
        let base = family[0].base.clone();
        let bound = schedule
            .members
            .iter()
            .map(|&m| family[m].bound)
            .try_fold(0.0f64, |acc, b| b.map(|b| acc.max(b)));
        let members = Arc::new(family.clone());
        let sched = Arc::new(schedule.clone());
        let weight = Weight::new(
            base,
            format!("paste[{}]", family.len()),
            move |n, r| members[sched.member_at(n)].value(n, r),
            bound,
        );
        Ok(PastedWeight {
            weight,
            schedule,
            family,
        })
    }

    /// Bound of the member used on each block.
    pub fn block_bounds(&self) -> Vec<Option<f64>> {
        self.schedule
            .members
            .iter()
            .map(|&m| self.family[m].bound)
            .collect()
    }
}

fn check_common_base(family: &[Weight]) -> Result<()> {
    let first = family.first().ok_or(Error::EmptyFamily)?;
    if family.iter().any(|w| w.base.descriptor() != first.base.descriptor()) {
        return Err(Error::InvalidParameter("all weights must live on the same base set".into()));
    }
    Ok(())
}

/// Pastes weights on a common base; positions are counted in the base.
pub fn paste_weights(family: &[Weight], tolerances: &[f64], horizon: u64, mode: PasteMode) -> Result<PastedWeight> {
    paste_weights_with(family, tolerances, horizon, mode, None)
}

fn paste_weights_with(
    family: &[Weight],
    tolerances: &[f64],
    horizon: u64,
    mode: PasteMode,
    extra: Option<&crate::construct::ExtraFloor<'_>>,
) -> Result<PastedWeight> {
    check_common_base(family)?;
    if family.len() != tolerances.len() {
        return Err(Error::InvalidParameter("one tolerance per family member".into()));
    }
    let elems = family[0].base.prefix(horizon);
    if elems.is_empty() {
        return Err(Error::EmptyPrefix { horizon });
    }
    let value = |k: usize, n: u64| family[k].value(n, elems[n as usize - 1]);
    let mut problem = PasteProblem::new(value, tolerances, elems.len() as u64).mode(mode);
    if let Some(extra) = extra {
        problem = problem.extra(extra);
    }
    let schedule = problem.solve()?;
    PastedWeight::with_schedule(family.to_vec(), schedule)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub horizon: u64,
    pub members: usize,
    /// `∫ rho`.
    pub target_mass: f64,
    /// `(N, w(R(N)) / #R(N))`.
    pub mean_trace: Vec<(u64, f64)>,
    pub spectrum: Spectrum,
    /// Sup distance to the normalized coefficients of `rho`.
    pub spectrum_error: f64,
}

#[derive(Clone, Debug)]
pub struct DensityRepresentation {
    pub pasted: PastedWeight,
    pub report: DensityReport,
}

/// Weights representing `rho * lambda`: the bounded approximants
/// `rho_0, rho_1, ...` are pulled back along the orbit and pasted.
///
/// Tolerances are `e_k = 4 |rho_k - rho|_1`, which dominates
/// `2 sup_{l >= k} |rho_k - rho_l|_1` because the approximation errors decrease.
pub fn represent_density(
    rho: &DensityFunction,
    base: &IndexSet,
    alpha: TorusPoint,
    horizon: u64,
    pmax: u32,
    members: usize,
) -> Result<DensityRepresentation> {
    let mass = rho.integral();
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter("the density has zero integral".into()));
    }
    if members == 0 {
        return Err(Error::EmptyFamily);
    }
    let mut family = Vec::with_capacity(members);
    let mut tolerances = Vec::with_capacity(members);
    for k in 0..members {
        let approx = rho.approximant(k)?;
        tolerances.push(4.0 * rho.l1_distance(&approx)?);
        family.push(weight_from_density(&approx, base, alpha));
    }
    let pasted = paste_weights(&family, &tolerances, horizon, PasteMode::Truncate)?;
    let mut checkpoints: Vec<u64> = std::iter::successors(Some(10u64), |n| n.checked_mul(10))
        .take_while(|&n| n < horizon)
        .collect();
    checkpoints.push(horizon);
    let trace = pasted.weight.mean_trace(&checkpoints)?;
    let sp = spectrum(&pasted.weight, alpha, horizon, pmax)?;
    let target = TargetSpectrum::Density {
        density: rho.scaled(1.0 / mass),
    };
    let spectrum_error = target_distance(&sp, &target)?;
    Ok(DensityRepresentation {
        report: DensityReport {
            horizon,
            members: pasted.schedule.blocks(),
            target_mass: mass,
            mean_trace: checkpoints.into_iter().zip(trace).collect(),
            spectrum: sp,
            spectrum_error,
        },
        pasted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub block: usize,
    pub start: u64,
    /// `k max_{j <= k} |w_j|_inf`.
    pub required: f64,
    /// `min_{N >= start} N / log r_N` over the horizon.
    pub worst: f64,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct FlattenedWeight {
    pub weight: Weight,
    /// Normalizer on each block.
    pub sigma: Vec<f64>,
    pub schedule: PasteSchedule,
    pub growth: Vec<GrowthCheck>,
    /// Whether the schedule had to be stretched to satisfy the growth criterion.
    pub stretched: bool,
}

/// `g(N) = N / log r_N`, with its suffix minima.
fn growth_suffix_min(elems: &[u64]) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; elems.len() + 1];
    for i in (0..elems.len()).rev() {
        let r = elems[i] as f64;
        let g = if r > 1.0 { (i + 1) as f64 / r.ln() } else { f64::INFINITY };
        out[i] = g.min(out[i + 1]);
    }
    out
}

/// Position-indexed suffix minimum lookup, `start` 1-based.
fn worst_from(suffix: &[f64], start: u64) -> f64 {
    suffix[(start.max(1) - 1) as usize]
}

/// Scales block `k` by `1 / max(1, max_{j <= k} |w_j|_inf)` so the result is
/// bounded by 1 and the normalizer never increases.
///
/// The growth criterion `N / M_k > k log r_N` is checked for every position
/// `N >= N_k` inside the horizon. When it fails, the family is pasted again
/// with the criterion as an extra breakpoint condition.
pub fn flatten(pasted: &PastedWeight, horizon: u64) -> Result<FlattenedWeight> {
    let family_bounds: Vec<f64> = pasted
        .family
        .iter()
        .map(|w| {
            w.bound
                .ok_or_else(|| Error::InvalidParameter("flatten needs bounded family members".into()))
        })
        .collect::<Result<_>>()?;
    let base = pasted.weight.base.clone();
    let elems = base.prefix(horizon);
    if elems.is_empty() {
        return Err(Error::EmptyPrefix { horizon });
    }
    let suffix = growth_suffix_min(&elems);

    let running_max = |members: &[usize]| -> Vec<f64> {
        let mut m = 1.0f64;
        members
            .iter()
            .map(|&i| {
                m = m.max(family_bounds[i]);
                m
            })
            .collect()
    };
    let checks = |schedule: &PasteSchedule| -> Vec<GrowthCheck> {
        let maxes = running_max(&schedule.members);
        (1..schedule.blocks())
            .map(|k| {
                let start = schedule.breakpoints[k] + 1;
                let required = k as f64 * maxes[k];
                let worst = worst_from(&suffix, start);
                GrowthCheck {
                    block: k,
                    start,
                    required,
                    worst,
                    holds: worst > required,
                }
            })
            .collect()
    };

    let mut schedule = pasted.schedule.clone();
    let mut growth = checks(&schedule);
    let mut stretched = false;
    let mut result = pasted.clone();
    if let Some(bad) = growth.iter().find(|g| !g.holds) {
        let bad_block = bad.block;
        // prefix maxima over family indices; a re-paste uses members 0, 1, 2, ...
        let all: Vec<usize> = (0..pasted.family.len()).collect();
        let maxes = running_max(&all);
        let len = elems.len();
        let extra = |s: usize| -> Option<u64> {
            let need = s as f64 * maxes[s];
            // suffix minima are nondecreasing in the start position
            let idx = suffix[..len].partition_point(|&g| g <= need);
            (idx < len).then_some(idx as u64)
        };
        // keep every member the original schedule used; dropping one would change the limit
        let used = pasted.schedule.members.iter().max().map_or(1, |m| m + 1);
        let tolerances = pasted.schedule_tolerances();
        let repasted = paste_weights_with(
            &pasted.family[..used],
            &tolerances[..used],
            horizon,
            PasteMode::Strict,
            Some(&extra),
        )
            .map_err(|_| Error::GrowthCriterion {
                block: bad_block,
                horizon,
            })?;
        schedule = repasted.schedule.clone();
        growth = checks(&schedule);
        if let Some(g) = growth.iter().find(|g| !g.holds) {
            return Err(Error::GrowthCriterion {
                block: g.block,
                horizon,
            });
        }
        stretched = true;
        result = repasted;
    }

    let maxes = running_max(&schedule.members);
    let sigma: Vec<f64> = maxes.iter().map(|m| 1.0 / m).collect();
    let inner = result.weight.clone();
    let sched = Arc::new(schedule.clone());
    let sig = Arc::new(sigma.clone());
    let weight = Weight::new(
        base,
        format!("flat({})", inner.descriptor),
        move |n, r| sig[sched.block_at(n)] * inner.value(n, r),
        Some(1.0),
    );
    Ok(FlattenedWeight {
        weight,
        sigma,
        schedule,
        growth,
        stretched,
    })
}

impl PastedWeight {
    /// Tolerances for the whole family, as used when the schedule was built.
    fn schedule_tolerances(&self) -> Vec<f64> {
        let mut t = self.schedule.tolerances.clone();
        // members beyond the used ones keep the last tolerance
        let last = t.last().copied().unwrap_or(0.0);
        t.resize(self.family.len(), last);
        t
    }
}

/// The masses `q_N(j) = (sigma(j) - sigma(j+1)) w([j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QMeasure {
    pub masses: Vec<f64>,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbpReport {
    /// `A^{v_N} x` with `v_N = sigma w`.
    pub direct: Complex64,
    /// `q_N`-average of the prefix averages `A^w_{[j]} x`.
    pub by_parts: Complex64,
    pub relative_difference: f64,
    pub mass_v: f64,
    pub mass_q: f64,
    pub mass_relative_difference: f64,
    pub q: QMeasure,
}

fn check_sbp_inputs(w: &[f64], sigma: &[f64], x: &[Complex64]) -> Result<()> {
    if w.len() != sigma.len() || w.len() != x.len() || w.is_empty() {
        return Err(Error::InvalidParameter("w, sigma and x must have the same nonzero length".into()));
    }
    if w.iter().chain(sigma).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("w and sigma must be finite and nonnegative".into()));
    }
    if let Some(i) = sigma.windows(2).position(|p| p[1] > p[0]) {
        return Err(Error::InvalidParameter(format!("sigma increases at position {}", i + 2)));
    }
    Ok(())
}

/// Evaluates `A^{v_N} x` directly and through summation by parts.
/// Position `j` of the slices is the integer `j + 1`; `sigma` vanishes beyond the slice.
pub fn sbp_average(w: &[f64], sigma: &[f64], x: &[Complex64]) -> Result<SbpReport> {
    check_sbp_inputs(w, sigma, x)?;
    let n = w.len();
    let mut direct = ComplexSum::new();
    let mut mass_v = CompensatedSum::new();
    for i in 0..n {
        let v = sigma[i] * w[i];
        mass_v.add(v);
        direct.add(x[i] * v);
    }
    let mass_v = mass_v.value();
    if mass_v <= 0.0 {
        return Err(Error::EmptyPrefix { horizon: n as u64 });
    }

    let mut prefix_w = CompensatedSum::new();
    let mut prefix_wx = ComplexSum::new();
    let mut by_parts = ComplexSum::new();
    let mut mass_q = CompensatedSum::new();
    let mut masses = Vec::with_capacity(n);
    for j in 0..n {
        prefix_w.add(w[j]);
        prefix_wx.add(x[j] * w[j]);
        let next = if j + 1 < n { sigma[j + 1] } else { 0.0 };
        let wj = prefix_w.value();
        let q = (sigma[j] - next) * wj;
        masses.push(q);
        mass_q.add(q);
        if q > 0.0 {
            by_parts.add(prefix_wx.value() / wj * q);
        }
    }
    let mass_q = mass_q.value();
    let direct = direct.value() / mass_v;
    let by_parts = by_parts.value() / mass_q;
    let scale = direct.norm().max(by_parts.norm()).max(f64::MIN_POSITIVE);
    Ok(SbpReport {
        direct,
        by_parts,
        relative_difference: (direct - by_parts).norm() / scale,
        mass_v,
        mass_q,
        mass_relative_difference: (mass_v - mass_q).abs() / mass_v,
        q: QMeasure { masses, total: mass_q },
    })
}

/// Deviation `|A^{v_N} x - y|` and the bound
/// `eps + max_{j <= K} |A^w_{[j]} x - y| v_N([K]) / v_N(N)` with
/// `eps = sup_{K < j <= N} |A^w_{[j]} x - y|`.
pub fn sbp_bound(w: &[f64], sigma: &[f64], x: &[Complex64], y: Complex64, k: usize) -> Result<(f64, f64)> {
    let report = sbp_average(w, sigma, x)?;
    let mut prefix_w = CompensatedSum::new();
    let mut prefix_wx = ComplexSum::new();
    let mut head: f64 = 0.0;
    let mut tail: f64 = 0.0;
    let mut mass_head = CompensatedSum::new();
    for j in 0..w.len() {
        prefix_w.add(w[j]);
        prefix_wx.add(x[j] * w[j]);
        let wj = prefix_w.value();
        let dev = if wj > 0.0 { (prefix_wx.value() / wj - y).norm() } else { 0.0 };
        if j < k {
            head = head.max(dev);
            mass_head.add(sigma[j] * w[j]);
        } else {
            tail = tail.max(dev);
        }
    }
    let bound = tail + head * mass_head.value() / report.mass_v;
    Ok(((report.direct - y).norm(), bound))
}
