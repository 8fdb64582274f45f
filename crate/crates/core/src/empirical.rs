//! Weyl averages, empirical spectra, analytic target spectra and the
//! distances used to compare them.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accum::{CompensatedSum, ComplexSum};
use crate::construct::TorusRegion;
use crate::density::DensityFunction;
use crate::error::{Error, Result};
use crate::sequences::IndexSet;
use crate::torus::{character, orbit_point, TorusPoint};

/// Elements are consumed in chunks of this size; within a chunk the
/// frequencies are processed in parallel.
pub const CHUNK: usize = 1 << 16;

/// Anything that can be averaged along: a set (unit masses) or a weight.
pub trait Carrier: Sync {
    fn descriptor(&self) -> String;

    /// `(element, mass)` pairs with element `<= horizon`, in increasing order.
    fn stream(&self, horizon: u64) -> Box<dyn Iterator<Item = (u64, f64)> + Send + '_>;
}

impl Carrier for IndexSet {
    fn descriptor(&self) -> String {
        IndexSet::descriptor(self).to_string()
    }

    fn stream(&self, horizon: u64) -> Box<dyn Iterator<Item = (u64, f64)> + Send + '_> {
        Box::new(self.upto(horizon).map(|r| (r, 1.0)))
    }
}

/// `A_{s in S(N)} e(p s beta)`, or its weighted analog.
pub fn weyl_average<C: Carrier + ?Sized>(carrier: &C, horizon: u64, beta: TorusPoint, p: i64) -> Result<Complex64> {
    let mut sum = ComplexSum::new();
    let mut mass = CompensatedSum::new();
    for (r, w) in carrier.stream(horizon) {
        mass.add(w);
        if w != 0.0 {
            sum.add(character(p, orbit_point(r, beta)).0 * w);
        }
    }
    let m = mass.value();
    if m <= 0.0 {
        return Err(Error::EmptyPrefix { horizon });
    }
    Ok(sum.value() / m)
}

/// Fourier data `mu^(p)` of an empirical or analytic measure over a set of frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub carrier: String,
    /// Fixed-point numerator of the rotation, in hex.
    pub alpha_hex: String,
    pub alpha: f64,
    pub horizon: u64,
    /// Number of carrier elements up to the horizon.
    pub count: u64,
    /// Total mass up to the horizon (equals `count` for sets).
    pub mass: f64,
    pub frequencies: Vec<i64>,
    pub coefficients: Vec<Complex64>,
}

impl Spectrum {
    pub fn pmax(&self) -> i64 {
        self.frequencies.iter().map(|p| p.abs()).max().unwrap_or(0)
    }

    pub fn coeff(&self, p: i64) -> Option<Complex64> {
        self.frequencies
            .iter()
            .position(|&q| q == p)
            .map(|i| self.coefficients[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.frequencies.iter().copied().zip(self.coefficients.iter().copied())
    }

    /// `p,re,im` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,re,im\n");
        for (p, c) in self.iter() {
            let _ = writeln!(out, "{},{},{}", p, fmt_f64(c.re), fmt_f64(c.im));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum serializes")
    }
}

/// Decimal float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

/// All coefficients `|p| <= pmax` in a single streaming pass.
pub fn spectrum<C: Carrier + ?Sized>(carrier: &C, alpha: TorusPoint, horizon: u64, pmax: u32) -> Result<Spectrum> {
    let nonneg: Vec<i64> = (0..=pmax as i64).collect();
    let half = spectrum_at(carrier, alpha, horizon, &nonneg)?;
    let pm = pmax as i64;
    let frequencies: Vec<i64> = (-pm..=pm).collect();
    let coefficients = frequencies
        .iter()
        .map(|&p| {
            let c = half.coefficients[p.unsigned_abs() as usize];
            if p < 0 {
                c.conj()
            } else {
                c
            }
        })
        .collect();
    Ok(Spectrum {
        frequencies,
        coefficients,
        ..half
    })
}

/// Coefficients at an arbitrary list of frequencies. Each frequency is
/// summed sequentially in element order, so results do not depend on the
/// number of threads.
pub fn spectrum_at<C: Carrier + ?Sized>(
    carrier: &C,
    alpha: TorusPoint,
    horizon: u64,
    frequencies: &[i64],
) -> Result<Spectrum> {
    let mut sums = vec![ComplexSum::new(); frequencies.len()];
    let mut mass = CompensatedSum::new();
    let mut count = 0u64;
    let mut chunk: Vec<(TorusPoint, f64)> = Vec::with_capacity(CHUNK);
    let mut stream = carrier.stream(horizon);
    loop {
        chunk.clear();
        chunk.extend(stream.by_ref().take(CHUNK).map(|(r, w)| (orbit_point(r, alpha), w)));
        if chunk.is_empty() {
            break;
        }
        count += chunk.len() as u64;
        for &(_, w) in &chunk {
            mass.add(w);
        }
        sums.par_iter_mut().zip(frequencies.par_iter()).for_each(|(acc, &p)| {
            for &(x, w) in &chunk {
                if w != 0.0 {
                    acc.add(character(p, x).0 * w);
                }
            }
        });
    }
    let m = mass.value();
    if m <= 0.0 {
        return Err(Error::EmptyPrefix { horizon });
    }
    Ok(Spectrum {
        carrier: carrier.descriptor(),
        alpha_hex: format!("{:#018x}", alpha.frac()),
        alpha: alpha.to_f64(),
        horizon,
        count,
        mass: m,
        frequencies: frequencies.to_vec(),
        coefficients: sums.iter().map(|s| s.value() / m).collect(),
    })
}

/// Measures with closed-form Fourier coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpectrum {
    Lebesgue,
    /// `rho * lambda`.
    Density { density: DensityFunction },
    /// Normalized restriction `1_B lambda / lambda(B)`.
    Region { region: TorusRegion },
    /// Masses at `j/q`.
    Atomic { q: u64, masses: Vec<f64> },
    /// Middle-thirds Cantor measure.
    Cantor,
}

impl TargetSpectrum {
    pub fn coeff(&self, p: i64) -> Complex64 {
        target_coeff(self, p)
    }
}

pub fn target_coeff(target: &TargetSpectrum, p: i64) -> Complex64 {
    match target {
        TargetSpectrum::Lebesgue => {
            if p == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        TargetSpectrum::Density { density } => density.fourier(p),
        TargetSpectrum::Region { region } => region.fourier(p) / region.measure(),
        TargetSpectrum::Atomic { q, masses } => {
            let mut acc = ComplexSum::new();
            for (j, &m) in masses.iter().enumerate() {
                let x = TorusPoint::from_ratio(j as i64, *q);
                acc.add(character(p, x).0 * m);
            }
            acc.value()
        }
        TargetSpectrum::Cantor => cantor_coeff(p),
    }
}

/// `nu^(p) = prod_{k >= 1} (1 + e(2p / 3^k)) / 2` for the Cantor measure.
///
/// Factors of three in `p` contribute factors equal to one and are removed
/// first. Angles `2p'/3^k mod 1` are reduced exactly in integers; once
/// `3^k` dwarfs `p'` the remaining factors are `e(x/2) cos(pi x)` with tiny
/// `x`, whose product is `e(p' / (2 3^K))` to within rounding.
pub fn cantor_coeff(p: i64) -> Complex64 {
    if p == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if p < 0 {
        return cantor_coeff(-p).conj();
    }
    let mut q = p as u128;
    while q.is_multiple_of(3) {
        q /= 3;
    }
    let mut acc = Complex64::new(1.0, 0.0);
    let mut pow: u128 = 1;
    // 3^40 < 2^64, so (residue << 64) never overflows
    for _ in 0..40 {
        pow *= 3;
        let residue = (2 * q) % pow;
        let frac = ((residue << 64) / pow) as u64;
        let z = crate::torus::e(TorusPoint::from_frac(frac)).0;
        acc *= (z + 1.0) * 0.5;
        if pow > q * 1_000_000_000_000_000 {
            break;
        }
    }
    // phases of the remaining factors: sum over k > K of q / 3^k
    let tail = q as f64 / (2.0 * pow as f64);
    acc * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * tail)
}

/// Sup over the shared window of `|a^(p) - b^(p)|`.
pub fn spectrum_distance(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    let mut worst: Option<f64> = None;
    for (p, c) in a.iter() {
        if let Some(d) = b.coeff(p) {
            worst = Some(worst.unwrap_or(0.0).max((c - d).norm()));
        }
    }
    worst.ok_or(Error::DisjointWindows)
}

/// Sup over the window of `a` of `|a^(p) - nu^(p)|`.
pub fn target_distance(a: &Spectrum, target: &TargetSpectrum) -> Result<f64> {
    if a.frequencies.is_empty() {
        return Err(Error::DisjointWindows);
    }
    Ok(a.iter()
        .map(|(p, c)| (c - target_coeff(target, p)).norm())
        .fold(0.0, f64::max))
}

/// Finitely supported probability measure on the torus.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    points: Vec<TorusPoint>,
    masses: Vec<f64>,
    total: f64,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<TorusPoint>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::InvalidParameter("points and masses differ in length".into()));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidParameter("masses must be finite and >= 0".into()));
        }
        let total = masses.iter().copied().collect::<CompensatedSum>().value();
        if total <= 0.0 {
            return Err(Error::EmptyPrefix { horizon: 0 });
        }
        Ok(EmpiricalMeasure { points, masses, total })
    }

    /// Equal masses at the given points.
    pub fn uniform(points: Vec<TorusPoint>) -> Result<Self> {
        let masses = vec![1.0; points.len()];
        EmpiricalMeasure::new(points, masses)
    }

    /// The transform measure of a carrier at `alpha` up to `horizon`.
    pub fn from_carrier<C: Carrier + ?Sized>(carrier: &C, alpha: TorusPoint, horizon: u64) -> Result<Self> {
        let (points, masses): (Vec<_>, Vec<_>) = carrier
            .stream(horizon)
            .map(|(r, w)| (orbit_point(r, alpha), w))
            .unzip();
        EmpiricalMeasure::new(points, masses).map_err(|e| match e {
            Error::EmptyPrefix { .. } => Error::EmptyPrefix { horizon },
            other => other,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(TorusPoint) -> f64) -> f64 {
        let s: CompensatedSum = self
            .points
            .iter()
            .zip(&self.masses)
            .map(|(&x, &m)| f(x) * m)
            .collect();
        s.value() / self.total
    }
}

/// Triangular bump: 1 at `center`, falling linearly to 0 at distance `half_width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
}

impl Bump {
    #[inline]
    pub fn eval(&self, x: TorusPoint) -> f64 {
        let d = x.distance(TorusPoint::from_f64(self.center));
        (1.0 - d / self.half_width).max(0.0)
    }

    /// `∫ bump dλ` (the bump never wraps onto itself for half-width <= 1/2).
    pub fn lebesgue_integral(&self) -> f64 {
        self.half_width
    }
}

/// A finite family of `[0,1]`-valued test functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    pub bumps: Vec<Bump>,
}

impl TestFunctionFamily {
    pub fn new(bumps: Vec<Bump>) -> Result<Self> {
        if bumps.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if bumps
            .iter()
            .any(|b| !(b.half_width > 0.0 && b.half_width <= 0.5 && b.center.is_finite()))
        {
            return Err(Error::InvalidParameter("bump half-widths must lie in (0, 1/2]".into()));
        }
        Ok(TestFunctionFamily { bumps })
    }

    /// 32 equally spaced centres, half-widths 1/32 and 1/8.
    pub fn default_bumps() -> Self {
        let mut bumps = Vec::with_capacity(64);
        for hw in [1.0 / 32.0, 1.0 / 8.0] {
            for i in 0..32 {
                bumps.push(Bump {
                    center: i as f64 / 32.0,
                    half_width: hw,
                });
            }
        }
        TestFunctionFamily { bumps }
    }
}

/// `max_phi |a(phi) - b(phi)|` over the family: a lower bound for the
/// variation distance.
pub fn variation_lower_bound(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    family: &TestFunctionFamily,
) -> Result<f64> {
    if family.bumps.is_empty() {
        return Err(Error::EmptyFamily);
    }
    Ok(family
        .bumps
        .par_iter()
        .map(|bump| (a.integrate(|x| bump.eval(x)) - b.integrate(|x| bump.eval(x))).abs())
        .reduce(|| 0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::density::PiecewiseLinear;

    #[test]
    fn naturals_match_geometric_sum() {
        let n = 100_000u64;
        let alpha = TorusPoint::GOLDEN;
        let avg = weyl_average(&IndexSet::naturals(), n, alpha, 1).unwrap();
        let a = alpha.to_f64();
        let closed = ((PI * n as f64 * a).sin() / (PI * a).sin()).abs();
        let got = avg.norm() * n as f64;
        assert!((got - closed).abs() / closed < 1e-9, "{got} vs {closed}");
        assert_eq!(
            weyl_average(&IndexSet::naturals(), n, alpha, 0).unwrap(),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn empty_prefix_is_an_error() {
        let s = IndexSet::from_sorted("late", vec![1000]).unwrap();
        assert!(matches!(
            weyl_average(&s, 10, TorusPoint::GOLDEN, 1),
            Err(Error::EmptyPrefix { horizon: 10 })
        ));
    }

    #[test]
    fn streaming_matches_naive_two_pass() {
        let set = IndexSet::naturals().filter("mod5", |r| r % 5 != 2);
        let alpha = TorusPoint::SQRT2;
        let sp = spectrum(&set, alpha, 10_000, 6).unwrap();
        let elems = set.prefix(10_000);
        for (p, c) in sp.iter() {
            let naive: Complex64 = elems
                .iter()
                .map(|&r| {
                    let x = (r as u128 * alpha.frac() as u128) as u64;
                    let t = (p as i128 * x as i128).rem_euclid(1 << 64) as f64 / 2f64.powi(64);
                    Complex64::from_polar(1.0, 2.0 * PI * t)
                })
                .sum::<Complex64>()
                / elems.len() as f64;
            assert!((c - naive).norm() <= 1e-12 * naive.norm().max(1.0), "p={p}");
        }
        assert_eq!(sp.coeff(0).unwrap(), Complex64::new(1.0, 0.0));
        for p in 1..=6 {
            assert!((sp.coeff(-p).unwrap() - sp.coeff(p).unwrap().conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn spectrum_is_thread_count_independent() {
        let set = IndexSet::naturals();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| spectrum(&set, TorusPoint::GOLDEN, 200_000, 5).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn atomic_carrier_at_half() {
        let evens = IndexSet::naturals().filter("even", |r| r % 2 == 0);
        let sp = spectrum(&evens, TorusPoint::HALF, 10_000, 4).unwrap();
        for (_, c) in sp.iter() {
            assert_eq!(c, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn csv_has_header_and_one_row_per_frequency() {
        let sp = spectrum(&IndexSet::naturals(), TorusPoint::GOLDEN, 1000, 3).unwrap();
        let csv = sp.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "p,re,im");
        assert_eq!(lines.len(), 8);
        assert!(lines[4].starts_with("0,1.0000000000000000e0,"));
        assert!(sp.to_json().contains("0x9e3779b97f4a7c16"));
    }

    #[test]
    fn target_coefficients() {
        assert_eq!(TargetSpectrum::Lebesgue.coeff(3), Complex64::new(0.0, 0.0));
        let region = TorusRegion::interval(0.0, 0.5).unwrap();
        let t = TargetSpectrum::Region { region: region.clone() };
        assert!((t.coeff(1) - Complex64::new(0.0, 2.0 / PI)).norm() < 1e-15);
        let d = TargetSpectrum::Density {
            density: DensityFunction::Piecewise(PiecewiseLinear::indicator(&region, 2.0).unwrap()),
        };
        assert!((d.coeff(1) - t.coeff(1)).norm() < 1e-15);
        let atoms = TargetSpectrum::Atomic {
            q: 4,
            masses: vec![0.0, 1.0, 0.0, 0.0],
        };
        assert!((atoms.coeff(1) - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    /// Recursive evaluation with no factor stripping and no tail model.
    fn cantor_oracle(p: i64) -> Complex64 {
        fn rec(p: f64, depth: u32) -> Complex64 {
            if depth == 0 {
                return Complex64::new(1.0, 0.0);
            }
            let factor = (Complex64::from_polar(1.0, 2.0 * PI * 2.0 * p / 3.0) + 1.0) * 0.5;
            factor * rec(p / 3.0, depth - 1)
        }
        rec(p as f64, 70)
    }

    #[test]
    fn cantor_against_recursive_product() {
        for p in [1i64, 2, 4, 5, 7, 10, 13, 100, 242, 6561, 12345] {
            let a = cantor_coeff(p);
            let b = cantor_oracle(p);
            assert!((a - b).norm() < 1e-10, "p={p}: {a} vs {b}");
        }
        let base = cantor_coeff(1).norm();
        for k in 0..=8 {
            assert!((cantor_coeff(3i64.pow(k)).norm() - base).abs() < 1e-12);
        }
        // nu^(1) = prod cos(pi 2/3^k) in modulus
        let modulus: f64 = (1..60).map(|k| (2.0 * PI / 3f64.powi(k)).cos().abs()).product();
        assert!((base - modulus).abs() < 1e-12);
    }

    #[test]
    fn variation_bound_separates_point_mass_from_uniform() {
        let dirac = EmpiricalMeasure::uniform(vec![TorusPoint::ZERO; 10]).unwrap();
        let grid = EmpiricalMeasure::uniform((0..10_000).map(|i| TorusPoint::from_ratio(i, 10_000)).collect()).unwrap();
        let fam = TestFunctionFamily::new(vec![Bump {
            center: 0.0,
            half_width: 0.05,
        }])
        .unwrap();
        let d = variation_lower_bound(&dirac, &grid, &fam).unwrap();
        assert!(d >= 0.8, "{d}");
        assert_eq!(variation_lower_bound(&grid, &grid, &TestFunctionFamily::default_bumps()).unwrap(), 0.0);
        assert!(matches!(TestFunctionFamily::new(vec![]), Err(Error::EmptyFamily)));
    }

    #[test]
    fn window_mismatch() {
        let a = spectrum_at(&IndexSet::naturals(), TorusPoint::GOLDEN, 100, &[1, 2]).unwrap();
        let b = spectrum_at(&IndexSet::naturals(), TorusPoint::GOLDEN, 100, &[3]).unwrap();
        assert!(matches!(spectrum_distance(&a, &b), Err(Error::DisjointWindows)));
        assert_eq!(spectrum_distance(&a, &a).unwrap(), 0.0);
    }
}
