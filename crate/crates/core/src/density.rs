//! Densities on the torus: piecewise-linear functions and capped power spikes.
//!
//! Everything a construction needs from a density is available in closed
//! form here: pointwise values at exact torus points, integrals, `L^1`
//! distances between approximants, and Fourier coefficients.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::construct::TorusRegion;
use crate::error::{Error, Result};
use crate::torus::TorusPoint;

const ONE: u128 = 1 << 64;
const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// A piecewise-linear function on `[0, 1)`.
///
/// Piece `i` covers `[knots[i], knots[i+1])` (fixed-point units) and runs
/// linearly from `left[i]` to `right[i]`. Jumps between pieces are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    knots: Vec<u128>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<u128>, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        let pieces = left.len();
        if pieces == 0 || right.len() != pieces || knots.len() != pieces + 1 {
            return Err(Error::InvalidParameter(
                "need n+1 knots and n left/right values".into(),
            ));
        }
        if knots[0] != 0 || knots[pieces] != ONE || knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "knots must increase strictly from 0 to 1".into(),
            ));
        }
        if left.iter().chain(&right).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "density values must be finite and nonnegative".into(),
            ));
        }
        Ok(PiecewiseLinear { knots, left, right })
    }

    pub fn constant(c: f64) -> Result<Self> {
        PiecewiseLinear::new(vec![0, ONE], vec![c], vec![c])
    }

    /// Piecewise constant with breakpoints `0 < b_1 < ... < 1` and one value per piece.
    pub fn step(breaks: &[f64], values: &[f64]) -> Result<Self> {
        let mut knots = vec![0u128];
        for &b in breaks {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::InvalidParameter(format!("breakpoint {b} outside (0,1)")));
            }
            knots.push(TorusPoint::from_f64(b).frac() as u128);
        }
        knots.push(ONE);
        PiecewiseLinear::new(knots, values.to_vec(), values.to_vec())
    }

    /// `height * 1_B` for a region `B`.
    pub fn indicator(region: &TorusRegion, height: f64) -> Result<Self> {
        if region.is_empty() {
            return PiecewiseLinear::constant(0.0);
        }
        let mut knots = vec![0u128];
        let mut vals = Vec::new();
        let mut cursor = 0u128;
        for arc in region.arcs() {
            if arc.start as u128 > cursor {
                vals.push(0.0);
                knots.push(arc.start as u128);
            }
            vals.push(height);
            knots.push(arc.end);
            cursor = arc.end;
        }
        if cursor < ONE {
            vals.push(0.0);
            knots.push(ONE);
        }
        PiecewiseLinear::new(knots, vals.clone(), vals)
    }

    /// Tent rising linearly from 0 at `x = 0` to `height` at `1/2` and back.
    pub fn tent(height: f64) -> Result<Self> {
        PiecewiseLinear::new(
            vec![0, ONE / 2, ONE],
            vec![0.0, height],
            vec![height, 0.0],
        )
    }

    pub fn pieces(&self) -> usize {
        self.left.len()
    }

    fn piece_len(&self, i: usize) -> f64 {
        (self.knots[i + 1] - self.knots[i]) as f64 / TWO_POW_64
    }

    fn knot_f64(&self, i: usize) -> f64 {
        self.knots[i] as f64 / TWO_POW_64
    }

    #[inline]
    pub fn eval(&self, x: TorusPoint) -> f64 {
        let f = x.frac() as u128;
        let i = self.knots.partition_point(|&k| k <= f) - 1;
        let t = (f - self.knots[i]) as f64 / (self.knots[i + 1] - self.knots[i]) as f64;
        self.left[i] + (self.right[i] - self.left[i]) * t
    }

    /// Value at a real point in `[0, 1]`, with `side` choosing one-sided limits at knots.
    fn eval_real(&self, x: f64, from_left: bool) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let n = self.pieces();
        let mut i = 0;
        while i + 1 < n {
            let k = self.knot_f64(i + 1);
            if x < k || (from_left && x == k) {
                break;
            }
            i += 1;
        }
        let (a, b) = (self.knot_f64(i), self.knot_f64(i + 1));
        let t = if b > a { (x - a) / (b - a) } else { 0.0 };
        self.left[i] + (self.right[i] - self.left[i]) * t.clamp(0.0, 1.0)
    }

    pub fn integral(&self) -> f64 {
        (0..self.pieces())
            .map(|i| 0.5 * (self.left[i] + self.right[i]) * self.piece_len(i))
            .sum()
    }

    pub fn sup(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .copied()
            .fold(0.0, f64::max)
    }

    /// `∫ rho(x) e(p x) dx`, piecewise in closed form.
    pub fn fourier(&self, p: i64) -> Complex64 {
        if p == 0 {
            return Complex64::new(self.integral(), 0.0);
        }
        let k = 2.0 * PI * p as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.pieces() {
            let (a, b) = (self.knot_f64(i), self.knot_f64(i + 1));
            let (va, vb) = (self.left[i], self.right[i]);
            let slope = (vb - va) / (b - a);
            // ∫_a^b (va + slope (x - a)) e^{ikx} dx
            let ea = Complex64::from_polar(1.0, k * a);
            let eb = Complex64::from_polar(1.0, k * b);
            let ik = Complex64::new(0.0, k);
            let term_const = (eb * vb - ea * va) / ik;
            let term_slope = (eb - ea) * slope / (ik * ik);
            acc += term_const - term_slope;
        }
        acc
    }

    /// Exact `∫ |self - other|`.
    pub fn l1_distance(&self, other: &PiecewiseLinear) -> f64 {
        let mut knots: Vec<u128> = self.knots.iter().chain(&other.knots).copied().collect();
        knots.sort_unstable();
        knots.dedup();
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = (b - a) as f64 / TWO_POW_64;
            let (xa, xb) = (a as f64 / TWO_POW_64, b as f64 / TWO_POW_64);
            let d0 = self.eval_real(xa, false) - other.eval_real(xa, false);
            let d1 = self.eval_real(xb, true) - other.eval_real(xb, true);
            total += abs_linear_integral(d0, d1) * len;
        }
        total
    }

    /// Replaces every jump (including the one across `0 = 1`) by a linear ramp
    /// of total width `ramp` centred on the jump.
    pub fn mollify(&self, ramp: f64) -> Result<PiecewiseLinear> {
        let n = self.pieces();
        let half = ramp / 2.0;
        let jumps: Vec<usize> = (0..n)
            .filter(|&i| {
                let prev = if i == 0 { n - 1 } else { i - 1 };
                (self.right[prev] - self.left[i]).abs() > 0.0
            })
            .collect();
        if jumps.is_empty() {
            return Ok(self.clone());
        }
        let min_piece = (0..n).map(|i| self.piece_len(i)).fold(f64::INFINITY, f64::min);
        if !(ramp > 0.0 && ramp < min_piece) {
            return Err(Error::InvalidParameter(format!(
                "ramp {ramp} must be positive and shorter than every piece ({min_piece})"
            )));
        }
        // values at the ramp ends, taken from the unmodified function
        let ramps: Vec<(f64, f64, f64)> = jumps
            .iter()
            .map(|&i| {
                let c = self.knot_f64(i);
                let lo = if i == 0 {
                    self.eval_real(1.0 - half, false)
                } else {
                    self.eval_real(c - half, false)
                };
                let hi = self.eval_real(c + half, false);
                (c, lo, hi)
            })
            .collect();
        let modified = |x: f64| -> Option<f64> {
            for &(c, lo, hi) in &ramps {
                let mut d = x - c;
                if d > 0.5 {
                    d -= 1.0;
                }
                if d.abs() <= half {
                    return Some(lo + (hi - lo) * (d + half) / ramp);
                }
            }
            None
        };
        let mut cuts: Vec<u128> = self.knots.clone();
        for &(c, _, _) in &ramps {
            for x in [c - half, c + half] {
                let x = if x < 0.0 { x + 1.0 } else { x };
                cuts.push(TorusPoint::from_f64(x).frac() as u128);
            }
        }
        cuts.sort_unstable();
        cuts.dedup();
        let mut left = Vec::with_capacity(cuts.len());
        let mut right = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let (a, b) = (w[0] as f64 / TWO_POW_64, w[1] as f64 / TWO_POW_64);
            let mid = 0.5 * (a + b);
            let inside_ramp = modified(mid).is_some();
            let value_at = |x: f64, from_left: bool| {
                if inside_ramp {
                    // evaluate the ramp's linear formula even at its end points
                    let probe = if from_left { x - 1e-300 } else { x };
                    modified(probe).or_else(|| modified(mid)).map_or(0.0, |_| {
                        ramp_value(&ramps, half, ramp, x, mid)
                    })
                } else {
                    self.eval_real(x, from_left)
                }
            };
            left.push(value_at(a, false).max(0.0));
            right.push(value_at(b, true).max(0.0));
        }
        PiecewiseLinear::new(cuts, left, right)
    }
}

/// Linear ramp value at `x` for the ramp that contains `mid`.
fn ramp_value(ramps: &[(f64, f64, f64)], half: f64, ramp: f64, x: f64, mid: f64) -> f64 {
    for &(c, lo, hi) in ramps {
        let mut dm = mid - c;
        if dm > 0.5 {
            dm -= 1.0;
        }
        if dm.abs() <= half {
            let mut d = x - c;
            if d > 0.5 {
                d -= 1.0;
            }
            if dm < 0.0 && d > 0.0 {
                d -= 1.0;
            }
            return lo + (hi - lo) * (d + half) / ramp;
        }
    }
    unreachable!("mid lies inside a ramp")
}

/// `∫_0^1 |d0 + (d1 - d0) t| dt`.
fn abs_linear_integral(d0: f64, d1: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs())
    } else {
        0.5 * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}

/// `scale * min(x^{-exponent}, cap)` on `(0, 1)`, with `0 < exponent < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSpike {
    pub exponent: f64,
    pub cap: Option<f64>,
    pub scale: f64,
}

impl PowerSpike {
    pub fn new(exponent: f64, cap: Option<f64>) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::InvalidParameter("spike exponent must lie in (0,1)".into()));
        }
        if let Some(c) = cap {
            if !(c >= 1.0 && c.is_finite()) {
                return Err(Error::InvalidParameter("spike cap must be >= 1".into()));
            }
        }
        Ok(PowerSpike {
            exponent,
            cap,
            scale: 1.0,
        })
    }

    /// Rescaled to unit integral.
    pub fn normalized(self) -> Self {
        let m = self.unscaled_integral(self.cap);
        PowerSpike {
            scale: 1.0 / m,
            ..self
        }
    }

    fn unscaled_integral(&self, cap: Option<f64>) -> f64 {
        let a = self.exponent;
        match cap {
            None => 1.0 / (1.0 - a),
            Some(l) => {
                let xl = l.powf(-1.0 / a);
                l * xl + (1.0 - xl.powf(1.0 - a)) / (1.0 - a)
            }
        }
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let raw = if x <= 0.0 {
            f64::INFINITY
        } else {
            x.powf(-self.exponent)
        };
        self.scale * self.cap.map_or(raw, |c| raw.min(c))
    }

    pub fn integral(&self) -> f64 {
        self.scale * self.unscaled_integral(self.cap)
    }

    pub fn sup(&self) -> Option<f64> {
        self.cap.map(|c| c * self.scale)
    }

    /// Same spike truncated at `level` (never above the existing cap).
    pub fn truncated(&self, level: f64) -> Self {
        let cap = self.cap.map_or(level, |c| c.min(level));
        PowerSpike {
            cap: Some(cap),
            ..*self
        }
    }

    /// `∫ |self - other|` for two truncations of the same spike.
    pub fn l1_distance(&self, other: &PowerSpike) -> f64 {
        (self.integral() - other.integral()).abs()
    }

    /// Substituting `x = t^{1/(1-a)}` turns the singular part into a smooth integrand.
    pub fn fourier(&self, p: i64) -> Complex64 {
        if p == 0 {
            return Complex64::new(self.integral(), 0.0);
        }
        let a = self.exponent;
        let k = 2.0 * PI * p as f64;
        let xl = self.cap.map_or(0.0, |l| l.powf(-1.0 / a).min(1.0));
        let mut acc = Complex64::new(0.0, 0.0);
        if let Some(l) = self.cap {
            if xl > 0.0 {
                let ik = Complex64::new(0.0, k);
                acc += (Complex64::from_polar(1.0, k * xl) - 1.0) / ik * l;
            }
        }
        let gamma = 1.0 / (1.0 - a);
        let t0 = xl.powf(1.0 - a);
        let panels = 64 + 16 * p.unsigned_abs() as usize;
        acc += gauss_legendre(t0, 1.0, panels, |t| {
            Complex64::from_polar(gamma, k * t.powf(gamma))
        });
        acc * self.scale
    }
}

fn gauss_legendre<F: Fn(f64) -> Complex64>(a: f64, b: f64, panels: usize, f: F) -> Complex64 {
    const NODES: [f64; 4] = [
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        -0.861_136_311_594_052_6,
    ];
    const WEIGHTS: [f64; 4] = [
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * h;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            acc += f(mid + 0.5 * h * x) * (w * 0.5 * h);
        }
    }
    acc
}

/// A nonnegative density on the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityFunction {
    Piecewise(PiecewiseLinear),
    Spike(PowerSpike),
}

impl DensityFunction {
    pub fn constant(c: f64) -> Self {
        DensityFunction::Piecewise(PiecewiseLinear::constant(c).expect("valid constant"))
    }

    #[inline]
    pub fn eval(&self, x: TorusPoint) -> f64 {
        match self {
            DensityFunction::Piecewise(p) => p.eval(x),
            DensityFunction::Spike(s) => s.eval_f64(x.to_f64()),
        }
    }

    pub fn integral(&self) -> f64 {
        match self {
            DensityFunction::Piecewise(p) => p.integral(),
            DensityFunction::Spike(s) => s.integral(),
        }
    }

    pub fn sup(&self) -> Option<f64> {
        match self {
            DensityFunction::Piecewise(p) => Some(p.sup()),
            DensityFunction::Spike(s) => s.sup(),
        }
    }

    pub fn fourier(&self, p: i64) -> Complex64 {
        match self {
            DensityFunction::Piecewise(f) => f.fourier(p),
            DensityFunction::Spike(s) => s.fourier(p),
        }
    }

    pub fn scaled(&self, c: f64) -> DensityFunction {
        match self {
            DensityFunction::Piecewise(p) => DensityFunction::Piecewise(PiecewiseLinear {
                knots: p.knots.clone(),
                left: p.left.iter().map(|v| v * c).collect(),
                right: p.right.iter().map(|v| v * c).collect(),
            }),
            DensityFunction::Spike(s) => DensityFunction::Spike(PowerSpike {
                scale: s.scale * c,
                ..*s
            }),
        }
    }

    /// The `k`-th bounded approximant used by weight pasting: a trapezoid
    /// mollification with ramp `2^{-(k + k0)}` for piecewise densities, a
    /// truncation at level `L_0 2^k` for spikes.
    pub fn approximant(&self, k: usize) -> Result<DensityFunction> {
        match self {
            DensityFunction::Piecewise(p) => {
                let n = p.pieces();
                let min_piece = (0..n).map(|i| p.piece_len(i)).fold(f64::INFINITY, f64::min);
                // first level whose ramp fits well inside every piece
                let k0 = (-(min_piece / 2.0).log2()).ceil().max(1.0) as i32;
                let ramp = 2f64.powi(-(k as i32 + k0));
                Ok(DensityFunction::Piecewise(p.mollify(ramp)?))
            }
            DensityFunction::Spike(s) => {
                let level = 2f64.powi(k as i32 + 1);
                Ok(DensityFunction::Spike(s.truncated(level)))
            }
        }
    }

    /// `∫ |self - other|` when both are of the same kind.
    pub fn l1_distance(&self, other: &DensityFunction) -> Result<f64> {
        match (self, other) {
            (DensityFunction::Piecewise(a), DensityFunction::Piecewise(b)) => Ok(a.l1_distance(b)),
            (DensityFunction::Spike(a), DensityFunction::Spike(b))
                if a.exponent == b.exponent && a.scale == b.scale =>
            {
                Ok(a.l1_distance(b))
            }
            _ => Err(Error::InvalidParameter(
                "L1 distance needs two densities of the same family".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn midpoint_quadrature(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
    }

    fn indicator_half() -> PiecewiseLinear {
        PiecewiseLinear::indicator(&TorusRegion::interval(0.0, 0.5).unwrap(), 2.0).unwrap()
    }

    #[test]
    fn indicator_density_coefficients() {
        let rho = indicator_half();
        assert_eq!(rho.integral(), 1.0);
        let c = rho.fourier(1);
        assert!((c - Complex64::new(0.0, 2.0 / PI)).norm() < 1e-15);
        assert!(rho.fourier(2).norm() < 1e-15);
        assert_eq!(rho.eval(TorusPoint::ZERO), 2.0);
        assert_eq!(rho.eval(TorusPoint::HALF), 0.0);
    }

    #[test]
    fn tent_coefficients_match_quadrature() {
        let tent = PiecewiseLinear::tent(2.0).unwrap();
        assert!((tent.integral() - 1.0).abs() < 1e-15);
        for p in -4i64..=4 {
            let exact = tent.fourier(p);
            let re = midpoint_quadrature(
                |x| tent.eval(TorusPoint::from_f64(x)) * (2.0 * PI * p as f64 * x).cos(),
                200_000,
            );
            let im = midpoint_quadrature(
                |x| tent.eval(TorusPoint::from_f64(x)) * (2.0 * PI * p as f64 * x).sin(),
                200_000,
            );
            assert!((exact.re - re).abs() < 1e-8 && (exact.im - im).abs() < 1e-8, "p={p}");
        }
        // closed form for odd p: -4 / (pi p)^2 * (-1)^... ; p = 1 gives -4/pi^2
        assert!((tent.fourier(1).re + 4.0 / (PI * PI)).abs() < 1e-14);
    }

    #[test]
    fn mollified_indicator_l1_error() {
        let rho = indicator_half();
        for k in 2..10 {
            let ramp = 2f64.powi(-k);
            let m = rho.mollify(ramp).unwrap();
            // two jumps of height 2, each ramp costs h * ramp / 4
            let expected = 2.0 * 2.0 * ramp / 4.0;
            assert!((rho.l1_distance(&m) - expected).abs() < 1e-12, "k={k}");
            assert!((m.integral() - 1.0).abs() < 1e-12);
            assert!(m.sup() <= 2.0);
            let q = midpoint_quadrature(
                |x| (m.eval(TorusPoint::from_f64(x)) - rho.eval(TorusPoint::from_f64(x))).abs(),
                1 << 20,
            );
            assert!((q - expected).abs() < 1e-5);
        }
        let a = rho.mollify(0.25).unwrap();
        let b = rho.mollify(0.125).unwrap();
        assert!((a.l1_distance(&b) - (0.25 - 0.125)).abs() < 1e-12);
    }

    #[test]
    fn mollify_rejects_wide_ramps() {
        assert!(indicator_half().mollify(0.75).is_err());
        let c = PiecewiseLinear::constant(1.0).unwrap();
        assert_eq!(c.mollify(0.9).unwrap(), c);
    }

    #[test]
    fn spike_integrals_and_truncation() {
        let s = PowerSpike::new(0.5, Some(40.0)).unwrap();
        // ∫ min(x^{-1/2}, 40) = 40/1600 + 2(1 - 1/40)
        let exact = 40.0 / 1600.0 + 2.0 * (1.0 - 1.0 / 40.0);
        assert!((s.integral() - exact).abs() < 1e-13);
        let n = s.normalized();
        assert!((n.integral() - 1.0).abs() < 1e-13);
        let t = n.truncated(4.0 * n.scale);
        assert!(t.sup().unwrap() <= 4.0 * n.scale + 1e-12);
        let q = midpoint_quadrature(|x| n.eval_f64(x) - t.eval_f64(x), 1 << 22);
        assert!((n.l1_distance(&t) - q).abs() < 1e-6);
    }

    #[test]
    fn spike_fourier_matches_quadrature() {
        let s = PowerSpike::new(0.5, Some(40.0)).unwrap();
        for p in [1i64, 2, 5] {
            let c = s.fourier(p);
            let n = 1 << 22;
            let re = midpoint_quadrature(|x| s.eval_f64(x) * (2.0 * PI * p as f64 * x).cos(), n);
            let im = midpoint_quadrature(|x| s.eval_f64(x) * (2.0 * PI * p as f64 * x).sin(), n);
            assert!((c.re - re).abs() < 1e-5 && (c.im - im).abs() < 1e-5, "p={p}");
        }
        let free = PowerSpike::new(0.5, None).unwrap();
        assert!((free.integral() - 2.0).abs() < 1e-15);
        // ∫ x^{-1/2} e(x) dx via Fresnel-type integral, checked against capped limit
        let capped = PowerSpike::new(0.5, Some(1e6)).unwrap();
        assert!((free.fourier(1) - capped.fourier(1)).norm() < 1e-5);
    }

    #[test]
    fn approximants_converge() {
        let rho = DensityFunction::Piecewise(indicator_half());
        let dists: Vec<f64> = (0..6)
            .map(|k| rho.l1_distance(&rho.approximant(k).unwrap()).unwrap())
            .collect();
        assert!(dists.windows(2).all(|w| (w[1] - w[0] / 2.0).abs() < 1e-12));
        let spike = DensityFunction::Spike(PowerSpike::new(0.5, None).unwrap());
        let d: Vec<f64> = (0..6)
            .map(|k| spike.l1_distance(&spike.approximant(k).unwrap()).unwrap())
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
    }
}
