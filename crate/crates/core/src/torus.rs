//! Exact fixed-point arithmetic on the circle group `R/Z`.
//!
//! A [`TorusPoint`] stores a point of `[0, 1)` as a numerator over `2^64`.
//! Addition and integer multiples are plain wrapping `u64` operations, so
//! orbit points `n * alpha mod 1` are exact and bit-reproducible for every
//! `n` that fits in 64 bits. Only character evaluation touches floating
//! point, and it does so after the angle has been reduced exactly.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// A point of the torus `[0, 1)`, stored as `frac / 2^64`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct TorusPoint {
    frac: u64,
}

impl TorusPoint {
    pub const ZERO: TorusPoint = TorusPoint { frac: 0 };
    pub const HALF: TorusPoint = TorusPoint { frac: 1 << 63 };

    /// `(sqrt(5) - 1) / 2` snapped to the nearest multiple of `2^-64`.
    pub const GOLDEN: TorusPoint = TorusPoint {
        frac: 0x9e37_79b9_7f4a_7c16,
    };
    /// Fractional part of `sqrt(2)`.
    pub const SQRT2: TorusPoint = TorusPoint {
        frac: 0x6a09_e667_f3bc_c909,
    };
    /// Fractional part of Euler's number.
    pub const E: TorusPoint = TorusPoint {
        frac: 0xb7e1_5162_8aed_2a6b,
    };

    pub const fn from_frac(frac: u64) -> Self {
        TorusPoint { frac }
    }

    pub const fn frac(self) -> u64 {
        self.frac
    }

    /// Snaps the fractional part of `x` to the nearest multiple of `2^-64`.
    ///
    /// Non-finite inputs map to zero.
    pub fn from_f64(x: f64) -> Self {
        if !x.is_finite() {
            return TorusPoint::ZERO;
        }
        // x - floor(x) is exact in binary floating point
        let fract = x - x.floor();
        let scaled = (fract * TWO_POW_64).round();
        if scaled >= TWO_POW_64 {
            TorusPoint::ZERO
        } else {
            TorusPoint {
                frac: scaled as u64,
            }
        }
    }

    /// Exact rational point `num / den mod 1`, rounded to the nearest grid point.
    pub fn from_ratio(num: i64, den: u64) -> Self {
        assert!(den > 0, "denominator must be positive");
        let r = num.rem_euclid(den as i64) as u128;
        let den = den as u128;
        let scaled = ((r << 64) + den / 2) / den;
        TorusPoint {
            frac: scaled as u64,
        }
    }

    /// Value in `[0, 1)`.
    pub fn to_f64(self) -> f64 {
        let v = self.frac as f64 / TWO_POW_64;
        // rounding of frac near 2^64 can land on 1.0
        if v >= 1.0 {
            1.0 - f64::EPSILON / 2.0
        } else {
            v
        }
    }

    /// Signed representative in `[-1/2, 1/2)`.
    pub fn to_signed_f64(self) -> f64 {
        (self.frac as i64) as f64 / TWO_POW_64
    }

    /// `n * self mod 1` for a signed multiplier.
    pub fn mul_int(self, n: i64) -> Self {
        TorusPoint {
            frac: self.frac.wrapping_mul(n as u64),
        }
    }

    /// Length of the shorter arc between two points, in units of `2^-64`.
    pub fn distance_units(self, other: TorusPoint) -> u64 {
        let d = self.frac.wrapping_sub(other.frac);
        d.min(d.wrapping_neg())
    }

    pub fn distance(self, other: TorusPoint) -> f64 {
        self.distance_units(other) as f64 / TWO_POW_64
    }
}

impl fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TorusPoint({:#018x} ~ {})", self.frac, self.to_f64())
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#018x}", self.frac)
    }
}

impl Add for TorusPoint {
    type Output = TorusPoint;
    fn add(self, rhs: TorusPoint) -> TorusPoint {
        TorusPoint {
            frac: self.frac.wrapping_add(rhs.frac),
        }
    }
}

impl Sub for TorusPoint {
    type Output = TorusPoint;
    fn sub(self, rhs: TorusPoint) -> TorusPoint {
        TorusPoint {
            frac: self.frac.wrapping_sub(rhs.frac),
        }
    }
}

impl Neg for TorusPoint {
    type Output = TorusPoint;
    fn neg(self) -> TorusPoint {
        TorusPoint {
            frac: self.frac.wrapping_neg(),
        }
    }
}

/// Snaps a real number onto the torus grid.
pub fn to_torus(x: f64) -> TorusPoint {
    TorusPoint::from_f64(x)
}

/// `n * alpha mod 1`, computed with exact wrapping multiplication.
pub fn orbit_point(n: u64, alpha: TorusPoint) -> TorusPoint {
    TorusPoint {
        frac: alpha.frac.wrapping_mul(n),
    }
}

/// A complex number on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitComplex(pub Complex64);

impl UnitComplex {
    pub const ONE: UnitComplex = UnitComplex(Complex64::new(1.0, 0.0));

    pub fn re(self) -> f64 {
        self.0.re
    }

    pub fn im(self) -> f64 {
        self.0.im
    }

    pub fn into_complex(self) -> Complex64 {
        self.0
    }
}

/// `e(theta) = exp(2 pi i theta)`.
///
/// The angle is split into a quadrant (top two bits) and an offset inside
/// the quadrant, so quarter turns are reproduced exactly and the trig
/// functions only ever see arguments in `[0, pi/2)`.
#[inline]
pub fn e(theta: TorusPoint) -> UnitComplex {
    let frac = theta.frac;
    let quadrant = frac >> 62;
    let offset = frac & ((1u64 << 62) - 1);
    let t = offset as f64 * (FRAC_PI_2 / (1u64 << 62) as f64);
    let (s, c) = t.sin_cos();
    let z = match quadrant {
        0 => Complex64::new(c, s),
        1 => Complex64::new(-s, c),
        2 => Complex64::new(-c, -s),
        _ => Complex64::new(s, -c),
    };
    UnitComplex(z)
}

/// The character `e_p(theta) = e(p * theta)`, angle reduced exactly.
#[inline]
pub fn character(p: i64, theta: TorusPoint) -> UnitComplex {
    e(theta.mul_int(p))
}
