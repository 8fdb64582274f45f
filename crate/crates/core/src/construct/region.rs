//! Finite unions of half-open arcs on the torus, with exact endpoints.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{character, TorusPoint};

const ONE: u128 = 1 << 64;
const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// `[start, end)` with `0 <= start < end <= 2^64` in units of `2^-64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Arc64 {
    pub start: u64,
    pub end: u128,
}

impl Arc64 {
    pub fn len_units(&self) -> u128 {
        self.end - self.start as u128
    }

    #[inline]
    pub fn contains(&self, x: TorusPoint) -> bool {
        let x = x.frac();
        x >= self.start && (x as u128) < self.end
    }
}

/// A finite union of pairwise disjoint half-open arcs `[a_i, b_i)`.
///
/// Arcs are kept sorted and touching arcs are merged, so two regions that
/// cover the same points compare equal.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusRegion {
    arcs: Vec<Arc64>,
}

impl fmt::Debug for TorusRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TorusRegion[")?;
        for (i, a) in self.arcs.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∪ ")?;
            }
            write!(
                f,
                "[{:.6}, {:.6})",
                a.start as f64 / TWO_POW_64,
                a.end as f64 / TWO_POW_64
            )?;
        }
        f.write_str("]")
    }
}

/// Snaps an endpoint in `[0, 1]` to the grid, keeping `1` as `2^64`.
fn snap_endpoint(x: f64) -> Result<u128> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "arc endpoint {x} outside [0, 1]"
        )));
    }
    if x == 1.0 {
        Ok(ONE)
    } else {
        Ok(TorusPoint::from_f64(x).frac() as u128)
    }
}

impl TorusRegion {
    pub fn empty() -> Self {
        TorusRegion { arcs: Vec::new() }
    }

    pub fn full() -> Self {
        TorusRegion {
            arcs: vec![Arc64 { start: 0, end: ONE }],
        }
    }

    fn normalized(mut arcs: Vec<Arc64>) -> Self {
        arcs.retain(|a| a.end > a.start as u128);
        arcs.sort();
        let mut out: Vec<Arc64> = Vec::with_capacity(arcs.len());
        for a in arcs {
            match out.last_mut() {
                Some(last) if a.start as u128 <= last.end => {
                    last.end = last.end.max(a.end);
                }
                _ => out.push(a),
            }
        }
        TorusRegion { arcs: out }
    }

    /// Arc from `start` going counter-clockwise for `len` units (`len <= 2^64`).
    pub fn arc_units(start: TorusPoint, len: u128) -> Self {
        let len = len.min(ONE);
        let s = start.frac() as u128;
        if s + len <= ONE {
            TorusRegion::normalized(vec![Arc64 {
                start: start.frac(),
                end: s + len,
            }])
        } else {
            TorusRegion::normalized(vec![
                Arc64 {
                    start: start.frac(),
                    end: ONE,
                },
                Arc64 {
                    start: 0,
                    end: s + len - ONE,
                },
            ])
        }
    }

    /// `[a, b)` for `0 <= a <= b <= 1`; `a > b` wraps through zero.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let (sa, sb) = (snap_endpoint(a)?, snap_endpoint(b)?);
        if sa <= sb {
            Ok(TorusRegion::normalized(vec![Arc64 {
                start: (sa % ONE) as u64,
                end: sb,
            }]))
        } else {
            Ok(TorusRegion::normalized(vec![
                Arc64 {
                    start: sa as u64,
                    end: ONE,
                },
                Arc64 { start: 0, end: sb },
            ]))
        }
    }

    /// A region from pairwise disjoint intervals; overlapping input is rejected.
    pub fn from_intervals(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut region = TorusRegion::empty();
        for &(a, b) in pairs {
            let next = TorusRegion::interval(a, b)?;
            if !region.intersection(&next).is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "interval [{a}, {b}) overlaps an earlier one"
                )));
            }
            region = region.union(&next);
        }
        Ok(region)
    }

    /// Open arc `(center - radius, center + radius)` stored as a half-open arc
    /// starting one unit past the left endpoint.
    pub fn open_ball(center: TorusPoint, radius_units: u64) -> Self {
        if radius_units == 0 {
            return TorusRegion::empty();
        }
        let start = TorusPoint::from_frac(center.frac().wrapping_sub(radius_units).wrapping_add(1));
        TorusRegion::arc_units(start, 2 * radius_units as u128 - 1)
    }

    /// Union of many open balls `(center, radius_units)`, built in one pass.
    pub fn from_balls<I>(balls: I) -> Self
    where
        I: IntoIterator<Item = (TorusPoint, u64)>,
    {
        let mut arcs = Vec::new();
        for (center, r) in balls {
            if r == 0 {
                continue;
            }
            let start = center.frac().wrapping_sub(r).wrapping_add(1);
            let end = start as u128 + (2 * r as u128 - 1).min(ONE);
            if end <= ONE {
                arcs.push(Arc64 { start, end });
            } else {
                arcs.push(Arc64 { start, end: ONE });
                arcs.push(Arc64 { start: 0, end: end - ONE });
            }
        }
        TorusRegion::normalized(arcs)
    }

    pub fn arcs(&self) -> &[Arc64] {
        &self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.arcs.len() == 1 && self.arcs[0].start == 0 && self.arcs[0].end == ONE
    }

    pub fn measure_units(&self) -> u128 {
        self.arcs.iter().map(Arc64::len_units).sum()
    }

    pub fn measure(&self) -> f64 {
        self.measure_units() as f64 / TWO_POW_64
    }

    /// Exact membership by binary search over the sorted arcs.
    #[inline]
    pub fn contains(&self, x: TorusPoint) -> bool {
        let f = x.frac();
        let idx = self.arcs.partition_point(|a| a.start <= f);
        idx > 0 && (f as u128) < self.arcs[idx - 1].end
    }

    /// Membership in the closure: the endpoints `b_i` count as inside.
    pub fn closure_contains(&self, x: TorusPoint) -> bool {
        let f = x.frac() as u128;
        let idx = self.arcs.partition_point(|a| (a.start as u128) <= f);
        if idx > 0 && f <= self.arcs[idx - 1].end {
            return true;
        }
        // the point 0 is the endpoint 2^64 of an arc ending at one
        f == 0 && self.arcs.last().is_some_and(|a| a.end == ONE)
    }

    /// Distance in units from `x` to the closure; zero inside.
    pub fn distance_units(&self, x: TorusPoint) -> u128 {
        if self.arcs.is_empty() {
            return ONE;
        }
        if self.closure_contains(x) {
            return 0;
        }
        let f = x.frac() as u128;
        let idx = self.arcs.partition_point(|a| (a.start as u128) <= f);
        let n = self.arcs.len();
        // nearest arc to the left (wrapping) and to the right (wrapping)
        let left = &self.arcs[(idx + n - 1) % n];
        let right = &self.arcs[idx % n];
        let d_left = (f + ONE - left.end) % ONE;
        let d_right = (right.start as u128 + ONE - f) % ONE;
        d_left.min(d_right)
    }

    pub fn union(&self, other: &TorusRegion) -> TorusRegion {
        let mut arcs = self.arcs.clone();
        arcs.extend_from_slice(&other.arcs);
        TorusRegion::normalized(arcs)
    }

    pub fn complement(&self) -> TorusRegion {
        let mut out = Vec::new();
        let mut cursor: u128 = 0;
        for a in &self.arcs {
            if (a.start as u128) > cursor {
                out.push(Arc64 {
                    start: cursor as u64,
                    end: a.start as u128,
                });
            }
            cursor = a.end;
        }
        if cursor < ONE {
            out.push(Arc64 {
                start: cursor as u64,
                end: ONE,
            });
        }
        TorusRegion { arcs: out }
    }

    pub fn intersection(&self, other: &TorusRegion) -> TorusRegion {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.arcs.len() && j < other.arcs.len() {
            let (a, b) = (self.arcs[i], other.arcs[j]);
            let start = a.start.max(b.start);
            let end = a.end.min(b.end);
            if (start as u128) < end {
                out.push(Arc64 { start, end });
            }
            if a.end < b.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        TorusRegion::normalized(out)
    }

    pub fn difference(&self, other: &TorusRegion) -> TorusRegion {
        self.intersection(&other.complement())
    }

    pub fn symmetric_difference(&self, other: &TorusRegion) -> TorusRegion {
        self.difference(other).union(&other.difference(self))
    }

    /// `∫_B e(p x) dx`, exact up to the trig evaluation at the endpoints.
    pub fn fourier(&self, p: i64) -> Complex64 {
        if p == 0 {
            return Complex64::new(self.measure(), 0.0);
        }
        let denom = Complex64::new(0.0, 2.0 * std::f64::consts::PI * p as f64);
        self.arcs
            .iter()
            .map(|a| {
                let hi = character(p, TorusPoint::from_frac(a.end as u64)).0;
                let lo = character(p, TorusPoint::from_frac(a.start)).0;
                (hi - lo) / denom
            })
            .sum()
    }

    /// Parses `a,b` lines. Endpoints are decimals in `[0, 1]` or `0x` hex numerators over `2^64`.
    pub fn parse_csv(text: &str) -> Result<TorusRegion> {
        let pairs = parse_interval_lines(text)?;
        let mut region = TorusRegion::empty();
        for (line, (a, b)) in pairs {
            let next = if a <= b {
                TorusRegion::normalized(vec![Arc64 {
                    start: (a % ONE) as u64,
                    end: b,
                }])
            } else {
                TorusRegion::normalized(vec![
                    Arc64 {
                        start: a as u64,
                        end: ONE,
                    },
                    Arc64 { start: 0, end: b },
                ])
            };
            if !region.intersection(&next).is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "interval overlaps an earlier one".into(),
                });
            }
            region = region.union(&next);
        }
        Ok(region)
    }
}

fn parse_endpoint(s: &str, line: usize) -> Result<u128> {
    let s = s.trim();
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        let v = u128::from_str_radix(hex, 16).map_err(|e| Error::Parse {
            line,
            message: format!("{s:?}: {e}"),
        })?;
        if v > ONE {
            return Err(Error::Parse {
                line,
                message: format!("{s} exceeds 2^64"),
            });
        }
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|e| Error::Parse {
        line,
        message: format!("{s:?}: {e}"),
    })?;
    snap_endpoint(v).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })
}

fn parse_interval_lines(text: &str) -> Result<Vec<(usize, (u128, u128))>> {
    let mut out = Vec::new();
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                line: i + 1,
                message: "expected `a,b`".into(),
            });
        };
        let header = first && a.trim().starts_with(|c: char| c.is_ascii_alphabetic()) && !a.trim().starts_with("0x");
        first = false;
        if header {
            continue;
        }
        out.push((i + 1, (parse_endpoint(a, i + 1)?, parse_endpoint(b, i + 1)?)));
    }
    Ok(out)
}

type PieceFn = Arc<dyn Fn(usize) -> Option<TorusRegion> + Send + Sync>;
type TailFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// A sequence of pairwise disjoint pieces `I_1, I_2, ...` whose union is an open set `B`.
#[derive(Clone)]
pub struct IntervalStream {
    descriptor: String,
    piece: PieceFn,
    tail: TailFn,
}

impl fmt::Debug for IntervalStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntervalStream")
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl IntervalStream {
    /// `piece(k)` is the `k`-th piece (0-based) and `tail(k)` bounds the measure
    /// of all pieces after the first `k`.
    pub fn new<P, T>(descriptor: impl Into<String>, piece: P, tail: T) -> Self
    where
        P: Fn(usize) -> Option<TorusRegion> + Send + Sync + 'static,
        T: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        IntervalStream {
            descriptor: descriptor.into(),
            piece: Arc::new(piece),
            tail: Arc::new(tail),
        }
    }

    /// A finite stream; pieces must be pairwise disjoint.
    pub fn finite(descriptor: impl Into<String>, pieces: Vec<TorusRegion>) -> Result<Self> {
        let mut acc = TorusRegion::empty();
        for p in &pieces {
            if !acc.intersection(p).is_empty() {
                return Err(Error::InvalidParameter(
                    "stream pieces must be pairwise disjoint".into(),
                ));
            }
            acc = acc.union(p);
        }
        let pieces = Arc::new(pieces);
        let measures: Vec<f64> = pieces.iter().map(TorusRegion::measure).collect();
        let p2 = Arc::clone(&pieces);
        Ok(IntervalStream::new(
            descriptor,
            move |k| p2.get(k).cloned(),
            move |k| measures.iter().skip(k).sum(),
        ))
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let pairs = parse_interval_lines(text)?;
        let mut pieces = Vec::with_capacity(pairs.len());
        for (_, (a, b)) in pairs {
            let region = if a <= b {
                TorusRegion::normalized(vec![Arc64 {
                    start: (a % ONE) as u64,
                    end: b,
                }])
            } else {
                TorusRegion::normalized(vec![
                    Arc64 {
                        start: a as u64,
                        end: ONE,
                    },
                    Arc64 { start: 0, end: b },
                ])
            };
            pieces.push(region);
        }
        IntervalStream::finite("csv", pieces)
    }

    /// Neighbourhoods `(q_k - 4^{-k-2}, q_k + 4^{-k-2})` of the rationals in
    /// `(0, 1)` enumerated by denominator; each piece is the part of the
    /// neighbourhood not already covered, so pieces stay disjoint.
    pub fn rational_neighborhoods() -> Self {
        let centers = Arc::new(std::sync::Mutex::new(RationalCache::default()));
        let c2 = Arc::clone(&centers);
        IntervalStream::new(
            "rational_neighborhoods",
            move |k| Some(c2.lock().expect("cache lock").piece(k)),
            |k| {
                // sum over l >= k of 2 * 4^{-l-2}
                2.0 * 4f64.powi(-(k as i32) - 2) * 4.0 / 3.0
            },
        )
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn piece(&self, k: usize) -> Option<TorusRegion> {
        (self.piece)(k)
    }

    pub fn tail_bound(&self, k: usize) -> f64 {
        (self.tail)(k)
    }

    /// Union of the first `k` pieces.
    pub fn partial_union(&self, k: usize) -> TorusRegion {
        (0..k)
            .map_while(|i| self.piece(i))
            .fold(TorusRegion::empty(), |acc, p| acc.union(&p))
    }
}

#[derive(Default)]
struct RationalCache {
    covered: Vec<TorusRegion>,
}

impl RationalCache {
    fn center(k: usize) -> (i64, u64) {
        // enumerate reduced fractions a/q in (0,1) by q then a
        let mut idx = 0;
        let mut q = 2u64;
        loop {
            for a in 1..q {
                if num_gcd(a, q) == 1 {
                    if idx == k {
                        return (a as i64, q);
                    }
                    idx += 1;
                }
            }
            q += 1;
        }
    }

    fn piece(&mut self, k: usize) -> TorusRegion {
        while self.covered.len() <= k {
            let i = self.covered.len();
            let (a, q) = Self::center(i);
            let radius = 0.25f64.powi(i as i32 + 2);
            let radius_units = (radius * TWO_POW_64).round() as u64;
            let ball = TorusRegion::open_ball(TorusPoint::from_ratio(a, q), radius_units);
            let prev = self.covered.last().cloned().unwrap_or_default();
            self.covered.push(prev.union(&ball));
        }
        let prev = if k == 0 {
            TorusRegion::empty()
        } else {
            self.covered[k - 1].clone()
        };
        self.covered[k].difference(&prev)
    }
}

fn num_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
