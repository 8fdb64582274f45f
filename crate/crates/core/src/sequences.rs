//! Base index sets: lazy, strictly increasing generators of positive integers.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use bitvec::vec::BitVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest element any generator will emit.
pub const ELEMENT_BOUND: u64 = 1 << 63;

pub type ElemIter = Box<dyn Iterator<Item = u64> + Send>;

/// Given an inclusive limit, yields exactly the elements not above it.
type Factory = Arc<dyn Fn(u64) -> ElemIter + Send + Sync>;
type Unbounded = Arc<dyn Fn() -> ElemIter + Send + Sync>;

/// The built-in families of base sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseKind {
    Naturals,
    KthPowers { k: u32 },
    Primes,
    /// `floor(n^2 ln n)` for `n >= 2`.
    N2LogN,
    /// `{n >= 1 : n = offset mod q}`; an offset of `0` is read as `q`.
    Progression { q: u64, offset: u64 },
    Explicit { elements: Vec<u64> },
}

impl fmt::Display for BaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseKind::Naturals => write!(f, "naturals"),
            BaseKind::KthPowers { k } => write!(f, "kth_powers({k})"),
            BaseKind::Primes => write!(f, "primes"),
            BaseKind::N2LogN => write!(f, "n2logn"),
            BaseKind::Progression { q, offset } => write!(f, "progression({q},{offset})"),
            BaseKind::Explicit { elements } => write!(f, "explicit(len={})", elements.len()),
        }
    }
}

/// A strictly increasing set of positive integers, produced lazily.
///
/// Cloning is cheap; every call to [`IndexSet::iter`] restarts the
/// generator from the beginning, so two scans always agree.
#[derive(Clone)]
pub struct IndexSet {
    descriptor: String,
    factory: Factory,
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndexSet")
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl IndexSet {
    /// Builds one of the base sets.
    pub fn base(kind: BaseKind) -> Result<IndexSet> {
        let descriptor = kind.to_string();
        let unbounded: Unbounded = match kind {
            BaseKind::Naturals => Arc::new(|| Box::new(1..ELEMENT_BOUND)),
            BaseKind::KthPowers { k } => {
                if k == 0 {
                    return Err(Error::InvalidParameter("k must be at least 1".into()));
                }
                Arc::new(move || {
                    Box::new(
                        (1u64..)
                            .map(move |n| n.checked_pow(k).unwrap_or(u64::MAX))
                            .take_while(|&v| v < ELEMENT_BOUND),
                    )
                })
            }
            BaseKind::Primes => Arc::new(|| Box::new(primal::Primes::all().map(|p| p as u64))),
            BaseKind::N2LogN => Arc::new(|| {
                Box::new(
                    (2u64..)
                        .map(|n| {
                            let x = n as f64;
                            (x * x * x.ln()).floor() as u64
                        })
                        .take_while(|&v| v < ELEMENT_BOUND),
                )
            }),
            BaseKind::Progression { q, offset } => {
                if q == 0 {
                    return Err(Error::InvalidParameter("q must be at least 1".into()));
                }
                if offset > q {
                    return Err(Error::InvalidParameter(format!(
                        "offset {offset} must lie in 0..=q (q = {q})"
                    )));
                }
                let first = if offset == 0 { q } else { offset };
                Arc::new(move || {
                    Box::new(
                        (0u64..)
                            .map(move |k| first + k * q)
                            .take_while(|&v| v < ELEMENT_BOUND),
                    )
                })
            }
            BaseKind::Explicit { elements } => {
                validate_increasing(&elements)?;
                let elements: Arc<Vec<u64>> = Arc::new(elements);
                Arc::new(move || {
                    let e = Arc::clone(&elements);
                    Box::new((0..e.len()).map(move |i| e[i]))
                })
            }
        };
        Ok(IndexSet {
            descriptor,
            factory: bounded(unbounded),
        })
    }

    pub fn naturals() -> IndexSet {
        IndexSet::base(BaseKind::Naturals).expect("naturals are always valid")
    }

    /// Wraps an arbitrary generator. The caller guarantees strict monotonicity.
    pub fn from_generator<F>(descriptor: impl Into<String>, factory: F) -> IndexSet
    where
        F: Fn() -> ElemIter + Send + Sync + 'static,
    {
        IndexSet {
            descriptor: descriptor.into(),
            factory: bounded(Arc::new(factory)),
        }
    }

    /// Wraps a generator that receives the largest element of interest and
    /// must stop once it is passed. Lets sparse derived sets terminate scans.
    pub fn from_bounded_generator<F>(descriptor: impl Into<String>, factory: F) -> IndexSet
    where
        F: Fn(u64) -> ElemIter + Send + Sync + 'static,
    {
        IndexSet {
            descriptor: descriptor.into(),
            factory: Arc::new(factory),
        }
    }

    /// A finite set given by its sorted elements.
    pub fn from_sorted(descriptor: impl Into<String>, elements: Vec<u64>) -> Result<IndexSet> {
        validate_increasing(&elements)?;
        let elements = Arc::new(elements);
        Ok(IndexSet::from_generator(descriptor, move || {
            let e = Arc::clone(&elements);
            Box::new((0..e.len()).map(move |i| e[i]))
        }))
    }

    /// Reads newline-delimited decimal integers. Blank lines and `#` comments are skipped.
    pub fn read_explicit(path: impl AsRef<Path>) -> Result<IndexSet> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let elements = parse_explicit(&text)?;
        IndexSet::base(BaseKind::Explicit { elements })
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn with_descriptor(mut self, descriptor: impl Into<String>) -> IndexSet {
        self.descriptor = descriptor.into();
        self
    }

    pub fn iter(&self) -> ElemIter {
        (self.factory)(u64::MAX)
    }

    /// Elements `<= horizon`, i.e. the initial segment `S(N)`.
    pub fn upto(&self, horizon: u64) -> ElemIter {
        (self.factory)(horizon)
    }

    pub fn prefix(&self, horizon: u64) -> Vec<u64> {
        self.upto(horizon).collect()
    }

    /// Counting function `#S(N)`.
    pub fn count(&self, horizon: u64) -> u64 {
        self.upto(horizon).count() as u64
    }

    /// Counting function evaluated at each of the increasing `checkpoints` in one pass.
    pub fn counts_at(&self, checkpoints: &[u64]) -> Vec<u64> {
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut it = self.upto(checkpoints.last().copied().unwrap_or(0)).peekable();
        let mut count = 0u64;
        for &n in checkpoints {
            while let Some(&r) = it.peek() {
                if r > n {
                    break;
                }
                count += 1;
                it.next();
            }
            out.push(count);
        }
        out
    }

    /// Indicator of the prefix as a bitset, bit `r` set iff `r` is in the set.
    pub fn bitset(&self, horizon: u64) -> BitVec {
        let mut bits = BitVec::repeat(false, horizon as usize + 1);
        for r in self.upto(horizon) {
            bits.set(r as usize, true);
        }
        bits
    }

    /// Lazy subset keeping the elements for which `keep` holds.
    pub fn filter<P>(&self, descriptor: impl Into<String>, keep: P) -> IndexSet
    where
        P: Fn(u64) -> bool + Send + Sync + Clone + 'static,
    {
        let parent = self.clone();
        IndexSet::from_bounded_generator(descriptor, move |limit| {
            let keep = keep.clone();
            Box::new(parent.upto(limit).filter(move |&r| keep(r)))
        })
    }

    /// Lazy subset selected by position: keeps `r_n` when `keep(n, r_n)`, `n` starting at 1.
    pub fn filter_indexed<P>(&self, descriptor: impl Into<String>, keep: P) -> IndexSet
    where
        P: Fn(usize, u64) -> bool + Send + Sync + Clone + 'static,
    {
        let parent = self.clone();
        IndexSet::from_bounded_generator(descriptor, move |limit| {
            let keep = keep.clone();
            Box::new(
                parent
                    .upto(limit)
                    .enumerate()
                    .filter(move |&(i, r)| keep(i + 1, r))
                    .map(|(_, r)| r),
            )
        })
    }
}

fn bounded(unbounded: Unbounded) -> Factory {
    Arc::new(move |limit| Box::new(unbounded().take_while(move |&r| r <= limit)))
}

pub fn make_base(kind: BaseKind) -> Result<IndexSet> {
    IndexSet::base(kind)
}

fn validate_increasing(elements: &[u64]) -> Result<()> {
    let mut prev = 0u64;
    for (i, &v) in elements.iter().enumerate() {
        if v <= prev || v >= ELEMENT_BOUND {
            return Err(Error::NotIncreasing {
                position: i + 1,
                value: v,
            });
        }
        prev = v;
    }
    Ok(())
}

pub fn parse_explicit(text: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line.parse::<u64>().map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("{line:?}: {e}"),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// `log N / #R(N)` at a list of checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub checkpoints: Vec<u64>,
    pub counts: Vec<u64>,
    /// Infinite where the prefix is empty.
    pub ratios: Vec<f64>,
}

impl GrowthReport {
    /// True when the ratios decrease over the last `window` checkpoints, the
    /// finite-scale symptom of a sublacunary set.
    pub fn is_decreasing_tail(&self, window: usize) -> bool {
        let n = self.ratios.len();
        let start = n.saturating_sub(window);
        self.ratios[start..].windows(2).all(|w| w[1] < w[0])
    }
}

pub fn sublacunarity_report(set: &IndexSet, checkpoints: &[u64]) -> Result<GrowthReport> {
    check_increasing_checkpoints(checkpoints)?;
    let counts = set.counts_at(checkpoints);
    let ratios = checkpoints
        .iter()
        .zip(&counts)
        .map(|(&n, &c)| {
            if c == 0 {
                f64::INFINITY
            } else {
                (n as f64).ln() / c as f64
            }
        })
        .collect();
    Ok(GrowthReport {
        checkpoints: checkpoints.to_vec(),
        counts,
        ratios,
    })
}

pub(crate) fn check_increasing_checkpoints(checkpoints: &[u64]) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidParameter("no checkpoints given".into()));
    }
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) || checkpoints[0] == 0 {
        return Err(Error::InvalidParameter(
            "checkpoints must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Partial relative densities `#(S ∩ R(N)) / #R(N)` for `S ⊂ R`.
pub fn relative_mean_trace(
    subset: &IndexSet,
    base: &IndexSet,
    checkpoints: &[u64],
) -> Result<Vec<f64>> {
    check_increasing_checkpoints(checkpoints)?;
    let horizon = *checkpoints.last().unwrap();
    let mut sub = subset.upto(horizon).peekable();
    let mut out = Vec::with_capacity(checkpoints.len());
    let (mut base_count, mut sub_count) = (0u64, 0u64);
    let mut cp = checkpoints.iter().peekable();
    let mut base_iter = base.upto(horizon).peekable();

    while let Some(&&n) = cp.peek() {
        match base_iter.peek().copied() {
            Some(r) if r <= n => {
                base_iter.next();
                base_count += 1;
                if let Some(&s) = sub.peek() {
                    if s < r {
                        return Err(Error::NotSubset { element: s });
                    }
                    if s == r {
                        sub_count += 1;
                        sub.next();
                    }
                }
            }
            _ => {
                if let Some(&s) = sub.peek() {
                    if s <= n {
                        return Err(Error::NotSubset { element: s });
                    }
                }
                if base_count == 0 {
                    return Err(Error::EmptyPrefix { horizon: n });
                }
                out.push(sub_count as f64 / base_count as f64);
                cp.next();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sieve_count(n: usize) -> u64 {
        let mut composite = vec![false; n + 1];
        let mut count = 0;
        for i in 2..=n {
            if !composite[i] {
                count += 1;
                let mut j = i * i;
                while j <= n {
                    composite[j] = true;
                    j += i;
                }
            }
        }
        count
    }

    #[test]
    fn base_counts() {
        let squares = make_base(BaseKind::KthPowers { k: 2 }).unwrap();
        assert_eq!(squares.count(100), 10);
        let primes = make_base(BaseKind::Primes).unwrap();
        assert_eq!(primes.count(100), sieve_count(100));
        assert_eq!(primes.count(100_000), sieve_count(100_000));
        let n2 = make_base(BaseKind::N2LogN).unwrap();
        assert_eq!(n2.iter().take(3).collect::<Vec<_>>(), vec![2, 9, 22]);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(make_base(BaseKind::KthPowers { k: 0 }).is_err());
        assert!(make_base(BaseKind::Progression { q: 0, offset: 0 }).is_err());
        assert!(make_base(BaseKind::Progression { q: 3, offset: 4 }).is_err());
        assert!(make_base(BaseKind::Explicit {
            elements: vec![1, 3, 3]
        })
        .is_err());
        assert!(parse_explicit("1\nx\n").is_err());
    }

    #[test]
    fn progression_counting_formula() {
        for q in 1..8u64 {
            for offset in 1..=q {
                let set = make_base(BaseKind::Progression { q, offset }).unwrap();
                for n in offset..offset + 50 {
                    assert_eq!(set.count(n), (n - offset) / q + 1);
                }
            }
        }
        let zero = make_base(BaseKind::Progression { q: 3, offset: 0 }).unwrap();
        assert_eq!(zero.prefix(10), vec![3, 6, 9]);
    }

    #[test]
    fn streaming_count_equals_bitset_popcount() {
        for kind in [BaseKind::Primes, BaseKind::N2LogN, BaseKind::KthPowers { k: 3 }] {
            let set = make_base(kind).unwrap();
            let n = 10_000_000;
            assert_eq!(set.count(n), set.bitset(n).count_ones() as u64);
        }
    }

    #[test]
    fn restart_determinism() {
        let set = make_base(BaseKind::Primes).unwrap();
        let a: Vec<u64> = set.iter().take(5000).collect();
        let b: Vec<u64> = set.clone().iter().take(5000).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn explicit_file_roundtrip() {
        let dir = std::env::temp_dir().join(format!("orbitrep-explicit-{}", std::process::id()));
        std::fs::write(&dir, "# lacunary\n1\n2\n4\n\n8\n").unwrap();
        let set = IndexSet::read_explicit(&dir).unwrap();
        assert_eq!(set.prefix(100), vec![1, 2, 4, 8]);
        std::fs::remove_file(&dir).unwrap();
    }

    #[test]
    fn growth_reports() {
        let nat = IndexSet::naturals();
        let r = sublacunarity_report(&nat, &[1_000_000]).unwrap();
        assert!((r.ratios[0] - (1e6f64).ln() / 1e6).abs() < 1e-15);
        let sq = make_base(BaseKind::KthPowers { k: 2 }).unwrap();
        let r = sublacunarity_report(&sq, &[1_000_000]).unwrap();
        assert_eq!(r.counts[0], 1000);
        assert!((r.ratios[0] - 1.381_551_055_796_427e-2).abs() < 1e-12);
        let lac = make_base(BaseKind::Explicit {
            elements: (0..30).map(|k| 1u64 << k).collect(),
        })
        .unwrap();
        let r = sublacunarity_report(&lac, &[1 << 20]).unwrap();
        // 2^0 ..= 2^20 are 21 elements
        assert_eq!(r.counts[0], 21);
        assert!((r.ratios[0] - 20.0 * 2f64.ln() / 21.0).abs() < 1e-12);
        let empty = IndexSet::from_sorted("empty", vec![]).unwrap();
        assert!(sublacunarity_report(&empty, &[10]).unwrap().ratios[0].is_infinite());
        assert!(sublacunarity_report(&nat, &[10, 5]).is_err());
    }

    #[test]
    fn relative_means() {
        let nat = IndexSet::naturals();
        let trace = relative_mean_trace(&nat, &nat, &[10, 100, 1000]).unwrap();
        assert_eq!(trace, vec![1.0; 3]);
        let even = nat.filter("even", |r| r % 2 == 0);
        let cps = [7u64, 100, 1001, 10_000];
        let trace = relative_mean_trace(&even, &nat, &cps).unwrap();
        for (t, &n) in trace.iter().zip(&cps) {
            assert_eq!(*t, (n / 2) as f64 / n as f64);
            assert!((t - 0.5).abs() <= 1.0 / n as f64);
        }
        let sq = make_base(BaseKind::KthPowers { k: 2 }).unwrap();
        match relative_mean_trace(&even, &sq, &[100]) {
            Err(Error::NotSubset { element }) => assert_eq!(element, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn generators_strictly_increase(k in 1u32..5, q in 1u64..20, off in 0u64..20) {
            let off = off % (q + 1);
            for set in [
                make_base(BaseKind::KthPowers { k }).unwrap(),
                make_base(BaseKind::Progression { q, offset: off }).unwrap(),
                make_base(BaseKind::N2LogN).unwrap(),
            ] {
                let v: Vec<u64> = set.iter().take(500).collect();
                prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
                prop_assert!(v[0] >= 1);
            }
        }
    }
}
