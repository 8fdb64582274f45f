//! Three sets that show what can go wrong: a pair of good sets whose
//! intersection has no mean, a pair whose intersection and union have means
//! but are not good, and an open set whose visit set is not good.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::TorusRegion;
use crate::empirical::fmt_f64;
use crate::error::{Error, Result};
use crate::rng::KeyedRng;
use crate::sequences::IndexSet;
use crate::torus::{orbit_point, TorusPoint};

const ONE: u128 = 1 << 64;

// ---------------------------------------------------------------------------
// dyadic flips

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicBlock {
    pub k: u32,
    /// `#(R ∩ S ∩ [2^k, 2^{k+1})) / 2^k`.
    pub intersection_mean: f64,
    pub r_mean: f64,
    pub s_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicReport {
    pub seed: u64,
    pub horizon: u64,
    pub r_density: f64,
    pub s_density: f64,
    pub blocks: Vec<DyadicBlock>,
}

impl DyadicReport {
    /// Every odd block of the intersection is empty.
    pub fn odd_blocks_empty(&self) -> bool {
        self.blocks
            .iter()
            .filter(|b| b.k % 2 == 1)
            .all(|b| b.intersection_mean == 0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,intersection_mean,r_mean,s_mean\n");
        for b in &self.blocks {
            out.push_str(&format!(
                "{},{},{},{}\n",
                b.k,
                fmt_f64(b.intersection_mean),
                fmt_f64(b.r_mean),
                fmt_f64(b.s_mean)
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct DyadicPair {
    pub r: IndexSet,
    pub s: IndexSet,
    pub report: DyadicReport,
}

/// `R = {n : X_n = 1}` for fair coins `X_n`, and `S` the same coins flipped
/// on the dyadic blocks `[2^k, 2^{k+1})` with `k` odd.
pub fn dyadic_flip_pair(seed: u64, horizon: u64) -> Result<DyadicPair> {
    if horizon < 1 << 10 {
        return Err(Error::InvalidParameter(format!("horizon {horizon} is below 2^10")));
    }
    let rng = KeyedRng::new(seed);
    let x = move |n: u64| rng.bernoulli(n, 0.5);
    let y = move |n: u64| x(n) != (n.ilog2() % 2 == 1);
    let r = IndexSet::naturals().filter(format!("coins(seed={seed})"), x);
    let s = IndexSet::naturals().filter(format!("flipped-coins(seed={seed})"), y);

    let kmax = (horizon + 1).ilog2() - 1;
    let blocks: Vec<DyadicBlock> = (0..=kmax)
        .into_par_iter()
        .map(|k| {
            let (lo, hi) = (1u64 << k, 1u64 << (k + 1));
            let (mut t, mut rc, mut sc) = (0u64, 0u64, 0u64);
            for n in lo..hi {
                let (a, b) = (x(n), y(n));
                rc += a as u64;
                sc += b as u64;
                t += (a && b) as u64;
            }
            let len = (hi - lo) as f64;
            DyadicBlock {
                k,
                intersection_mean: t as f64 / len,
                r_mean: rc as f64 / len,
                s_mean: sc as f64 / len,
            }
        })
        .collect();
    let (rc, sc) = (1..=horizon)
        .into_par_iter()
        .map(|n| (x(n) as u64, y(n) as u64))
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let report = DyadicReport {
        seed,
        horizon,
        r_density: rc as f64 / horizon as f64,
        s_density: sc as f64 / horizon as f64,
        blocks,
    };
    Ok(DyadicPair { r, s, report })
}

// ---------------------------------------------------------------------------
// block patterns

/// A letter of the block alphabet as a mask of residues mod 2:
/// bit 0 for even numbers, bit 1 for odd ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter(u8);

impl Letter {
    pub const EMPTY: Letter = Letter(0b00);
    pub const E: Letter = Letter(0b01);
    pub const O: Letter = Letter(0b10);
    pub const N: Letter = Letter(0b11);

    #[inline]
    pub fn contains(self, n: u64) -> bool {
        self.0 >> (n % 2) & 1 == 1
    }

    pub fn meet(self, other: Letter) -> Letter {
        Letter(self.0 & other.0)
    }

    pub fn join(self, other: Letter) -> Letter {
        Letter(self.0 | other.0)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match *self {
            Letter::N => "N",
            Letter::O => "O",
            Letter::E => "E",
            _ => "-",
        })
    }
}

/// Block structure: `I_n = [n^2, (n+1)^2)` and `J_k = [3^k, 3^{k+1})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPattern {
    pub r1: [Letter; 3],
    pub r2_even: [Letter; 3],
    pub r2_odd: [Letter; 3],
}

impl Default for BlockPattern {
    fn default() -> Self {
        use Letter as L;
        BlockPattern {
            r1: [L::N, L::O, L::E],
            r2_even: [L::E, L::O, L::N],
            r2_odd: [L::O, L::N, L::E],
        }
    }
}

/// `k` with `3^k <= m < 3^{k+1}`.
pub fn ilog3(m: u64) -> u32 {
    m.ilog(3)
}

/// Index `n` of the inner block containing `m >= 1`.
#[inline]
pub fn inner_block(m: u64) -> u64 {
    m.isqrt()
}

impl BlockPattern {
    /// Letters of `R1` and `R2` on the inner block `I_n`; `R2` switches
    /// alphabet according to the `J_k` holding the left endpoint `n^2`.
    pub fn letters(&self, n: u64) -> (Letter, Letter) {
        let i = ((n - 1) % 3) as usize;
        let r2 = if ilog3(n * n).is_multiple_of(2) {
            self.r2_even[i]
        } else {
            self.r2_odd[i]
        };
        (self.r1[i], r2)
    }

    pub fn intersection_cycle(&self, k_even: bool) -> [Letter; 3] {
        let r2 = if k_even { self.r2_even } else { self.r2_odd };
        [0, 1, 2].map(|i| self.r1[i].meet(r2[i]))
    }

    pub fn union_cycle(&self, k_even: bool) -> [Letter; 3] {
        let r2 = if k_even { self.r2_even } else { self.r2_odd };
        [0, 1, 2].map(|i| self.r1[i].join(r2[i]))
    }
}

pub fn cycle_string(cycle: &[Letter; 3]) -> String {
    cycle.iter().map(|l| l.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterBlockRow {
    pub k: u32,
    /// Mean of `e(n/2)` over the elements of `R1 ∩ R2` in `J_k`.
    pub intersection_average: f64,
    pub union_average: f64,
    pub intersection_density: f64,
    pub union_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPatternReport {
    pub intersection_even: String,
    pub intersection_odd: String,
    pub union_even: String,
    pub union_odd: String,
    pub horizon: u64,
    pub r1_density: f64,
    pub r2_density: f64,
    pub intersection_density: f64,
    pub union_density: f64,
    pub rows: Vec<OuterBlockRow>,
}

impl BlockPatternReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,intersection_average,union_average,intersection_density,union_density\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.k,
                fmt_f64(r.intersection_average),
                fmt_f64(r.union_average),
                fmt_f64(r.intersection_density),
                fmt_f64(r.union_density)
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct BlockPatternPair {
    pub r1: IndexSet,
    pub r2: IndexSet,
    pub pattern: BlockPattern,
    pub report: BlockPatternReport,
}

/// `R1` and `R2` built from the letter cycles, with statistics over the outer
/// blocks `J_0, ..., J_kmax`; densities are taken at `N = 3^{kmax+1}`.
pub fn block_pattern_pair(kmax: u32) -> Result<BlockPatternPair> {
    if kmax > 30 {
        return Err(Error::InvalidParameter(format!("kmax {kmax} exceeds 30")));
    }
    let pattern = BlockPattern::default();
    let in_r1 = move |m: u64| pattern.letters(inner_block(m)).0.contains(m);
    let in_r2 = move |m: u64| pattern.letters(inner_block(m)).1.contains(m);
    let r1 = IndexSet::naturals().filter("blocks-R1", in_r1);
    let r2 = IndexSet::naturals().filter("blocks-R2", in_r2);

    let rows: Vec<OuterBlockRow> = (0..=kmax)
        .into_par_iter()
        .map(|k| {
            let (lo, hi) = (3u64.pow(k), 3u64.pow(k + 1));
            let (mut ic, mut isum, mut uc, mut usum) = (0i64, 0i64, 0i64, 0i64);
            for m in lo..hi {
                let (a, b) = (in_r1(m), in_r2(m));
                let sign = if m % 2 == 0 { 1 } else { -1 };
                if a && b {
                    ic += 1;
                    isum += sign;
                }
                if a || b {
                    uc += 1;
                    usum += sign;
                }
            }
            let len = (hi - lo) as f64;
            OuterBlockRow {
                k,
                intersection_average: isum as f64 / ic.max(1) as f64,
                union_average: usum as f64 / uc.max(1) as f64,
                intersection_density: ic as f64 / len,
                union_density: uc as f64 / len,
            }
        })
        .collect();

    let horizon = 3u64.pow(kmax + 1);
    let counts = (1..=horizon)
        .into_par_iter()
        .map(|m| {
            let (a, b) = (in_r1(m), in_r2(m));
            [a as u64, b as u64, (a && b) as u64, (a || b) as u64]
        })
        .reduce(|| [0; 4], |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]]);
    let d = |c: u64| c as f64 / horizon as f64;
    let report = BlockPatternReport {
        intersection_even: cycle_string(&pattern.intersection_cycle(true)),
        intersection_odd: cycle_string(&pattern.intersection_cycle(false)),
        union_even: cycle_string(&pattern.union_cycle(true)),
        union_odd: cycle_string(&pattern.union_cycle(false)),
        horizon,
        r1_density: d(counts[0]),
        r2_density: d(counts[1]),
        intersection_density: d(counts[2]),
        union_density: d(counts[3]),
        rows,
    };
    Ok(BlockPatternPair {
        r1,
        r2,
        pattern,
        report,
    })
}

// ---------------------------------------------------------------------------
// open set with a bad visit set

/// Largest horizon searched for the next breakpoint.
pub const OPEN_SET_CAP: u64 = 100_000_000;

const SEARCH_CHUNK: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenSetStep {
    pub k: usize,
    pub n_k: u64,
    /// `eps_k` in units of `2^-64`.
    pub eps_units: u64,
    /// Balls added at this step.
    pub balls: usize,
    pub smallest_radius_units: u64,
    /// `#{n <= N_k : n alpha ∈ closure(U_{k-1})}`; zero at step 0.
    pub closure_count: u64,
    pub measure: f64,
    /// `2 (N_k eps_k + N_{k-2} eps_{k-2} + ...)` as a fraction of the torus.
    pub measure_bound: f64,
    pub measure_bound_holds: bool,
    /// The new balls miss `U_{k-1}`.
    pub balls_disjoint: bool,
    pub arcs: usize,
}

/// State of the inductive construction: breakpoints `N_0 < N_1 < ...`, radii
/// `eps_k = 1/(2^{k+4} N_k)` and the latest open set of each parity.
#[derive(Clone, Debug)]
pub struct OpenSetState {
    pub alpha: TorusPoint,
    pub steps: Vec<OpenSetStep>,
    /// Latest `U_k` with `k` even and with `k` odd.
    pub even: TorusRegion,
    pub odd: TorusRegion,
    bound_units: [u128; 2],
}

fn eps_units(k: usize, n: u64) -> u64 {
    (ONE / ((1u128 << (k + 4)) * n as u128)) as u64
}

impl OpenSetState {
    /// Step 0: `U_0` is the union of the balls of radius `eps_0` around
    /// `n alpha`, `n <= N_0`.
    pub fn new(alpha: TorusPoint, n0: u64) -> Result<Self> {
        if n0 < 2 {
            return Err(Error::InvalidParameter("N_0 must exceed 1".into()));
        }
        let eps = eps_units(0, n0);
        let u0 = TorusRegion::from_balls((1..=n0).map(|n| (orbit_point(n, alpha), eps)));
        let bound = 2 * n0 as u128 * eps as u128;
        let step = OpenSetStep {
            k: 0,
            n_k: n0,
            eps_units: eps,
            balls: n0 as usize,
            smallest_radius_units: eps,
            closure_count: 0,
            measure: u0.measure(),
            measure_bound: bound as f64 / ONE as f64,
            measure_bound_holds: u0.measure_units() <= bound,
            balls_disjoint: true,
            arcs: u0.arcs().len(),
        };
        Ok(OpenSetState {
            alpha,
            steps: vec![step],
            even: u0,
            odd: TorusRegion::empty(),
            bound_units: [bound, 0],
        })
    }

    pub fn k(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn breakpoints(&self) -> Vec<u64> {
        self.steps.iter().map(|s| s.n_k).collect()
    }

    pub fn latest(&self) -> &TorusRegion {
        if self.k().is_multiple_of(2) {
            &self.even
        } else {
            &self.odd
        }
    }

    /// The two parity families are disjoint.
    pub fn parity_disjoint(&self) -> bool {
        self.even.intersection(&self.odd).is_empty()
    }

    /// Least `N > N_k` with `#{n <= N : n alpha ∈ closure(U_k)} <= 2 lambda(U_k) N`.
    fn search(&self, cap: u64) -> Result<(u64, u64)> {
        let u = self.latest();
        let lambda2 = 2.0 * u.measure();
        let nk = self.steps[self.k()].n_k;
        let alpha = self.alpha;
        let mut count = 0u64;
        let mut lo = 1u64;
        while lo <= cap {
            let hi = (lo + SEARCH_CHUNK - 1).min(cap);
            let inside: Vec<bool> = (lo..=hi)
                .into_par_iter()
                .map(|n| u.closure_contains(orbit_point(n, alpha)))
                .collect();
            for (i, &b) in inside.iter().enumerate() {
                count += b as u64;
                let n = lo + i as u64;
                if n > nk && (count as f64) <= lambda2 * n as f64 {
                    return Ok((n, count));
                }
            }
            lo = hi + 1;
        }
        Err(Error::SearchCapExceeded { step: self.k() + 1, cap })
    }

    /// One induction step. On error the state is left unchanged.
    pub fn advance(&mut self, cap: u64) -> Result<()> {
        let k = self.k();
        let (n_next, closure_count) = self.search(cap)?;
        let eps = eps_units(k + 1, n_next);
        let u = self.latest();
        let alpha = self.alpha;
        let balls: Vec<(TorusPoint, u64)> = (1..=n_next)
            .into_par_iter()
            .filter_map(|n| {
                let x = orbit_point(n, alpha);
                let d = u.distance_units(x);
                (d > 0).then(|| (x, (d.min(eps as u128) / 2) as u64))
            })
            .filter(|&(_, r)| r > 0)
            .collect();
        let added = TorusRegion::from_balls(balls.iter().copied());
        let balls_disjoint = added.intersection(u).is_empty();
        let smallest = balls.iter().map(|b| b.1).min().unwrap_or(0);
        let parity = (k + 1) % 2;
        let next = {
            let prev = if parity == 0 { &self.even } else { &self.odd };
            prev.union(&added)
        };
        let bound = self.bound_units[parity] + 2 * n_next as u128 * eps as u128;
        let step = OpenSetStep {
            k: k + 1,
            n_k: n_next,
            eps_units: eps,
            balls: balls.len(),
            smallest_radius_units: smallest,
            closure_count,
            measure: next.measure(),
            measure_bound: bound as f64 / ONE as f64,
            measure_bound_holds: next.measure_units() <= bound,
            balls_disjoint,
            arcs: next.arcs().len(),
        };
        self.bound_units[parity] = bound;
        if parity == 0 {
            self.even = next;
        } else {
            self.odd = next;
        }
        self.steps.push(step);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenSetCheckpoint {
    pub k: usize,
    pub n_k: u64,
    /// `A_{n <= N_k} 1_U(n alpha)` with `U` the union of the even sets built.
    pub average: f64,
    /// `5/6` from below at even `k`, `1/3` from above at odd `k`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenSetReport {
    pub alpha_hex: String,
    pub n0: u64,
    pub steps: Vec<OpenSetStep>,
    pub parity_disjoint: bool,
    pub measure_bounds_hold: bool,
    pub balls_disjoint: bool,
    pub checkpoints: Vec<OpenSetCheckpoint>,
}

impl OpenSetReport {
    pub fn holds(&self) -> bool {
        self.parity_disjoint
            && self.measure_bounds_hold
            && self.balls_disjoint
            && self.checkpoints.iter().all(|c| c.holds)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,n_k,eps,measure,measure_bound,average,bound,holds\n");
        for (s, c) in self.steps.iter().zip(&self.checkpoints) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.k,
                s.n_k,
                fmt_f64(s.eps_units as f64 / ONE as f64),
                fmt_f64(s.measure),
                fmt_f64(s.measure_bound),
                fmt_f64(c.average),
                fmt_f64(c.bound),
                c.holds
            ));
        }
        out
    }
}

/// Visit averages of the final even set at every breakpoint.
pub fn open_set_report(state: &OpenSetState) -> OpenSetReport {
    let u = &state.even;
    let alpha = state.alpha;
    let mut checkpoints = Vec::with_capacity(state.steps.len());
    let mut count = 0u64;
    let mut prev = 0u64;
    for s in &state.steps {
        count += (prev + 1..=s.n_k)
            .into_par_iter()
            .filter(|&n| u.contains(orbit_point(n, alpha)))
            .count() as u64;
        prev = s.n_k;
        let average = count as f64 / s.n_k as f64;
        let (bound, holds) = if s.k % 2 == 0 {
            (5.0 / 6.0, average >= 5.0 / 6.0)
        } else {
            (1.0 / 3.0, average <= 1.0 / 3.0)
        };
        checkpoints.push(OpenSetCheckpoint {
            k: s.k,
            n_k: s.n_k,
            average,
            bound,
            holds,
        });
    }
    OpenSetReport {
        alpha_hex: format!("{:#018x}", alpha.frac()),
        n0: state.steps[0].n_k,
        steps: state.steps.clone(),
        parity_disjoint: state.parity_disjoint(),
        measure_bounds_hold: state.steps.iter().all(|s| s.measure_bound_holds),
        balls_disjoint: state.steps.iter().all(|s| s.balls_disjoint),
        checkpoints,
    }
}

/// Runs `steps` induction steps after `U_0`, giving `N_0 < ... < N_steps`.
pub fn bad_open_set(alpha: TorusPoint, n0: u64, steps: usize, cap: u64) -> Result<(OpenSetState, OpenSetReport)> {
    if steps < 2 {
        return Err(Error::InvalidParameter("at least two steps".into()));
    }
    let mut state = OpenSetState::new(alpha, n0)?;
    for _ in 0..steps {
        state.advance(cap)?;
    }
    let report = open_set_report(&state);
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letters_are_residue_masks() {
        for n in 1..20u64 {
            assert!(Letter::N.contains(n));
            assert_eq!(Letter::O.contains(n), n % 2 == 1);
            assert_eq!(Letter::E.contains(n), n % 2 == 0);
        }
        assert_eq!(Letter::O.join(Letter::E), Letter::N);
        assert_eq!(Letter::O.meet(Letter::E), Letter::EMPTY);
    }

    #[test]
    fn induced_patterns() {
        let p = BlockPattern::default();
        assert_eq!(cycle_string(&p.intersection_cycle(true)), "EOE");
        assert_eq!(cycle_string(&p.intersection_cycle(false)), "OOE");
        assert_eq!(cycle_string(&p.union_cycle(true)), "NON");
        assert_eq!(cycle_string(&p.union_cycle(false)), "NNE");
    }

    #[test]
    fn block_indexing() {
        assert_eq!(inner_block(1), 1);
        assert_eq!(inner_block(3), 1);
        assert_eq!(inner_block(4), 2);
        assert_eq!(inner_block(99), 9);
        assert_eq!(ilog3(1), 0);
        assert_eq!(ilog3(8), 1);
        assert_eq!(ilog3(9), 2);
        // R1 is all of I_1 = {1, 2, 3}, odd numbers of I_2, even numbers of I_3
        let pair = block_pattern_pair(2).unwrap();
        assert_eq!(pair.r1.prefix(15), vec![1, 2, 3, 5, 7, 10, 12, 14]);
    }

    #[test]
    fn dyadic_structure() {
        let pair = dyadic_flip_pair(3, 1 << 14).unwrap();
        assert!(pair.report.odd_blocks_empty());
        // on even blocks S agrees with R, on odd blocks it is the complement
        let r = pair.r.bitset(1 << 14);
        let s = pair.s.bitset(1 << 14);
        for n in 1..(1usize << 14) {
            let odd_block = n.ilog2() % 2 == 1;
            assert_eq!(r[n] != s[n], odd_block, "n={n}");
        }
        assert!(dyadic_flip_pair(3, 1000).is_err());
    }

    #[test]
    fn open_set_small_run() {
        let (state, report) = bad_open_set(TorusPoint::GOLDEN, 8, 3, OPEN_SET_CAP).unwrap();
        assert_eq!(report.checkpoints[0].average, 1.0);
        assert!(report.holds(), "{report:#?}");
        let n = state.breakpoints();
        assert!(n.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn open_set_cap_leaves_partial_state() {
        let mut state = OpenSetState::new(TorusPoint::GOLDEN, 8).unwrap();
        state.advance(OPEN_SET_CAP).unwrap();
        let before = state.breakpoints();
        let err = state.advance(before[1]).unwrap_err();
        assert!(matches!(err, Error::SearchCapExceeded { step: 2, .. }));
        assert_eq!(state.breakpoints(), before);
    }

    proptest::proptest! {
        #[test]
        fn letters_follow_the_cycles(n in 1u64..3_000_000) {
            let pat = BlockPattern::default();
            let (a, b) = pat.letters(n);
            let even = ilog3(n * n).is_multiple_of(2);
            let i = ((n - 1) % 3) as usize;
            proptest::prop_assert_eq!(a.meet(b), pat.intersection_cycle(even)[i]);
            proptest::prop_assert_eq!(a.join(b), pat.union_cycle(even)[i]);
            for m in [n * n, n * n + 1] {
                proptest::prop_assert_eq!(a.contains(m) && b.contains(m), a.meet(b).contains(m));
            }
        }
    }
}
