//! The pasting engine behind both set and weight constructions.
//!
//! A family `f_0, f_1, ...` of sequences on positions `1..=H` is glued
//! together: member `i` is used on `(b_i, b_{i+1}]`, with `b_0 = 0` and the
//! last member running to the horizon. Each breakpoint is the least value
//! (subject to the growth floor `b_s >= 2 b_{s-1}`) that passes
//!
//! * the head condition `(1/b_s) Σ_{n <= b_{s-1}} |f_j - f_S| < e_j` for the
//!   already-fixed members `j`, and
//! * the tail conditions `A_{[N]} |f_j - f_t| < e_j` for every `N` in
//!   `[b_s, H]`, for the two members `t` adjacent to the new breakpoint.
//!
//! Every condition is monotone in `b_s`, so the least admissible value is
//! the maximum of the per-condition thresholds.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do when a breakpoint cannot be certified inside the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PasteMode {
    /// Fail with [`Error::HorizonExhausted`].
    #[default]
    Strict,
    /// Stop at the last certified member and let it run to the horizon.
    Truncate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    GrowthFloor,
    Head { member: usize },
    Tail { member: usize, target: usize },
    Extra,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub breakpoint: u64,
    pub binding: Binding,
}

/// Finite-horizon check of `A_{[N]} |f_j - f_S| < 3 e_j` for `N` in `[from, H]`,
/// where `f_j` is the member used on block `block` and `from` starts block `block + 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub block: usize,
    pub member: usize,
    pub from: u64,
    pub worst_average: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Breakpoints and tolerances of a pasted object, with what was verified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PasteSchedule {
    /// `breakpoints[i]` is the last position before member `i` takes over;
    /// `breakpoints[0] = 0`.
    pub breakpoints: Vec<u64>,
    /// Family index of the member used on each block.
    pub members: Vec<usize>,
    pub tolerances: Vec<f64>,
    pub horizon: u64,
    /// Members in the input family (the schedule may use fewer).
    pub family_size: usize,
    pub truncated: bool,
    pub growth_floor: u64,
    pub steps: Vec<StepRecord>,
    pub certificates: Vec<Certificate>,
}

impl PasteSchedule {
    pub fn blocks(&self) -> usize {
        self.breakpoints.len()
    }

    /// Block containing position `n` (1-based).
    #[inline]
    pub fn block_at(&self, n: u64) -> usize {
        self.breakpoints.partition_point(|&b| b < n).saturating_sub(1)
    }

    /// Family index of the member in charge of position `n`.
    #[inline]
    pub fn member_at(&self, n: u64) -> usize {
        self.members[self.block_at(n)]
    }

    /// Positions `(lo, hi]` covered by member `i`; `hi = None` for the last one.
    pub fn block(&self, i: usize) -> (u64, Option<u64>) {
        (self.breakpoints[i], self.breakpoints.get(i + 1).copied())
    }

    pub fn certificates_hold(&self) -> bool {
        self.certificates.iter().all(|c| c.holds)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

/// Extra constraint on breakpoint `s`: the least admissible value, `None` if
/// no value in the horizon works.
pub type ExtraFloor<'a> = dyn Fn(usize) -> Option<u64> + Sync + 'a;

pub struct PasteProblem<'a, V> {
    /// `value(member, position)` with positions starting at 1.
    pub value: V,
    pub tolerances: &'a [f64],
    pub horizon: u64,
    pub mode: PasteMode,
    pub extra: Option<&'a ExtraFloor<'a>>,
}

impl<'a, V> PasteProblem<'a, V>
where
    V: Fn(usize, u64) -> f64 + Sync,
{
    pub fn new(value: V, tolerances: &'a [f64], horizon: u64) -> Self {
        PasteProblem {
            value,
            tolerances,
            horizon,
            mode: PasteMode::Strict,
            extra: None,
        }
    }

    pub fn mode(mut self, mode: PasteMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn extra(mut self, extra: &'a ExtraFloor<'a>) -> Self {
        self.extra = Some(extra);
        self
    }

    pub fn solve(&self) -> Result<PasteSchedule> {
        let eps = self.tolerances;
        let k = eps.len();
        let h = self.horizon;
        if k == 0 {
            return Err(Error::EmptyFamily);
        }
        if h == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidParameter("tolerances must be finite and >= 0".into()));
        }
        let mut schedule = PasteSchedule {
            breakpoints: vec![0],
            members: vec![0],
            tolerances: Vec::new(),
            horizon: h,
            family_size: k,
            truncated: false,
            growth_floor: 2,
            steps: Vec::new(),
            certificates: Vec::new(),
        };

        // A member with zero tolerance is already the limit: use it alone.
        if let Some(z) = eps.iter().position(|&e| e == 0.0) {
            schedule.members = vec![z];
            schedule.tolerances = vec![0.0];
            return Ok(schedule);
        }

        let mut cache: HashMap<(usize, usize), Option<u64>> = HashMap::new();
        for s in 1..k {
            let prev = schedule.breakpoints[s - 1];
            let targets: Vec<usize> = if s == 1 {
                (1..k.min(3)).collect()
            } else {
                vec![s - 1, s]
            };
            let fixed: Vec<usize> = if s == 1 { vec![0] } else { (0..=s - 2).collect() };

            let pairs: Vec<(usize, usize)> = fixed
                .iter()
                .flat_map(|&j| targets.iter().map(move |&t| (j, t)))
                .filter(|&(j, t)| j < t && !cache.contains_key(&(j, t)))
                .collect();
            let fresh: Vec<((usize, usize), Option<u64>)> = pairs
                .par_iter()
                .map_init(Vec::new, |buf, &(j, t)| {
                    let th = tail_threshold(buf, |n| ((self.value)(j, n) - (self.value)(t, n)).abs(), h, eps[j]);
                    ((j, t), th)
                })
                .collect();
            cache.extend(fresh);

            let mut best = (2 * prev).max(1);
            let mut binding = Binding::GrowthFloor;
            let mut failed = false;
            for &j in &fixed {
                for &t in &targets {
                    if j >= t {
                        continue;
                    }
                    match cache[&(j, t)] {
                        Some(b) if b > best => {
                            best = b;
                            binding = Binding::Tail { member: j, target: t };
                        }
                        Some(_) => {}
                        None => failed = true,
                    }
                }
                // head condition over the already pasted prefix
                if prev > 0 {
                    let head: f64 = (1..=prev)
                        .map(|n| {
                            let m = schedule.member_at(n);
                            ((self.value)(j, n) - (self.value)(m, n)).abs()
                        })
                        .sum();
                    let b = (head / eps[j]).floor() as u64 + 1;
                    if b > best {
                        best = b;
                        binding = Binding::Head { member: j };
                    }
                }
            }
            if let Some(extra) = self.extra {
                match extra(s) {
                    Some(b) if b > best => {
                        best = b;
                        binding = Binding::Extra;
                    }
                    Some(_) => {}
                    None => failed = true,
                }
            }
            if failed || best >= h {
                schedule.tolerances = eps[..s].to_vec();
                match self.mode {
                    PasteMode::Truncate if s >= 1 => {
                        schedule.truncated = true;
                        break;
                    }
                    _ => {
                        return Err(Error::HorizonExhausted {
                            step: s,
                            horizon: h,
                            partial: Box::new(schedule),
                        })
                    }
                }
            }
            schedule.breakpoints.push(best);
            schedule.members.push(s);
            schedule.steps.push(StepRecord {
                step: s,
                breakpoint: best,
                binding,
            });
        }
        let used = schedule.blocks();
        schedule.tolerances = eps[..used].to_vec();
        schedule.certificates = self.certify(&schedule);
        Ok(schedule)
    }

    fn certify(&self, schedule: &PasteSchedule) -> Vec<Certificate> {
        let h = self.horizon;
        let used = schedule.blocks();
        (0..used.saturating_sub(2))
            .into_par_iter()
            .filter_map(|j| {
                let from = schedule.breakpoints[j + 2].max(1);
                if from > h {
                    return None;
                }
                let member = schedule.members[j];
                let mut sum = 0.0;
                let mut worst: f64 = 0.0;
                for n in 1..=h {
                    let m = schedule.member_at(n);
                    sum += ((self.value)(member, n) - (self.value)(m, n)).abs();
                    if n >= from {
                        worst = worst.max(sum / n as f64);
                    }
                }
                let tolerance = 3.0 * self.tolerances[member];
                Some(Certificate {
                    block: j,
                    member,
                    from,
                    worst_average: worst,
                    tolerance,
                    holds: worst < tolerance,
                })
            })
            .collect()
    }
}

/// Least `b` in `[1, h]` with `max_{N in [b, h]} A_{[N]} diff < e`.
fn tail_threshold(buf: &mut Vec<f64>, diff: impl Fn(u64) -> f64, h: u64, e: f64) -> Option<u64> {
    buf.clear();
    buf.reserve(h as usize);
    let mut sum = 0.0;
    for n in 1..=h {
        sum += diff(n);
        buf.push(sum / n as f64);
    }
    let mut threshold = None;
    for n in (1..=h).rev() {
        if buf[n as usize - 1] >= e {
            break;
        }
        threshold = Some(n);
    }
    threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_matches_brute_force() {
        let diff = |n: u64| if n.is_multiple_of(7) || n < 20 { 1.0 } else { 0.0 };
        let mut buf = Vec::new();
        for e in [0.2, 0.3, 0.5, 0.9] {
            let b = tail_threshold(&mut buf, diff, 500, e);
            let brute = (1..=500u64).find(|&b| {
                (b..=500).all(|n| (1..=n).map(diff).sum::<f64>() / (n as f64) < e)
            });
            assert_eq!(b, brute, "e={e}");
        }
    }

    #[test]
    fn member_lookup() {
        let s = PasteSchedule {
            breakpoints: vec![0, 4, 10],
            members: vec![0, 1, 2],
            tolerances: vec![0.1; 3],
            horizon: 20,
            family_size: 3,
            truncated: false,
            growth_floor: 2,
            steps: vec![],
            certificates: vec![],
        };
        let owners: Vec<usize> = (1..=12).map(|n| s.member_at(n)).collect();
        assert_eq!(owners, [0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 2, 2]);
        assert_eq!(s.block(1), (4, Some(10)));
        assert_eq!(s.block(2), (10, None));
    }

    #[test]
    fn constant_family_pastes_trivially() {
        let eps = [0.1, 0.05, 0.02];
        let s = PasteProblem::new(|_, n| (n % 2) as f64, &eps, 1000).solve().unwrap();
        assert_eq!(s.blocks(), 3);
        assert!(s.breakpoints.windows(2).all(|w| w[1] >= 2 * w[0]));
        assert!(s.certificates_hold());
    }

    #[test]
    fn exhausted_horizon_keeps_partial_schedule() {
        // members disagree everywhere, so no tail condition can hold
        let eps = [0.1, 0.1, 0.1];
        let err = PasteProblem::new(|k, n| ((k as u64 + n) % 2) as f64, &eps, 200)
            .solve()
            .unwrap_err();
        match err {
            Error::HorizonExhausted { step, partial, .. } => {
                assert_eq!(step, 1);
                assert_eq!(partial.breakpoints, vec![0]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let truncated = PasteProblem::new(|k, n| ((k as u64 + n) % 2) as f64, &eps, 200)
            .mode(PasteMode::Truncate)
            .solve()
            .unwrap();
        assert!(truncated.truncated);
        assert_eq!(truncated.blocks(), 1);
    }

    #[test]
    fn zero_tolerance_member_is_used_alone() {
        let eps = [0.5, 0.0, 0.0];
        let s = PasteProblem::new(|k, _| k as f64, &eps, 100).solve().unwrap();
        assert_eq!(s.members, vec![1]);
        assert_eq!(s.member_at(50), 1);
    }
}
