use std::sync::Arc;

use bitvec::vec::BitVec;
use serde::{Deserialize, Serialize};

use crate::construct::{visit_set, IntervalStream, PasteMode, PasteProblem, PasteSchedule, TorusRegion};
use crate::empirical::{spectrum, target_distance, Spectrum, TargetSpectrum};
use crate::error::{Error, Result};
use crate::sequences::IndexSet;
use crate::torus::TorusPoint;

/// Pastes a family of subsets of `base`. Positions are counted in `base`,
/// so the horizon `h` bounds element values and the schedule is expressed in
/// positions `1..=#base(h)`.
pub fn paste_sets(
    base: &IndexSet,
    family: &[IndexSet],
    tolerances: &[f64],
    horizon: u64,
    mode: PasteMode,
) -> Result<(IndexSet, PasteSchedule)> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if family.len() != tolerances.len() {
        return Err(Error::InvalidParameter("one tolerance per family member".into()));
    }
    let elems = base.prefix(horizon);
    if elems.is_empty() {
        return Err(Error::EmptyPrefix { horizon });
    }
    let bits: Vec<BitVec> = family.iter().map(|s| s.bitset(horizon)).collect();
    for (s, b) in family.iter().zip(&bits) {
        let members = b.count_ones();
        let inside = elems.iter().filter(|&&r| b[r as usize]).count();
        if inside != members {
            let stray = s.upto(horizon).find(|r| elems.binary_search(r).is_err()).unwrap_or(0);
            return Err(Error::NotSubset { element: stray });
        }
    }
    let value = |k: usize, n: u64| if bits[k][elems[n as usize - 1] as usize] { 1.0 } else { 0.0 };
    let schedule = PasteProblem::new(value, tolerances, elems.len() as u64)
        .mode(mode)
        .solve()?;

    let prefix: Vec<u64> = elems
        .iter()
        .enumerate()
        .filter(|&(i, &r)| bits[schedule.member_at(i as u64 + 1)][r as usize])
        .map(|(_, &r)| r)
        .collect();
    let prefix = Arc::new(prefix);
    let last = family[*schedule.members.last().expect("nonempty schedule")].clone();
    let descriptor = format!("paste[{}; H={horizon}]", family.len());
    let set = IndexSet::from_bounded_generator(descriptor, move |limit| {
        let head = Arc::clone(&prefix);
        Box::new(
            (0..head.len())
                .map(move |i| head[i])
                .take_while(move |&r| r <= limit)
                .chain(last.upto(limit).skip_while(move |&r| r <= horizon)),
        )
    });
    Ok((set, schedule))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub stream: String,
    pub pieces: usize,
    /// `lambda` of the union of the pieces used.
    pub target_measure: f64,
    pub horizon: u64,
    /// `#S(H) / #R(H)`.
    pub relative_density: f64,
    pub spectrum: Spectrum,
    pub spectrum_error: f64,
}

#[derive(Clone, Debug)]
pub struct IndicatorRepresentation {
    pub set: IndexSet,
    pub schedule: PasteSchedule,
    pub report: IndicatorReport,
}

/// Represents the open set given by the first `pieces` pieces of `stream`:
/// pastes the visit sets of the partial unions `B_k`.
///
/// Tolerances are `e_k = 2 (lambda(B_K) - lambda(B_k) + tail(K))`, twice a bound
/// on `sup_l lambda(B_k Δ B_l)`.
pub fn represent_indicator(
    base: &IndexSet,
    alpha: TorusPoint,
    stream: &IntervalStream,
    pieces: usize,
    horizon: u64,
    pmax: u32,
    mode: PasteMode,
) -> Result<IndicatorRepresentation> {
    let mut partial = Vec::new();
    let mut acc = TorusRegion::empty();
    for k in 0..pieces {
        match stream.piece(k) {
            Some(p) => {
                acc = acc.union(&p);
                partial.push(acc.clone());
            }
            None => break,
        }
    }
    let used = partial.len();
    let first = partial
        .iter()
        .position(|b| !b.is_empty())
        .ok_or_else(|| Error::InvalidParameter("the stream has measure zero".into()))?;
    let total = partial[used - 1].measure();
    let tail = if used < pieces { 0.0 } else { stream.tail_bound(used) };
    let regions = &partial[first..];
    let tolerances: Vec<f64> = regions
        .iter()
        .map(|b| 2.0 * ((total - b.measure()).max(0.0) + tail))
        .collect();
    let family: Vec<IndexSet> = regions.iter().map(|b| visit_set(base, alpha, b)).collect();
    let (set, schedule) = paste_sets(base, &family, &tolerances, horizon, mode)?;

    let target = TargetSpectrum::Region {
        region: partial[used - 1].clone(),
    };
    let sp = spectrum(&set, alpha, horizon, pmax)?;
    let spectrum_error = target_distance(&sp, &target)?;
    let report = IndicatorReport {
        stream: stream.descriptor().to_string(),
        pieces: used,
        target_measure: total,
        horizon,
        relative_density: sp.count as f64 / base.count(horizon) as f64,
        spectrum: sp,
        spectrum_error,
    };
    Ok(IndicatorRepresentation {
        set,
        schedule,
        report,
    })
}
