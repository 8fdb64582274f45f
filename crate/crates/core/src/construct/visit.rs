use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::construct::TorusRegion;
use crate::empirical::{spectrum, target_coeff, TargetSpectrum};
use crate::error::{Error, Result};
use crate::sequences::IndexSet;
use crate::torus::{orbit_point, TorusPoint};

/// `{r in R : r alpha in B}`, decided by exact fixed-point comparison.
pub fn visit_set(base: &IndexSet, alpha: TorusPoint, region: &TorusRegion) -> IndexSet {
    let descriptor = format!("visit({}, alpha={alpha}, {region:?})", base.descriptor());
    if region.is_full() {
        return base.clone().with_descriptor(descriptor);
    }
    let region = region.clone();
    base.filter(descriptor, move |r| region.contains(orbit_point(r, alpha)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitRow {
    pub p: i64,
    pub empirical: Complex64,
    pub target: Complex64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitReport {
    pub horizon: u64,
    pub region_measure: f64,
    /// `#S(N) / #R(N)`.
    pub relative_density: f64,
    pub rows: Vec<VisitRow>,
    pub max_error: f64,
}

/// Compares the spectrum of the visit set with `lambda(1_B e_p) / lambda(B)`.
pub fn visit_spectrum_check(
    base: &IndexSet,
    alpha: TorusPoint,
    region: &TorusRegion,
    horizon: u64,
    pmax: u32,
) -> Result<VisitReport> {
    let measure = region.measure();
    if region.is_empty() {
        return Err(Error::InvalidParameter("region has measure zero".into()));
    }
    let set = visit_set(base, alpha, region);
    let sp = spectrum(&set, alpha, horizon, pmax)?;
    let target = TargetSpectrum::Region {
        region: region.clone(),
    };
    let rows: Vec<VisitRow> = sp
        .iter()
        .map(|(p, c)| {
            let t = target_coeff(&target, p);
            VisitRow {
                p,
                empirical: c,
                target: t,
                error: (c - t).norm(),
            }
        })
        .collect();
    let max_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok(VisitReport {
        horizon,
        region_measure: measure,
        relative_density: sp.count as f64 / base.count(horizon) as f64,
        rows,
        max_error,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn full_and_empty_regions() {
        let r = IndexSet::naturals();
        let all = visit_set(&r, TorusPoint::GOLDEN, &TorusRegion::full());
        assert_eq!(all.prefix(1000), r.prefix(1000));
        let none = visit_set(&r, TorusPoint::GOLDEN, &TorusRegion::empty());
        assert_eq!(none.count(1000), 0);
    }

    #[test]
    fn half_interval_spectrum() {
        let region = TorusRegion::interval(0.0, 0.5).unwrap();
        let report = visit_spectrum_check(&IndexSet::naturals(), TorusPoint::GOLDEN, &region, 100_000, 3).unwrap();
        assert!((report.relative_density - 0.5).abs() < 2e-3);
        let row = report.rows.iter().find(|r| r.p == 1).unwrap();
        assert!((row.target - Complex64::new(0.0, 2.0 / PI)).norm() < 1e-15);
        assert!(report.max_error < 2e-2, "{}", report.max_error);
        assert!(visit_spectrum_check(&IndexSet::naturals(), TorusPoint::GOLDEN, &TorusRegion::empty(), 10, 1).is_err());
    }

    #[test]
    fn membership_matches_wide_integer_scan() {
        let region = TorusRegion::from_intervals(&[(0.1, 0.3), (0.7, 0.75)]).unwrap();
        let set = visit_set(&IndexSet::naturals(), TorusPoint::E, &region);
        let lo1 = TorusPoint::from_f64(0.1).frac();
        let hi1 = TorusPoint::from_f64(0.3).frac();
        let lo2 = TorusPoint::from_f64(0.7).frac();
        let hi2 = TorusPoint::from_f64(0.75).frac();
        let brute: Vec<u64> = (1..=20_000u64)
            .filter(|&n| {
                let x = (n as u128 * TorusPoint::E.frac() as u128 % (1u128 << 64)) as u64;
                (lo1..hi1).contains(&x) || (lo2..hi2).contains(&x)
            })
            .collect();
        assert_eq!(set.prefix(20_000), brute);
    }
}
