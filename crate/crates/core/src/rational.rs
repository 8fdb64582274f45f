//! Representing an arbitrary probability vector on the `q`-th roots of unity
//! at a rational rotation `a/q`.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::construct::{visit_set, TorusRegion};
use crate::error::{Error, Result};
use crate::sequences::{BaseKind, IndexSet};
use crate::torus::TorusPoint;

/// A probability vector on `{j/q : 0 <= j < q}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidueTorus {
    q: u64,
    masses: Vec<f64>,
}

impl ResidueTorus {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidParameter("need at least one mass".into()));
        }
        if let Some(i) = masses.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidParameter(format!("mass {i} is negative or not finite")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("masses sum to {total}, not 1")));
        }
        Ok(ResidueTorus {
            q: masses.len() as u64,
            masses,
        })
    }

    /// Parses a comma-separated mass vector such as `0.5,0.25,0.25`.
    pub fn parse(text: &str) -> Result<Self> {
        let masses = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("bad mass {t:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        ResidueTorus::new(masses)
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Inverse of `a` modulo `q` by the extended Euclidean algorithm.
fn mod_inverse(a: u64, q: u64) -> Option<u64> {
    if q == 1 {
        return Some(0);
    }
    let (mut r0, mut r1) = (q as i128, (a % q) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let k = r0 / r1;
        (r0, r1) = (r1, r0 - k * r1);
        (t0, t1) = (t1, t0 - k * t1);
    }
    (r0 == 1).then(|| t0.rem_euclid(q as i128) as u64)
}

/// The representing set together with its pieces `S_j`.
#[derive(Clone, Debug)]
pub struct RationalRepresentation {
    pub set: IndexSet,
    /// `S_j = {r : r a = j mod q, r gamma in [0, nu(j/q))}`.
    pub parts: Vec<IndexSet>,
    /// `j'` with `j' a = j mod q`.
    pub residues: Vec<u64>,
    pub gamma: TorusPoint,
}

/// Builds `S = ∪_j S_j`, each `S_j` a visit set of `[0, nu(j/q))` at the
/// auxiliary irrational `gamma` inside the residue class `R_j`.
pub fn represent_rational(a: u64, nu: &ResidueTorus, gamma: TorusPoint) -> Result<RationalRepresentation> {
    let q = nu.q;
    if gcd(a, q) != 1 {
        return Err(Error::NotCoprime { a, q });
    }
    let inv = mod_inverse(a, q).ok_or(Error::NotCoprime { a, q })?;
    let mut parts = Vec::with_capacity(q as usize);
    let mut residues = Vec::with_capacity(q as usize);
    for (j, &m) in nu.masses.iter().enumerate() {
        let jp = (j as u64 * inv) % q;
        let class = IndexSet::base(BaseKind::Progression { q, offset: jp })?;
        let region = if m >= 1.0 {
            TorusRegion::full()
        } else {
            TorusRegion::interval(0.0, m)?
        };
        let part = visit_set(&class, gamma, &region).with_descriptor(format!("S_{j}(q={q}, j'={jp}, mass={m})"));
        parts.push(part);
        residues.push(jp);
    }
    let pieces = parts.clone();
    let set = IndexSet::from_bounded_generator(format!("rational(a={a}, q={q}, gamma={gamma})"), move |limit| {
        Box::new(pieces.iter().map(|p| p.upto(limit)).kmerge())
    });
    Ok(RationalRepresentation {
        set,
        parts,
        residues,
        gamma,
    })
}

/// `#S_j(N) / #S(N)`, classifying `s` by `s a mod q`.
pub fn atom_masses(set: &IndexSet, a: u64, q: u64, horizon: u64) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::InvalidParameter("q must be positive".into()));
    }
    let mut counts = vec![0u64; q as usize];
    let mut total = 0u64;
    for s in set.upto(horizon) {
        counts[((s as u128 * a as u128) % q as u128) as usize] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyPrefix { horizon });
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::torus::orbit_point;

    #[test]
    fn inverse_and_coprimality() {
        for q in 1..40u64 {
            for a in 1..q.max(2) {
                if gcd(a, q) == 1 {
                    let inv = mod_inverse(a, q).unwrap();
                    assert_eq!((a * inv) % q, 1 % q);
                } else {
                    assert!(mod_inverse(a, q).is_none());
                }
            }
        }
        let nu = ResidueTorus::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            represent_rational(4, &ResidueTorus::new(vec![0.25; 4]).unwrap(), TorusPoint::SQRT2),
            Err(Error::NotCoprime { a: 4, q: 4 })
        ));
        assert!(represent_rational(3, &nu, TorusPoint::SQRT2).is_ok());
    }

    #[test]
    fn simplex_validation() {
        assert!(ResidueTorus::parse("0.5,0.25,0.25").is_ok());
        assert!(ResidueTorus::parse("0.5,0.25").is_err());
        assert!(ResidueTorus::parse("0.5,-0.25,0.75").is_err());
        assert!(ResidueTorus::parse("0.5,x").is_err());
    }

    #[test]
    fn point_mass_gives_full_class() {
        let nu = ResidueTorus::new(vec![1.0, 0.0, 0.0]).unwrap();
        let rep = represent_rational(1, &nu, TorusPoint::SQRT2).unwrap();
        assert_eq!(rep.set.prefix(30), vec![3, 6, 9, 12, 15, 18, 21, 24, 27, 30]);
        assert_eq!(atom_masses(&rep.set, 1, 3, 1000).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn exact_masses_for_simple_sets() {
        let nat = IndexSet::naturals();
        assert_eq!(atom_masses(&nat, 1, 2, 1000).unwrap(), vec![0.5, 0.5]);
        let even = nat.filter("even", |n| n % 2 == 0);
        assert_eq!(atom_masses(&even, 1, 2, 1000).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn parts_partition_the_set() {
        let nu = ResidueTorus::new(vec![0.1, 0.2, 0.3, 0.4, 0.0]).unwrap();
        let rep = represent_rational(2, &nu, TorusPoint::SQRT2).unwrap();
        let h = 50_000;
        let mut union: Vec<u64> = rep.parts.iter().flat_map(|p| p.prefix(h)).collect();
        union.sort_unstable();
        let n = union.len();
        union.dedup();
        assert_eq!(union.len(), n);
        assert_eq!(rep.set.prefix(h), union);
        for (j, p) in rep.parts.iter().enumerate() {
            assert!(p.upto(h).all(|s| (s * 2) % 5 == j as u64));
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn membership_matches_the_definition(
            q in 1u64..8,
            a in 1u64..50,
            raw in proptest::collection::vec(0u32..8, 8),
        ) {
            proptest::prop_assume!(gcd(a, q) == 1 && raw[..q as usize].iter().any(|&x| x > 0));
            let total: u32 = raw[..q as usize].iter().sum();
            let masses: Vec<f64> = raw[..q as usize].iter().map(|&x| x as f64 / total as f64).collect();
            let nu = ResidueTorus::new(masses).unwrap();
            let gamma = TorusPoint::SQRT2;
            let rep = represent_rational(a, &nu, gamma).unwrap();
            let got: Vec<u64> = rep.set.prefix(2_000);
            let want: Vec<u64> = (1..=2_000u64)
                .filter(|&r| {
                    let j = (r % q) * (a % q) % q;
                    // frac(r gamma) < x / total, in exact integers
                    let x = raw[j as usize] as u128;
                    (orbit_point(r, gamma).frac() as u128) * (total as u128) < (x << 64)
                })
                .collect();
            proptest::prop_assert_eq!(got, want);
        }
    }
}
