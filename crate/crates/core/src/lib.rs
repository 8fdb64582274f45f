//! Integer sets and weights whose rotation orbits realize prescribed limit measures.

pub mod accum;
pub mod construct;
pub mod counterexamples;
pub mod density;
pub mod empirical;
pub mod error;
pub mod rational;
pub mod rng;
pub mod sequences;
pub mod thinning;
pub mod torus;
pub mod weights;

pub use construct::{IntervalStream, PasteMode, PasteSchedule, TorusRegion};
pub use density::{DensityFunction, PiecewiseLinear, PowerSpike};
pub use empirical::{Carrier, Spectrum, TargetSpectrum};
pub use error::{Error, Result};
pub use rational::{atom_masses, represent_rational, RationalRepresentation, ResidueTorus};
pub use sequences::{BaseKind, IndexSet};
pub use torus::{character, orbit_point, to_torus, TorusPoint, UnitComplex};
pub use weights::{Weight, PastedWeight, FlattenedWeight};

// The guide under book/ is compiled here so its snippets run with `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/torus.md")]
    mod torus {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/visit-sets.md")]
    mod visit_sets {}
    #[doc = include_str!("../../../book/src/pasting.md")]
    mod pasting {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/thinning.md")]
    mod thinning {}
    #[doc = include_str!("../../../book/src/rational.md")]
    mod rational {}
    #[doc = include_str!("../../../book/src/counterexamples.md")]
    mod counterexamples {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
