//! Set-level constructions: visit sets, pasting, and representing
//! indicators of open sets.

mod indicator;
mod paste;
mod region;
mod visit;

pub use indicator::{paste_sets, represent_indicator, IndicatorReport, IndicatorRepresentation};
pub use paste::{
    Binding, Certificate, ExtraFloor, PasteMode, PasteProblem, PasteSchedule, StepRecord,
};
pub use region::{Arc64, IntervalStream, TorusRegion};
pub use visit::{visit_set, visit_spectrum_check, VisitReport, VisitRow};
