//! Battery drain accounting in %-battery units.

pub mod fit;
mod ledger;
mod link;
mod preset;

pub use fit::{fit_preset, Anchor, AnchorResidual, Exposure, FitConstraint, FitError, FitReport, Measure, Param};
pub use ledger::{LedgerError, RadioLedger, RadioState, StateTimes, Transition};
pub use link::{LinkKind, LinkProfile, StatePower};
pub use preset::{EnergyPreset, LinkSet, GSM_POWER_SCALE};
