//! Estimation of auction primitives from platform logs: slot effects from a
//! click panel, valuation intervals from GSP bids, and valuation
//! distributions from those intervals.

pub mod error;
pub mod icc;
pub mod io;
mod isotonic;
pub mod pipeline;
pub mod slot_effects;
pub mod turnbull;

pub use error::{EstimationError, Result};
pub use icc::{compute_icc, monotonize_icc, valuation_bounds, IccSequence, IntervalObservation, MonotonizeConfig};
pub use slot_effects::{estimate_slot_effects, CtrPanelRow, SlotEffectConfig, SlotEffects};
pub use turnbull::{turnbull_em, TurnbullConfig, TurnbullFit};
