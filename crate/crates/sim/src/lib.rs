//! Monte-Carlo comparison of position-auction mechanisms.

pub mod config;
pub mod error;
pub mod metrics;
pub mod report;
pub mod simulate;
pub mod synth;

pub use config::{MechanismKind, MechanismSpec, Participation, RegimeSpec, SimulationConfig};
pub use error::{Result, SimError};
pub use metrics::{welfare_metrics, Estimate, MechanismMetrics, MetricsReport};
pub use simulate::{run_comparison, SimulationResult};
