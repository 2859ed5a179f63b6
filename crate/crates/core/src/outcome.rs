//! Per-auction results shared by both mechanisms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub seed: u64,
    pub type_index: usize,
    /// Advertiser in each slot.
    pub assignment: Vec<Option<usize>>,
    /// Quantile of each participating advertiser (IBPA only).
    pub quantiles: Vec<Option<f64>>,
    /// Quantile at which each winner would drop out of its slot (IBPA only).
    pub critical_quantiles: Vec<Option<f64>>,
    /// Expected charge given the realized type.
    pub expected_payments: Vec<f64>,
    pub per_click_payments: Vec<f64>,
    pub utilities: Vec<f64>,
    pub revenue: f64,
}

impl MechanismOutcome {
    pub fn empty(seed: u64, type_index: usize, slots: usize, advertisers: usize) -> Self {
        Self {
            seed,
            type_index,
            assignment: vec![None; slots],
            quantiles: vec![None; advertisers],
            critical_quantiles: vec![None; advertisers],
            expected_payments: vec![0.0; advertisers],
            per_click_payments: vec![0.0; advertisers],
            utilities: vec![0.0; advertisers],
            revenue: 0.0,
        }
    }

    pub fn slot_of(&self, a: usize) -> Option<usize> {
        self.assignment.iter().position(|x| *x == Some(a))
    }

    pub fn any_sold(&self) -> bool {
        self.assignment.iter().any(Option::is_some)
    }

    pub fn advertiser_welfare(&self) -> f64 {
        self.utilities.iter().sum()
    }

    pub fn to_record(&self) -> OutcomeRecord {
        OutcomeRecord {
            seed: self.seed,
            type_index: self.type_index,
            assignment: self.assignment.clone(),
            payments: self.expected_payments.clone(),
            utilities: self.utilities.clone(),
            revenue: self.revenue,
        }
    }
}

/// One line of an outcome stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub seed: u64,
    #[serde(rename = "type")]
    pub type_index: usize,
    pub assignment: Vec<Option<usize>>,
    pub payments: Vec<f64>,
    pub utilities: Vec<f64>,
    pub revenue: f64,
}

/// Writes outcomes as JSON lines.
pub fn write_outcomes<W: Write>(mut w: W, outcomes: &[MechanismOutcome]) -> Result<()> {
    for o in outcomes {
        serde_json::to_writer(&mut w, &o.to_record())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
