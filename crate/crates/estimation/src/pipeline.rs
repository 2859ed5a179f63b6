//! From an auction log to per-type valuation distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::icc::{compute_icc, monotonize_icc, valuation_bounds, IntervalObservation, MonotonizeConfig};
use crate::turnbull::{turnbull_em, TurnbullConfig, TurnbullFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionLogRow {
    pub auction_id: String,
    #[serde(rename = "type")]
    pub type_index: usize,
    pub slot_count: usize,
    pub advertiser: String,
    pub gamma: f64,
    pub bid: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueEstimationConfig {
    pub monotonize: MonotonizeConfig,
    pub turnbull: TurnbullConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimates {
    /// Fit per inventory type; `None` for types with no winners in the log.
    pub fits: Vec<Option<TurnbullFit>>,
    pub observations: Vec<Vec<IntervalObservation>>,
    pub b_max: f64,
    pub auctions_used: usize,
    pub warnings: Vec<String>,
}

/// Brackets every winner's value with monotonized ICCs, pools the intervals
/// by inventory type (advertisers are treated as symmetric within a type)
/// and fits one Turnbull estimate per type in parallel.
pub fn estimate_values(log: &[AuctionLogRow], alpha: &[f64], cfg: &ValueEstimationConfig) -> Result<ValueEstimates> {
    if log.is_empty() {
        return Err(invalid("auction log is empty"));
    }
    let b_max = log.iter().map(|r| r.bid).fold(0.0, f64::max);
    let types = log.iter().map(|r| r.type_index).max().unwrap_or(0) + 1;
    let mut auctions: BTreeMap<&str, Vec<&AuctionLogRow>> = BTreeMap::new();
    for r in log {
        if !(r.gamma > 0.0 && r.bid >= 0.0) {
            return Err(invalid(format!("auction {}: bad quality {} or bid {}", r.auction_id, r.gamma, r.bid)));
        }
        auctions.entry(r.auction_id.as_str()).or_default().push(r);
    }

    let mut observations = vec![Vec::new(); types];
    let mut warnings = Vec::new();
    let mut auctions_used = 0;
    for (id, mut rows) in auctions {
        rows.sort_by(|a, b| (b.gamma * b.bid).total_cmp(&(a.gamma * a.bid)));
        let t = rows[0].type_index;
        if rows.iter().any(|r| r.type_index != t || r.slot_count != rows[0].slot_count) {
            return Err(invalid(format!("auction {id}: rows disagree on type or slot count")));
        }
        let slots = rows[0].slot_count.min(alpha.len());
        let scores: Vec<f64> = rows.iter().map(|r| r.gamma * r.bid).collect();
        let raw = match compute_icc(&scores, &alpha[..slots]) {
            Ok(raw) => raw,
            Err(e) => {
                warnings.push(format!("auction {id} skipped: {e}"));
                continue;
            }
        };
        let icc = monotonize_icc(&raw, &cfg.monotonize);
        warnings.extend(icc.warnings.iter().map(|w| format!("auction {id}: {w}")));
        for (s, r) in rows.iter().take(icc.icc.len()).enumerate() {
            observations[t].push(valuation_bounds(&icc, s, r.gamma, b_max)?);
        }
        auctions_used += 1;
    }

    let fits = std::thread::scope(|scope| {
        let handles: Vec<_> = observations
            .iter()
            .map(|obs| scope.spawn(|| (!obs.is_empty()).then(|| turnbull_em(obs, &cfg.turnbull)).transpose()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("Turnbull worker panicked")).collect::<Result<Vec<_>>>()
    })?;
    for (t, fit) in fits.iter().enumerate() {
        match fit {
            None => warnings.push(format!("type {t} has no observations")),
            Some(f) if !f.converged => warnings.push(format!("type {t}: EM stopped after {} iterations without converging", f.iterations)),
            _ => {}
        }
    }
    Ok(ValueEstimates { fits, observations, b_max, auctions_used, warnings })
}
