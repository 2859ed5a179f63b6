//! Incremental cost per click and valuation bounds from GSP bids.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, EstimationError, Result};
use crate::isotonic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IccSequence {
    /// `ICC_{s,s+1}` for each filled slot `s`.
    pub icc: Vec<f64>,
    /// Slot-effect weights `d_s`; all ones before monotonization.
    pub weights: Vec<f64>,
    /// Bid scores in slot order, including the first loser if observed.
    pub scores: Vec<f64>,
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl IccSequence {
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.icc.windows(2).all(|w| w[0] + tol * w[0].abs().max(1.0) >= w[1])
    }

    /// `sum_s (1 - d_s^2)`.
    pub fn objective(&self) -> f64 {
        self.weights.iter().map(|d| 1.0 - d * d).sum()
    }
}

/// ICCs under slot weights `d`; `None` when the weighted slot effects are
/// not strictly decreasing.
pub fn weighted_icc(scores: &[f64], alpha: &[f64], d: &[f64]) -> Option<Vec<f64>> {
    let filled = d.len();
    let eff = |s: usize| if s < filled { alpha[s] * d[s] } else { 0.0 };
    let score = |s: usize| scores.get(s).copied().unwrap_or(0.0);
    (0..filled)
        .map(|s| {
            let (hi, lo) = (eff(s), eff(s + 1));
            (hi > lo).then(|| (score(s + 1) * hi - score(s + 2) * lo) / (hi - lo))
        })
        .collect()
}

/// Raw ICCs from bid scores (`gamma * b`) sorted in slot order.
pub fn compute_icc(scores: &[f64], alpha: &[f64]) -> Result<IccSequence> {
    if scores.windows(2).any(|w| w[0] < w[1]) {
        return Err(invalid("bid scores must be in slot order"));
    }
    let filled = scores.len().min(alpha.len());
    for s in 0..filled {
        let next = if s + 1 < filled { alpha[s + 1] } else { 0.0 };
        if alpha[s] <= next {
            return Err(EstimationError::FlatSlotEffects { upper: s + 1, lower: s + 2 });
        }
    }
    let weights = vec![1.0; filled];
    let icc = weighted_icc(scores, alpha, &weights).expect("slot effects checked");
    Ok(IccSequence { icc, weights, scores: scores.to_vec(), alpha: alpha[..filled].to_vec(), warnings: vec![] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonotonizeConfig {
    pub tol: f64,
    /// Smallest compass step before the search stops.
    pub min_step: f64,
}

impl Default for MonotonizeConfig {
    fn default() -> Self {
        Self { tol: 1e-9, min_step: 1e-10 }
    }
}

/// Weights `d` in `[0,1]^S` with the fewest squared shortfalls from one that
/// make the weighted ICCs non-increasing.
///
/// Starts from `d = 1` when that is already feasible, otherwise from the best
/// feasible geometric profile `d_s = r^s`, then runs a feasibility-preserving
/// compass search over single and paired coordinate moves. If no feasible
/// point is found the raw ICCs are projected isotonically instead.
pub fn monotonize_icc(raw: &IccSequence, cfg: &MonotonizeConfig) -> IccSequence {
    let n = raw.icc.len();
    let feasible = |d: &[f64]| -> Option<Vec<f64>> {
        let icc = weighted_icc(&raw.scores, &raw.alpha, d)?;
        icc.windows(2).all(|w| w[0] + cfg.tol * w[0].abs().max(1.0) >= w[1]).then_some(icc)
    };
    let value = |d: &[f64]| d.iter().map(|x| 1.0 - x * x).sum::<f64>();
    let ones = vec![1.0; n];
    if feasible(&ones).is_some() {
        return raw.clone();
    }

    let mut best: Option<Vec<f64>> = None;
    for k in 1..=400 {
        let r = (-(k as f64) * 0.05).exp();
        let d: Vec<f64> = (0..n).map(|s| r.powi(s as i32)).collect();
        if feasible(&d).is_some() && best.as_ref().is_none_or(|b| value(&d) < value(b)) {
            best = Some(d);
        }
    }
    let Some(mut d) = best else {
        return isotonic_fallback(raw, "no feasible slot weights found");
    };

    let mut step = 0.25;
    while step >= cfg.min_step {
        let mut improved = false;
        for i in 0..n {
            for target in [1.0, d[i] + step] {
                let mut trial = d.clone();
                trial[i] = f64::min(target, 1.0);
                if trial[i] > d[i] && feasible(&trial).is_some() {
                    d = trial;
                    improved = true;
                    break;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut trial = d.clone();
                trial[i] = (d[i] + step).min(1.0);
                trial[j] = (d[j] - step).max(0.0);
                if value(&trial) < value(&d) - 1e-15 && feasible(&trial).is_some() {
                    d = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    match feasible(&d) {
        Some(icc) => IccSequence { icc, weights: d, ..raw.clone() },
        None => isotonic_fallback(raw, "slot weight search ended infeasible"),
    }
}

fn isotonic_fallback(raw: &IccSequence, why: &str) -> IccSequence {
    let mut out = raw.clone();
    out.icc = isotonic::decreasing(&raw.icc, &vec![1.0; raw.icc.len()]);
    out.warnings.push(format!("{why}; using isotonic regression of the raw ICCs"));
    out
}

/// Interval `(L, U]` containing a value per click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalObservation {
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl IntervalObservation {
    pub fn new(lower: f64, upper: f64, weight: f64) -> Result<Self> {
        if !(lower >= 0.0 && upper > lower && upper.is_finite() && weight > 0.0) {
            return Err(invalid(format!("bad interval ({lower}, {upper}] with weight {weight}")));
        }
        Ok(Self { lower, upper, weight })
    }
}

/// Value bounds for the advertiser in `slot` (0-based): between the ICCs of
/// its two boundaries, with `2 b_max` on top and zero at the bottom.
pub fn valuation_bounds(icc: &IccSequence, slot: usize, gamma: f64, b_max: f64) -> Result<IntervalObservation> {
    let last = icc.icc.len().checked_sub(1).ok_or_else(|| invalid("empty ICC sequence"))?;
    if slot > last || !(gamma > 0.0) {
        return Err(invalid(format!("slot {slot} or quality {gamma} out of range")));
    }
    let lower = if slot == last { 0.0 } else { icc.icc[slot] / gamma };
    let upper = if slot == 0 { 2.0 * b_max } else { icc.icc[slot - 1] / gamma };
    // equal neighbouring ICCs pin the value; keep the interval non-empty
    let upper = upper.max(lower + 1e-9 * lower.max(1.0));
    IntervalObservation::new(lower, upper, 1.0)
}
