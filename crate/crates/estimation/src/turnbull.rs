//! Nonparametric MLE of a distribution from interval-censored data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use ibpa_core::model::ValuationPrior;

use crate::error::{invalid, Result};
use crate::icc::IntervalObservation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurnbullConfig {
    /// Stop once no interval mass moves by more than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TurnbullConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100_000 }
    }
}

/// Piecewise-uniform CDF: mass spread evenly over each innermost interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnbullFit {
    /// Disjoint `(l, r]`, sorted.
    pub intervals: Vec<(f64, f64)>,
    pub mass: Vec<f64>,
    /// Log-likelihood before the first and after every EM step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Innermost intervals: `(L, R]` with `L` a left endpoint and `R` the next
/// endpoint, itself a right endpoint. At a shared value right endpoints come
/// first, since `(a, x]` and `(x, b]` do not overlap.
pub fn innermost_intervals(obs: &[IntervalObservation]) -> Vec<(f64, f64)> {
    let mut ends: Vec<(f64, bool)> = obs.iter().flat_map(|o| [(o.lower, false), (o.upper, true)]).collect();
    ends.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    ends.windows(2)
        .filter(|w| !w[0].1 && w[1].1)
        .map(|w| (w[0].0, w[1].0))
        .collect()
}

pub fn turnbull_em(obs: &[IntervalObservation], cfg: &TurnbullConfig) -> Result<TurnbullFit> {
    if obs.is_empty() {
        return Err(invalid("no interval observations"));
    }
    let intervals = innermost_intervals(obs);
    let m = intervals.len();
    // each observation covers a contiguous run of innermost intervals
    let ranges: Vec<(usize, usize)> = obs
        .iter()
        .map(|o| {
            let start = intervals.partition_point(|iv| iv.0 < o.lower);
            let end = intervals.partition_point(|iv| iv.1 <= o.upper);
            (start, end)
        })
        .collect();
    let total: f64 = obs.iter().map(|o| o.weight).sum();

    let mut mass = vec![1.0 / m as f64; m];
    let mut prefix = vec![0.0; m + 1];
    let loglik = |prefix: &[f64]| -> f64 {
        obs.iter().zip(&ranges).map(|(o, (s, e))| o.weight * (prefix[*e] - prefix[*s]).ln()).sum()
    };
    let fill = |prefix: &mut [f64], mass: &[f64]| {
        for j in 0..m {
            prefix[j + 1] = prefix[j] + mass[j];
        }
    };
    fill(&mut prefix, &mass);
    let mut trace = vec![loglik(&prefix)];
    let mut diff = vec![0.0; m + 1];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        diff.iter_mut().for_each(|x| *x = 0.0);
        for (o, (s, e)) in obs.iter().zip(&ranges) {
            let share = o.weight / (prefix[*e] - prefix[*s]);
            diff[*s] += share;
            diff[*e] -= share;
        }
        let mut acc = 0.0;
        let mut change: f64 = 0.0;
        for j in 0..m {
            acc += diff[j];
            let next = mass[j] * acc / total;
            change = change.max((next - mass[j]).abs());
            mass[j] = next;
        }
        fill(&mut prefix, &mass);
        trace.push(loglik(&prefix));
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    let s: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|x| *x /= s);
    Ok(TurnbullFit { intervals, mass, log_likelihood: trace, iterations, converged })
}

impl TurnbullFit {
    pub fn cdf(&self, x: f64) -> f64 {
        let mut c = 0.0;
        for ((l, r), p) in self.intervals.iter().zip(&self.mass) {
            if x >= *r {
                c += p;
            } else if x > *l {
                c += p * (x - l) / (r - l);
            }
        }
        c.min(1.0)
    }

    /// Inverse CDF for `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut c = 0.0;
        for ((l, r), p) in self.intervals.iter().zip(&self.mass) {
            if *p > 0.0 && c + p >= u {
                return l + (r - l) * ((u - c) / p).clamp(0.0, 1.0);
            }
            c += p;
        }
        self.intervals.last().map_or(0.0, |iv| iv.1)
    }

    pub fn mean(&self) -> f64 {
        self.intervals.iter().zip(&self.mass).map(|((l, r), p)| p * (l + r) / 2.0).sum()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Joint prior over types with independent marginals from per-type fits.
pub fn prior_from_marginals(fits: &[TurnbullFit], samples: usize, seed: u64) -> Result<ValuationPrior> {
    if fits.is_empty() {
        return Err(invalid("no per-type fits"));
    }
    Ok(ValuationPrior::sample_with(samples, seed, |rng| fits.iter().map(|f| f.draw(rng)).collect())?)
}
