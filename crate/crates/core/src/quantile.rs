//! Valuation-to-quantile maps per (advertiser, inventory type).
//!
//! Atoms are ranked by how readily the single-advertiser mechanisms allocate
//! the type to them; each atom owns the slice of `[0,1]` its rank and weight
//! imply, so quantiles of prior draws are uniform. Quantiles are then
//! re-drawn uniformly within the curve segment (constant marginal revenue)
//! they fall in.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ValuationPrior;
use crate::revenue_curve::{RevenueCurve, VertexChoices};
use crate::single_agent::AgentModel;

const KEY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapperMode {
    Nested,
    Interim,
}

impl std::str::FromStr for MapperMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nested" => Ok(Self::Nested),
            "interim" => Ok(Self::Interim),
            other => Err(Error::InvalidInput(format!("unknown mapper mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuantileMapper {
    mode: MapperMode,
    type_index: usize,
    /// Rank interval of each atom.
    intervals: Vec<(f64, f64)>,
    /// Nested: first covering quantile. Interim: interim allocation probability.
    keys: Vec<f64>,
    /// Curve segments within which quantiles are re-drawn.
    segments: Vec<(f64, f64)>,
    warnings: Vec<String>,
}

/// Result of mapping an arbitrary valuation vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedValue {
    pub quantile: f64,
    pub atom: usize,
    /// False when the vector was not an atom and its nearest atom was used.
    pub exact: bool,
}

impl QuantileMapper {
    pub fn mode(&self) -> MapperMode {
        self.mode
    }

    pub fn type_index(&self) -> usize {
        self.type_index
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn rank_interval(&self, atom: usize) -> (f64, f64) {
        self.intervals[atom]
    }

    pub fn key(&self, atom: usize) -> f64 {
        self.keys[atom]
    }

    /// Quantile of an atom before segment resampling.
    pub fn rank_quantile<R: Rng + ?Sized>(&self, atom: usize, rng: &mut R) -> f64 {
        let (lo, hi) = self.intervals[atom];
        lo + rng.random::<f64>() * (hi - lo)
    }

    /// Quantile of an atom: a uniform point of its rank interval, re-drawn
    /// uniformly within the curve segment containing it.
    pub fn map_atom<R: Rng + ?Sized>(&self, atom: usize, rng: &mut R) -> f64 {
        let q = self.rank_quantile(atom, rng);
        let k = self.segments.partition_point(|s| s.1 <= q).min(self.segments.len() - 1);
        let (a, b) = self.segments[k];
        a + rng.random::<f64>() * (b - a)
    }

    /// Maps a valuation vector, falling back to the nearest atom under the
    /// distance `sum_t w_t (v_t - a_t)^2` when it is not an atom.
    pub fn map_vector<R: Rng + ?Sized>(&self, v: &[f64], prior: &ValuationPrior, metric: &[f64], rng: &mut R) -> MappedValue {
        let (atom, dist) = nearest_atom(v, prior, metric);
        if dist > 0.0 {
            log::warn!("valuation {v:?} is not a prior atom; using nearest atom {atom}");
        }
        MappedValue { quantile: self.map_atom(atom, rng), atom, exact: dist == 0.0 }
    }
}

/// Index of the closest atom and its weighted squared distance.
pub fn nearest_atom(v: &[f64], prior: &ValuationPrior, metric: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, a) in prior.atoms().enumerate() {
        let d: f64 = a.iter().zip(v).zip(metric).map(|((x, y), w)| w * (x - y) * (x - y)).sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Orders atoms by `key` (ascending when `ascending`), grouping keys within
/// `tol`, and assigns each group the weight-proportional slice of `[0,1]`.
fn rank_intervals(keys: &[f64], weights: &[f64], ascending: bool, tol: f64) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|a, b| {
        let c = keys[*a].total_cmp(&keys[*b]);
        if ascending { c } else { c.reverse() }
    });
    let mut out = vec![(0.0, 0.0); keys.len()];
    let mut start = 0.0;
    let mut i = 0;
    while i < order.len() {
        let head = keys[order[i]];
        let mut j = i;
        let mut mass = 0.0;
        while j < order.len() && (keys[order[j]] - head).abs() <= tol {
            mass += weights[order[j]];
            j += 1;
        }
        let end = (start + mass).min(1.0);
        for k in &order[i..j] {
            out[*k] = (start, end);
        }
        start = end;
        i = j;
    }
    // absorb rounding so the last group ends at exactly 1
    if let Some(last) = order.last() {
        let hi_key = keys[*last];
        for (k, iv) in out.iter_mut().enumerate() {
            if (keys[k] - hi_key).abs() <= tol {
                iv.1 = 1.0;
            }
        }
    }
    out
}

fn curve_segments(curve: &RevenueCurve) -> Vec<(f64, f64)> {
    (0..curve.segment_count()).map(|k| curve.segment_bounds(k)).collect()
}

/// True when every atom's chosen item at every vertex menu allocates `t` with
/// probability 0 or 1.
pub fn deterministic_for(curve: &RevenueCurve, choices: &VertexChoices, atoms: usize, t: usize) -> bool {
    (0..curve.vertex_count()).all(|k| (0..atoms).all(|i| {
        let x = choices.alloc(k, i, t);
        x == 0.0 || x == 1.0
    }))
}

/// Nested mapper from precomputed vertex choices.
pub fn nested_mapper(curve: &RevenueCurve, choices: &VertexChoices, weights: &[f64], t: usize) -> Result<QuantileMapper> {
    let n = weights.len();
    if !deterministic_for(curve, choices, n, t) {
        return Err(Error::NonDeterministic { type_index: t });
    }
    // smallest vertex quantile whose menu hands type t to the atom
    let keys: Vec<f64> = (0..n)
        .map(|i| {
            (0..curve.vertex_count())
                .find(|k| choices.alloc(*k, i, t) == 1.0)
                .map_or(1.0, |k| curve.vertex_quantile(k))
        })
        .collect();
    // atoms that lose the type again at a larger cap break the nesting the
    // construction assumes
    let unnested = (0..n)
        .filter(|i| {
            let first = (0..curve.vertex_count()).find(|k| choices.alloc(*k, *i, t) == 1.0);
            first.is_some_and(|f| (f..curve.vertex_count()).any(|k| choices.alloc(k, *i, t) == 0.0))
        })
        .count();
    let mut warnings = Vec::new();
    if unnested > 0 {
        warnings.push(format!("{unnested} atoms are not nested in the allocation of type {t}"));
    }
    Ok(QuantileMapper {
        mode: MapperMode::Nested,
        type_index: t,
        intervals: rank_intervals(&keys, weights, true, KEY_TOL),
        keys,
        segments: curve_segments(curve),
        warnings,
    })
}

/// Ranks atoms by the smallest cap at which the curve's mechanism allocates
/// type `t` to them with certainty.
pub fn build_nested_mapper(curve: &RevenueCurve, model: &AgentModel, t: usize) -> Result<QuantileMapper> {
    let choices = VertexChoices::new(curve, model);
    let weights: Vec<f64> = (0..model.atom_count()).map(|i| model.weight(i)).collect();
    nested_mapper(curve, &choices, &weights, t)
}

/// Probability of winning the top slot as a function of own curve segment,
/// against opponents holding uniform quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct MrAllocationProfile {
    /// Monte-Carlo estimate per segment of the advertiser's curve.
    pub raw: Vec<f64>,
    /// Non-increasing, normalized so the first segment is 1 (the last vertex is 0).
    pub x: Vec<f64>,
    /// Segments whose raw estimate exceeds its predecessor by more than 3 standard errors.
    pub flagged: Vec<usize>,
    pub samples: usize,
}

impl MrAllocationProfile {
    /// Weight of each vertex menu in the interim mechanism (`-dx`).
    pub fn vertex_weights(&self) -> Vec<f64> {
        let v = self.x.len() + 1;
        let mut w = vec![0.0; v];
        let mut prev = 1.0;
        for (k, x) in self.x.iter().enumerate() {
            w[k] = prev - x;
            prev = *x;
        }
        w[v - 1] = prev;
        w
    }
}

/// Marginal revenue of `curves[b]` at quantile `u`, scaled by `gammas[b]`.
fn scaled_marginal(curves: &[&RevenueCurve], gammas: &[f64], b: usize, u: f64) -> f64 {
    gammas[b] * curves[b].marginal(u)
}

/// Estimates, for each segment of advertiser `a`'s curve, the probability that
/// `a` ranks first by scaled marginal revenue (ties to the lower index).
pub fn mr_allocation_profile<R: Rng + ?Sized>(
    curves: &[&RevenueCurve],
    gammas: &[f64],
    a: usize,
    samples: usize,
    rng: &mut R,
) -> MrAllocationProfile {
    let own = curves[a];
    let samples = samples.max(1);
    let raw: Vec<f64> = own
        .slopes()
        .iter()
        .map(|s| {
            let m = gammas[a] * s;
            if m <= 0.0 {
                return 0.0;
            }
            let wins = (0..samples)
                .filter(|_| {
                    (0..curves.len()).filter(|b| *b != a).all(|b| {
                        let mb = scaled_marginal(curves, gammas, b, rng.random::<f64>());
                        mb < m || (mb == m && a < b)
                    })
                })
                .count();
            wins as f64 / samples as f64
        })
        .collect();

    let flagged = (1..raw.len())
        .filter(|k| {
            let var = |x: f64| x * (1.0 - x) / samples as f64;
            raw[*k] - raw[k - 1] > 3.0 * (var(raw[*k]) + var(raw[k - 1])).sqrt().max(1e-12)
        })
        .collect();

    let mut x = antitonic(&raw);
    let top = x.first().copied().unwrap_or(0.0);
    if top > 0.0 {
        for v in x.iter_mut() {
            *v /= top;
        }
    }
    MrAllocationProfile { raw, x, flagged, samples }
}

/// Non-increasing least-squares fit (pool adjacent violators, equal weights).
fn antitonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for v in y {
        blocks.push((*v, 1));
        while blocks.len() >= 2 {
            let k = blocks.len();
            let (m1, n1) = blocks[k - 2];
            let (m2, n2) = blocks[k - 1];
            if m1 < m2 {
                blocks.truncate(k - 2);
                blocks.push(((m1 * n1 as f64 + m2 * n2 as f64) / (n1 + n2) as f64, n1 + n2));
            } else {
                break;
            }
        }
    }
    blocks.iter().flat_map(|(m, n)| std::iter::repeat(*m).take(*n)).collect()
}

/// Interim mapper from an allocation profile and precomputed vertex choices.
pub fn interim_mapper(
    curve: &RevenueCurve,
    choices: &VertexChoices,
    weights: &[f64],
    profile: &MrAllocationProfile,
    t: usize,
) -> QuantileMapper {
    let vw = profile.vertex_weights();
    let keys: Vec<f64> = (0..weights.len())
        .map(|i| vw.iter().enumerate().map(|(k, w)| w * choices.alloc(k, i, t)).sum())
        .collect();
    let mut warnings = Vec::new();
    let tol = if profile.samples < 1000 {
        warnings.push(format!(
            "{} opponent draws cannot resolve interim allocations finely; ties widened",
            profile.samples
        ));
        1.0 / (profile.samples as f64).sqrt()
    } else {
        KEY_TOL
    };
    if !profile.flagged.is_empty() {
        warnings.push(format!("allocation profile non-monotone beyond noise at segments {:?}", profile.flagged));
    }
    QuantileMapper {
        mode: MapperMode::Interim,
        type_index: t,
        intervals: rank_intervals(&keys, weights, false, tol),
        keys,
        segments: curve_segments(curve),
        warnings,
    }
}

/// Ranks atoms of advertiser `a` by their interim probability of receiving
/// type `t` under the marginal-revenue rule against all other advertisers.
pub fn build_interim_mapper<R: Rng + ?Sized>(
    curves: &[&RevenueCurve],
    gammas: &[f64],
    a: usize,
    model: &AgentModel,
    t: usize,
    mc_samples: usize,
    rng: &mut R,
) -> QuantileMapper {
    let profile = mr_allocation_profile(curves, gammas, a, mc_samples, rng);
    let choices = VertexChoices::new(curves[a], model);
    let weights: Vec<f64> = (0..model.atom_count()).map(|i| model.weight(i)).collect();
    interim_mapper(curves[a], &choices, &weights, &profile, t)
}
