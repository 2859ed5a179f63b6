//! Generalized second-price benchmark.
//!
//! Advertisers bid per click on the disclosed block, knowing only its
//! CTR-weighted average value. Ranking is by bid times quality and each
//! winner pays the next score divided by its own quality.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{AuctionEnvironment, AuctionInstance, Partition, Regime};
use crate::outcome::MechanismOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equilibrium {
    /// Revenue-maximal envy-free bids.
    #[default]
    EnvyFreeUpper,
    /// Everyone bids its value.
    TruthfulProxy,
}

impl std::str::FromStr for Equilibrium {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "envy_free_upper" | "upper" => Ok(Self::EnvyFreeUpper),
            "truthful_proxy" | "truthful" => Ok(Self::TruthfulProxy),
            other => Err(invalid(format!("unknown equilibrium {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GspConfig {
    /// Only the disclosure partition matters: GSP under `(info, disc)`
    /// behaves as under `(disc, disc)`.
    pub regime: Regime,
    /// Per-click reserve.
    #[serde(default)]
    pub reserve: f64,
    #[serde(default)]
    pub equilibrium: Equilibrium,
}

/// Envy-free bid profile in score (`gamma * bid`) units.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvyFreeProfile {
    /// Bid score of each rank; rank `s + 1` sets the price of slot `s`.
    pub bid_scores: Vec<f64>,
    /// Price of each filled slot in score units.
    pub prices: Vec<f64>,
}

/// Revenue-maximal envy-free profile for scores sorted in decreasing order.
///
/// Losers bid their scores, so the last filled slot pays the first loser's
/// score; above it each slot holder is exactly indifferent to dropping one
/// slot, i.e. `alpha_s P_s = (alpha_s - alpha_{s+1}) sigma_s + alpha_{s+1} P_{s+1}`.
pub fn envy_free_upper_bids(scores: &[f64], alpha: &[f64]) -> EnvyFreeProfile {
    let filled = alpha.len().min(scores.len());
    let mut prices = vec![0.0; filled];
    if filled > 0 {
        prices[filled - 1] = scores.get(filled).copied().unwrap_or(0.0);
        for s in (0..filled - 1).rev() {
            prices[s] = if alpha[s] > 0.0 {
                ((alpha[s] - alpha[s + 1]) * scores[s] + alpha[s + 1] * prices[s + 1]) / alpha[s]
            } else {
                prices[s + 1]
            };
        }
    }
    let mut bid_scores = scores.to_vec();
    for s in 1..=filled.min(scores.len().saturating_sub(1)) {
        bid_scores[s] = prices[s - 1];
    }
    EnvyFreeProfile { bid_scores, prices }
}

/// `ICC_{s,s+1}` of each adjacent pair of filled slots, from slot prices in
/// score units; the last uses a zero slot effect below.
pub fn incremental_costs(prices: &[f64], alpha: &[f64]) -> Vec<f64> {
    (0..prices.len())
        .map(|s| {
            let below = if s + 1 < prices.len() { alpha[s + 1] * prices[s + 1] } else { 0.0 };
            let a_next = if s + 1 < prices.len() { alpha[s + 1] } else { 0.0 };
            (alpha[s] * prices[s] - below) / (alpha[s] - a_next)
        })
        .collect()
}

/// GSP bound to an environment: block weights for the disclosure partition.
#[derive(Debug, Clone)]
pub struct Gsp {
    config: GspConfig,
    disc: Partition,
    /// `p_t beta_t` share of each type within its block.
    type_weight: Vec<f64>,
    slot_effects: Vec<f64>,
    type_effects: Vec<f64>,
    gammas: Vec<f64>,
}

impl Gsp {
    pub fn new(env: &AuctionEnvironment, config: GspConfig) -> Result<Self> {
        if config.regime.type_count() != env.type_count() {
            return Err(invalid("regime and environment have different type counts"));
        }
        if !(config.reserve >= 0.0) {
            return Err(invalid("reserve must be non-negative"));
        }
        let disc = config.regime.disc().clone();
        let p = env.inventory().probs();
        let beta = env.type_effects();
        let mut type_weight = vec![0.0; env.type_count()];
        for members in disc.blocks() {
            let mass: f64 = members.iter().map(|t| p[*t] * beta[*t]).sum();
            for t in &members {
                type_weight[*t] = if mass > 0.0 { p[*t] * beta[*t] / mass } else { 1.0 / members.len() as f64 };
            }
        }
        Ok(Self {
            config,
            disc,
            type_weight,
            slot_effects: env.slot_effects().to_vec(),
            type_effects: env.type_effects().to_vec(),
            gammas: env.gammas().to_vec(),
        })
    }

    pub fn config(&self) -> &GspConfig {
        &self.config
    }

    /// Expected value per click of valuation `v` given the block of type `t`.
    pub fn block_value(&self, v: &[f64], t: usize) -> f64 {
        let b = self.disc.block_of(t);
        (0..v.len()).filter(|u| self.disc.block_of(*u) == b).map(|u| self.type_weight[u] * v[u]).sum()
    }

    pub fn run(&self, instance: &AuctionInstance) -> MechanismOutcome {
        let n = self.gammas.len();
        let slots = self.slot_effects.len();
        let t = instance.type_index;
        let mut out = MechanismOutcome::empty(instance.seed, t, slots, n);
        let reserve = self.config.reserve;

        let mut bidders: Vec<(usize, f64)> = instance
            .participants()
            .map(|a| (a, self.block_value(&instance.valuations[a], t)))
            .filter(|(_, v)| *v > 0.0 && *v >= reserve)
            .map(|(a, v)| (a, self.gammas[a] * v))
            .collect();
        bidders.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let scores: Vec<f64> = bidders.iter().map(|b| b.1).collect();
        let prices: Vec<f64> = match self.config.equilibrium {
            Equilibrium::EnvyFreeUpper => envy_free_upper_bids(&scores, &self.slot_effects).prices,
            Equilibrium::TruthfulProxy => (0..slots.min(scores.len())).map(|s| scores.get(s + 1).copied().unwrap_or(0.0)).collect(),
        };

        for (s, price) in prices.iter().enumerate() {
            let a = bidders[s].0;
            let gamma = self.gammas[a];
            let per_click = (price / gamma).max(reserve);
            let clicks = self.slot_effects[s] * self.type_effects[t] * gamma;
            out.assignment[s] = Some(a);
            out.per_click_payments[a] = per_click;
            out.expected_payments[a] = clicks * per_click;
            out.utilities[a] = clicks * instance.valuations[a][t] - clicks * per_click;
        }
        out.revenue = out.expected_payments.iter().sum();
        out
    }
}

pub fn run_gsp(env: &AuctionEnvironment, config: &GspConfig, instance: &AuctionInstance) -> Result<MechanismOutcome> {
    Ok(Gsp::new(env, config.clone())?.run(instance))
}
