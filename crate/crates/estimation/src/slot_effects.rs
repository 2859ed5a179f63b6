//! Slot and advertiser click effects from a CTR panel.
//!
//! `log y = log alpha_s + log gamma_a + noise`, fitted by weighted least
//! squares with alternating projections, then `log alpha` is projected onto
//! the non-increasing cone and `gamma` refitted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Component, EstimationError, Result};
use crate::isotonic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtrPanelRow {
    pub advertiser: String,
    /// Position label; smaller is higher on the page.
    pub slot: u32,
    pub day: u32,
    pub impressions: u64,
    pub clicks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionWeights {
    #[default]
    Impressions,
    Unweighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlotEffectConfig {
    /// Added to zero click counts; `None` drops those rows instead.
    pub zero_click_correction: Option<f64>,
    pub weights: RegressionWeights,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SlotEffectConfig {
    fn default() -> Self {
        Self { zero_click_correction: Some(0.5), weights: RegressionWeights::Impressions, tol: 1e-13, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotEffects {
    pub slots: Vec<u32>,
    /// Non-increasing, with the top slot at 1.
    pub alpha: Vec<f64>,
    pub advertisers: Vec<String>,
    pub gamma: Vec<f64>,
    /// Weighted R² of the constrained fit on log CTR.
    pub r2: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Obs {
    slot: usize,
    adv: usize,
    y: f64,
    w: f64,
}

pub fn estimate_slot_effects(panel: &[CtrPanelRow], cfg: &SlotEffectConfig) -> Result<SlotEffects> {
    let mut slot_ids = BTreeMap::new();
    let mut adv_ids = BTreeMap::new();
    let mut obs = Vec::with_capacity(panel.len());
    for r in panel {
        if r.impressions == 0 {
            return Err(invalid(format!("row for advertiser {} in slot {} has no impressions", r.advertiser, r.slot)));
        }
        if r.clicks > r.impressions {
            return Err(invalid(format!("row for advertiser {} in slot {} has more clicks than impressions", r.advertiser, r.slot)));
        }
        let clicks = match (r.clicks, cfg.zero_click_correction) {
            (0, None) => continue,
            (0, Some(c)) => c,
            (k, _) => k as f64,
        };
        slot_ids.entry(r.slot).or_insert(0);
        adv_ids.entry(r.advertiser.clone()).or_insert(0);
        let w = match cfg.weights {
            RegressionWeights::Impressions => r.impressions as f64,
            RegressionWeights::Unweighted => 1.0,
        };
        obs.push((r.slot, r.advertiser.clone(), (clicks / r.impressions as f64).ln(), w));
    }
    if obs.is_empty() {
        return Err(invalid("panel has no usable rows"));
    }
    for (i, v) in slot_ids.values_mut().enumerate() {
        *v = i;
    }
    for (i, v) in adv_ids.values_mut().enumerate() {
        *v = i;
    }
    let slots: Vec<u32> = slot_ids.keys().copied().collect();
    let advertisers: Vec<String> = adv_ids.keys().cloned().collect();
    let obs: Vec<Obs> = obs.into_iter().map(|(s, a, y, w)| Obs { slot: slot_ids[&s], adv: adv_ids[&a], y, w }).collect();
    check_connected(&obs, &slots, &advertisers)?;

    let (ns, na) = (slots.len(), advertisers.len());
    let mut slot_w = vec![0.0; ns];
    let mut adv_w = vec![0.0; na];
    for o in &obs {
        slot_w[o.slot] += o.w;
        adv_w[o.adv] += o.w;
    }
    let mut a = vec![0.0; ns];
    let mut g = adv_means(&obs, &a, &adv_w);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut sum = vec![0.0; ns];
        for o in &obs {
            sum[o.slot] += o.w * (o.y - g[o.adv]);
        }
        let new_a: Vec<f64> = sum.iter().zip(&slot_w).map(|(s, w)| s / w).collect();
        let new_g = adv_means(&obs, &new_a, &adv_w);
        // pin the top slot so the free level does not drift
        let shift = new_a[0];
        let delta = new_a
            .iter()
            .zip(&a)
            .map(|(x, y)| (x - shift - y).abs())
            .chain(new_g.iter().zip(&g).map(|(x, y)| (x + shift - y).abs()))
            .fold(0.0, f64::max);
        a = new_a.iter().map(|x| x - shift).collect();
        g = new_g.iter().map(|x| x + shift).collect();
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    let mut log_alpha = isotonic::decreasing(&a, &slot_w);
    let top = log_alpha[0];
    log_alpha.iter_mut().for_each(|x| *x -= top);
    let log_gamma = adv_means(&obs, &log_alpha, &adv_w);

    let wsum: f64 = obs.iter().map(|o| o.w).sum();
    let ybar = obs.iter().map(|o| o.w * o.y).sum::<f64>() / wsum;
    let sst: f64 = obs.iter().map(|o| o.w * (o.y - ybar).powi(2)).sum();
    let ssr: f64 = obs.iter().map(|o| o.w * (o.y - log_alpha[o.slot] - log_gamma[o.adv]).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };

    Ok(SlotEffects {
        slots,
        alpha: log_alpha.iter().map(|x| x.exp()).collect(),
        advertisers,
        gamma: log_gamma.iter().map(|x| x.exp()).collect(),
        r2,
        iterations,
        converged,
    })
}

fn adv_means(obs: &[Obs], a: &[f64], adv_w: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; adv_w.len()];
    for o in obs {
        sum[o.adv] += o.w * (o.y - a[o.slot]);
    }
    sum.iter().zip(adv_w).map(|(s, w)| s / w).collect()
}

fn check_connected(obs: &[Obs], slots: &[u32], advertisers: &[String]) -> Result<()> {
    let ns = slots.len();
    let mut parent: Vec<usize> = (0..ns + advertisers.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for o in obs {
        let (x, y) = (find(&mut parent, o.slot), find(&mut parent, ns + o.adv));
        parent[x] = y;
    }
    let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
    for i in 0..parent.len() {
        let root = find(&mut parent, i);
        let c = groups.entry(root).or_insert_with(|| Component { slots: vec![], advertisers: vec![] });
        if i < ns {
            c.slots.push(slots[i]);
        } else {
            c.advertisers.push(advertisers[i - ns].clone());
        }
    }
    if groups.len() > 1 {
        return Err(EstimationError::Disconnected { components: groups.into_values().collect() });
    }
    Ok(())
}
