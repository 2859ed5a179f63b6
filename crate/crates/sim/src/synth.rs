//! Synthetic environments for experiments and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use ibpa_core::model::{AuctionEnvironment, CtrModel, InventoryDistribution, ValuationPrior};

use crate::config::Participation;
use crate::error::{config_error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Uniform,
    Small,
    Rich,
}

impl std::str::FromStr for SynthKind {
    type Err = crate::SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "small" => Ok(Self::Small),
            "rich" => Ok(Self::Rich),
            other => Err(config_error(format!("unknown environment kind {other:?}"))),
        }
    }
}

/// Geometric slot effects `1, r, r^2, ...`.
pub fn geometric_slots(slots: usize, ratio: f64) -> Vec<f64> {
    (0..slots).map(|s| ratio.powi(s as i32)).collect()
}

/// Equally likely atoms at the midpoints of `n` cells of `[0, 1]`.
pub fn uniform_prior(n: usize) -> Result<ValuationPrior> {
    let atoms = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
    Ok(ValuationPrior::discrete(atoms, vec![1.0 / n as f64; n])?)
}

/// One inventory type, symmetric Uniform[0,1] advertisers.
pub fn uniform_symmetric(advertisers: usize, slot_effects: Vec<f64>, atoms: usize) -> Result<AuctionEnvironment> {
    let ctr = CtrModel::new(slot_effects, vec![1.0], vec![1.0; advertisers])?;
    Ok(AuctionEnvironment::new(InventoryDistribution::uniform(1)?, ctr, vec![uniform_prior(atoms)?; advertisers])?)
}

/// Small random environment: `types` inventory types, `advertisers`
/// bidders with log-normal values that share an advertiser level and a type
/// profile, plus idiosyncratic noise.
pub fn random_small(seed: u64, types: usize, advertisers: usize, slots: usize, atoms: usize) -> Result<AuctionEnvironment> {
    if types == 0 || advertisers == 0 || slots == 0 || atoms == 0 {
        return Err(config_error("environment dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..types).map(|_| 0.2 + rng.random::<f64>()).collect();
    let mut beta: Vec<f64> = (0..types).map(|_| rng.random_range(0.5..=1.0)).collect();
    beta[0] = 1.0;
    let gammas: Vec<f64> = (0..advertisers).map(|_| rng.random_range(0.4..=1.0)).collect();
    let mut alpha = vec![1.0];
    for _ in 1..slots {
        let last = *alpha.last().unwrap();
        alpha.push(last * rng.random_range(0.4..0.9));
    }
    let noise = Normal::new(0.0f64, 0.5).expect("valid sd");
    let profile: Vec<f64> = (0..types).map(|_| rng.random_range(-0.5..0.5)).collect();
    let priors = (0..advertisers)
        .map(|a| {
            let level: f64 = rng.random_range(-0.3..0.3);
            let tilt: Vec<f64> = (0..types).map(|_| rng.random_range(-0.4..0.4)).collect();
            ValuationPrior::sample_with(atoms, seed.wrapping_mul(31).wrapping_add(a as u64), |r| {
                (0..types).map(|t| (level + profile[t] + tilt[t] + noise.sample(r)).exp()).collect()
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let ctr = CtrModel::new(alpha, beta, gammas)?;
    Ok(AuctionEnvironment::new(InventoryDistribution::from_weights(&weights)?, ctr, priors)?)
}

/// Platform-like environment: eight inventory types built from three binary
/// attributes, eight slots, ten advertisers with attribute-specific tastes.
pub fn rich(seed: u64, atoms: usize) -> Result<AuctionEnvironment> {
    const TYPES: usize = 8;
    const ADVERTISERS: usize = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attrs = |t: usize| [(t & 1) as f64, ((t >> 1) & 1) as f64, ((t >> 2) & 1) as f64];
    let weights: Vec<f64> = (0..TYPES).map(|_| 0.3 + rng.random::<f64>()).collect();
    let mut beta: Vec<f64> = (0..TYPES).map(|_| rng.random_range(0.6..=1.0)).collect();
    beta[0] = 1.0;
    let quality = LogNormal::new(-0.6f64, 0.3).expect("valid lognormal");
    let gammas: Vec<f64> = (0..ADVERTISERS).map(|_| quality.sample(&mut rng).min(1.0)).collect();
    let alpha = geometric_slots(8, 0.75);
    let noise = Normal::new(0.0f64, 0.6).expect("valid sd");
    let priors = (0..ADVERTISERS)
        .map(|a| {
            let level: f64 = rng.random_range(-0.4..0.4);
            let taste: Vec<f64> = (0..3).map(|_| rng.random_range(-0.8..0.8)).collect();
            ValuationPrior::sample_with(atoms, seed.wrapping_mul(7919).wrapping_add(a as u64), |r| {
                // a common draw per atom keeps values correlated across types
                let common = noise.sample(r);
                (0..TYPES)
                    .map(|t| {
                        let x = attrs(t);
                        let fit: f64 = (0..3).map(|k| taste[k] * x[k]).sum();
                        (level + fit + 0.7 * common + 0.5 * noise.sample(r)).exp()
                    })
                    .collect()
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let ctr = CtrModel::new(alpha, beta, gammas)?;
    Ok(AuctionEnvironment::new(InventoryDistribution::from_weights(&weights)?, ctr, priors)?)
}

/// Participation used with [`rich`]: four to ten bidders per auction.
pub fn rich_participation() -> Participation {
    Participation::Uniform { min: 4, max: 10 }
}

pub fn generate(kind: SynthKind, seed: u64) -> Result<AuctionEnvironment> {
    match kind {
        SynthKind::Uniform => uniform_symmetric(2, vec![1.0], 1000),
        SynthKind::Small => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (t, a) = (rng.random_range(2..=4), rng.random_range(2..=4));
            random_small(seed, t, a, rng.random_range(1..=2), 30)
        }
        SynthKind::Rich => rich(seed, 48),
    }
}
