//! JSON files for environments and priors.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{AuctionEnvironment, CtrModel, InventoryDistribution, PriorKind, ValuationPrior};

/// A prior as stored on disk. Missing weights mean equally likely samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorFile {
    pub atoms: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl PriorFile {
    pub fn from_prior(prior: &ValuationPrior) -> Self {
        let weights = match prior.kind() {
            PriorKind::Sampled => None,
            PriorKind::Discrete => Some(prior.weights().to_vec()),
        };
        Self { atoms: prior.atoms().map(<[f64]>::to_vec).collect(), weights }
    }

    pub fn into_prior(self) -> Result<ValuationPrior> {
        match self.weights {
            Some(w) => ValuationPrior::discrete(self.atoms, w),
            None => ValuationPrior::from_samples(self.atoms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentFile {
    /// Probability of each inventory type.
    pub inventory: Vec<f64>,
    pub slot_effects: Vec<f64>,
    pub type_effects: Vec<f64>,
    /// Quality score of each advertiser.
    pub quality: Vec<f64>,
    /// One prior per advertiser, or a single prior shared by all.
    pub priors: Vec<PriorFile>,
}

impl EnvironmentFile {
    pub fn from_env(env: &AuctionEnvironment) -> Self {
        Self {
            inventory: env.inventory().probs().to_vec(),
            slot_effects: env.slot_effects().to_vec(),
            type_effects: env.type_effects().to_vec(),
            quality: env.gammas().to_vec(),
            priors: env.priors().iter().map(PriorFile::from_prior).collect(),
        }
    }

    pub fn into_env(self) -> Result<AuctionEnvironment> {
        let inventory = InventoryDistribution::new(self.inventory)?;
        let n = self.quality.len();
        let mut priors = self.priors.into_iter().map(PriorFile::into_prior).collect::<Result<Vec<_>>>()?;
        if priors.len() == 1 && n > 1 {
            priors = vec![priors.remove(0); n];
        }
        let ctr = CtrModel::new(self.slot_effects, self.type_effects, self.quality)?;
        AuctionEnvironment::new(inventory, ctr, priors)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

pub fn load_environment(path: &Path) -> Result<AuctionEnvironment> {
    read_json::<EnvironmentFile>(path)?.into_env()
}

pub fn save_environment(path: &Path, env: &AuctionEnvironment) -> Result<()> {
    write_json(path, &EnvironmentFile::from_env(env))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_prior_expands_to_all_advertisers() {
        let json = r#"{"inventory":[0.5,0.5],"slot_effects":[1.0],"type_effects":[1.0,0.8],
            "quality":[1.0,0.5,0.7],"priors":[{"atoms":[[1.0,2.0],[0.5,0.0]],"weights":[0.25,0.75]}]}"#;
        let env = serde_json::from_str::<EnvironmentFile>(json).unwrap().into_env().unwrap();
        assert_eq!(env.advertiser_count(), 3);
        assert_eq!(env.prior(2).weight(1), 0.75);
        let back = EnvironmentFile::from_env(&env).into_env().unwrap();
        assert_eq!(back, env);
    }
}
