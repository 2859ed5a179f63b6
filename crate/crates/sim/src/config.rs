//! Simulation settings and mechanism specifications.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use ibpa_core::gsp::Equilibrium;
use ibpa_core::ibpa::ArtifactConfig;
use ibpa_core::model::{Partition, Regime};
use ibpa_core::single_agent::MenuClass;

use crate::error::{config_error, Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MechanismKind {
    /// Full lottery menus.
    #[serde(rename = "IBPA")]
    Ibpa,
    #[serde(rename = "IBPA_bin")]
    IbpaBin,
    #[serde(rename = "IBPA_add")]
    IbpaAdd,
    #[serde(rename = "GSP")]
    Gsp,
}

impl MechanismKind {
    pub fn menu_class(self) -> Option<MenuClass> {
        match self {
            Self::Ibpa => Some(MenuClass::Full),
            Self::IbpaBin => Some(MenuClass::Binary),
            Self::IbpaAdd => Some(MenuClass::Additive),
            Self::Gsp => None,
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ibpa => "IBPA",
            Self::IbpaBin => "IBPA_bin",
            Self::IbpaAdd => "IBPA_add",
            Self::Gsp => "GSP",
        })
    }
}

impl FromStr for MechanismKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ibpa" => Ok(Self::Ibpa),
            "ibpa_bin" | "ibpa-bin" => Ok(Self::IbpaBin),
            "ibpa_add" | "ibpa-add" => Ok(Self::IbpaAdd),
            "gsp" => Ok(Self::Gsp),
            other => Err(config_error(format!("unknown mechanism {other:?}"))),
        }
    }
}

/// A named regime (`FI-ND`, `FI-FD`, `NI-ND`) or explicit partition labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegimeSpec {
    Named(String),
    Labels { info: Vec<usize>, disc: Vec<usize> },
}

impl RegimeSpec {
    pub fn resolve(&self, types: usize) -> Result<Regime> {
        match self {
            Self::Named(name) => Ok(Regime::named(name, types)?),
            Self::Labels { info, disc } => {
                if info.len() != types || disc.len() != types {
                    return Err(config_error(format!("regime labels must cover {types} types")));
                }
                Ok(Regime::new(Partition::from_labels(info)?, Partition::from_labels(disc)?)?)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Named(name) => name.to_ascii_uppercase().replace('_', "-"),
            Self::Labels { info, disc } => format!("info{info:?}/disc{disc:?}").replace(' ', ""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MechanismRepr")]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    pub regime: RegimeSpec,
    #[serde(default)]
    pub equilibrium: Equilibrium,
    /// GSP per-click reserve.
    #[serde(default)]
    pub reserve: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MechanismRepr {
    Name(String),
    Fields {
        kind: MechanismKind,
        regime: RegimeSpec,
        #[serde(default)]
        equilibrium: Equilibrium,
        #[serde(default)]
        reserve: f64,
        #[serde(default)]
        label: Option<String>,
    },
}

impl TryFrom<MechanismRepr> for MechanismSpec {
    type Error = SimError;
    fn try_from(r: MechanismRepr) -> Result<Self> {
        match r {
            MechanismRepr::Name(s) => s.parse(),
            MechanismRepr::Fields { kind, regime, equilibrium, reserve, label } => Ok(Self { kind, regime, equilibrium, reserve, label }),
        }
    }
}

impl MechanismSpec {
    pub fn new(kind: MechanismKind, regime: &str) -> Self {
        Self { kind, regime: RegimeSpec::Named(regime.to_string()), equilibrium: Equilibrium::default(), reserve: 0.0, label: None }
    }

    pub fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| format!("{}-{}", self.kind, self.regime.label()))
    }

    /// The five mechanisms of the standard comparison.
    pub fn standard_set() -> Vec<Self> {
        vec![
            Self::new(MechanismKind::Gsp, "fi-fd"),
            Self::new(MechanismKind::Gsp, "ni-nd"),
            Self::new(MechanismKind::Ibpa, "fi-fd"),
            Self::new(MechanismKind::Ibpa, "ni-nd"),
            Self::new(MechanismKind::Ibpa, "fi-nd"),
        ]
    }
}

/// `ibpa-fi-nd`, `ibpa_add-fi-nd`, `gsp-ni-nd`, optionally suffixed with
/// `:truthful` for the GSP truthful proxy.
impl FromStr for MechanismSpec {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        let (body, eq) = match s.split_once(':') {
            Some((b, e)) => (b, Some(e.parse::<Equilibrium>()?)),
            None => (s, None),
        };
        let (kind, regime) = body.split_once('-').ok_or_else(|| config_error(format!("mechanism {s:?} needs a regime, e.g. gsp-fi-fd")))?;
        let mut spec = Self::new(kind.parse()?, regime);
        if let Some(eq) = eq {
            spec.equilibrium = eq;
        }
        Ok(spec)
    }
}

/// How many advertisers take part in each auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Participation {
    #[default]
    All,
    Fixed { count: usize },
    /// Count uniform on `min..=max`.
    Uniform { min: usize, max: usize },
    /// Poisson count truncated to `min..=max`.
    Poisson { mean: f64, min: usize, max: usize },
}

impl Participation {
    pub fn validate(&self, advertisers: usize) -> Result<()> {
        let ok = match self {
            Self::All => true,
            Self::Fixed { count } => *count >= 1 && *count <= advertisers,
            Self::Uniform { min, max } => *min >= 1 && min <= max && *max <= advertisers,
            Self::Poisson { mean, min, max } => *mean > 0.0 && *min >= 1 && min <= max && *max <= advertisers,
        };
        if ok {
            Ok(())
        } else {
            Err(config_error(format!("participation {self:?} does not fit {advertisers} advertisers")))
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, advertisers: usize, rng: &mut R) -> Vec<bool> {
        let count = match self {
            Self::All => return vec![true; advertisers],
            Self::Fixed { count } => *count,
            Self::Uniform { min, max } => rng.random_range(*min..=*max),
            Self::Poisson { mean, min, max } => {
                let k = Poisson::new(*mean).expect("validated mean").sample(rng) as usize;
                k.clamp(*min, *max)
            }
        };
        let mut active = vec![false; advertisers];
        for a in index::sample(rng, advertisers, count) {
            active[a] = true;
        }
        active
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n_auctions: usize,
    pub mechanisms: Vec<MechanismSpec>,
    /// Keep only the top slots of the environment.
    pub slot_count: Option<usize>,
    pub seed: u64,
    /// Grid, solver and mapper settings; the menu class comes from each mechanism.
    pub artifacts: ArtifactConfig,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub participation: Participation,
    /// Mechanism name the deltas are measured against.
    pub baseline: Option<String>,
    /// Keep every outcome in memory (needed for outcome dumps).
    pub keep_outcomes: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_auctions: 100_000,
            mechanisms: MechanismSpec::standard_set(),
            slot_count: None,
            seed: 0,
            artifacts: ArtifactConfig::default(),
            threads: 0,
            participation: Participation::All,
            baseline: Some("GSP-FI-FD".into()),
            keep_outcomes: false,
        }
    }
}

impl SimulationConfig {
    pub fn with_artifacts(mut self, f: impl FnOnce(&mut ArtifactConfig)) -> Self {
        f(&mut self.artifacts);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_auctions == 0 {
            return Err(config_error("n_auctions must be at least 1"));
        }
        if self.mechanisms.is_empty() {
            return Err(config_error("no mechanisms to simulate"));
        }
        if let Some(b) = &self.baseline {
            if !self.mechanisms.iter().any(|m| m.name().eq_ignore_ascii_case(b)) {
                return Err(config_error(format!("baseline {b} is not among the simulated mechanisms")));
            }
        }
        Ok(())
    }
}
