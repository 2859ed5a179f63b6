//! Counterfactual comparison of mechanisms on a shared auction stream.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ibpa_core::gsp::{Gsp, GspConfig};
use ibpa_core::ibpa::{build_artifacts, run_ibpa, IbpaArtifacts};
use ibpa_core::model::{sample_auction_with, AuctionEnvironment, AuctionInstance, CtrModel};
use ibpa_core::outcome::MechanismOutcome;
use ibpa_core::single_agent::MenuClass;

use crate::config::{MechanismSpec, SimulationConfig};
use crate::error::{config_error, Result, SimError};
use crate::metrics::{Estimate, MetricsAccumulator, MetricsReport, Welford};

/// Auctions per work unit; fixed so results do not depend on thread count.
const BLOCK: usize = 1024;

/// Stream offset separating quantile resampling from instance draws.
const MAPPING_STREAM: u64 = 1 << 63;

/// A mechanism ready to run auctions.
pub enum Runner {
    Ibpa(Box<IbpaArtifacts>),
    Gsp(Gsp),
}

impl Runner {
    pub fn build(env: &AuctionEnvironment, spec: &MechanismSpec, cfg: &SimulationConfig) -> Result<Self> {
        let regime = spec.regime.resolve(env.type_count())?;
        let wrap = |source| SimError::Artifact { mechanism: spec.name(), source };
        match spec.kind.menu_class() {
            Some(class) => {
                let mut art_cfg = cfg.artifacts.clone();
                art_cfg.class = class;
                art_cfg.threads = cfg.threads;
                Ok(Self::Ibpa(Box::new(build_artifacts(env, &regime, &art_cfg).map_err(wrap)?)))
            }
            None => {
                let g = Gsp::new(env, GspConfig { regime, reserve: spec.reserve, equilibrium: spec.equilibrium }).map_err(wrap)?;
                Ok(Self::Gsp(g))
            }
        }
    }

    /// Runs one auction; `mapping` drives quantile resampling.
    pub fn run(&self, instance: &AuctionInstance, mapping: &mut ChaCha8Rng) -> MechanismOutcome {
        match self {
            Self::Ibpa(art) => run_ibpa(art, instance, None, mapping),
            Self::Gsp(g) => g.run(instance),
        }
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            Self::Ibpa(art) => art.warnings(),
            Self::Gsp(_) => &[],
        }
    }
}

/// The environment restricted to its top `slots` slots.
pub fn truncate_slots(env: &AuctionEnvironment, slots: Option<usize>) -> Result<AuctionEnvironment> {
    let Some(s) = slots else { return Ok(env.clone()) };
    if s == 0 || s > env.slot_count() {
        return Err(config_error(format!("slot_count {s} outside 1..={}", env.slot_count())));
    }
    let ctr = CtrModel::new(env.slot_effects()[..s].to_vec(), env.type_effects().to_vec(), env.gammas().to_vec())?;
    Ok(AuctionEnvironment::new(env.inventory().clone(), ctr, env.priors().to_vec())?)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Auction `i` of the stream for `cfg.seed`; identical for every mechanism.
pub fn draw_instance(env: &AuctionEnvironment, cfg: &SimulationConfig, i: usize) -> AuctionInstance {
    let mut rng = stream_rng(cfg.seed, i as u64);
    let active = cfg.participation.draw(env.advertiser_count(), &mut rng);
    sample_auction_with(env, i as u64, &mut rng, active)
}

fn mapping_rng(cfg: &SimulationConfig, i: usize) -> ChaCha8Rng {
    stream_rng(cfg.seed, MAPPING_STREAM | i as u64)
}

pub struct SimulationResult {
    pub report: MetricsReport,
    /// Mechanism names in configuration order.
    pub mechanisms: Vec<String>,
    /// Per-mechanism, per-auction revenue.
    pub revenues: Vec<Vec<f64>>,
    /// Per-mechanism outcome streams when `keep_outcomes` is set.
    pub outcomes: Option<Vec<Vec<MechanismOutcome>>>,
    pub warnings: Vec<String>,
}

impl SimulationResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.mechanisms.iter().position(|m| m.eq_ignore_ascii_case(name))
    }

    /// Mean and standard error of the per-auction revenue difference `a - b`;
    /// common random numbers make this much tighter than the unpaired gap.
    pub fn paired_revenue_gap(&self, a: &str, b: &str) -> Option<Estimate> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let mut w = Welford::default();
        for (x, y) in self.revenues[ia].iter().zip(&self.revenues[ib]) {
            w.push(x - y);
        }
        Some(w.estimate())
    }
}

struct BlockResult {
    acc: Vec<MetricsAccumulator>,
    revenues: Vec<Vec<f64>>,
    outcomes: Option<Vec<Vec<MechanismOutcome>>>,
}

/// Builds every mechanism once and runs them on the same auctions.
pub fn run_comparison(env: &AuctionEnvironment, cfg: &SimulationConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    let env = truncate_slots(env, cfg.slot_count)?;
    cfg.participation.validate(env.advertiser_count())?;

    // IBPA mechanisms sharing a class and regime share artifacts
    let mut built: HashMap<(Option<MenuClass>, String), usize> = HashMap::new();
    let mut runners: Vec<Runner> = Vec::new();
    let mut runner_of = Vec::new();
    let mut warnings = Vec::new();
    for spec in &cfg.mechanisms {
        let key = (spec.kind.menu_class(), format!("{:?}", spec.regime.resolve(env.type_count())?));
        let idx = match (spec.kind.menu_class(), built.get(&key)) {
            (Some(_), Some(i)) => *i,
            _ => {
                let start = Instant::now();
                let r = Runner::build(&env, spec, cfg)?;
                log::info!("built {} in {:.2?}", spec.name(), start.elapsed());
                warnings.extend(r.warnings().iter().map(|w| format!("{}: {w}", spec.name())));
                runners.push(r);
                built.insert(key, runners.len() - 1);
                runners.len() - 1
            }
        };
        runner_of.push(idx);
    }

    let m = cfg.mechanisms.len();
    let n = cfg.n_auctions;
    let blocks = n.div_ceil(BLOCK);
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<BlockResult>>> = (0..blocks).map(|_| Mutex::new(None)).collect();
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    let workers = if cfg.threads == 0 { cores } else { cfg.threads }.clamp(1, blocks);
    let start = Instant::now();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let b = next.fetch_add(1, Ordering::Relaxed);
                if b >= blocks {
                    break;
                }
                let range = b * BLOCK..((b + 1) * BLOCK).min(n);
                let mut res = BlockResult {
                    acc: vec![MetricsAccumulator::default(); m],
                    revenues: vec![Vec::with_capacity(range.len()); m],
                    outcomes: cfg.keep_outcomes.then(|| vec![Vec::with_capacity(range.len()); m]),
                };
                for i in range {
                    let instance = draw_instance(&env, cfg, i);
                    for k in 0..m {
                        let out = runners[runner_of[k]].run(&instance, &mut mapping_rng(cfg, i));
                        res.acc[k].push(&out);
                        res.revenues[k].push(out.revenue);
                        if let Some(o) = res.outcomes.as_mut() {
                            o[k].push(out);
                        }
                    }
                }
                *results[b].lock().expect("block result") = Some(res);
            });
        }
    });
    log::info!("simulated {n} auctions x {m} mechanisms in {:.2?}", start.elapsed());

    let mut acc = vec![MetricsAccumulator::default(); m];
    let mut revenues = vec![Vec::with_capacity(n); m];
    let mut outcomes = cfg.keep_outcomes.then(|| vec![Vec::with_capacity(n); m]);
    for slot in results {
        let res = slot.into_inner().expect("block result").expect("every block ran");
        for k in 0..m {
            acc[k].merge(&res.acc[k]);
            revenues[k].extend_from_slice(&res.revenues[k]);
        }
        if let (Some(all), Some(part)) = (outcomes.as_mut(), res.outcomes) {
            for (dst, src) in all.iter_mut().zip(part) {
                dst.extend(src);
            }
        }
    }
    let names: Vec<String> = cfg.mechanisms.iter().map(MechanismSpec::name).collect();
    let rows = cfg.mechanisms.iter().zip(&acc).map(|(s, a)| a.finish(&s.name(), &s.regime.label())).collect();
    Ok(SimulationResult {
        report: MetricsReport::new(n, rows, cfg.baseline.as_deref()),
        mechanisms: names,
        revenues,
        outcomes,
        warnings,
    })
}
