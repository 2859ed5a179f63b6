//! The information-bundling position auction.
//!
//! Artifacts (curves, vertex choices, quantile maps) are built once per
//! disclosure block from the environment coarsened to the publisher's
//! information blocks. Each auction maps reports to quantiles for the realized
//! block, ranks by scaled marginal revenue and charges through critical
//! quantiles.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{coarsen_environment, AuctionEnvironment, AuctionInstance, Regime};
use crate::outcome::MechanismOutcome;
use crate::quantile::{self, MapperMode, QuantileMapper};
use crate::revenue_curve::{build_curve, RevenueCurve, VertexChoices};
use crate::single_agent::{AgentModel, MenuClass, SolverConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ArtifactConfig {
    pub class: MenuClass,
    pub grid_size: usize,
    pub solver: SolverConfig,
    /// Quantile mapper; `None` picks nested where menus allow it.
    pub mapper: Option<MapperMode>,
    /// Opponent draws per curve segment for interim mappers.
    pub mc_samples: usize,
    /// Worker threads for curve solving; 0 uses all cores.
    pub threads: usize,
}

impl Default for ArtifactConfig {
    fn default() -> Self {
        Self {
            class: MenuClass::Full,
            grid_size: 50,
            solver: SolverConfig::default(),
            mapper: None,
            mc_samples: 10_000,
            threads: 0,
        }
    }
}

/// Everything one disclosure block needs at auction time.
#[derive(Debug, Clone)]
pub struct ViewArtifacts {
    pub block: usize,
    pub prob: f64,
    /// Information blocks revealed together under this disclosure.
    pub members: Vec<usize>,
    /// Type effect of each member block.
    pub beta: Vec<f64>,
    curves: Vec<Arc<RevenueCurve>>,
    choices: Vec<Arc<VertexChoices>>,
    /// `[advertiser][member]`
    mappers: Vec<Vec<Arc<QuantileMapper>>>,
}

impl ViewArtifacts {
    pub fn curve(&self, a: usize) -> &RevenueCurve {
        &self.curves[a]
    }

    pub fn choices(&self, a: usize) -> &VertexChoices {
        &self.choices[a]
    }

    pub fn mapper(&self, a: usize, local_type: usize) -> &QuantileMapper {
        &self.mappers[a][local_type]
    }
}

#[derive(Debug, Clone)]
pub struct IbpaArtifacts {
    regime: Regime,
    class: MenuClass,
    slot_effects: Vec<f64>,
    type_effects: Vec<f64>,
    gammas: Vec<f64>,
    block_of_type: Vec<usize>,
    /// Information block -> (view, position within the view).
    locate: Vec<Option<(usize, usize)>>,
    views: Vec<Option<ViewArtifacts>>,
    warnings: Vec<String>,
}

impl IbpaArtifacts {
    pub fn regime(&self) -> &Regime {
        &self.regime
    }

    pub fn class(&self) -> MenuClass {
        self.class
    }

    pub fn views(&self) -> impl Iterator<Item = &ViewArtifacts> {
        self.views.iter().flatten()
    }

    /// View and local type index serving original type `t`.
    pub fn view_for_type(&self, t: usize) -> Option<(&ViewArtifacts, usize)> {
        let (d, l) = self.locate[self.block_of_type[t]]?;
        Some((self.views[d].as_ref()?, l))
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn advertiser_count(&self) -> usize {
        self.gammas.len()
    }

    pub fn slot_count(&self) -> usize {
        self.slot_effects.len()
    }
}

fn worker_count(requested: usize, jobs: usize) -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let n = if requested == 0 { cores } else { requested };
    n.clamp(1, jobs.max(1))
}

/// Runs `f` over `jobs` on a small thread pool, keeping job order.
fn parallel_map<J: Sync, T: Send, F>(jobs: &[J], threads: usize, f: F) -> Vec<T>
where
    F: Fn(&J) -> T + Sync,
{
    let next = Mutex::new(0usize);
    let slots: Vec<Mutex<Option<T>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..worker_count(threads, jobs.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("job counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                if i >= jobs.len() {
                    break;
                }
                let out = f(&jobs[i]);
                *slots[i].lock().expect("result slot") = Some(out);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().expect("result slot").expect("job ran")).collect()
}

/// Builds IBPA artifacts for `env` under `regime`, solving every curve.
pub fn build_artifacts(env: &AuctionEnvironment, regime: &Regime, cfg: &ArtifactConfig) -> Result<IbpaArtifacts> {
    build_artifacts_with(env, regime, cfg, |venv, a| {
        build_curve(venv.prior(a), venv.inventory(), venv.type_effects(), cfg.class, cfg.grid_size, &cfg.solver)
    })
}

/// As [`build_artifacts`], with curves supplied by `make_curve(view_env, advertiser)`.
pub fn build_artifacts_with<F>(env: &AuctionEnvironment, regime: &Regime, cfg: &ArtifactConfig, make_curve: F) -> Result<IbpaArtifacts>
where
    F: Fn(&AuctionEnvironment, usize) -> Result<RevenueCurve> + Sync,
{
    let coarse = coarsen_environment(env, regime)?;
    let views = coarse.disclosure_views()?;
    let n = env.advertiser_count();

    // one curve per distinct prior within each view
    let mut jobs = Vec::new();
    let mut job_of: Vec<Vec<usize>> = Vec::new();
    for view in &views {
        let mut ids = vec![usize::MAX; n];
        if let Some(v) = view {
            let mut seen: HashMap<u64, usize> = HashMap::new();
            for (a, id) in ids.iter_mut().enumerate() {
                let prior = v.env.prior(a);
                *id = *seen.entry(prior.fingerprint()).or_insert_with(|| {
                    jobs.push((v.env.clone(), a));
                    jobs.len() - 1
                });
            }
        }
        job_of.push(ids);
    }
    log::info!("solving {} revenue curves ({} class, {} grid points)", jobs.len(), cfg.class, cfg.grid_size);
    let built = parallel_map(&jobs, cfg.threads, |(venv, a)| -> Result<(Arc<RevenueCurve>, Arc<VertexChoices>)> {
        let prior = venv.prior(*a);
        let curve = make_curve(venv, *a)?;
        let model = AgentModel::new(prior, venv.inventory(), venv.type_effects())?;
        let choices = VertexChoices::new(&curve, &model);
        Ok((Arc::new(curve), Arc::new(choices)))
    });
    let built = built.into_iter().collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    for ((_, a), (curve, _)) in jobs.iter().zip(&built) {
        warnings.extend(curve.warnings().iter().map(|w| format!("curve of advertiser {a}: {w}")));
    }
    let mut out_views = Vec::with_capacity(views.len());
    let mut locate = vec![None; coarse.env.type_count()];
    for (d, view) in views.into_iter().enumerate() {
        let Some(view) = view else {
            out_views.push(None);
            continue;
        };
        for (l, b) in view.members.iter().enumerate() {
            locate[*b] = Some((d, l));
        }
        let curves: Vec<Arc<RevenueCurve>> = job_of[d].iter().map(|j| built[*j].0.clone()).collect();
        let choices: Vec<Arc<VertexChoices>> = job_of[d].iter().map(|j| built[*j].1.clone()).collect();
        let mappers = view_mappers(&view.env, &curves, &choices, &job_of[d], d, cfg, &mut warnings)?;
        out_views.push(Some(ViewArtifacts {
            block: view.block,
            prob: view.prob,
            members: view.members,
            beta: view.env.type_effects().to_vec(),
            curves,
            choices,
            mappers,
        }));
    }
    Ok(IbpaArtifacts {
        regime: regime.clone(),
        class: cfg.class,
        slot_effects: env.slot_effects().to_vec(),
        type_effects: env.type_effects().to_vec(),
        gammas: env.gammas().to_vec(),
        block_of_type: coarse.block_of_type,
        locate,
        views: out_views,
        warnings,
    })
}

fn view_mappers(
    venv: &AuctionEnvironment,
    curves: &[Arc<RevenueCurve>],
    choices: &[Arc<VertexChoices>],
    job_ids: &[usize],
    view: usize,
    cfg: &ArtifactConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<Vec<Arc<QuantileMapper>>>> {
    let n = curves.len();
    let types = venv.type_count();
    let curve_refs: Vec<&RevenueCurve> = curves.iter().map(|c| c.as_ref()).collect();
    // nested maps depend only on the curve, so advertisers sharing one share them
    let mut nested_cache: HashMap<(usize, usize), Arc<QuantileMapper>> = HashMap::new();
    let mut out = Vec::with_capacity(n);
    for a in 0..n {
        let weights = venv.prior(a).weights();
        let mut profile = None;
        let mut row = Vec::with_capacity(types);
        for l in 0..types {
            let nested_ok = quantile::deterministic_for(&curves[a], &choices[a], weights.len(), l);
            let mode = match cfg.mapper {
                Some(MapperMode::Nested) if !nested_ok => return Err(Error::NonDeterministic { type_index: l }),
                Some(m) => m,
                None if nested_ok => MapperMode::Nested,
                None => MapperMode::Interim,
            };
            let mapper = match mode {
                MapperMode::Nested => nested_cache
                    .entry((job_ids[a], l))
                    .or_insert_with(|| {
                        Arc::new(quantile::nested_mapper(&curves[a], &choices[a], weights, l).expect("checked deterministic"))
                    })
                    .clone(),
                MapperMode::Interim => {
                    let profile = profile.get_or_insert_with(|| {
                        let seed = cfg.solver.seed ^ ((view as u64) << 32) ^ (a as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                        quantile::mr_allocation_profile(&curve_refs, venv.gammas(), a, cfg.mc_samples, &mut ChaCha8Rng::seed_from_u64(seed))
                    });
                    Arc::new(quantile::interim_mapper(&curves[a], &choices[a], weights, profile, l))
                }
            };
            warnings.extend(mapper.warnings().iter().map(|w| format!("advertiser {a}, block {view}/{l}: {w}")));
            row.push(mapper);
        }
        out.push(row);
    }
    Ok(out)
}

/// Orders advertisers with positive scaled marginal revenue, strongest first,
/// ties to the lower index.
pub fn rank_by_marginal(marginals: &[Option<f64>]) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..marginals.len()).filter(|a| marginals[*a].is_some_and(|m| m > 0.0)).collect();
    pool.sort_by(|a, b| marginals[*b].unwrap().total_cmp(&marginals[*a].unwrap()).then(a.cmp(b)));
    pool
}

/// Largest quantile at which `a` still outranks `competitor`, or at which its
/// marginal revenue stays positive when there is none.
pub fn critical_quantile(curve: &RevenueCurve, gamma: f64, a: usize, competitor: Option<(usize, f64)>) -> f64 {
    match competitor {
        Some((c, mr)) => curve.critical_quantile(mr / gamma, a < c),
        None => curve.critical_quantile(0.0, false),
    }
}

/// Runs one auction. `reports` are reported atom indices (defaulting to the
/// instance's true atoms); utilities always use the true valuations.
pub fn run_ibpa<R: Rng + ?Sized>(
    art: &IbpaArtifacts,
    instance: &AuctionInstance,
    reports: Option<&[usize]>,
    rng: &mut R,
) -> MechanismOutcome {
    let mut quantiles = vec![None; art.gammas.len()];
    if let Some((view, l)) = art.view_for_type(instance.type_index) {
        for a in instance.participants() {
            let atom = reports.map_or(instance.atoms[a], |r| r[a]);
            quantiles[a] = Some(view.mappers[a][l].map_atom(atom, rng));
        }
    }
    run_with_quantiles(art, instance, reports, &quantiles)
}

/// The auction given each participant's quantile for the realized type.
pub fn run_with_quantiles(
    art: &IbpaArtifacts,
    instance: &AuctionInstance,
    reports: Option<&[usize]>,
    quantiles: &[Option<f64>],
) -> MechanismOutcome {
    let n = art.gammas.len();
    let slots = art.slot_effects.len();
    let t = instance.type_index;
    let mut out = MechanismOutcome::empty(instance.seed, t, slots, n);
    let Some((view, l)) = art.view_for_type(t) else {
        return out;
    };
    let report = |a: usize| reports.map_or(instance.atoms[a], |r| r[a]);

    let mut marginals = vec![None; n];
    for a in instance.participants() {
        if let Some(q) = quantiles[a] {
            out.quantiles[a] = Some(q);
            marginals[a] = Some(art.gammas[a] * view.curves[a].marginal(q));
        }
    }
    let mut pool = rank_by_marginal(&marginals);

    let competitor = |pool: &[usize], j: usize| pool.get(j).map(|c| (*c, marginals[*c].unwrap()));
    // a winner whose menu at its critical quantile does not cover the realized
    // type gives the slot up to those ranked below it
    loop {
        let vacate = (0..slots.min(pool.len())).find(|s| {
            let a = pool[*s];
            let qh = critical_quantile(&view.curves[a], art.gammas[a], a, competitor(&pool, s + 1));
            view.choices[a].mixed(view.curves[a].mechanism_at(qh), report(a), l).alloc == 0.0
        });
        match vacate {
            Some(s) => {
                pool.remove(s);
            }
            None => break,
        }
    }

    let alpha = |j: usize| art.slot_effects.get(j).copied().unwrap_or(0.0);
    for s in 0..slots.min(pool.len()) {
        let a = pool[s];
        let (curve, choices, gamma) = (&view.curves[a], &view.choices[a], art.gammas[a]);
        out.assignment[s] = Some(a);
        // clicks decompose into "slot j or better" events, each with its own threshold
        let mut payment = 0.0;
        for j in s..slots {
            let comp = competitor(&pool, j + 1);
            let qh = critical_quantile(curve, gamma, a, comp);
            if j == s {
                out.critical_quantiles[a] = Some(qh);
            }
            let c = choices.mixed(curve.mechanism_at(qh), report(a), l);
            let charge = if c.alloc > 0.0 && c.alloc_mass > 0.0 { c.payment / c.alloc_mass } else { 0.0 };
            if comp.is_none() {
                // no one left to overtake a: every deeper level shares this threshold
                payment += alpha(j) * charge;
                break;
            }
            payment += (alpha(j) - alpha(j + 1)) * charge;
        }
        let m = gamma * payment;
        let clicks = alpha(s) * art.type_effects[t] * gamma;
        out.expected_payments[a] = m;
        out.per_click_payments[a] = m / (alpha(s) * view.beta[l] * gamma);
        out.utilities[a] = clicks * instance.valuations[a][t] - m;
    }
    out.revenue = out.expected_payments.iter().sum();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_breaks_ties_by_index() {
        let m = [Some(0.5), None, Some(0.8), Some(0.5), Some(0.0)];
        assert_eq!(rank_by_marginal(&m), vec![2, 0, 3]);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let jobs: Vec<u64> = (0..50).collect();
        assert_eq!(parallel_map(&jobs, 4, |x| x * x), jobs.iter().map(|x| x * x).collect::<Vec<_>>());
    }
}
