//! Revenue maximization over a menu class subject to an ex-ante cap on the
//! allocation probability.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ga::GeneticSearch;
use super::{additive_pick, beats, dot, AgentModel, LotteryPricing, Menu, MenuClass, MenuChoice, MenuStats};
use crate::error::{invalid, Result};
use crate::model::{InventoryDistribution, ValuationPrior};

/// Allocation-cap slack accepted as feasible.
pub const CAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub population: usize,
    pub parents: usize,
    pub elites: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    /// BLX-alpha extension of the blend interval.
    pub blend_alpha: f64,
    pub max_generations: usize,
    /// Stop after this many generations without improvement.
    pub stall_generations: usize,
    /// Penalty per unit of cap violation, as a multiple of the revenue scale.
    pub penalty_weight: f64,
    /// Menu length for the full class.
    pub max_menu_items: usize,
    /// Fitness evaluations spent on the final compass-search polish.
    pub polish_evaluations: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            population: 100,
            parents: 50,
            elites: 5,
            tournament_size: 3,
            crossover_prob: 0.8,
            mutation_prob: 0.2,
            blend_alpha: 0.5,
            max_generations: 300,
            stall_generations: 40,
            penalty_weight: 1e4,
            max_menu_items: 8,
            polish_evaluations: 600,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub menu: Menu,
    pub stats: MenuStats,
    pub converged: bool,
    pub generations: usize,
}

/// Best menu of `class` whose allocation probability is at most `q`.
pub fn solve_constrained(
    prior: &ValuationPrior,
    p: &InventoryDistribution,
    beta: &[f64],
    q: f64,
    class: MenuClass,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    solve_constrained_seeded(prior, p, beta, q, class, cfg, &[])
}

/// As [`solve_constrained`], with extra starting menus for the search.
pub fn solve_constrained_seeded(
    prior: &ValuationPrior,
    p: &InventoryDistribution,
    beta: &[f64],
    q: f64,
    class: MenuClass,
    cfg: &SolverConfig,
    seeds: &[Menu],
) -> Result<SolveOutcome> {
    let model = AgentModel::new(prior, p, beta)?;
    let problem = ConstrainedProblem::new(model, class, cfg)?;
    problem.solve(q, seeds, cfg.seed)
}

pub(crate) struct ConstrainedProblem<'c> {
    model: AgentModel,
    class: MenuClass,
    cfg: &'c SolverConfig,
    items: usize,
    /// Largest grand-bundle value; the revenue scale.
    scale: f64,
    bounds: Vec<(f64, f64)>,
    /// Binary class: value of every non-empty bundle for every atom.
    bundle_values: Vec<f64>,
    bundle_mass: Vec<f64>,
    bundle_max: Vec<f64>,
}

impl<'c> ConstrainedProblem<'c> {
    pub(crate) fn new(model: AgentModel, class: MenuClass, cfg: &'c SolverConfig) -> Result<Self> {
        let dim = model.dim();
        let n = model.atom_count();
        let scale = (0..n).map(|i| model.grand_value(i)).fold(0.0, f64::max);
        let headroom = 1.05;
        let mut bundle_values = Vec::new();
        let mut bundle_mass = Vec::new();
        let mut bundle_max = Vec::new();
        let (items, bounds) = match class {
            MenuClass::Full => {
                let k = cfg.max_menu_items.max(1);
                let mut b = Vec::with_capacity(k * (dim + 1));
                for _ in 0..k {
                    b.extend(std::iter::repeat((0.0, 1.0)).take(dim));
                    b.push((0.0, scale * headroom));
                }
                (k, b)
            }
            MenuClass::Binary => {
                if dim > 12 {
                    return Err(invalid("the binary class supports at most 12 types"));
                }
                let bundles = (1usize << dim) - 1;
                bundle_values.reserve(n * bundles);
                for i in 0..n {
                    let wv = model.weighted_values(i);
                    for m in 1..=bundles {
                        bundle_values.push((0..dim).filter(|t| (m >> t) & 1 == 1).map(|t| wv[t]).sum());
                    }
                }
                for m in 1..=bundles {
                    bundle_mass.push((0..dim).filter(|t| (m >> t) & 1 == 1).map(|t| model.probs()[t]).sum());
                    bundle_max.push((0..n).map(|i| bundle_values[i * bundles + m - 1]).fold(0.0, f64::max));
                }
                (bundles, bundle_max.iter().map(|v| (0.0, v * headroom)).collect())
            }
            MenuClass::Additive => {
                if dim > 64 {
                    return Err(invalid("the additive class supports at most 64 types"));
                }
                let mut b = vec![(0.0, scale * headroom)];
                let beta = model.beta();
                for t in 0..dim {
                    let vmax = (0..n).map(|i| model.weighted_values(i)[t]).fold(0.0, f64::max);
                    let p = model.probs()[t];
                    let per_unit = if p > 0.0 { vmax / p } else { beta[t] };
                    b.push((0.0, per_unit * headroom));
                }
                (dim, b)
            }
        };
        Ok(Self { model, class, cfg, items, scale, bounds, bundle_values, bundle_mass, bundle_max })
    }

    pub(crate) fn model(&self) -> &AgentModel {
        &self.model
    }

    fn null_genome(&self) -> Vec<f64> {
        match self.class {
            MenuClass::Full => vec![0.0; self.bounds.len()],
            _ => {
                let mut g: Vec<f64> = self.bounds.iter().map(|b| b.1).collect();
                if self.class == MenuClass::Additive {
                    g[0] = 0.0;
                }
                g
            }
        }
    }

    /// `(revenue, alloc_prob)` of a genome.
    fn evaluate(&self, g: &[f64]) -> (f64, f64) {
        let m = &self.model;
        let dim = m.dim();
        let mut rev = 0.0;
        let mut alloc = 0.0;
        match self.class {
            MenuClass::Full => {
                let stride = dim + 1;
                let masses: Vec<f64> = (0..self.items).map(|k| dot(m.probs(), &g[k * stride..k * stride + dim])).collect();
                for i in 0..m.atom_count() {
                    let wv = m.weighted_values(i);
                    let (mut bu, mut bp, mut bm) = (0.0, 0.0, 0.0);
                    for k in 0..self.items {
                        let item = &g[k * stride..(k + 1) * stride];
                        let u = dot(wv, &item[..dim]) - item[dim];
                        if beats(u, item[dim], bu, bp) {
                            bu = u;
                            bp = item[dim];
                            bm = masses[k];
                        }
                    }
                    rev += m.weight(i) * bp;
                    alloc += m.weight(i) * bm;
                }
            }
            MenuClass::Binary => {
                let b = self.items;
                for i in 0..m.atom_count() {
                    let row = &self.bundle_values[i * b..(i + 1) * b];
                    let (mut bu, mut bp, mut bm) = (0.0, 0.0, 0.0);
                    for k in 0..b {
                        let u = row[k] - g[k];
                        if beats(u, g[k], bu, bp) {
                            bu = u;
                            bp = g[k];
                            bm = self.bundle_mass[k];
                        }
                    }
                    rev += m.weight(i) * bp;
                    alloc += m.weight(i) * bm;
                }
            }
            MenuClass::Additive => {
                let probs = m.probs();
                let rho = &g[1..];
                for i in 0..m.atom_count() {
                    let wv = m.weighted_values(i);
                    let (_, _, pay, mass) = additive_pick(g[0], dim, |t| (wv[t] - probs[t] * rho[t], probs[t] * rho[t], probs[t]));
                    rev += m.weight(i) * pay;
                    alloc += m.weight(i) * mass;
                }
            }
        }
        (rev, alloc)
    }

    fn decode(&self, g: &[f64]) -> Menu {
        let dim = self.model.dim();
        match self.class {
            MenuClass::Full => {
                let stride = dim + 1;
                let items = (0..self.items)
                    .map(|k| LotteryPricing { alloc: g[k * stride..k * stride + dim].to_vec(), payment: g[k * stride + dim] })
                    .collect();
                Menu { class: MenuClass::Full, items, additive: None }
            }
            MenuClass::Binary => {
                let items = (0..self.items)
                    .filter(|k| g[*k] <= self.bundle_max[*k])
                    .map(|k| LotteryPricing {
                        alloc: (0..dim).map(|t| (((k + 1) >> t) & 1) as f64).collect(),
                        payment: g[k],
                    })
                    .collect();
                Menu { class: MenuClass::Binary, items, additive: None }
            }
            MenuClass::Additive => Menu::additive(g[0], g[1..].to_vec()).expect("bounded genome"),
        }
    }

    /// Genome for a menu of any class, when representable.
    fn encode(&self, menu: &Menu) -> Option<Vec<f64>> {
        let dim = self.model.dim();
        let probs = self.model.probs();
        match (self.class, menu.class) {
            (MenuClass::Additive, MenuClass::Additive) => {
                let a = menu.additive.as_ref()?;
                let mut g = vec![a.rho0];
                g.extend(&a.rho);
                Some(g)
            }
            (MenuClass::Additive, _) => None,
            (MenuClass::Binary, _) => {
                let mut g = self.null_genome();
                match menu.class {
                    MenuClass::Additive => {
                        for (k, price) in g.iter_mut().enumerate() {
                            *price = menu.payment(k + 1, probs);
                        }
                    }
                    _ => {
                        for it in &menu.items {
                            if it.alloc.iter().any(|x| *x != 0.0 && *x != 1.0) {
                                return None;
                            }
                            let mask = (0..dim).filter(|t| it.alloc[*t] == 1.0).fold(0, |m, t| m | 1 << t);
                            if mask > 0 {
                                g[mask - 1] = g[mask - 1].min(it.payment);
                            }
                        }
                    }
                }
                Some(g)
            }
            (MenuClass::Full, _) => {
                let items: Vec<LotteryPricing> = match menu.class {
                    MenuClass::Additive => {
                        let bundles = (1usize << dim.min(20)) - 1;
                        if bundles > self.items {
                            return None;
                        }
                        (1..=bundles)
                            .map(|m| LotteryPricing {
                                alloc: (0..dim).map(|t| ((m >> t) & 1) as f64).collect(),
                                payment: menu.payment(m, probs),
                            })
                            .collect()
                    }
                    _ => menu.items.clone(),
                };
                if items.len() > self.items {
                    return None;
                }
                let mut g = self.null_genome();
                for (k, it) in items.iter().enumerate() {
                    let base = k * (dim + 1);
                    g[base..base + dim].copy_from_slice(&it.alloc);
                    g[base + dim] = it.payment;
                }
                Some(g)
            }
        }
    }

    /// Price at which the mass of atoms valuing `value(i)` at or above it stays within `q`.
    fn capped_price(&self, q: f64, value: impl Fn(usize) -> f64) -> Option<f64> {
        let m = &self.model;
        let mut atoms: Vec<(f64, f64)> = (0..m.atom_count()).map(|i| (value(i), m.weight(i))).collect();
        atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut acc = 0.0;
        let mut price = None;
        let mut k = 0;
        while k < atoms.len() {
            // atoms tied in value buy together
            let v = atoms[k].0;
            let mut w = 0.0;
            while k < atoms.len() && atoms[k].0 == v {
                w += atoms[k].1;
                k += 1;
            }
            if acc + w > q + CAP_TOL || v <= 0.0 {
                break;
            }
            acc += w;
            price = Some(v);
        }
        price
    }

    /// Starting genomes from posted-price heuristics.
    fn heuristic_seeds(&self, q: f64) -> Vec<Vec<f64>> {
        let dim = self.model.dim();
        let m = &self.model;
        let mut out = Vec::new();
        let mut grand_prices = Vec::new();
        if let Some(p) = self.capped_price(q, |i| m.grand_value(i)) {
            grand_prices.push(p);
        }
        // revenue-maximizing grand-bundle price, used when its sales fit under the cap
        let mut atoms: Vec<(f64, f64)> = (0..m.atom_count()).map(|i| (m.grand_value(i), m.weight(i))).collect();
        atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut acc = 0.0;
        let mut best = (0.0, 0.0, 0.0);
        for (v, w) in &atoms {
            acc += w;
            if v * acc > best.0 {
                best = (v * acc, *v, acc);
            }
        }
        if best.0 > 0.0 && best.2 <= q + CAP_TOL {
            grand_prices.push(best.1);
        }

        let per_type: Option<Vec<f64>> = (self.class != MenuClass::Full || (1usize << dim.min(20)) - 1 <= self.items).then(|| {
            (0..dim)
                .map(|t| {
                    let p = m.probs()[t];
                    if p <= 0.0 {
                        return self.bounds.get(t + 1).map_or(0.0, |b| b.1);
                    }
                    self.capped_price(q, |i| m.weighted_values(i)[t] / p).unwrap_or(f64::MAX)
                })
                .collect()
        });

        for price in grand_prices {
            let mut g = self.null_genome();
            match self.class {
                MenuClass::Full => {
                    g[..dim].iter_mut().for_each(|x| *x = 1.0);
                    g[dim] = price;
                }
                MenuClass::Binary => {
                    let last = g.len() - 1;
                    g[last] = price;
                }
                MenuClass::Additive => {
                    g[0] = price;
                    g[1..].iter_mut().for_each(|x| *x = 0.0);
                }
            }
            out.push(g);
        }
        if let Some(rho) = per_type {
            let rho: Vec<f64> = rho.iter().zip(&self.bounds[self.bounds.len() - dim..]).map(|(r, b)| r.min(b.1)).collect();
            let menu = Menu::additive(0.0, rho).expect("finite prices");
            if let Some(g) = self.encode(&menu) {
                out.push(g);
            }
        }
        out
    }

    fn stats(&self, menu: &Menu) -> MenuStats {
        let mut choice_probs = BTreeMap::new();
        let mut alloc_prob = 0.0;
        let mut revenue = 0.0;
        for i in 0..self.model.atom_count() {
            let c: MenuChoice = self.model.choose(menu, i);
            let w = self.model.weight(i);
            *choice_probs.entry(c.item).or_insert(0.0) += w;
            alloc_prob += w * c.alloc_mass;
            revenue += w * c.payment;
        }
        MenuStats { choice_probs, alloc_prob, revenue }
    }

    pub(crate) fn solve(&self, q: f64, seeds: &[Menu], seed: u64) -> Result<SolveOutcome> {
        if !(0.0..=1.0).contains(&q) {
            return Err(invalid(format!("allocation cap {q} outside [0,1]")));
        }
        let null = Menu::null(self.class, self.model.dim());
        if q == 0.0 || self.scale <= 0.0 {
            let stats = self.stats(&null);
            return Ok(SolveOutcome { menu: null, stats, converged: true, generations: 0 });
        }

        let mut starts: Vec<Vec<f64>> = seeds.iter().filter_map(|m| self.encode(m)).collect();
        starts.extend(self.heuristic_seeds(q));
        starts.push(self.null_genome());

        let penalty = self.cfg.penalty_weight * self.scale;
        let mut best_feasible: (f64, Vec<f64>) = (0.0, self.null_genome());
        let mut fitness = |g: &[f64]| {
            let (rev, alloc) = self.evaluate(g);
            if alloc <= q + CAP_TOL && rev > best_feasible.0 {
                best_feasible = (rev, g.to_vec());
            }
            rev - penalty * (alloc - q).max(0.0)
        };
        let search = GeneticSearch { bounds: &self.bounds, config: self.cfg };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outcome = search.maximize(&mut fitness, starts, self.scale, &mut rng);

        let mut chosen = best_feasible.1;
        let chosen_rev = best_feasible.0;
        if self.class == MenuClass::Full {
            // scaling every lottery by q/alloc leaves choices unchanged and restores feasibility
            let (rev, alloc) = self.evaluate(&outcome.best);
            if alloc > q && alloc > 0.0 && rev * q / alloc > chosen_rev {
                let lambda = q / alloc;
                let scaled: Vec<f64> = outcome.best.iter().map(|x| x * lambda).collect();
                let (r2, a2) = self.evaluate(&scaled);
                if a2 <= q + CAP_TOL && r2 > chosen_rev {
                    chosen = scaled;
                }
            }
        }
        let menu = self.decode(&chosen);
        let stats = self.stats(&menu);
        if stats.alloc_prob > q + CAP_TOL {
            return Err(invalid(format!("solver produced an infeasible menu ({} > {q})", stats.alloc_prob)));
        }
        if !outcome.converged {
            log::warn!("menu search hit the generation limit at q = {q:.4} while still improving");
        }
        Ok(SolveOutcome { menu, stats, converged: outcome.converged, generations: outcome.generations })
    }
}
