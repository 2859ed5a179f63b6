//! The slot-normalized single-advertiser problem: menus of lottery pricings,
//! advertiser choice, and the constrained revenue-maximization solver.

mod ga;
pub(crate) mod solver;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{InventoryDistribution, ValuationPrior};

pub use ga::{GaOutcome, GeneticSearch};
pub use solver::{solve_constrained, solve_constrained_seeded, SolveOutcome, SolverConfig};

/// Utilities closer than this are treated as tied.
pub const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MenuClass {
    Full,
    Binary,
    Additive,
}

impl std::str::FromStr for MenuClass {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "binary" | "bin" => Ok(Self::Binary),
            "additive" | "add" => Ok(Self::Additive),
            other => Err(invalid(format!("unknown menu class {other:?}"))),
        }
    }
}

impl std::fmt::Display for MenuClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Binary => "binary",
            Self::Additive => "additive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotteryPricing {
    pub alloc: Vec<f64>,
    pub payment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivePrices {
    pub rho0: f64,
    pub rho: Vec<f64>,
}

/// A menu of lottery pricings; the null lottery is implicit item 0.
///
/// For the additive class the items list is empty and item indices are
/// bundle bitmasks (bit `t` set when type `t` is included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Menu {
    pub class: MenuClass,
    #[serde(default)]
    pub items: Vec<LotteryPricing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub additive: Option<AdditivePrices>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MenuChoice {
    pub item: usize,
    pub utility: f64,
    pub payment: f64,
    /// `sum_t p_t chi_t` of the chosen item.
    pub alloc_mass: f64,
}

impl MenuChoice {
    pub const NULL: MenuChoice = MenuChoice { item: 0, utility: 0.0, payment: 0.0, alloc_mass: 0.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuStats {
    pub choice_probs: BTreeMap<usize, f64>,
    pub alloc_prob: f64,
    pub revenue: f64,
}

impl Menu {
    pub fn null(class: MenuClass, types: usize) -> Self {
        // prohibitive per-type prices; kept finite so the menu serializes
        let additive = (class == MenuClass::Additive).then(|| AdditivePrices { rho0: 0.0, rho: vec![1e300; types] });
        Self { class, items: Vec::new(), additive }
    }

    pub fn full(items: Vec<LotteryPricing>) -> Result<Self> {
        for it in &items {
            if it.alloc.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(invalid("allocation probabilities must lie in [0,1]"));
            }
            if !it.payment.is_finite() {
                return Err(invalid("payments must be finite"));
            }
        }
        Ok(Self { class: MenuClass::Full, items, additive: None })
    }

    pub fn binary(items: Vec<LotteryPricing>) -> Result<Self> {
        if items.iter().any(|it| it.alloc.iter().any(|x| *x != 0.0 && *x != 1.0)) {
            return Err(invalid("binary menus need allocations in {0,1}"));
        }
        Ok(Self { class: MenuClass::Binary, ..Self::full(items)? })
    }

    pub fn additive(rho0: f64, rho: Vec<f64>) -> Result<Self> {
        if !(rho0 >= 0.0) || rho.iter().any(|r| r.is_nan()) {
            return Err(invalid("additive prices need rho0 >= 0"));
        }
        if rho.len() > 64 {
            return Err(invalid("additive menus support at most 64 types"));
        }
        Ok(Self { class: MenuClass::Additive, items: Vec::new(), additive: Some(AdditivePrices { rho0, rho }) })
    }

    /// Allocation probability of type `t` under item `item`.
    pub fn alloc(&self, item: usize, t: usize) -> f64 {
        match self.class {
            MenuClass::Additive => ((item >> t) & 1) as f64,
            _ if item == 0 => 0.0,
            _ => self.items[item - 1].alloc[t],
        }
    }

    /// Payment of item `item` (types' probabilities are needed for additive menus).
    pub fn payment(&self, item: usize, probs: &[f64]) -> f64 {
        match self.class {
            MenuClass::Additive => {
                if item == 0 {
                    return 0.0;
                }
                let add = self.additive.as_ref().expect("additive prices");
                add.rho0
                    + (0..add.rho.len()).filter(|t| (item >> t) & 1 == 1).map(|t| probs[t] * add.rho[t]).sum::<f64>()
            }
            _ if item == 0 => 0.0,
            _ => self.items[item - 1].payment,
        }
    }

    /// True when every item allocates type `t` with probability 0 or 1.
    pub fn deterministic_for(&self, t: usize) -> bool {
        self.class != MenuClass::Full || self.items.iter().all(|it| it.alloc[t] == 0.0 || it.alloc[t] == 1.0)
    }

    /// Utility-maximizing item for CTR-weighted values `wv_t = p_t beta_t v_t`.
    pub fn choose(&self, wv: &[f64], probs: &[f64]) -> MenuChoice {
        match self.class {
            MenuClass::Additive => {
                let add = self.additive.as_ref().expect("additive prices");
                let (mask, utility, payment, alloc_mass) = additive_pick(add.rho0, wv.len(), |t| {
                    (wv[t] - probs[t] * add.rho[t], probs[t] * add.rho[t], probs[t])
                });
                MenuChoice { item: mask as usize, utility, payment, alloc_mass }
            }
            _ => {
                let mut best = MenuChoice::NULL;
                for (k, it) in self.items.iter().enumerate() {
                    let u = dot(wv, &it.alloc) - it.payment;
                    if beats(u, it.payment, best.utility, best.payment) {
                        best = MenuChoice {
                            item: k + 1,
                            utility: u,
                            payment: it.payment,
                            alloc_mass: dot(probs, &it.alloc),
                        };
                    }
                }
                best
            }
        }
    }
}

/// Seller-favorable comparison: strictly higher utility, or tied utility and
/// strictly higher payment. Earlier candidates win remaining ties.
#[inline]
pub(crate) fn beats(u: f64, pay: f64, best_u: f64, best_pay: f64) -> bool {
    let eps = TIE_EPS * best_u.abs().max(1.0);
    u > best_u + eps || (u >= best_u - eps && pay > best_pay)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Core of the additive choice. `parts(t)` yields `(surplus_t, price_mass_t, prob_t)`
/// where including `t` adds `surplus_t` to utility and `price_mass_t` to payment.
/// Returns `(mask, utility, payment, alloc_mass)`.
#[inline]
fn additive_pick<F: Fn(usize) -> (f64, f64, f64)>(rho0: f64, dim: usize, parts: F) -> (u64, f64, f64, f64) {
    let mut mask = 0u64;
    let mut gain = 0.0;
    let mut pay = rho0;
    let mut mass = 0.0;
    for t in 0..dim {
        let (s, price, p) = parts(t);
        // zero-surplus types are added only when they raise the payment
        if s > 0.0 || (s == 0.0 && price > 0.0) {
            mask |= 1 << t;
            gain += s;
            pay += price;
            mass += p;
        }
    }
    let utility = gain - rho0;
    let eps = TIE_EPS * gain.abs().max(1.0);
    if mask != 0 && (utility > eps || (utility >= -eps && pay > 0.0)) {
        (mask, utility, pay, mass)
    } else {
        (0, 0.0, 0.0, 0.0)
    }
}

/// Bundle chosen under an entry fee plus per-type prices.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleChoice {
    pub members: Vec<usize>,
    pub utility: f64,
}

/// Utility-maximizing bundle under additive pricing `rho0 + sum_{t in bundle} p_t rho_t`
/// for valuation `v`, in a single pass over types.
///
/// A type whose surplus `p_t (v_t - rho_t)` alone covers the entry fee makes
/// buying worthwhile, after which every positive-surplus type is added; when no
/// such type exists the positive-surplus bundle is compared against the null bundle.
pub fn best_bundle(rho0: f64, rho: &[f64], v: &[f64], p: &InventoryDistribution) -> BundleChoice {
    let probs = p.probs();
    let mut large = false;
    let mut positive = Vec::new();
    let mut gain = 0.0;
    for t in 0..v.len() {
        let s = probs[t] * (v[t] - rho[t]);
        if s > rho0 {
            large = true;
        }
        if s > 0.0 || (s == 0.0 && probs[t] * rho[t] > 0.0) {
            positive.push(t);
            gain += s;
        }
    }
    let utility = gain - rho0;
    let buy = !positive.is_empty() && (large || utility > -TIE_EPS * gain.abs().max(1.0));
    if buy {
        BundleChoice { members: positive, utility }
    } else {
        BundleChoice { members: Vec::new(), utility: 0.0 }
    }
}

/// Advertiser's preferred item given its valuation vector.
pub fn advertiser_choice(menu: &Menu, v: &[f64], p: &InventoryDistribution, beta: &[f64]) -> MenuChoice {
    let probs = p.probs();
    let wv: Vec<f64> = (0..v.len()).map(|t| probs[t] * beta[t] * v[t]).collect();
    menu.choose(&wv, probs)
}

/// Exact choice probabilities, allocation probability and revenue over a finite prior.
pub fn menu_stats(menu: &Menu, prior: &ValuationPrior, p: &InventoryDistribution, beta: &[f64]) -> MenuStats {
    let mut choice_probs = BTreeMap::new();
    let mut alloc_prob = 0.0;
    let mut revenue = 0.0;
    for (i, atom) in prior.atoms().enumerate() {
        let w = prior.weight(i);
        let c = advertiser_choice(menu, atom, p, beta);
        *choice_probs.entry(c.item).or_insert(0.0) += w;
        alloc_prob += w * c.alloc_mass;
        revenue += w * c.payment;
    }
    MenuStats { choice_probs, alloc_prob, revenue }
}

/// A lottery over (slot, type) pairs: `alloc[s][t]` is the probability of
/// receiving slot `s` on type `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotLottery {
    pub alloc: Vec<Vec<f64>>,
    pub payment: f64,
}

/// Rewrites lotteries over slots `top_slot..` as lotteries over `top_slot`
/// alone with allocation `sum_s (alpha_s / alpha_top) chi_st`.
pub fn collapse_to_top_slot(lotteries: &[SlotLottery], slot_effects: &[f64], top_slot: usize) -> Result<Menu> {
    if top_slot >= slot_effects.len() {
        return Err(invalid("top slot out of range"));
    }
    let base = slot_effects[top_slot];
    let mut items = Vec::with_capacity(lotteries.len());
    for lot in lotteries {
        if lot.alloc.len() != slot_effects.len() {
            return Err(invalid("lottery slot count does not match slot effects"));
        }
        let types = lot.alloc[0].len();
        let mut alloc = vec![0.0; types];
        for (s, row) in lot.alloc.iter().enumerate() {
            if row.len() != types || row.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(invalid("slot allocations must be probabilities over a common type set"));
            }
            if s < top_slot && row.iter().any(|x| *x > 0.0) {
                return Err(invalid(format!("lottery uses slot {} above the top available slot", s + 1)));
            }
            for (a, x) in alloc.iter_mut().zip(row) {
                *a += slot_effects[s] / base * x;
            }
        }
        for t in 0..types {
            let total: f64 = lot.alloc.iter().map(|row| row[t]).sum();
            if total > 1.0 + 1e-12 {
                return Err(invalid(format!("type {} is allocated more than one slot", t + 1)));
            }
        }
        items.push(LotteryPricing { alloc: alloc.iter().map(|a| a.min(1.0)).collect(), payment: lot.payment });
    }
    Menu::full(items)
}

/// A finite prior pre-multiplied by `p_t beta_t`, the form every menu
/// evaluation consumes.
#[derive(Debug, Clone)]
pub struct AgentModel {
    dim: usize,
    wv: Vec<f64>,
    weights: Vec<f64>,
    probs: Vec<f64>,
    beta: Vec<f64>,
}

impl AgentModel {
    pub fn new(prior: &ValuationPrior, p: &InventoryDistribution, beta: &[f64]) -> Result<Self> {
        let dim = p.type_count();
        if prior.dim() != dim || beta.len() != dim {
            return Err(invalid("prior, inventory and type effects disagree on the number of types"));
        }
        let probs = p.probs().to_vec();
        let mut wv = Vec::with_capacity(prior.len() * dim);
        for atom in prior.atoms() {
            wv.extend((0..dim).map(|t| probs[t] * beta[t] * atom[t]));
        }
        Ok(Self { dim, wv, weights: prior.weights().to_vec(), probs, beta: beta.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atom_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weighted_values(&self, i: usize) -> &[f64] {
        &self.wv[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn choose(&self, menu: &Menu, i: usize) -> MenuChoice {
        menu.choose(self.weighted_values(i), &self.probs)
    }

    /// `(revenue, alloc_prob)` of a menu.
    pub fn evaluate(&self, menu: &Menu) -> (f64, f64) {
        (0..self.atom_count()).fold((0.0, 0.0), |(r, a), i| {
            let c = self.choose(menu, i);
            (r + self.weights[i] * c.payment, a + self.weights[i] * c.alloc_mass)
        })
    }

    /// Value of the grand bundle for atom `i`.
    pub fn grand_value(&self, i: usize) -> f64 {
        self.weighted_values(i).iter().sum()
    }
}
