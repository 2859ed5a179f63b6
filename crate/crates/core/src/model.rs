//! Auction environment: inventory types, the separable CTR model, valuation
//! priors, information/disclosure partitions and regime coarsening.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const PROB_TOL: f64 = 1e-12;

/// Distribution over inventory types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct InventoryDistribution {
    probs: Vec<f64>,
}

impl InventoryDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("inventory distribution needs at least one type"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("inventory probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(invalid(format!("inventory probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(invalid("inventory weights must be non-negative with positive sum"));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(types: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; types])
    }

    pub fn type_count(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, t: usize) -> f64 {
        self.probs[t]
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (t, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return t;
            }
        }
        // u landed in the rounding gap above the last cumulative sum
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

impl TryFrom<Vec<f64>> for InventoryDistribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<InventoryDistribution> for Vec<f64> {
    fn from(d: InventoryDistribution) -> Self {
        d.probs
    }
}

/// CTR of advertiser `a` in slot `s` on type `t` is `alpha[s] * beta[t] * gamma[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtrModel {
    slot_effects: Vec<f64>,
    type_effects: Vec<f64>,
    advertiser_quality: Vec<f64>,
}

impl CtrModel {
    pub fn new(slot_effects: Vec<f64>, type_effects: Vec<f64>, advertiser_quality: Vec<f64>) -> Result<Self> {
        if type_effects.first().map_or(true, |b| (b - 1.0).abs() > PROB_TOL) {
            return Err(invalid("type effects must be non-empty with beta_1 = 1"));
        }
        Self::unnormalized(slot_effects, type_effects, advertiser_quality)
    }

    /// Skips the `beta_1 = 1` normalization; coarsened environments carry
    /// block-averaged type effects that need not satisfy it.
    pub(crate) fn unnormalized(
        slot_effects: Vec<f64>,
        type_effects: Vec<f64>,
        advertiser_quality: Vec<f64>,
    ) -> Result<Self> {
        if slot_effects.is_empty() || (slot_effects[0] - 1.0).abs() > PROB_TOL {
            return Err(invalid("slot effects must be non-empty with alpha_1 = 1"));
        }
        if slot_effects.windows(2).any(|w| w[1] > w[0]) || slot_effects.iter().any(|a| !(*a > 0.0)) {
            return Err(invalid("slot effects must be positive and non-increasing"));
        }
        if type_effects.is_empty() || type_effects.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(invalid("type effects must be positive"));
        }
        if advertiser_quality.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(invalid("advertiser quality scores must be positive"));
        }
        let beta_max = type_effects.iter().cloned().fold(0.0, f64::max);
        let gamma_max = advertiser_quality.iter().cloned().fold(0.0, f64::max);
        if beta_max * gamma_max > 1.0 + PROB_TOL {
            return Err(invalid(format!(
                "click-through rate {} exceeds 1",
                beta_max * gamma_max
            )));
        }
        Ok(Self { slot_effects, type_effects, advertiser_quality })
    }

    pub fn slot_effects(&self) -> &[f64] {
        &self.slot_effects
    }

    pub fn type_effects(&self) -> &[f64] {
        &self.type_effects
    }

    pub fn advertiser_quality(&self) -> &[f64] {
        &self.advertiser_quality
    }

    pub fn ctr(&self, advertiser: usize, slot: usize, t: usize) -> f64 {
        self.slot_effects[slot] * self.type_effects[t] * self.advertiser_quality[advertiser]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Discrete,
    Sampled,
}

/// Finite valuation prior: weighted atoms in `R_+^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationPrior {
    dim: usize,
    values: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    kind: PriorKind,
}

impl ValuationPrior {
    pub fn discrete(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(invalid("atom and weight counts differ"));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("prior weights must be non-negative and sum to 1 (sum {total})")));
        }
        Self::build(atoms, weights, PriorKind::Discrete)
    }

    pub fn from_samples(draws: Vec<Vec<f64>>) -> Result<Self> {
        let n = draws.len();
        Self::build(draws, vec![1.0 / n.max(1) as f64; n], PriorKind::Sampled)
    }

    /// Fixes `n` draws of `sampler` under `seed`.
    pub fn sample_with<F>(n: usize, seed: u64, mut sampler: F) -> Result<Self>
    where
        F: FnMut(&mut ChaCha8Rng) -> Vec<f64>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = (0..n).map(|_| sampler(&mut rng)).collect();
        Self::from_samples(draws)
    }

    pub fn point_mass(v: Vec<f64>) -> Result<Self> {
        Self::discrete(vec![v], vec![1.0])
    }

    fn build(atoms: Vec<Vec<f64>>, weights: Vec<f64>, kind: PriorKind) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(invalid("prior needs at least one atom"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(invalid("valuation vectors must have at least one component"));
        }
        let mut values = Vec::with_capacity(atoms.len() * dim);
        for atom in &atoms {
            if atom.len() != dim {
                return Err(invalid("valuation vectors have inconsistent dimensions"));
            }
            if atom.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid("valuations must be finite and non-negative"));
            }
            values.extend_from_slice(atom);
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { dim, values, weights, cumulative, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }

    pub fn draw_atom<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.kind == PriorKind::Sampled {
            return rng.random_range(0..self.len());
        }
        let u = rng.random::<f64>() * self.cumulative[self.len() - 1];
        let i = self.cumulative.partition_point(|c| *c <= u);
        i.min(self.len() - 1)
    }

    /// Largest value of each component over the atoms.
    pub fn component_max(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for atom in self.atoms() {
            for (m, v) in out.iter_mut().zip(atom) {
                *m = f64::max(*m, *v);
            }
        }
        out
    }

    /// Keeps only the listed components, preserving atom order.
    pub fn project(&self, components: &[usize]) -> Result<Self> {
        if components.iter().any(|c| *c >= self.dim) {
            return Err(invalid("projection component out of range"));
        }
        let atoms = self.atoms().map(|a| components.iter().map(|c| a[*c]).collect()).collect();
        Self::build(atoms, self.weights.clone(), self.kind)
    }

    /// Content hash used to share artifacts between advertisers with identical priors.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.dim.hash(&mut h);
        for v in self.values.iter().chain(&self.weights) {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Assignment of types to blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    block_of: Vec<usize>,
    block_count: usize,
}

impl Partition {
    pub fn new(block_of: Vec<usize>) -> Result<Self> {
        if block_of.is_empty() {
            return Err(invalid("partition over zero types"));
        }
        let block_count = block_of.iter().max().unwrap() + 1;
        let mut seen = vec![false; block_count];
        for b in &block_of {
            seen[*b] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(invalid("partition block indices are not contiguous"));
        }
        Ok(Self { block_of, block_count })
    }

    /// Relabels arbitrary block labels to 0.. in order of first appearance.
    pub fn from_labels<L: PartialEq + Clone>(labels: &[L]) -> Result<Self> {
        let mut distinct: Vec<L> = Vec::new();
        let block_of = labels
            .iter()
            .map(|l| match distinct.iter().position(|d| d == l) {
                Some(i) => i,
                None => {
                    distinct.push(l.clone());
                    distinct.len() - 1
                }
            })
            .collect();
        Self::new(block_of)
    }

    pub fn from_blocks(types: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut block_of = vec![usize::MAX; types];
        for (b, members) in blocks.iter().enumerate() {
            for t in members {
                if *t >= types || block_of[*t] != usize::MAX {
                    return Err(invalid("blocks must cover each type exactly once"));
                }
                block_of[*t] = b;
            }
        }
        if block_of.contains(&usize::MAX) {
            return Err(invalid("blocks must cover each type exactly once"));
        }
        Self::new(block_of)
    }

    /// Every type in its own block.
    pub fn full(types: usize) -> Self {
        Self { block_of: (0..types).collect(), block_count: types }
    }

    /// All types in one block.
    pub fn null(types: usize) -> Self {
        Self { block_of: vec![0; types], block_count: 1 }
    }

    pub fn type_count(&self) -> usize {
        self.block_of.len()
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn block_of(&self, t: usize) -> usize {
        self.block_of[t]
    }

    pub fn labels(&self) -> &[usize] {
        &self.block_of
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.block_count];
        for (t, b) in self.block_of.iter().enumerate() {
            out[*b].push(t);
        }
        out
    }

    /// All partitions of `types` elements (restricted growth strings).
    pub fn enumerate(types: usize) -> Vec<Partition> {
        fn rec(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Partition>) {
            if prefix.len() == n {
                out.push(Partition::new(prefix.clone()).expect("restricted growth string"));
                return;
            }
            let next = prefix.iter().max().map_or(0, |m| m + 1);
            for b in 0..=next {
                prefix.push(b);
                rec(prefix, n, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if types > 0 {
            rec(&mut Vec::with_capacity(types), types, &mut out);
        }
        out
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::from_labels(&v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.block_of
    }
}

/// True iff every block of `fine` lies inside some block of `coarse`.
pub fn is_refinement(fine: &Partition, coarse: &Partition) -> Result<bool> {
    if fine.type_count() != coarse.type_count() {
        return Err(invalid("partitions are over different type sets"));
    }
    let mut image = vec![usize::MAX; fine.block_count()];
    for t in 0..fine.type_count() {
        let slot = &mut image[fine.block_of(t)];
        if *slot == usize::MAX {
            *slot = coarse.block_of(t);
        } else if *slot != coarse.block_of(t) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// What the publisher observes (`info`) and what it discloses (`disc`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RegimeFields", into = "RegimeFields")]
pub struct Regime {
    info: Partition,
    disc: Partition,
}

#[derive(Serialize, Deserialize)]
struct RegimeFields {
    info: Partition,
    disc: Partition,
}

impl TryFrom<RegimeFields> for Regime {
    type Error = Error;
    fn try_from(f: RegimeFields) -> Result<Self> {
        Regime::new(f.info, f.disc)
    }
}

impl From<Regime> for RegimeFields {
    fn from(r: Regime) -> Self {
        RegimeFields { info: r.info, disc: r.disc }
    }
}

impl Regime {
    pub fn new(info: Partition, disc: Partition) -> Result<Self> {
        if info.type_count() != disc.type_count() {
            return Err(Error::Regime("partitions are over different type sets".into()));
        }
        if !is_refinement(&info, &disc)? {
            return Err(Error::Regime("disclosure partition is finer than the information partition".into()));
        }
        Ok(Self { info, disc })
    }

    /// Full information, no disclosure.
    pub fn fi_nd(types: usize) -> Self {
        Self { info: Partition::full(types), disc: Partition::null(types) }
    }

    /// Full information, full disclosure.
    pub fn fi_fd(types: usize) -> Self {
        Self { info: Partition::full(types), disc: Partition::full(types) }
    }

    /// No information, no disclosure.
    pub fn ni_nd(types: usize) -> Self {
        Self { info: Partition::null(types), disc: Partition::null(types) }
    }

    /// Parses `fi-nd`, `fi-fd` or `ni-nd` (case-insensitive).
    pub fn named(name: &str, types: usize) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "fi-nd" => Ok(Self::fi_nd(types)),
            "fi-fd" => Ok(Self::fi_fd(types)),
            "ni-nd" => Ok(Self::ni_nd(types)),
            other => Err(invalid(format!("unknown regime name {other:?}"))),
        }
    }

    pub fn info(&self) -> &Partition {
        &self.info
    }

    pub fn disc(&self) -> &Partition {
        &self.disc
    }

    pub fn type_count(&self) -> usize {
        self.info.type_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionEnvironment {
    inventory: InventoryDistribution,
    ctr: CtrModel,
    priors: Vec<ValuationPrior>,
}

impl AuctionEnvironment {
    pub fn new(inventory: InventoryDistribution, ctr: CtrModel, priors: Vec<ValuationPrior>) -> Result<Self> {
        let types = inventory.type_count();
        if ctr.type_effects().len() != types {
            return Err(invalid("type effects do not match the number of inventory types"));
        }
        if ctr.advertiser_quality().len() != priors.len() {
            return Err(invalid("quality scores do not match the number of advertiser priors"));
        }
        if priors.iter().any(|p| p.dim() != types) {
            return Err(invalid("prior dimension does not match the number of inventory types"));
        }
        Ok(Self { inventory, ctr, priors })
    }

    pub fn inventory(&self) -> &InventoryDistribution {
        &self.inventory
    }

    pub fn ctr(&self) -> &CtrModel {
        &self.ctr
    }

    pub fn priors(&self) -> &[ValuationPrior] {
        &self.priors
    }

    pub fn prior(&self, a: usize) -> &ValuationPrior {
        &self.priors[a]
    }

    pub fn type_count(&self) -> usize {
        self.inventory.type_count()
    }

    pub fn slot_count(&self) -> usize {
        self.ctr.slot_effects().len()
    }

    pub fn advertiser_count(&self) -> usize {
        self.priors.len()
    }

    pub fn slot_effects(&self) -> &[f64] {
        self.ctr.slot_effects()
    }

    pub fn type_effects(&self) -> &[f64] {
        self.ctr.type_effects()
    }

    pub fn gamma(&self, a: usize) -> f64 {
        self.ctr.advertiser_quality()[a]
    }

    pub fn gammas(&self) -> &[f64] {
        self.ctr.advertiser_quality()
    }
}

/// Environment whose types are the information blocks of a regime.
#[derive(Debug, Clone)]
pub struct CoarseEnvironment {
    pub env: AuctionEnvironment,
    /// Information block of each original type.
    pub block_of_type: Vec<usize>,
    /// Disclosure partition expressed over information blocks.
    pub disclosure: Partition,
}

/// Aggregates an environment to the information blocks of `regime`.
///
/// Block values are `p_t beta_t`-weighted averages so that expected per-click
/// utility is unchanged by the aggregation.
pub fn coarsen_environment(env: &AuctionEnvironment, regime: &Regime) -> Result<CoarseEnvironment> {
    if regime.type_count() != env.type_count() {
        return Err(Error::Regime("regime and environment have different type counts".into()));
    }
    let info = regime.info();
    let blocks = info.blocks();
    let p = env.inventory().probs();
    let beta = env.type_effects();

    let mut block_p = Vec::with_capacity(blocks.len());
    let mut block_beta = Vec::with_capacity(blocks.len());
    // per block: weights applied to each member type's valuation
    let mut member_weights: Vec<Vec<f64>> = Vec::with_capacity(blocks.len());
    for members in &blocks {
        let mass: f64 = members.iter().map(|t| p[*t]).sum();
        let ctr_mass: f64 = members.iter().map(|t| p[*t] * beta[*t]).sum();
        block_p.push(mass);
        if ctr_mass > 0.0 {
            block_beta.push(ctr_mass / mass);
            member_weights.push(members.iter().map(|t| p[*t] * beta[*t] / ctr_mass).collect());
        } else {
            // a zero-probability block: plain averages keep the block well defined
            let k = members.len() as f64;
            block_beta.push(members.iter().map(|t| beta[*t]).sum::<f64>() / k);
            member_weights.push(vec![1.0 / k; members.len()]);
        }
    }

    let priors = env
        .priors()
        .iter()
        .map(|prior| {
            let atoms = prior
                .atoms()
                .map(|a| {
                    blocks
                        .iter()
                        .zip(&member_weights)
                        .map(|(members, w)| members.iter().zip(w).map(|(t, wt)| wt * a[*t]).sum())
                        .collect()
                })
                .collect();
            ValuationPrior::build(atoms, prior.weights().to_vec(), prior.kind())
        })
        .collect::<Result<Vec<_>>>()?;

    let total: f64 = block_p.iter().sum();
    let inventory = InventoryDistribution { probs: block_p.iter().map(|x| x / total).collect() };
    let ctr = CtrModel::unnormalized(
        env.slot_effects().to_vec(),
        block_beta,
        env.gammas().to_vec(),
    )?;
    let disclosure = Partition::new(blocks.iter().map(|m| regime.disc().block_of(m[0])).collect())?;
    Ok(CoarseEnvironment {
        env: AuctionEnvironment::new(inventory, ctr, priors)?,
        block_of_type: info.labels().to_vec(),
        disclosure,
    })
}

/// The environment seen once disclosure block `block` is revealed.
#[derive(Debug, Clone)]
pub struct DisclosureView {
    pub block: usize,
    /// Probability of this disclosure block.
    pub prob: f64,
    /// Information blocks (types of the coarse environment) inside it.
    pub members: Vec<usize>,
    /// Environment over `members` with conditional probabilities and marginal priors.
    pub env: AuctionEnvironment,
}

impl CoarseEnvironment {
    /// One view per disclosure block; `None` for blocks of probability zero.
    pub fn disclosure_views(&self) -> Result<Vec<Option<DisclosureView>>> {
        let p = self.env.inventory().probs();
        self.disclosure
            .blocks()
            .into_iter()
            .enumerate()
            .map(|(d, members)| {
                let prob: f64 = members.iter().map(|i| p[*i]).sum();
                if !(prob > 0.0) {
                    return Ok(None);
                }
                let inventory = InventoryDistribution {
                    probs: members.iter().map(|i| p[*i] / prob).collect(),
                };
                let beta = members.iter().map(|i| self.env.type_effects()[*i]).collect();
                let ctr = CtrModel::unnormalized(
                    self.env.slot_effects().to_vec(),
                    beta,
                    self.env.gammas().to_vec(),
                )?;
                let priors = self
                    .env
                    .priors()
                    .iter()
                    .map(|pr| pr.project(&members))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some(DisclosureView {
                    block: d,
                    prob,
                    members,
                    env: AuctionEnvironment::new(inventory, ctr, priors)?,
                }))
            })
            .collect()
    }
}

/// One realized auction: inventory type, participating advertisers and their
/// valuation draws (as atom indices into each prior).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionInstance {
    pub seed: u64,
    pub type_index: usize,
    pub active: Vec<bool>,
    pub atoms: Vec<usize>,
    pub valuations: Vec<Vec<f64>>,
}

impl AuctionInstance {
    pub fn participants(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().enumerate().filter(|(_, a)| **a).map(|(i, _)| i)
    }
}

/// Draws a type and one valuation per advertiser, all advertisers participating.
pub fn sample_auction(env: &AuctionEnvironment, seed: u64) -> AuctionInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_auction_with(env, seed, &mut rng, vec![true; env.advertiser_count()])
}

/// Draws type and valuations from `rng` for the given participation mask.
pub fn sample_auction_with<R: Rng + ?Sized>(
    env: &AuctionEnvironment,
    seed: u64,
    rng: &mut R,
    active: Vec<bool>,
) -> AuctionInstance {
    let type_index = env.inventory().draw(rng);
    let atoms: Vec<usize> = env.priors().iter().map(|p| p.draw_atom(rng)).collect();
    let valuations = atoms
        .iter()
        .zip(env.priors())
        .map(|(i, p)| p.atom(*i).to_vec())
        .collect();
    AuctionInstance { seed, type_index, active, atoms, valuations }
}
