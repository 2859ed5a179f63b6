//! Normalized revenue curves: best revenue as a function of the ex-ante
//! allocation cap, solved on a grid and replaced by its least concave majorant.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{InventoryDistribution, ValuationPrior};
use crate::single_agent::solver::ConstrainedProblem;
use crate::single_agent::{AgentModel, Menu, MenuClass, SolverConfig};

const SLOPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct RevenueCurve {
    class: MenuClass,
    grid: Vec<f64>,
    raw: Vec<f64>,
    menus: Vec<Menu>,
    envelope: Vec<f64>,
    /// Grid indices of the envelope's kinks, first 0 and last `G - 1`.
    vertices: Vec<usize>,
    /// Menu (grid index) realizing each vertex value.
    vertex_menus: Vec<usize>,
    /// Slope of the segment between consecutive vertices.
    slopes: Vec<f64>,
    warnings: Vec<String>,
}

/// A lottery over at most two vertex menus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MenuMixture {
    pub lower: usize,
    pub upper: usize,
    /// Probability on the lower vertex menu.
    pub lower_weight: f64,
}

/// Evenly spaced grid `0, 1/(G-1), ..., 1`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    let g = points.max(2);
    (0..g).map(|j| j as f64 / (g - 1) as f64).collect()
}

/// Solves the capped problem on a `grid_size`-point grid and concavifies.
pub fn build_curve(
    prior: &ValuationPrior,
    p: &InventoryDistribution,
    beta: &[f64],
    class: MenuClass,
    grid_size: usize,
    cfg: &SolverConfig,
) -> Result<RevenueCurve> {
    build_curve_seeded(prior, p, beta, class, grid_size, cfg, &[])
}

/// As [`build_curve`], offering `seeds` as extra starting menus at every grid point.
pub fn build_curve_seeded(
    prior: &ValuationPrior,
    p: &InventoryDistribution,
    beta: &[f64],
    class: MenuClass,
    grid_size: usize,
    cfg: &SolverConfig,
    seeds: &[Menu],
) -> Result<RevenueCurve> {
    if grid_size < 2 {
        return Err(invalid("revenue curves need at least two grid points"));
    }
    let model = AgentModel::new(prior, p, beta)?;
    let problem = ConstrainedProblem::new(model, class, cfg)?;
    let grid = uniform_grid(grid_size);
    let mut menus = Vec::with_capacity(grid_size);
    let mut raw = Vec::with_capacity(grid_size);
    let mut warnings = Vec::new();
    let mut starts: Vec<Menu> = seeds.to_vec();
    for (j, q) in grid.iter().enumerate() {
        let seed = cfg.seed ^ (j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        match problem.solve(*q, &starts, seed) {
            Ok(out) => {
                if !out.converged {
                    warnings.push(format!("q = {q:.4}: search stopped at the generation limit"));
                }
                raw.push(out.stats.revenue);
                starts.push(out.menu.clone());
                if starts.len() > seeds.len() + 1 {
                    starts.remove(seeds.len());
                }
                menus.push(out.menu);
            }
            Err(e) => {
                // the previous point's menu stays feasible under a looser cap
                warnings.push(format!("q = {q:.4}: {e}; reusing the previous grid menu"));
                let prev = menus.last().cloned().unwrap_or_else(|| Menu::null(class, p.type_count()));
                let (rev, _) = problem.model().evaluate(&prev);
                raw.push(rev);
                menus.push(prev);
            }
        }
    }
    for w in &warnings {
        log::warn!("revenue curve: {w}");
    }
    RevenueCurve::from_points(class, grid, raw, menus, warnings)
}

impl RevenueCurve {
    /// Builds the envelope from solved grid values.
    pub fn from_points(class: MenuClass, grid: Vec<f64>, raw: Vec<f64>, menus: Vec<Menu>, warnings: Vec<String>) -> Result<Self> {
        let g = grid.len();
        if g < 2 || raw.len() != g || menus.len() != g {
            return Err(invalid("grid, values and menus must have equal length of at least 2"));
        }
        if grid[0] != 0.0 || (grid[g - 1] - 1.0).abs() > 1e-12 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid must increase strictly from 0 to 1"));
        }
        if raw[0].abs() > 1e-12 || raw.iter().any(|v| !v.is_finite()) {
            return Err(invalid("revenue at zero allocation must be 0 and all values finite"));
        }

        // monotone step: running maximum, remembering which menu attains it
        let mut mono = Vec::with_capacity(g);
        let mut source = Vec::with_capacity(g);
        for (j, v) in raw.iter().enumerate() {
            if j == 0 || *v > mono[j - 1] {
                mono.push(*v);
                source.push(j);
            } else {
                mono.push(mono[j - 1]);
                source.push(source[j - 1]);
            }
        }

        // concave step: pool adjacent grid intervals while slopes fail to decrease
        let scale = mono.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let mut blocks: Vec<(usize, usize)> = Vec::with_capacity(g - 1);
        let slope = |b: &(usize, usize)| (mono[b.1] - mono[b.0]) / (grid[b.1] - grid[b.0]);
        for j in 0..g - 1 {
            blocks.push((j, j + 1));
            while blocks.len() >= 2 {
                let k = blocks.len();
                if slope(&blocks[k - 2]) <= slope(&blocks[k - 1]) + SLOPE_TOL * scale {
                    let merged = (blocks[k - 2].0, blocks[k - 1].1);
                    blocks.truncate(k - 2);
                    blocks.push(merged);
                } else {
                    break;
                }
            }
        }
        let mut vertices: Vec<usize> = blocks.iter().map(|b| b.0).collect();
        vertices.push(g - 1);
        let slopes: Vec<f64> = blocks.iter().map(|b| slope(b).max(0.0)).collect();
        let vertex_menus = vertices.iter().map(|v| source[*v]).collect();

        let mut envelope = vec![0.0; g];
        for (k, b) in blocks.iter().enumerate() {
            for j in b.0..=b.1 {
                envelope[j] = mono[b.0] + slopes[k] * (grid[j] - grid[b.0]);
            }
        }
        Ok(Self { class, grid, raw, menus, envelope, vertices, vertex_menus, slopes, warnings })
    }

    pub fn class(&self) -> MenuClass {
        self.class
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Solved values before concavification.
    pub fn raw_values(&self) -> &[f64] {
        &self.raw
    }

    /// Envelope values at the grid points.
    pub fn values(&self) -> &[f64] {
        &self.envelope
    }

    pub fn menus(&self) -> &[Menu] {
        &self.menus
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_quantile(&self, k: usize) -> f64 {
        self.grid[self.vertices[k]]
    }

    pub fn vertex_menu(&self, k: usize) -> &Menu {
        &self.menus[self.vertex_menus[k]]
    }

    pub fn segment_count(&self) -> usize {
        self.slopes.len()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// `(left, right)` quantiles of segment `k`.
    pub fn segment_bounds(&self, k: usize) -> (f64, f64) {
        (self.vertex_quantile(k), self.vertex_quantile(k + 1))
    }

    /// Segment whose half-open interval `[left, right)` contains `q`; the last
    /// segment also owns `q = 1`.
    pub fn segment_at(&self, q: f64) -> usize {
        let k = self.vertices.partition_point(|v| self.grid[*v] <= q);
        k.saturating_sub(1).min(self.slopes.len() - 1)
    }

    /// Right derivative of the envelope.
    pub fn marginal(&self, q: f64) -> f64 {
        self.slopes[self.segment_at(q)]
    }

    pub fn value(&self, q: f64) -> f64 {
        let k = self.segment_at(q.clamp(0.0, 1.0));
        self.envelope[self.vertices[k]] + self.slopes[k] * (q.clamp(0.0, 1.0) - self.vertex_quantile(k))
    }

    /// Smallest cap beyond which revenue stops growing.
    pub fn saturation(&self) -> f64 {
        match self.slopes.iter().rposition(|s| *s > 0.0) {
            Some(k) => self.vertex_quantile(k + 1),
            None => 0.0,
        }
    }

    /// Largest quantile whose marginal revenue still beats `threshold`: the
    /// right edge of the last segment with slope above it (or equal when
    /// `wins_ties`). Only positive slopes qualify; 0 when none does.
    pub fn critical_quantile(&self, threshold: f64, wins_ties: bool) -> f64 {
        let tol = SLOPE_TOL * threshold.abs().max(1e-300);
        let qualifies = |s: f64| s > 0.0 && (s > threshold + tol || (wins_ties && s >= threshold - tol));
        match self.slopes.iter().rposition(|s| qualifies(*s)) {
            Some(k) => self.vertex_quantile(k + 1),
            None => 0.0,
        }
    }

    /// Mechanism at cap `q`: the lottery between the bracketing vertex menus.
    pub fn mechanism_at(&self, q: f64) -> MenuMixture {
        let q = q.clamp(0.0, 1.0);
        let k = self.segment_at(q);
        let (lo, hi) = self.segment_bounds(k);
        if q <= lo {
            return MenuMixture { lower: k, upper: k, lower_weight: 1.0 };
        }
        if q >= hi {
            return MenuMixture { lower: k + 1, upper: k + 1, lower_weight: 1.0 };
        }
        MenuMixture { lower: k, upper: k + 1, lower_weight: (hi - q) / (hi - lo) }
    }

    pub fn to_record(&self, advertiser: Option<usize>) -> CurveRecord {
        CurveRecord {
            advertiser,
            class: self.class,
            grid: self.grid.clone(),
            values: self.raw.clone(),
            envelope: self.envelope.clone(),
            menus: self.menus.clone(),
        }
    }

    pub fn from_record(record: CurveRecord) -> Result<Self> {
        Self::from_points(record.class, record.grid, record.values, record.menus, Vec::new())
    }
}

/// `alpha * gamma * Phi` at the grid points.
pub fn scale_to_slot(curve: &RevenueCurve, alpha: f64, gamma: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && gamma > 0.0) {
        return Err(invalid("slot effect and quality score must be positive"));
    }
    Ok(curve.values().iter().map(|v| alpha * gamma * v).collect())
}

/// Cached curve: solved values and menus per grid point; the envelope is
/// informational and recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRecord {
    pub advertiser: Option<usize>,
    pub class: MenuClass,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub envelope: Vec<f64>,
    pub menus: Vec<Menu>,
}

/// Per-atom choices at every vertex menu of a curve, so auctions need no
/// menu evaluation.
#[derive(Debug, Clone)]
pub struct VertexChoices {
    atoms: usize,
    dim: usize,
    /// `[vertex][atom]`
    payment: Vec<f64>,
    mass: Vec<f64>,
    /// `[vertex][atom][type]`
    alloc: Vec<f64>,
}

/// The advertiser's choice under a [`MenuMixture`], averaged over the lottery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedChoice {
    pub payment: f64,
    pub alloc_mass: f64,
    /// Allocation probability of the queried type.
    pub alloc: f64,
}

impl VertexChoices {
    pub fn new(curve: &RevenueCurve, model: &AgentModel) -> Self {
        let n = model.atom_count();
        let dim = model.dim();
        let v = curve.vertex_count();
        let mut payment = Vec::with_capacity(v * n);
        let mut mass = Vec::with_capacity(v * n);
        let mut alloc = Vec::with_capacity(v * n * dim);
        for k in 0..v {
            let menu = curve.vertex_menu(k);
            for i in 0..n {
                let c = model.choose(menu, i);
                payment.push(c.payment);
                mass.push(c.alloc_mass);
                alloc.extend((0..dim).map(|t| menu.alloc(c.item, t)));
            }
        }
        Self { atoms: n, dim, payment, mass, alloc }
    }

    pub fn payment(&self, vertex: usize, atom: usize) -> f64 {
        self.payment[vertex * self.atoms + atom]
    }

    pub fn alloc_mass(&self, vertex: usize, atom: usize) -> f64 {
        self.mass[vertex * self.atoms + atom]
    }

    pub fn alloc(&self, vertex: usize, atom: usize, t: usize) -> f64 {
        self.alloc[(vertex * self.atoms + atom) * self.dim + t]
    }

    pub fn mixed(&self, mix: MenuMixture, atom: usize, t: usize) -> MixedChoice {
        let (w, u) = (mix.lower_weight, 1.0 - mix.lower_weight);
        let pick = |k: usize| (self.payment(k, atom), self.alloc_mass(k, atom), self.alloc(k, atom, t));
        let a = pick(mix.lower);
        let b = if u > 0.0 { pick(mix.upper) } else { (0.0, 0.0, 0.0) };
        MixedChoice { payment: w * a.0 + u * b.0, alloc_mass: w * a.1 + u * b.1, alloc: w * a.2 + u * b.2 }
    }
}
