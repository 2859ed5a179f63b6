#![allow(dead_code)]

use ibpa_core::model::{AuctionEnvironment, CtrModel, InventoryDistribution, ValuationPrior};
use ibpa_core::revenue_curve::{uniform_grid, RevenueCurve};
use ibpa_core::single_agent::{LotteryPricing, Menu, MenuClass};

/// Equally likely midpoints of `n` cells of `[0,1]`.
pub fn uniform_prior(n: usize) -> ValuationPrior {
    let atoms = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64]).collect();
    ValuationPrior::discrete(atoms, vec![1.0 / n as f64; n]).unwrap()
}

/// One type, identical priors, unit qualities.
pub fn symmetric_env(prior: ValuationPrior, advertisers: usize, alpha: Vec<f64>) -> AuctionEnvironment {
    AuctionEnvironment::new(
        InventoryDistribution::uniform(1).unwrap(),
        CtrModel::new(alpha, vec![1.0], vec![1.0; advertisers]).unwrap(),
        vec![prior; advertisers],
    )
    .unwrap()
}

/// Revenue curve of a uniform value with posted price `1 - q` at cap `q`,
/// written down rather than solved.
pub fn posted_price_curve(points: usize) -> RevenueCurve {
    let grid = uniform_grid(points);
    let raw = grid.iter().map(|q| if *q <= 0.5 { q * (1.0 - q) } else { 0.25 }).collect();
    let menus = grid
        .iter()
        .map(|q| Menu::binary(vec![LotteryPricing { alloc: vec![1.0], payment: 1.0 - q }]).unwrap())
        .collect();
    RevenueCurve::from_points(MenuClass::Binary, grid, raw, menus, vec![]).unwrap()
}

/// Kolmogorov-Smirnov distance of a sample from Uniform[0,1].
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| f64::max(v - i as f64 / n, (i as f64 + 1.0) / n - v))
        .fold(0.0, f64::max)
}

/// 5% critical value of the KS statistic.
pub fn ks_critical(n: usize) -> f64 {
    1.36 / (n as f64).sqrt()
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}
