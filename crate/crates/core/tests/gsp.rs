mod common;

use common::*;
use ibpa_core::gsp::*;
use ibpa_core::model::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point_env(values: &[f64], alpha: Vec<f64>) -> AuctionEnvironment {
    let priors = values.iter().map(|v| ValuationPrior::point_mass(vec![*v]).unwrap()).collect();
    AuctionEnvironment::new(
        InventoryDistribution::uniform(1).unwrap(),
        CtrModel::new(alpha, vec![1.0], vec![1.0; values.len()]).unwrap(),
        priors,
    )
    .unwrap()
}

fn config(types: usize, equilibrium: Equilibrium) -> GspConfig {
    GspConfig { regime: Regime::fi_fd(types), reserve: 0.0, equilibrium }
}

/// Both envy-free inequalities for each filled slot, with `sigma_{S+1}` the
/// first loser's score (or 0).
fn assert_envy_free(scores: &[f64], alpha: &[f64], prices: &[f64]) {
    let icc = incremental_costs(prices, alpha);
    for s in 0..prices.len() {
        let below = scores.get(s + 1).copied().unwrap_or(0.0);
        let tol = 1e-9 * scores[0].max(1.0);
        assert!(scores[s] + tol >= icc[s], "slot {s}: score {} < ICC {}", scores[s], icc[s]);
        assert!(icc[s] + tol >= below, "slot {s}: ICC {} < next score {below}", icc[s]);
    }
    assert!(icc.windows(2).all(|w| w[0] + 1e-9 >= w[1]), "ICCs not monotone: {icc:?}");
}

#[test]
fn next_price_rule_on_fixed_bids() {
    let env = point_env(&[10.0, 6.0, 4.0], vec![1.0, 0.5]);
    let out = run_gsp(&env, &config(1, Equilibrium::TruthfulProxy), &sample_auction(&env, 0)).unwrap();
    assert_eq!(out.assignment, vec![Some(0), Some(1)]);
    assert_eq!(&out.per_click_payments[..2], &[6.0, 4.0]);
    assert_eq!(out.revenue, 8.0);
}

#[test]
fn upper_bound_binds_the_slot_holder_score() {
    let alpha = [1.0, 0.5];
    let scores = [10.0, 6.0, 4.0];
    let p = envy_free_upper_bids(&scores, &alpha);
    // slot 2 pays the loser's score; slot 1 holder is indifferent at ICC = 10
    assert_eq!(p.prices, vec![7.0, 4.0]);
    assert_envy_free(&scores, &alpha, &p.prices);
    assert_eq!(incremental_costs(&p.prices, &alpha)[0], 10.0);
    assert_eq!(p.bid_scores, vec![10.0, 7.0, 4.0]);
}

#[test]
fn lone_bidder_without_reserve_pays_nothing() {
    let env = point_env(&[3.0], vec![1.0]);
    let out = run_gsp(&env, &config(1, Equilibrium::EnvyFreeUpper), &sample_auction(&env, 0)).unwrap();
    assert_eq!(out.assignment, vec![Some(0)]);
    assert_eq!(out.revenue, 0.0);
    assert_eq!(out.utilities[0], 3.0);
}

#[test]
fn reserve_sets_a_floor() {
    let env = point_env(&[3.0, 1.0], vec![1.0]);
    let cfg = GspConfig { reserve: 2.0, ..config(1, Equilibrium::TruthfulProxy) };
    let out = run_gsp(&env, &cfg, &sample_auction(&env, 0)).unwrap();
    assert_eq!(out.per_click_payments[0], 2.0);
}

#[test]
fn truthful_second_price_on_uniforms() {
    let env = symmetric_env(uniform_prior(1000), 2, vec![1.0]);
    let gsp = Gsp::new(&env, config(1, Equilibrium::TruthfulProxy)).unwrap();
    let revs: Vec<f64> = (0..100_000).map(|s| gsp.run(&sample_auction(&env, s)).revenue).collect();
    let (m, se) = mean_and_stderr(&revs);
    assert!((m - 1.0 / 3.0).abs() <= 3.0 * se + 1e-4, "mean {m}, se {se}");
}

#[test]
fn outcome_depends_only_on_disclosure() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let priors = (0..3)
        .map(|a| ValuationPrior::sample_with(50, a, |r| (0..4).map(|_| r.random::<f64>()).collect()).unwrap())
        .collect();
    let env = AuctionEnvironment::new(
        InventoryDistribution::from_weights(&[0.1, 0.2, 0.3, 0.4]).unwrap(),
        CtrModel::new(vec![1.0, 0.6], vec![1.0, 0.9, 0.5, 0.7], vec![1.0, 0.8, 0.6]).unwrap(),
        priors,
    )
    .unwrap();
    let disc = Partition::new(vec![0, 0, 1, 1]).unwrap();
    for info in [Partition::full(4), Partition::new(vec![0, 0, 1, 2]).unwrap(), disc.clone()] {
        let wide = Gsp::new(&env, GspConfig { regime: Regime::new(info, disc.clone()).unwrap(), reserve: 0.0, equilibrium: Equilibrium::EnvyFreeUpper }).unwrap();
        let narrow = Gsp::new(&env, GspConfig { regime: Regime::new(disc.clone(), disc.clone()).unwrap(), reserve: 0.0, equilibrium: Equilibrium::EnvyFreeUpper }).unwrap();
        for _ in 0..300 {
            let inst = sample_auction(&env, rng.random());
            assert_eq!(wide.run(&inst), narrow.run(&inst));
        }
    }
}

#[test]
fn single_slot_upper_bound_equals_truthful() {
    let env = symmetric_env(uniform_prior(200), 4, vec![1.0]);
    let upper = Gsp::new(&env, config(1, Equilibrium::EnvyFreeUpper)).unwrap();
    let truthful = Gsp::new(&env, config(1, Equilibrium::TruthfulProxy)).unwrap();
    for s in 0..1000 {
        let inst = sample_auction(&env, s);
        assert!(upper.run(&inst).revenue >= truthful.run(&inst).revenue - 1e-12);
    }
}

fn sorted_scores_and_alpha() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(0.0f64..10.0, 1..8), prop::collection::vec(0.05f64..1.0, 1..6)).prop_map(|(mut s, mut a)| {
        s.sort_by(|x, y| y.total_cmp(x));
        a.sort_by(|x, y| y.total_cmp(x));
        a[0] = 1.0;
        a.dedup();
        (s, a)
    })
}

proptest! {
    #[test]
    fn upper_profile_is_envy_free((scores, alpha) in sorted_scores_and_alpha()) {
        let p = envy_free_upper_bids(&scores, &alpha);
        assert_envy_free(&scores, &alpha, &p.prices);
        // bids rank the advertisers in score order
        prop_assert!(p.bid_scores.windows(2).all(|w| w[0] + 1e-12 >= w[1]));
    }

    #[test]
    fn upper_profile_maximizes_revenue_among_envy_free((scores, alpha) in sorted_scores_and_alpha(), shrink in 0.0f64..1.0) {
        // any other price vector meeting the inequalities with the same bottom
        // price raises no more revenue: pull each ICC down toward its lower limit
        let p = envy_free_upper_bids(&scores, &alpha);
        let filled = p.prices.len();
        let mut other = p.prices.clone();
        for s in (0..filled.saturating_sub(1)).rev() {
            let lo_icc = scores[s + 1];
            let icc = scores[s] - shrink * (scores[s] - lo_icc);
            other[s] = ((alpha[s] - alpha[s + 1]) * icc + alpha[s + 1] * other[s + 1]) / alpha[s];
        }
        assert_envy_free(&scores, &alpha, &other);
        let rev = |x: &[f64]| x.iter().zip(&alpha).map(|(p, a)| p * a).sum::<f64>();
        prop_assert!(rev(&p.prices) + 1e-9 >= rev(&other));
    }
}
