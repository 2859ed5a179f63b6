use ibpa_estimation::turnbull::innermost_intervals;
use ibpa_estimation::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn iv(l: f64, u: f64) -> IntervalObservation {
    IntervalObservation::new(l, u, 1.0).unwrap()
}

#[test]
fn narrow_intervals_give_the_empirical_cdf() {
    let eps = 1e-6;
    let obs: Vec<_> = [1.0, 2.0, 2.0, 3.0].iter().map(|l| iv(*l, l + eps)).collect();
    let fit = turnbull_em(&obs, &TurnbullConfig::default()).unwrap();
    assert!(fit.converged);
    for (x, want) in [(1.0 + eps, 0.25), (2.0 + eps, 0.75), (3.0 + eps, 1.0), (0.5, 0.0)] {
        assert!((fit.cdf(x) - want).abs() < 1e-9, "F({x}) = {}", fit.cdf(x));
    }
}

#[test]
fn disjoint_intervals_split_evenly() {
    let obs = vec![iv(0.0, 1.0), iv(0.0, 1.0), iv(2.0, 3.0), iv(2.0, 3.0)];
    let fit = turnbull_em(&obs, &TurnbullConfig::default()).unwrap();
    assert_eq!(fit.intervals, vec![(0.0, 1.0), (2.0, 3.0)]);
    assert!((fit.mass[0] - 0.5).abs() < 1e-12 && (fit.mass[1] - 0.5).abs() < 1e-12);
    assert!((fit.cdf(0.5) - 0.25).abs() < 1e-12);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let obs = vec![iv(0.0, 2.0), iv(1.0, 3.0), iv(0.5, 1.5), iv(1.2, 4.0)];
    let fit = turnbull_em(&obs, &TurnbullConfig { tol: 0.0, max_iter: 3 }).unwrap();
    assert!(!fit.converged);
    assert_eq!(fit.iterations, 3);
}

/// Discrete truth, each draw reported as the fixed-width bin holding it.
fn binned_draws(width: f64, n: usize, seed: u64) -> (Vec<IntervalObservation>, Vec<(f64, f64)>) {
    let atoms: Vec<(f64, f64)> = (0..20).map(|k| (0.2 * k as f64 + 0.05, if k < 10 { 0.07 } else { 0.03 })).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = (0..n)
        .map(|_| {
            let mut u = rng.random::<f64>();
            let v = atoms.iter().find(|(_, p)| {
                u -= p;
                u < 0.0
            });
            let v = v.unwrap_or(atoms.last().unwrap()).0;
            let bin = (v / width).floor();
            iv(bin * width, (bin + 1.0) * width)
        })
        .collect();
    (obs, atoms)
}

/// Largest CDF gap halfway between atoms, where the truth is flat.
fn ks_between_atoms(fit: &TurnbullFit, atoms: &[(f64, f64)]) -> f64 {
    let mut cum = 0.0;
    atoms
        .iter()
        .map(|(x, p)| {
            cum += p;
            (fit.cdf(x + 0.1) - cum).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn narrower_brackets_halve_the_error() {
    let cfg = TurnbullConfig::default();
    let (wide, atoms) = binned_draws(0.5, 20_000, 1);
    let (narrow, _) = binned_draws(0.1, 20_000, 1);
    let ks_wide = ks_between_atoms(&turnbull_em(&wide, &cfg).unwrap(), &atoms);
    let ks_narrow = ks_between_atoms(&turnbull_em(&narrow, &cfg).unwrap(), &atoms);
    assert!(ks_narrow <= ks_wide / 2.0, "width 0.5: {ks_wide}, width 0.1: {ks_narrow}");
}

fn observations() -> impl Strategy<Value = Vec<IntervalObservation>> {
    prop::collection::vec((0u32..20, 1u32..8, 1u32..4), 1..60).prop_map(|v| {
        v.into_iter().map(|(l, w, k)| IntervalObservation::new(l as f64 * 0.5, (l + w) as f64 * 0.5, k as f64).unwrap()).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn em_never_lowers_the_likelihood(obs in observations()) {
        let fit = turnbull_em(&obs, &TurnbullConfig { tol: 1e-10, max_iter: 5000 }).unwrap();
        for w in fit.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn mass_sits_on_innermost_intervals(obs in observations()) {
        let fit = turnbull_em(&obs, &TurnbullConfig::default()).unwrap();
        prop_assert!((fit.mass.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert_eq!(&fit.intervals, &innermost_intervals(&obs));
        for (l, r) in &fit.intervals {
            // no endpoint falls strictly inside an innermost interval
            for o in &obs {
                prop_assert!(!(o.lower > *l && o.lower < *r) && !(o.upper > *l && o.upper < *r));
            }
            // and at least one observation starts at l and one ends at r
            prop_assert!(obs.iter().any(|o| o.lower == *l) && obs.iter().any(|o| o.upper == *r));
        }
        prop_assert!(fit.mass.iter().all(|m| *m >= 0.0));
    }
}
