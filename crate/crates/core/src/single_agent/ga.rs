//! Real-coded genetic search with tournament selection, elitism, blend
//! crossover and reset mutation, followed by an optional pattern-search polish.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SolverConfig;

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: Vec<f64>,
    pub fitness: f64,
    pub generations: usize,
    /// False when the generation limit was hit while still improving.
    pub converged: bool,
}

pub struct GeneticSearch<'a> {
    pub bounds: &'a [(f64, f64)],
    pub config: &'a SolverConfig,
}

impl GeneticSearch<'_> {
    fn clamp(&self, g: &mut [f64]) {
        for (x, (lo, hi)) in g.iter_mut().zip(self.bounds) {
            *x = x.clamp(*lo, *hi);
        }
    }

    fn random_genome(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| lo + rng.random::<f64>() * (hi - lo)).collect()
    }

    /// Maximizes `fitness` starting from `seeds` plus random genomes.
    pub fn maximize<F: FnMut(&[f64]) -> f64>(
        &self,
        fitness: &mut F,
        seeds: Vec<Vec<f64>>,
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> GaOutcome {
        let cfg = self.config;
        let n = self.bounds.len();
        let pop_size = cfg.population.max(2);
        let elites = cfg.elites.min(pop_size - 1);
        let improve_tol = 1e-12 * scale.max(1e-300);

        let mut pop: Vec<Vec<f64>> = seeds.into_iter().filter(|s| s.len() == n).take(pop_size).collect();
        for g in pop.iter_mut() {
            self.clamp(g);
        }
        while pop.len() < pop_size {
            pop.push(self.random_genome(rng));
        }
        let mut fit: Vec<f64> = pop.iter().map(|g| fitness(g)).collect();

        let mut best_fit = f64::NEG_INFINITY;
        let mut best = pop[0].clone();
        let mut last_improvement = 0;
        let mut generations = 0;
        let mut converged = false;

        let creep = Normal::new(0.0, 1.0).expect("unit normal");
        let mut order: Vec<usize> = (0..pop_size).collect();
        for gen in 0..cfg.max_generations {
            generations = gen + 1;
            order.sort_by(|a, b| fit[*b].total_cmp(&fit[*a]));
            if fit[order[0]] > best_fit + improve_tol {
                best_fit = fit[order[0]];
                best = pop[order[0]].clone();
                last_improvement = gen;
            }
            if gen - last_improvement >= cfg.stall_generations {
                converged = true;
                break;
            }

            let parents: Vec<usize> = (0..cfg.parents.max(2))
                .map(|_| {
                    (0..cfg.tournament_size.max(1))
                        .map(|_| rng.random_range(0..pop_size))
                        .max_by(|a, b| fit[*a].total_cmp(&fit[*b]))
                        .unwrap()
                })
                .collect();

            let mut next: Vec<Vec<f64>> = order[..elites].iter().map(|i| pop[*i].clone()).collect();
            let mut next_fit: Vec<f64> = order[..elites].iter().map(|i| fit[*i]).collect();
            while next.len() < pop_size {
                let a = &pop[parents[rng.random_range(0..parents.len())]];
                let b = &pop[parents[rng.random_range(0..parents.len())]];
                let mut child = if rng.random::<f64>() < cfg.crossover_prob {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| {
                            let u = -cfg.blend_alpha + (1.0 + 2.0 * cfg.blend_alpha) * rng.random::<f64>();
                            x + u * (y - x)
                        })
                        .collect()
                } else {
                    a.clone()
                };
                if rng.random::<f64>() < cfg.mutation_prob {
                    if rng.random::<bool>() {
                        let i = rng.random_range(0..n);
                        let (lo, hi) = self.bounds[i];
                        child[i] = lo + rng.random::<f64>() * (hi - lo);
                    } else {
                        let width = 0.02 * rng.random::<f64>();
                        for (x, (lo, hi)) in child.iter_mut().zip(self.bounds) {
                            *x += width * (hi - lo) * creep.sample(rng);
                        }
                    }
                }
                self.clamp(&mut child);
                next_fit.push(fitness(&child));
                next.push(child);
            }
            pop = next;
            fit = next_fit;
        }
        if let Some(i) = (0..pop_size).max_by(|a, b| fit[*a].total_cmp(&fit[*b])) {
            if fit[i] > best_fit {
                best_fit = fit[i];
                best = pop[i].clone();
            }
        }

        if cfg.polish_evaluations > 0 {
            let (g, f) = self.polish(fitness, best, best_fit, cfg.polish_evaluations);
            best = g;
            best_fit = f;
        }
        GaOutcome { best, fitness: best_fit, generations, converged }
    }

    /// Compass search: try each coordinate up and down, halve steps when no move helps.
    fn polish<F: FnMut(&[f64]) -> f64>(&self, fitness: &mut F, mut x: Vec<f64>, mut fx: f64, budget: usize) -> (Vec<f64>, f64) {
        let mut steps: Vec<f64> = self.bounds.iter().map(|(lo, hi)| 0.05 * (hi - lo)).collect();
        let floor: Vec<f64> = self.bounds.iter().map(|(lo, hi)| 1e-10 * (hi - lo).max(1e-300)).collect();
        let mut used = 0;
        while used < budget {
            let mut moved = false;
            for i in 0..x.len() {
                if steps[i] < floor[i] {
                    continue;
                }
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] += dir * steps[i];
                    self.clamp(&mut y);
                    if y[i] == x[i] {
                        continue;
                    }
                    let fy = fitness(&y);
                    used += 1;
                    if fy > fx {
                        x = y;
                        fx = fy;
                        moved = true;
                        break;
                    }
                }
                if used >= budget {
                    break;
                }
            }
            if !moved {
                let mut active = false;
                for (s, f) in steps.iter_mut().zip(&floor) {
                    *s *= 0.5;
                    active |= *s >= *f;
                }
                if !active {
                    break;
                }
            }
        }
        (x, fx)
    }
}
