//! Mixed-integer genetic algorithm.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sanitize, VariableKind, VariableSpec};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GAConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    pub elite: usize,
    pub seed: u64,
    /// Mutation σ as a fraction of each range, at the first and last generation.
    pub mutation_scale: (f64, f64),
    /// Stop after this many generations without improvement.
    pub stall_generations: Option<usize>,
    /// Evaluation budget of the final pattern search over continuous genes.
    pub polish_evals: usize,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            population: 60,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            elite: 2,
            seed: 0,
            mutation_scale: (0.10, 0.01),
            stall_generations: None,
            polish_evals: 0,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidInput("GA population must be at least 4".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::InvalidInput("GA rates must lie in [0, 1]".into()));
        }
        if self.elite >= self.population {
            return Err(Error::InvalidInput("GA elite count must be below the population".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_in_generation: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GAResult {
    pub best: Vec<f64>,
    pub value: f64,
    /// Generation 0 is the initial population; a polish step adds one entry.
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
}

fn evaluate<F>(objective: &F, pop: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    pop.par_iter().map(|x| sanitize(objective(x))).collect()
}

fn tournament<R: Rng>(rng: &mut R, fitness: &[f64]) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..3 {
        let k = rng.random_range(0..fitness.len());
        if fitness[k] < fitness[best] {
            best = k;
        }
    }
    best
}

/// Minimises `objective` over the box `spec`.
///
/// `initial` seeds part of the first population (projected into bounds);
/// the rest is uniform. All random draws for a generation happen before its
/// evaluations, which may run in parallel, so the result depends only on
/// the seed.
pub fn miga_minimize<F>(objective: &F, spec: &VariableSpec, config: &GAConfig, initial: &[Vec<f64>]) -> Result<GAResult>
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    config.validate()?;
    let n = spec.len();
    let mut rng = seeds::rng(seeds::derive(config.seed, &[0x6761]));

    let mut pop: Vec<Vec<f64>> = initial
        .iter()
        .take(config.population)
        .map(|x| {
            let mut x = x.clone();
            x.resize(n, 0.0);
            spec.project(&mut x);
            x
        })
        .collect();
    while pop.len() < config.population {
        pop.push(spec.sample(&mut rng));
    }
    let mut fit = evaluate(objective, &pop);
    let mut evaluations = pop.len();

    let argmin = |f: &[f64]| (0..f.len()).min_by(|a, b| f[*a].total_cmp(&f[*b])).unwrap_or(0);
    let i0 = argmin(&fit);
    let mut best = pop[i0].clone();
    let mut best_val = fit[i0];
    let mut history = vec![GenerationStats { generation: 0, best_in_generation: fit[i0], best_so_far: best_val }];
    let mut stall = 0usize;

    for gen in 1..=config.generations {
        let progress = if config.generations > 1 { (gen - 1) as f64 / (config.generations - 1) as f64 } else { 0.0 };
        let (s0, s1) = config.mutation_scale;
        let scale = s0 * (s1 / s0).powf(progress);

        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|a, b| fit[*a].total_cmp(&fit[*b]));
        let mut next: Vec<Vec<f64>> = order[..config.elite].iter().map(|i| pop[*i].clone()).collect();
        let mut next_fit: Vec<f64> = order[..config.elite].iter().map(|i| fit[*i]).collect();

        let mut children = Vec::with_capacity(config.population - config.elite);
        while children.len() < config.population - config.elite {
            let a = &pop[tournament(&mut rng, &fit)];
            let b = &pop[tournament(&mut rng, &fit)];
            let (mut c1, mut c2) = (a.clone(), b.clone());
            if rng.random::<f64>() < config.crossover_rate {
                for (k, v) in spec.vars.iter().enumerate() {
                    match v.kind {
                        VariableKind::Continuous => {
                            let (lo, hi) = (a[k].min(b[k]), a[k].max(b[k]));
                            let d = 0.5 * (hi - lo);
                            if hi - lo > 0.0 {
                                c1[k] = rng.random_range(lo - d..=hi + d);
                                c2[k] = rng.random_range(lo - d..=hi + d);
                            }
                        }
                        VariableKind::Integer => {
                            if rng.random::<bool>() {
                                c1[k] = b[k];
                                c2[k] = a[k];
                            }
                        }
                    }
                }
            }
            for c in [&mut c1, &mut c2] {
                for (k, v) in spec.vars.iter().enumerate() {
                    if rng.random::<f64>() < config.mutation_rate {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let sigma = match v.kind {
                            VariableKind::Continuous => scale * v.range(),
                            VariableKind::Integer => (scale * v.range()).max(1.0),
                        };
                        c[k] += z * sigma;
                    }
                }
                spec.project(c);
            }
            children.push(c1);
            if children.len() < config.population - config.elite {
                children.push(c2);
            }
        }
        let child_fit = evaluate(objective, &children);
        evaluations += children.len();
        next.extend(children);
        next_fit.extend(child_fit);
        pop = next;
        fit = next_fit;

        let i = argmin(&fit);
        if fit[i] < best_val {
            best_val = fit[i];
            best = pop[i].clone();
            stall = 0;
        } else {
            stall += 1;
        }
        history.push(GenerationStats { generation: gen, best_in_generation: fit[i], best_so_far: best_val });
        if config.stall_generations.is_some_and(|s| stall >= s) {
            break;
        }
    }

    if config.polish_evals > 0 && best_val.is_finite() {
        let used = pattern_search(objective, spec, &mut best, &mut best_val, config.polish_evals);
        evaluations += used;
        history.push(GenerationStats {
            generation: history.len(),
            best_in_generation: best_val,
            best_so_far: best_val,
        });
    }

    Ok(GAResult { best, value: best_val, history, evaluations })
}

/// Compass search over the continuous genes; integer genes stay fixed.
/// Returns the number of evaluations used.
fn pattern_search<F>(objective: &F, spec: &VariableSpec, x: &mut Vec<f64>, fx: &mut f64, budget: usize) -> usize
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let cont: Vec<usize> = (0..spec.len())
        .filter(|k| spec.vars[*k].kind == VariableKind::Continuous && spec.vars[*k].range() > 0.0)
        .collect();
    if cont.is_empty() {
        return 0;
    }
    let mut step = 0.02;
    let mut used = 0;
    while used + 2 * cont.len() <= budget && step > 1e-7 {
        let trials: Vec<Vec<f64>> = cont
            .iter()
            .flat_map(|&k| {
                [1.0, -1.0].map(|sgn| {
                    let mut y = x.clone();
                    y[k] += sgn * step * spec.vars[k].range();
                    spec.project(&mut y);
                    y
                })
            })
            .collect();
        let vals = evaluate(objective, &trials);
        used += trials.len();
        let i = (0..vals.len()).min_by(|a, b| vals[*a].total_cmp(&vals[*b])).unwrap_or(0);
        if vals[i] < *fx {
            *fx = vals[i];
            *x = trials[i].clone();
        } else {
            step *= 0.5;
        }
    }
    used
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Variable;
    use proptest::prelude::*;

    fn rastrigin(x: &[f64]) -> f64 {
        10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos()).sum::<f64>()
    }

    #[test]
    fn quadratic_1d() {
        let spec = VariableSpec::new(vec![Variable::continuous(-10.0, 10.0)]).unwrap();
        let r = miga_minimize(&|x: &[f64]| (x[0] - 3.0).powi(2), &spec, &GAConfig::default(), &[]).unwrap();
        assert!((r.best[0] - 3.0).abs() < 1e-2, "{:?}", r.best);
    }

    #[test]
    fn separable_mixed() {
        let spec = VariableSpec::new(vec![Variable::continuous(-5.0, 5.0), Variable::integer(1, 5)]).unwrap();
        let f = |x: &[f64]| (x[0] - 0.5).powi(2) + (x[1] - 2.0).powi(2);
        let r = miga_minimize(&f, &spec, &GAConfig::default(), &[]).unwrap();
        assert!((r.best[0] - 0.5).abs() < 1e-2);
        assert_eq!(r.best[1], 2.0);
    }

    #[test]
    fn rastrigin_ten_seeds() {
        let spec = VariableSpec::new(vec![Variable::continuous(-5.12, 5.12); 2]).unwrap();
        for seed in 0..10 {
            let cfg = GAConfig { seed, ..GAConfig::default() };
            let r = miga_minimize(&rastrigin, &spec, &cfg, &[]).unwrap();
            assert!(r.value < 1.0, "seed {seed}: {}", r.value);
        }
    }

    #[test]
    fn non_finite_objective_is_survivable() {
        let spec = VariableSpec::new(vec![Variable::continuous(-1.0, 1.0)]).unwrap();
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { x[0] };
        let r = miga_minimize(&f, &spec, &GAConfig { generations: 30, ..GAConfig::default() }, &[]).unwrap();
        assert!(r.value.is_finite() && r.value < 0.05);
    }

    #[test]
    fn deterministic_and_history_monotone() {
        let spec = VariableSpec::new(vec![Variable::continuous(-5.12, 5.12); 3]).unwrap();
        let cfg = GAConfig { generations: 40, polish_evals: 60, seed: 9, ..GAConfig::default() };
        let a = miga_minimize(&rastrigin, &spec, &cfg, &[]).unwrap();
        let b = miga_minimize(&rastrigin, &spec, &cfg, &[]).unwrap();
        assert_eq!(a, b);
        assert!(a.history.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
        assert!(spec.contains(&a.best));
    }

    #[test]
    fn rejects_tiny_population() {
        let spec = VariableSpec::new(vec![Variable::continuous(0.0, 1.0)]).unwrap();
        let cfg = GAConfig { population: 3, ..GAConfig::default() };
        assert!(miga_minimize(&|x: &[f64]| x[0], &spec, &cfg, &[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn results_respect_bounds(seed in 0u64..1000, lo in -5i64..0, hi in 1i64..5) {
            let spec = VariableSpec::new(vec![
                Variable::continuous(lo as f64, hi as f64),
                Variable::integer(lo, hi),
            ]).unwrap();
            let cfg = GAConfig { population: 12, generations: 10, seed, ..GAConfig::default() };
            let f = |x: &[f64]| (x[0] * 7.0).sin() + x[1];
            let r = miga_minimize(&f, &spec, &cfg, &[]).unwrap();
            prop_assert!(spec.contains(&r.best));
        }
    }
}
