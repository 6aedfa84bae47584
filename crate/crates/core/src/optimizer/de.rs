//! DE/rand/1/bin maximizer with box constraints.
//!
//! Each generation builds one trial vector per member from three distinct
//! other members, `v = x_a + F * (x_b - x_c)`, followed by binomial crossover
//! with one forced coordinate and clamping into the bounds. All trials of a
//! generation are evaluated (possibly in parallel) before any replacement, and
//! a member is replaced only when its trial scores strictly higher.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeParams<T> {
    pub population_size: usize,
    pub mutation_factor: T,
    pub crossover_rate: T,
    pub max_generations: usize,
    /// Minimum per-generation gain in the best objective that counts as progress.
    pub tolerance: T,
    /// Consecutive generations without progress before stopping.
    #[serde(default = "default_stagnation")]
    pub stagnation_generations: usize,
    pub seed: u64,
    /// Inclusive `(lo, hi)` per coordinate.
    pub bounds: Vec<(T, T)>,
}

fn default_stagnation() -> usize {
    10
}

impl<T: Scalar> DeParams<T> {
    /// Canonical settings: population `10 * dim`, `F = 0.5`, `CR = 0.9`, tolerance `1e-4`.
    pub fn new(bounds: Vec<(T, T)>) -> Self {
        Self {
            population_size: (10 * bounds.len()).max(4),
            mutation_factor: T::lit(0.5),
            crossover_rate: T::lit(0.9),
            max_generations: 200,
            tolerance: T::lit(1e-4),
            stagnation_generations: default_stagnation(),
            seed: 0,
            bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDeParams(m));
        if self.population_size < 4 {
            return bad(format!(
                "population_size must be at least 4, got {}",
                self.population_size
            ));
        }
        if self.bounds.is_empty() {
            return bad("bounds must not be empty".into());
        }
        if !(self.mutation_factor > T::zero() && self.mutation_factor <= T::lit(2.0)) {
            return bad(format!("mutation_factor {} outside (0, 2]", self.mutation_factor));
        }
        if !(self.crossover_rate >= T::zero() && self.crossover_rate <= T::one()) {
            return bad(format!("crossover_rate {} outside [0, 1]", self.crossover_rate));
        }
        if !(self.tolerance >= T::zero()) {
            return bad(format!("tolerance {} must be non-negative", self.tolerance));
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("bounds[{i}] = ({lo}, {hi}) must satisfy lo < hi"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeResult<T> {
    pub best_vector: Vec<T>,
    pub best_objective: T,
    /// Best objective after initialization (entry 0) and after each generation.
    pub history: Vec<T>,
    pub evaluations: usize,
    pub generations: usize,
}

/// Maximizes `objective` inside `params.bounds`.
pub fn de_optimize<T, F>(objective: F, params: &DeParams<T>) -> Result<DeResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    de_optimize_from(objective, params, &[])
}

/// Like [`de_optimize`], with the first population members set to `initial` (clamped).
pub fn de_optimize_from<T, F>(objective: F, params: &DeParams<T>, initial: &[Vec<T>]) -> Result<DeResult<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    params.validate()?;
    let dim = params.dim();
    if let Some(bad) = initial.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let np = params.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut population: Vec<Vec<T>> = (0..np)
        .map(|i| match initial.get(i) {
            Some(v) => clamp(v.clone(), &params.bounds),
            None => params
                .bounds
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * T::lit(rng.random::<f64>()))
                .collect(),
        })
        .collect();
    let mut fitness: Vec<T> = population.par_iter().map(|x| objective(x)).collect();
    let mut evaluations = np;

    let mut best = argmax(&fitness);
    let mut history = vec![fitness[best]];
    let mut stagnant = 0usize;
    let mut generations = 0usize;

    while generations < params.max_generations {
        let trials: Vec<Vec<T>> = (0..np).map(|i| make_trial(i, &population, params, &mut rng)).collect();
        let trial_fitness: Vec<T> = trials.par_iter().map(|x| objective(x)).collect();
        evaluations += np;

        for (i, (trial, f)) in trials.into_iter().zip(trial_fitness).enumerate() {
            if f > fitness[i] {
                population[i] = trial;
                fitness[i] = f;
            }
        }
        generations += 1;

        let prev = fitness[best];
        best = argmax(&fitness);
        let gen_best = fitness[best];
        history.push(gen_best);

        if gen_best - prev < params.tolerance {
            stagnant += 1;
            if stagnant >= params.stagnation_generations {
                break;
            }
        } else {
            stagnant = 0;
        }
    }

    Ok(DeResult {
        best_vector: population[best].clone(),
        best_objective: fitness[best],
        history,
        evaluations,
        generations,
    })
}

fn make_trial<T: Scalar>(i: usize, population: &[Vec<T>], params: &DeParams<T>, rng: &mut ChaCha8Rng) -> Vec<T> {
    let np = population.len();
    let mut pick = |exclude: &[usize]| loop {
        let k = rng.random_range(0..np);
        if !exclude.contains(&k) {
            break k;
        }
    };
    let a = pick(&[i]);
    let b = pick(&[i, a]);
    let c = pick(&[i, a, b]);

    let dim = params.dim();
    let forced = rng.random_range(0..dim);
    let cr = params.crossover_rate.as_f64();
    let target = &population[i];
    let trial = (0..dim)
        .map(|j| {
            let take_mutant = rng.random::<f64>() < cr || j == forced;
            if take_mutant {
                population[a][j] + params.mutation_factor * (population[b][j] - population[c][j])
            } else {
                target[j]
            }
        })
        .collect();
    clamp(trial, &params.bounds)
}

fn clamp<T: Scalar>(mut v: Vec<T>, bounds: &[(T, T)]) -> Vec<T> {
    for (x, &(lo, hi)) in v.iter_mut().zip(bounds) {
        *x = x.max(lo).min(hi);
    }
    v
}

/// First index of the maximum; NaN never wins.
fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}
