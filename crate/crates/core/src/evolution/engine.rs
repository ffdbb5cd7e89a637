//! Population management and the generational loop.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mutation::{parametric_mutation, random_network, structural_mutation, update_variance_one_fifth};
use super::params::EAParams;
use crate::data::{Partition, SplitDataset};
use crate::error::{Error, Result};
use crate::network::Individual;
use crate::rng;

// Stream identifiers for seed derivation.
const INIT_STREAM: u64 = 0;
const GENERATION_STREAM: u64 = 1;

/// Builds `population_size` random individuals. Individual `i` draws from
/// its own stream, so the result does not depend on thread scheduling.
pub fn init_population(
    params: &EAParams,
    n_inputs: usize,
    n_classes: usize,
    train: &Partition,
    seed: u64,
) -> Result<Vec<Individual>> {
    params.validate()?;
    (0..params.population_size)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, &[INIT_STREAM, i as u64]);
            Individual::evaluate(random_network(n_inputs, n_classes, params, &mut r), train)
        })
        .collect()
}

/// Step sizes adapted by the 1/5 rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variances {
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Parametric mutation tallies for one generation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationTally {
    pub attempts: usize,
    pub exponent_successes: usize,
    pub coefficient_successes: usize,
}

impl MutationTally {
    fn add(&mut self, other: MutationTally) {
        self.attempts += other.attempts;
        self.exponent_successes += other.exponent_successes;
        self.coefficient_successes += other.coefficient_successes;
    }

    pub fn exponent_ratio(&self) -> f64 {
        ratio(self.exponent_successes, self.attempts)
    }

    pub fn coefficient_ratio(&self) -> f64 {
        ratio(self.coefficient_successes, self.attempts)
    }

    pub fn success_ratio(&self) -> f64 {
        ratio(self.exponent_successes.max(self.coefficient_successes), self.attempts)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn sort_by_fitness(population: &mut [Individual]) {
    population.sort_by(|a, b| b.fitness().total_cmp(&a.fitness()));
}

/// One generation: sort by fitness, copy the elite over the worst slots,
/// mutate the elite parametrically and everyone else structurally.
///
/// The parametric step never lowers fitness, so the best individual can
/// only improve. Slot `s` of generation `g` uses the stream
/// `(seed, g, s)`.
pub fn evolve_generation(
    population: &mut Vec<Individual>,
    variances: Variances,
    params: &EAParams,
    train: &Partition,
    seed: u64,
    generation: usize,
) -> Result<MutationTally> {
    let n = population.len();
    if n != params.population_size {
        return Err(Error::precondition(format!(
            "population has {n} individuals, expected {}",
            params.population_size
        )));
    }
    sort_by_fitness(population);
    let elite = params.elite_count();
    for i in 0..elite {
        population[n - elite + i] = population[i].clone();
    }

    let results: Vec<Result<(Individual, MutationTally)>> = population
        .par_iter()
        .enumerate()
        .map(|(slot, ind)| {
            let mut r = rng::stream(seed, &[GENERATION_STREAM, generation as u64, slot as u64]);
            if slot < elite {
                let out = parametric_mutation(ind, variances.alpha1, variances.alpha2, params, train, &mut r)?;
                let tally = MutationTally {
                    attempts: 1,
                    exponent_successes: usize::from(out.exponent_success),
                    coefficient_successes: usize::from(out.coefficient_success),
                };
                Ok((out.individual, tally))
            } else {
                let out = structural_mutation(ind, params, train, &mut r)?;
                Ok((out.individual, MutationTally::default()))
            }
        })
        .collect();

    let mut tally = MutationTally::default();
    for (slot, res) in results.into_iter().enumerate() {
        let (ind, t) = res?;
        population[slot] = ind;
        tally.add(t);
    }
    Ok(tally)
}

pub fn best_of(population: &[Individual]) -> &Individual {
    // first maximum, matching the stable sort order
    population
        .iter()
        .reduce(|best, x| if x.fitness() > best.fitness() { x } else { best })
        .expect("population is never empty")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_train_ccr: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Share of parametric attempts in this generation that improved
    /// fitness in at least one step.
    pub success_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub records: Vec<GenerationRecord>,
}

impl EvolutionTrace {
    /// Best fitness never decreases from one record to the next.
    pub fn is_elitist(&self) -> bool {
        self.records.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub best: Individual,
    pub train_ccr: f64,
    pub test_ccr: f64,
    pub connections: usize,
    pub topology: String,
    pub seconds: f64,
    pub trace: EvolutionTrace,
}

fn record(
    population: &[Individual],
    generation: usize,
    variances: Variances,
    tally: MutationTally,
    train: &Partition,
) -> Result<GenerationRecord> {
    let best = best_of(population);
    let mean = population.iter().map(Individual::fitness).sum::<f64>() / population.len() as f64;
    Ok(GenerationRecord {
        generation,
        best_fitness: best.fitness(),
        mean_fitness: mean,
        best_train_ccr: best.network().evaluate(train)?.ccr(),
        alpha1: variances.alpha1,
        alpha2: variances.alpha2,
        success_ratio: tally.success_ratio(),
    })
}

/// One seeded execution of the evolutionary algorithm.
///
/// Runs `max_generations` generations, adapting each variance with the
/// 1/5 rule every `one_fifth_window` generations from that window's
/// success ratio, and returns the fittest network with its train and test
/// CCR. The trace holds the initial population as generation 0.
pub fn run_ea(params: &EAParams, data: &SplitDataset, seed: u64) -> Result<RunResult> {
    let start = Instant::now();
    params.validate()?;
    let (k, l) = (data.n_inputs(), data.n_classes());
    for (name, part) in [("train", &data.train), ("test", &data.test)] {
        if part.n_inputs() != k || part.n_classes() != l {
            return Err(Error::precondition(format!(
                "{name} partition is {}x{}, dataset declares {k} inputs and {l} classes",
                part.n_inputs(),
                part.n_classes()
            )));
        }
        if part.is_empty() {
            return Err(Error::precondition(format!("{name} partition is empty")));
        }
    }
    let train = &data.train;

    let mut population = init_population(params, k, l, train, seed)?;
    let mut variances = Variances {
        alpha1: params.alpha1_init,
        alpha2: params.alpha2_init,
    };
    let mut trace = EvolutionTrace::default();
    trace
        .records
        .push(record(&population, 0, variances, MutationTally::default(), train)?);

    let mut window = MutationTally::default();
    for g in 1..=params.max_generations {
        let tally = evolve_generation(&mut population, variances, params, train, seed, g)?;
        trace.records.push(record(&population, g, variances, tally, train)?);
        window.add(tally);
        if g % params.one_fifth_window == 0 {
            variances.alpha1 =
                update_variance_one_fifth(window.exponent_ratio(), variances.alpha1, params.one_fifth_factor);
            variances.alpha2 =
                update_variance_one_fifth(window.coefficient_ratio(), variances.alpha2, params.one_fifth_factor);
            window = MutationTally::default();
        }
    }

    let best = best_of(&population).clone();
    let train_ccr = best.network().evaluate(train)?.ccr();
    let test_ccr = best.network().evaluate(&data.test)?.ccr();
    Ok(RunResult {
        seed,
        connections: best.network().count_connections(),
        topology: best.network().topology(),
        train_ccr,
        test_ccr,
        best,
        seconds: start.elapsed().as_secs_f64(),
        trace,
    })
}
