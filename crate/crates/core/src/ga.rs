//! Binary genetic algorithm: tournament selection, single-point crossover,
//! per-bit mutation and elitism, with per-generation best records.
//!
//! All random choices come from one seeded ChaCha stream consumed in a fixed
//! order, so a run is a pure function of its inputs. Per generation the order
//! is: for each offspring pair in slot order, two tournament draws, the
//! crossover decision, the cut point (only when crossing), then one uniform
//! draw per bit for the first child's mutation and one per bit for the
//! second's. Fitness evaluation happens afterwards and may run in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{decode_components, Chromosome, ChromosomeLayout, FieldKind};
use crate::error::{Error, Result};
use crate::signal::{fitness_unchecked, Norm, SinusoidalComponent, TimeSeries};

pub type GaRng = ChaCha8Rng;

/// Minimized objective over fixed-length chromosomes.
pub trait Objective: Sync {
    fn total_bits(&self) -> usize;

    /// Fitness of a chromosome of `total_bits()` length; lower is better.
    fn evaluate(&self, chromosome: &Chromosome) -> f64;

    /// Deterministic local improvement, used on the generation best every
    /// `refine_interval` generations. Must return only strictly better
    /// individuals.
    fn refine(&self, _individual: &Individual) -> Option<Individual> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover_prob: f64,
    /// `None` means `1 / total_bits`.
    pub mutation_prob_per_bit: Option<f64>,
    pub tournament_size: usize,
    pub elite_count: usize,
    pub target_fitness: f64,
    pub stall_generations: usize,
    pub seed: u64,
    /// Generations between local refinements of the current best; 0 disables.
    #[serde(default)]
    pub refine_interval: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            max_generations: 2000,
            crossover_prob: 0.9,
            mutation_prob_per_bit: None,
            tournament_size: 3,
            elite_count: 2,
            target_fitness: 1e-9,
            stall_generations: 200,
            seed: 0,
            refine_interval: 10,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.population_size < 2 {
            return fail(format!(
                "population_size must be >= 2, got {}",
                self.population_size
            ));
        }
        if self.max_generations < 1 {
            return fail("max_generations must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return fail(format!(
                "crossover_prob {} outside [0, 1]",
                self.crossover_prob
            ));
        }
        if let Some(p) = self.mutation_prob_per_bit {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("mutation_prob_per_bit {p} outside [0, 1]"));
            }
        }
        if self.tournament_size < 1 {
            return fail("tournament_size must be >= 1".into());
        }
        if self.elite_count >= self.population_size {
            return fail(format!(
                "elite_count {} must be below population_size {}",
                self.elite_count, self.population_size
            ));
        }
        if !(self.target_fitness.is_finite() && self.target_fitness >= 0.0) {
            return fail(format!(
                "target_fitness {} must be >= 0",
                self.target_fitness
            ));
        }
        if self.stall_generations < 1 {
            return fail("stall_generations must be >= 1".into());
        }
        Ok(())
    }

    pub fn mutation_rate(&self, total_bits: usize) -> f64 {
        self.mutation_prob_per_bit.unwrap_or(if total_bits == 0 {
            0.0
        } else {
            1.0 / total_bits as f64
        })
    }

    pub fn rng(&self) -> GaRng {
        GaRng::seed_from_u64(self.seed)
    }
}

/// An evaluated chromosome. Fitness is computed once and never refreshed.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub chromosome: Chromosome,
    pub fitness: f64,
}

fn evaluate_all<O: Objective>(objective: &O, chromosomes: Vec<Chromosome>) -> Vec<Individual> {
    let scores: Vec<f64> = chromosomes
        .par_iter()
        .map(|c| objective.evaluate(c))
        .collect();
    chromosomes
        .into_iter()
        .zip(scores)
        .map(|(chromosome, fitness)| Individual {
            chromosome,
            fitness,
        })
        .collect()
}

pub fn random_chromosome(total_bits: usize, rng: &mut GaRng) -> Chromosome {
    Chromosome::new((0..total_bits).map(|_| rng.random::<bool>()).collect())
}

pub fn init_population<O: Objective>(
    objective: &O,
    config: &GaConfig,
    rng: &mut GaRng,
) -> Vec<Individual> {
    let chromosomes = (0..config.population_size)
        .map(|_| random_chromosome(objective.total_bits(), rng))
        .collect();
    evaluate_all(objective, chromosomes)
}

/// Index of the lowest-fitness individual; ties go to the lowest index.
pub fn best_index(population: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in population.iter().enumerate().skip(1) {
        if ind.fitness < population[best].fitness {
            best = i;
        }
    }
    best
}

/// Tournament with replacement; returns the winner's index.
pub fn tournament_index(population: &[Individual], config: &GaConfig, rng: &mut GaRng) -> usize {
    let mut winner = rng.random_range(0..population.len());
    for _ in 1..config.tournament_size {
        let challenger = rng.random_range(0..population.len());
        let (w, c) = (&population[winner], &population[challenger]);
        if c.fitness < w.fitness || (c.fitness == w.fitness && challenger < winner) {
            winner = challenger;
        }
    }
    winner
}

pub fn tournament_select<'p>(
    population: &'p [Individual],
    config: &GaConfig,
    rng: &mut GaRng,
) -> &'p Individual {
    &population[tournament_index(population, config, rng)]
}

/// Swaps the suffixes starting at `cut`.
pub fn crossover_at(
    a: &Chromosome,
    b: &Chromosome,
    cut: usize,
) -> Result<(Chromosome, Chromosome)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let cut = cut.min(a.len());
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    c1.bits_mut()[cut..].copy_from_slice(&b.bits()[cut..]);
    c2.bits_mut()[cut..].copy_from_slice(&a.bits()[cut..]);
    Ok((c1, c2))
}

/// Single-point crossover with probability `crossover_prob`, cut uniform in
/// `[1, len - 1]`; otherwise copies of the parents.
pub fn crossover(
    a: &Chromosome,
    b: &Chromosome,
    config: &GaConfig,
    rng: &mut GaRng,
) -> Result<(Chromosome, Chromosome)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let crossing = rng.random_bool(config.crossover_prob);
    if crossing && a.len() >= 2 {
        let cut = rng.random_range(1..a.len());
        crossover_at(a, b, cut)
    } else {
        Ok((a.clone(), b.clone()))
    }
}

/// Flips each bit independently with probability `rate`.
pub fn mutate(c: &Chromosome, rate: f64, rng: &mut GaRng) -> Chromosome {
    let mut out = c.clone();
    for bit in out.bits_mut() {
        if rng.random::<f64>() < rate {
            *bit = !*bit;
        }
    }
    out
}

/// One generation: elites first (sorted by fitness, then index), then
/// offspring `mutate(crossover(select, select))` in slot order.
pub fn step<O: Objective>(
    population: &[Individual],
    objective: &O,
    config: &GaConfig,
    rng: &mut GaRng,
) -> Vec<Individual> {
    let n = population.len();
    let elites = config.elite_count.min(n);
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&i, &j| population[i].fitness.total_cmp(&population[j].fitness));

    let mut next: Vec<Individual> = ranked[..elites]
        .iter()
        .map(|&i| population[i].clone())
        .collect();

    let rate = config.mutation_rate(objective.total_bits());
    let mut offspring = Vec::with_capacity(n - elites + 1);
    while offspring.len() < n - elites {
        let p1 = tournament_index(population, config, rng);
        let p2 = tournament_index(population, config, rng);
        let (c1, c2) = crossover(
            &population[p1].chromosome,
            &population[p2].chromosome,
            config,
            rng,
        )
        .expect("population chromosomes share one length");
        offspring.push(mutate(&c1, rate, rng));
        let c2 = mutate(&c2, rate, rng);
        if offspring.len() < n - elites {
            offspring.push(c2);
        }
    }
    next.extend(evaluate_all(objective, offspring));
    next
}

/// Iteration-best record of one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationBest {
    pub generation: usize,
    pub fitness: f64,
    pub chromosome: Chromosome,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    /// All-time best: lowest fitness, then earliest generation, then lowest index.
    pub best: Individual,
    pub history: Vec<GenerationBest>,
    pub final_population: Vec<Individual>,
}

/// Evolves until the target fitness is met, the generation budget is spent,
/// or the best fitness has not improved for `stall_generations`. The initial
/// population counts as generation 0.
pub fn evolve<O: Objective>(objective: &O, config: &GaConfig) -> Result<Evolution> {
    config.validate()?;
    let mut rng = config.rng();
    let mut population = init_population(objective, config, &mut rng);
    let mut history = Vec::new();
    let mut best: Option<Individual> = None;
    let mut last_improvement = 0;

    for generation in 0..config.max_generations {
        if generation > 0 {
            population = step(&population, objective, config, &mut rng);
        }
        if config.refine_interval > 0 && generation % config.refine_interval == 0 {
            let i = best_index(&population);
            if let Some(better) = objective.refine(&population[i]) {
                population[i] = better;
            }
        }
        let leader = &population[best_index(&population)];
        history.push(GenerationBest {
            generation,
            fitness: leader.fitness,
            chromosome: leader.chromosome.clone(),
        });
        if best.as_ref().is_none_or(|b| leader.fitness < b.fitness) {
            best = Some(leader.clone());
            last_improvement = generation;
        }
        let best_fitness = best.as_ref().map_or(f64::INFINITY, |b| b.fitness);
        if best_fitness <= config.target_fitness
            || generation - last_improvement >= config.stall_generations
        {
            break;
        }
    }

    Ok(Evolution {
        best: best.expect("at least one generation runs"),
        history,
        final_population: population,
    })
}

/// Local-search evaluations allowed per refinement.
pub const DEFAULT_REFINE_BUDGET: usize = 3000;

/// Fitness of decoded sinusoid sets against fixed data.
#[derive(Debug, Clone)]
pub struct ComponentObjective<'a> {
    data: &'a TimeSeries,
    layout: &'a ChromosomeLayout,
    norm: Norm,
    refine_budget: usize,
}

impl<'a> ComponentObjective<'a> {
    pub fn new(data: &'a TimeSeries, layout: &'a ChromosomeLayout, norm: Norm) -> Result<Self> {
        let last = data.len() - 1;
        let too_far = match layout.fixed_windows() {
            Some(windows) => windows.iter().any(|&(_, e)| e > last),
            None => layout
                .fields()
                .iter()
                .filter(|f| matches!(f.kind, FieldKind::Start | FieldKind::End))
                .any(|f| f.spec.ub.round() > last as f64),
        };
        if too_far {
            return Err(Error::InvalidConfig(format!(
                "layout windows reach beyond the last sample index {last}"
            )));
        }
        Ok(Self {
            data,
            layout,
            norm,
            refine_budget: DEFAULT_REFINE_BUDGET,
        })
    }

    pub fn with_refine_budget(mut self, budget: usize) -> Self {
        self.refine_budget = budget;
        self
    }

    pub fn data(&self) -> &TimeSeries {
        self.data
    }

    pub fn layout(&self) -> &ChromosomeLayout {
        self.layout
    }

    pub fn decode(&self, chromosome: &Chromosome) -> Vec<SinusoidalComponent> {
        decode_components(chromosome, self.layout).expect("chromosome matches layout")
    }
}

impl Objective for ComponentObjective<'_> {
    fn total_bits(&self) -> usize {
        self.layout.total_bits()
    }

    fn evaluate(&self, chromosome: &Chromosome) -> f64 {
        let components = self.decode(chromosome);
        let mut scratch = vec![0.0; self.data.len()];
        fitness_unchecked(&components, self.data, self.norm, &mut scratch)
    }

    fn refine(&self, individual: &Individual) -> Option<Individual> {
        crate::local_search::refine_components(self, individual, self.refine_budget)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub generation: usize,
    pub best_fitness: f64,
    pub components: Vec<SinusoidalComponent>,
}

/// Iteration-best fitness and decoded parameters, one entry per generation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub entries: Vec<TraceEntry>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    pub fn best_fitness(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.best_fitness)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].best_fitness <= w[0].best_fitness)
    }

    /// Number of components recorded per entry.
    pub fn components(&self) -> usize {
        self.entries.first().map_or(0, |e| e.components.len())
    }
}

/// Evolves sinusoid parameters for `data` under the L1 norm.
pub fn run(
    data: &TimeSeries,
    layout: &ChromosomeLayout,
    config: &GaConfig,
) -> Result<(Individual, ConvergenceTrace)> {
    run_with_norm(data, layout, config, Norm::L1)
}

pub fn run_with_norm(
    data: &TimeSeries,
    layout: &ChromosomeLayout,
    config: &GaConfig,
    norm: Norm,
) -> Result<(Individual, ConvergenceTrace)> {
    let objective = ComponentObjective::new(data, layout, norm)?;
    let evolution = evolve(&objective, config)?;
    let entries = evolution
        .history
        .iter()
        .map(|g| TraceEntry {
            generation: g.generation,
            best_fitness: g.fitness,
            components: objective.decode(&g.chromosome),
        })
        .collect();
    Ok((evolution.best, ConvergenceTrace { entries }))
}
