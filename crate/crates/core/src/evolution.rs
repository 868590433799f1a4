//! Population lifecycle of the guided evolutionary search.
//!
//! Each generation breeds `lambda / 2` children by guided mutation of the
//! elites (cycled in rank order) and `lambda / 2` by uniform crossover of
//! roulette-selected parents from the previous population and elitism. The
//! children are evaluated in one batch, their prefix credits update the
//! credit matrix in individual order, and the next elitism is selected from
//! children plus the old elitism.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::{network_cost, CostError, CostReport, ResolutionSpec};
use crate::credit::{credit_from_prefix, CreditError, CreditMatrix};
use crate::evaluator::{EvalCache, EvalError, EvalRequest, EvalResponse, Evaluator};
use crate::genome::{
    genotype_id, random_genome_with, Genome, GenomeError, GenotypeId, MAX_BLOCKS, NUM_GENOTYPES,
    SCALE_CHOICES,
};
use crate::objectives::{
    constrained_rank, crowding_by_front, front_ranks, non_dominated_sort, pareto_rank,
    ConstraintSpec, ObjectiveVector,
};

/// Added to shifted roulette scores so the worst individual stays selectable.
pub const ROULETTE_DELTA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// Non-dominated sorting over (psnr, params, flops).
    Pareto,
    /// Maximize psnr, feasibility first under optional caps.
    Constrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationStrategy {
    /// Replacement genotypes drawn from squared normalized credits.
    Guided,
    /// Replacement genotypes drawn uniformly.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    Surrogate,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub generations: u32,
    pub lambda: usize,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
    pub mode: ObjectiveMode,
    pub mutation: MutationStrategy,
    /// Strict upper bound on network parameters (constrained mode).
    pub max_params: Option<u64>,
    /// Strict upper bound on network FLOPs (constrained mode).
    pub max_flops: Option<u64>,
    pub scale: u32,
    /// HR target used for FLOPs; defaults to 720p.
    pub hr_width: Option<u32>,
    pub hr_height: Option<u32>,
    /// Abstract training budget forwarded to the evaluator.
    pub budget: u64,
    /// Fitness assigned to individuals whose evaluation failed.
    pub floor_fitness: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub evaluator: EvaluatorKind,
    /// Command line of the external evaluator, split on whitespace.
    pub evaluator_command: Option<String>,
    pub eval_timeout_secs: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            generations: 40,
            lambda: 16,
            mutation_rate: 0.2,
            elitism: 8,
            seed: 0,
            mode: ObjectiveMode::Pareto,
            mutation: MutationStrategy::Guided,
            max_params: None,
            max_flops: None,
            scale: 2,
            hr_width: None,
            hr_height: None,
            budget: 1,
            floor_fitness: crate::evaluator::SURROGATE_FLOOR,
            alpha: crate::credit::DEFAULT_ALPHA,
            epsilon: crate::credit::DEFAULT_EPSILON,
            evaluator: EvaluatorKind::Surrogate,
            evaluator_command: None,
            eval_timeout_secs: 600,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

fn config_error(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError { field, message: message.into() }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.mutation_rate > 0.0 && self.mutation_rate < 1.0) {
            return Err(config_error("mutation_rate", "must lie in (0, 1)"));
        }
        if self.lambda < 2 || !self.lambda.is_multiple_of(2) {
            return Err(config_error("lambda", "must be even and at least 2"));
        }
        if self.elitism == 0 || self.elitism > self.lambda {
            return Err(config_error("elitism", "must lie in 1..=lambda"));
        }
        if !SCALE_CHOICES.contains(&self.scale) {
            return Err(config_error("scale", "must be 2, 3 or 4"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_error("alpha", "must lie in (0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(config_error("epsilon", "must be positive"));
        }
        if !self.floor_fitness.is_finite() {
            return Err(config_error("floor_fitness", "must be finite"));
        }
        if self.max_params == Some(0) {
            return Err(config_error("max_params", "must be positive"));
        }
        if self.max_flops == Some(0) {
            return Err(config_error("max_flops", "must be positive"));
        }
        if self.eval_timeout_secs == 0 {
            return Err(config_error("eval_timeout_secs", "must be positive"));
        }
        if self.evaluator == EvaluatorKind::External
            && self.evaluator_command.as_deref().is_none_or(|c| c.trim().is_empty())
        {
            return Err(config_error("evaluator_command", "required for the external evaluator"));
        }
        self.resolution().map_err(|e| config_error("hr_width", e.to_string()))?;
        Ok(())
    }

    pub fn resolution(&self) -> Result<ResolutionSpec, CostError> {
        let hd = ResolutionSpec::hd720(self.scale)?;
        ResolutionSpec::new(
            self.hr_width.unwrap_or(hd.hr_width),
            self.hr_height.unwrap_or(hd.hr_height),
            self.scale,
        )
    }

    /// Caps as a constraint spec; a missing cap is unbounded.
    pub fn constraints(&self) -> Option<ConstraintSpec> {
        if self.max_params.is_none() && self.max_flops.is_none() {
            return None;
        }
        Some(ConstraintSpec {
            w_net: self.max_params.unwrap_or(u64::MAX),
            v_net: self.max_flops.unwrap_or(u64::MAX),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Initial,
    Mutation,
    Crossover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    /// Fitness of the full network; the last prefix value.
    pub fitness: f64,
    /// Fitness after each active block, floor entry excluded.
    pub prefix_fitness: Vec<f64>,
    /// Fitness of the bare head + tail network.
    pub floor: f64,
    pub cost: CostReport,
    pub birth_generation: u32,
    pub origin: Origin,
    /// Evaluation failed and the fitness was floored.
    pub failed: bool,
}

impl Individual {
    pub fn objectives(&self) -> ObjectiveVector {
        ObjectiveVector::new(self.fitness, self.cost.params, self.cost.flops)
    }

    pub fn text(&self) -> String {
        self.genome.encode_text()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub individuals: Vec<Individual>,
    /// Best first under the active selection order.
    pub elitism: Vec<Individual>,
    pub generation: u32,
}

/// One line of the history log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub gen: u32,
    pub best: f64,
    pub median: f64,
    pub best_genome: String,
    pub pareto_size: usize,
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Evaluator(#[from] EvalError),
    #[error("evaluation of initial genome {genome} failed: {message}")]
    InitialEvaluation { genome: String, message: String },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Credit(#[from] CreditError),
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

fn dedup_by_genome(pool: Vec<Individual>) -> Vec<Individual> {
    let mut seen = std::collections::HashSet::new();
    pool.into_iter().filter(|ind| seen.insert(ind.text())).collect()
}

/// Indices of `pool`, best first, under the configured selection order.
fn selection_order(pool: &[Individual], mode: ObjectiveMode, cs: Option<&ConstraintSpec>) -> Vec<usize> {
    let vs: Vec<ObjectiveVector> = pool.iter().map(Individual::objectives).collect();
    let labels: Vec<String> = pool.iter().map(Individual::text).collect();
    match mode {
        ObjectiveMode::Constrained => constrained_rank(&vs, &labels, cs),
        ObjectiveMode::Pareto => pareto_rank(&vs, &labels),
    }
}

/// Top `t` distinct genomes of `pool` under the selection order.
pub fn select_elitism(
    pool: Vec<Individual>,
    t: usize,
    mode: ObjectiveMode,
    cs: Option<&ConstraintSpec>,
) -> Vec<Individual> {
    let pool = dedup_by_genome(pool);
    let order = selection_order(&pool, mode, cs);
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    order.into_iter().take(t).map(|i| slots[i].take().expect("index used once")).collect()
}

/// Scalar used for roulette parent selection. Pareto mode scores by negated
/// front index plus a crowding bonus below 0.5.
pub fn roulette_scores(pool: &[Individual], mode: ObjectiveMode) -> Vec<f64> {
    match mode {
        ObjectiveMode::Constrained => pool.iter().map(|i| i.fitness).collect(),
        ObjectiveMode::Pareto => {
            let vs: Vec<ObjectiveVector> = pool.iter().map(Individual::objectives).collect();
            let fronts = non_dominated_sort(&vs);
            let crowd = crowding_by_front(&vs, &fronts);
            front_ranks(&vs)
                .iter()
                .zip(crowd)
                .map(|(&r, c)| {
                    let bonus = if c.is_infinite() { 0.5 } else { 0.5 * c / (1.0 + c) };
                    bonus - r as f64
                })
                .collect()
        }
    }
}

/// `s - min(s) + delta`, the positive weights used by the roulette wheel.
pub fn shifted_weights(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    scores.iter().map(|s| s - min + ROULETTE_DELTA).collect()
}

/// Fitness-proportionate pick of one index. Weights must be non-negative
/// with a positive sum.
pub fn roulette_select<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    WeightedIndex::new(weights).expect("roulette weights are positive").sample(rng)
}

/// Per-position fair-coin inheritance, repaired to the active minimum.
pub fn uniform_crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, rng: &mut R) -> Genome {
    let blocks = a
        .blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| if rng.gen_bool(0.5) { *x } else { *y })
        .collect();
    let mut child = Genome { scale: a.scale, blocks };
    child.repair(rng);
    child
}

/// Picks two distinct parents by roulette over `scores` and recombines them.
/// A pool of one yields a clone.
pub fn crossover<R: Rng + ?Sized>(pool: &[Individual], scores: &[f64], rng: &mut R) -> Genome {
    if pool.len() == 1 {
        return pool[0].genome.clone();
    }
    let mut weights = shifted_weights(scores);
    let first = roulette_select(&weights, rng);
    weights[first] = 0.0;
    let second = roulette_select(&weights, rng);
    uniform_crossover(&pool[first].genome, &pool[second].genome, rng)
}

/// Draws a replacement genotype for chromosome position `depth`.
pub fn sample_genotype<R: Rng + ?Sized>(
    credit: Option<&CreditMatrix>,
    depth: usize,
    rng: &mut R,
) -> Result<GenotypeId, CreditError> {
    let idx = match credit {
        Some(m) => {
            let p = m.selection_probabilities(depth)?;
            WeightedIndex::new(&p).expect("probabilities are positive").sample(rng)
        }
        None => rng.gen_range(0..NUM_GENOTYPES),
    };
    Ok(GenotypeId(idx as u16))
}

/// Guided mutation. Every position independently redraws its genotype with
/// probability `rate` (from `credit`, or uniformly when `credit` is `None`)
/// and independently flips its state with probability `rate`. If nothing
/// fired and `force` is set, one uniformly chosen position redraws its
/// genotype. The child is repaired to the active minimum.
pub fn guided_mutate<R: Rng + ?Sized>(
    parent: &Genome,
    rate: f64,
    credit: Option<&CreditMatrix>,
    rng: &mut R,
    force: bool,
) -> Result<Genome, CreditError> {
    let mut child = parent.clone();
    let mut fired = false;
    for depth in 0..child.blocks.len().min(MAX_BLOCKS) {
        if rng.gen_bool(rate) {
            let g = sample_genotype(credit, depth, rng)?.genotype().expect("sampled id is valid");
            child.blocks[depth] = child.blocks[depth].with_genotype(g);
            fired = true;
        }
        if rng.gen_bool(rate) {
            child.blocks[depth].active = !child.blocks[depth].active;
            fired = true;
        }
    }
    if !fired && force {
        let depth = rng.gen_range(0..child.blocks.len().min(MAX_BLOCKS));
        let g = sample_genotype(credit, depth, rng)?.genotype().expect("sampled id is valid");
        child.blocks[depth] = child.blocks[depth].with_genotype(g);
    }
    child.repair(rng);
    Ok(child)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Complete, serializable state of a search between generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Search {
    pub config: SearchConfig,
    pub population: Population,
    pub credit: CreditMatrix,
    pub cache: EvalCache,
    pub history: Vec<GenerationRecord>,
    rng: ChaCha8Rng,
}

impl Search {
    /// Samples and evaluates the initial population, seeds the credit matrix
    /// and selects the first elitism.
    pub fn initialize(config: SearchConfig, backend: &mut dyn Evaluator) -> Result<Search, SearchError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let genomes = (0..config.lambda)
            .map(|_| random_genome_with(&mut rng, config.scale))
            .collect::<Result<Vec<_>, _>>()?;
        let mut search = Search {
            credit: CreditMatrix::new(config.alpha, config.epsilon)?,
            population: Population { individuals: Vec::new(), elitism: Vec::new(), generation: 0 },
            cache: EvalCache::default(),
            history: Vec::new(),
            rng,
            config,
        };
        let origins = vec![Origin::Initial; genomes.len()];
        let responses = search.evaluate(backend, &genomes)?;
        if let Some((g, r)) = genomes.iter().zip(&responses).find(|(_, r)| !r.is_ok()) {
            return Err(SearchError::InitialEvaluation {
                genome: g.encode_text(),
                message: r.message.clone().unwrap_or_default(),
            });
        }
        let individuals = search.absorb(genomes, origins, responses)?;
        let elitism = search.select(individuals.clone());
        search.population = Population { individuals, elitism, generation: 0 };
        search.record();
        Ok(search)
    }

    pub fn generation(&self) -> u32 {
        self.population.generation
    }

    pub fn is_finished(&self) -> bool {
        self.generation() >= self.config.generations
    }

    /// Evaluates `genomes` through the cache; ids are `g<generation>-i<index>`.
    fn evaluate(
        &mut self,
        backend: &mut dyn Evaluator,
        genomes: &[Genome],
    ) -> Result<Vec<EvalResponse>, EvalError> {
        let gen = self.population.generation + u32::from(!self.population.individuals.is_empty());
        let requests: Vec<EvalRequest> = genomes
            .iter()
            .enumerate()
            .map(|(i, g)| EvalRequest {
                id: format!("g{gen}-i{i}"),
                genome: g.clone(),
                scale: self.config.scale,
                budget: self.config.budget,
                seed: self.config.seed,
            })
            .collect();
        self.cache.evaluate(backend, &requests)
    }

    /// Builds individuals from evaluation results and feeds successful prefix
    /// credits to the credit matrix, in individual then depth order. Failed
    /// evaluations get the floor fitness and contribute no credit.
    fn absorb(
        &mut self,
        genomes: Vec<Genome>,
        origins: Vec<Origin>,
        responses: Vec<EvalResponse>,
    ) -> Result<Vec<Individual>, SearchError> {
        let res = self.config.resolution()?;
        let birth = self.population.generation + u32::from(!self.population.individuals.is_empty());
        let mut out = Vec::with_capacity(genomes.len());
        for ((genome, origin), resp) in genomes.into_iter().zip(origins).zip(responses) {
            let cost = network_cost(&genome, &res)?.total;
            let active = genome.active_positions();
            let individual = if resp.is_ok() {
                let floor = resp.prefix_fitness[0];
                let prefix = resp.prefix_fitness[1..].to_vec();
                for (depth, c) in credit_from_prefix(floor, &prefix, &active)? {
                    let id = genotype_id(&genome.blocks[depth])?;
                    self.credit.update(id, depth, c)?;
                }
                Individual {
                    fitness: resp.fitness,
                    prefix_fitness: prefix,
                    floor,
                    cost,
                    birth_generation: birth,
                    origin,
                    failed: false,
                    genome,
                }
            } else {
                log::warn!(
                    "evaluation {} failed ({}); flooring {}",
                    resp.id,
                    resp.message.as_deref().unwrap_or("no message"),
                    genome.encode_text()
                );
                let floor = self.config.floor_fitness;
                Individual {
                    fitness: floor,
                    prefix_fitness: vec![floor; active.len()],
                    floor,
                    cost,
                    birth_generation: birth,
                    origin,
                    failed: true,
                    genome,
                }
            };
            out.push(individual);
        }
        Ok(out)
    }

    /// Runs one generation: breed, evaluate, update credits, select.
    pub fn step(&mut self, backend: &mut dyn Evaluator) -> Result<&GenerationRecord, SearchError> {
        let half = self.config.lambda / 2;
        let credit = match self.config.mutation {
            MutationStrategy::Guided => Some(&self.credit),
            MutationStrategy::Random => None,
        };
        let elites = &self.population.elitism;
        let mut genomes = Vec::with_capacity(self.config.lambda);
        let mut origins = Vec::with_capacity(self.config.lambda);
        for i in 0..half {
            let parent = &elites[i % elites.len()].genome;
            let child =
                guided_mutate(parent, self.config.mutation_rate, credit, &mut self.rng, true)?;
            genomes.push(child);
            origins.push(Origin::Mutation);
        }
        let mut pool = self.population.elitism.clone();
        pool.extend(self.population.individuals.iter().cloned());
        let pool = dedup_by_genome(pool);
        let scores = roulette_scores(&pool, self.config.mode);
        for _ in half..self.config.lambda {
            genomes.push(crossover(&pool, &scores, &mut self.rng));
            origins.push(Origin::Crossover);
        }

        let responses = self.evaluate(backend, &genomes)?;
        let children = self.absorb(genomes, origins, responses)?;
        let mut next_pool = self.population.elitism.clone();
        next_pool.extend(children.iter().cloned());
        let elitism = self.select(next_pool);
        self.population = Population {
            individuals: children,
            elitism,
            generation: self.population.generation + 1,
        };
        self.record();
        Ok(self.history.last().expect("just recorded"))
    }

    /// Steps until the configured number of generations is reached.
    pub fn run(&mut self, backend: &mut dyn Evaluator) -> Result<(), SearchError> {
        while !self.is_finished() {
            self.step(backend)?;
        }
        Ok(())
    }

    fn select(&self, pool: Vec<Individual>) -> Vec<Individual> {
        let cs = self.config.constraints();
        select_elitism(pool, self.config.elitism, self.config.mode, cs.as_ref())
    }

    fn record(&mut self) {
        let elite = &self.population.elitism;
        let best = match self.config.mode {
            ObjectiveMode::Constrained => elite.first(),
            ObjectiveMode::Pareto => elite.iter().max_by(|a, b| a.fitness.total_cmp(&b.fitness)),
        }
        .expect("elitism is never empty");
        let mut fitness: Vec<f64> = self.population.individuals.iter().map(|i| i.fitness).collect();
        let vs: Vec<ObjectiveVector> = elite.iter().map(Individual::objectives).collect();
        self.history.push(GenerationRecord {
            gen: self.population.generation,
            best: best.fitness,
            median: median(&mut fitness),
            best_genome: best.text(),
            pareto_size: non_dominated_sort(&vs).first().map_or(0, Vec::len),
        });
    }
}

/// Initializes a search and runs it for the configured number of
/// generations. `generations = 0` returns the initial elitism.
pub fn run_search(config: SearchConfig, backend: &mut dyn Evaluator) -> Result<Search, SearchError> {
    let mut search = Search::initialize(config, backend)?;
    search.run(backend)?;
    Ok(search)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::SurrogateEvaluator;
    use crate::genome::{random_genome, BlockGene, BlockType};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn small_config(seed: u64) -> SearchConfig {
        SearchConfig { generations: 5, seed, ..SearchConfig::default() }
    }

    fn individual(genome: Genome, fitness: f64, params: u64, flops: u64) -> Individual {
        Individual {
            prefix_fitness: vec![fitness; genome.active_count()],
            genome,
            fitness,
            floor: 28.0,
            cost: CostReport { params, flops, multi_adds: flops / 2, lr_width: 1, lr_height: 1 },
            birth_generation: 0,
            origin: Origin::Initial,
            failed: false,
        }
    }

    #[test]
    fn zero_rate_without_force_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in 0..50 {
            let g = random_genome(s, 2).unwrap();
            assert_eq!(guided_mutate(&g, 0.0, None, &mut rng, false).unwrap(), g);
        }
    }

    #[test]
    fn forced_mutation_always_changes_something_or_redraws() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_genome(3, 2).unwrap();
        let changed = (0..500)
            .filter(|_| guided_mutate(&g, 1e-9, None, &mut rng, true).unwrap() != g)
            .count();
        // one forced redraw; it lands on the same genotype with probability 1/450
        assert!(changed >= 490, "{changed}");
    }

    #[test]
    fn mean_redrawn_positions_near_rate_times_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4000;
        let mut total = 0usize;
        for s in 0..n {
            let g = random_genome(s, 2).unwrap();
            let c = guided_mutate(&g, 0.2, None, &mut rng, true).unwrap();
            total += g
                .blocks
                .iter()
                .zip(&c.blocks)
                .filter(|(a, b)| a.genotype() != b.genotype())
                .count();
        }
        let mean = total as f64 / n as f64;
        assert!((mean - 4.0).abs() <= 0.2, "{mean}");
    }

    #[test]
    fn concentrated_credit_is_followed() {
        let mut m = CreditMatrix::new(0.9, 0.001).unwrap();
        let target = GenotypeId(321);
        for j in GenotypeId::all() {
            m.update(j, 7, if j == target { 1.0 } else { 0.0 }).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hits = (0..10_000)
            .filter(|_| sample_genotype(Some(&m), 7, &mut rng).unwrap() == target)
            .count();
        assert!(hits >= 9_900, "{hits}");
    }

    #[test]
    fn uninformed_credit_matches_uniform_draws() {
        let m = CreditMatrix::new(0.9, 0.001).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 45_000;
        let mut counts = vec![0u32; NUM_GENOTYPES];
        for i in 0..n {
            counts[sample_genotype(Some(&m), i % MAX_BLOCKS, &mut rng).unwrap().index()] += 1;
        }
        let expected = n as f64 / NUM_GENOTYPES as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let dist = ChiSquared::new((NUM_GENOTYPES - 1) as f64).unwrap();
        let p = 1.0 - dist.cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2}, p {p}");
    }

    #[test]
    fn crossover_inherits_each_position_from_a_parent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for s in 0..200 {
            let a = random_genome(s, 2).unwrap();
            let b = random_genome(s + 1000, 2).unwrap();
            let c = uniform_crossover(&a, &b, &mut rng);
            assert!(c.is_valid());
            for ((x, y), z) in a.blocks.iter().zip(&b.blocks).zip(&c.blocks) {
                assert!(z.genotype() == x.genotype() || z.genotype() == y.genotype());
            }
        }
        let a = random_genome(7, 2).unwrap();
        assert_eq!(uniform_crossover(&a, &a, &mut rng), a);
    }

    #[test]
    fn roulette_frequencies_follow_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 30_000;
        let zeros = (0..n).filter(|_| roulette_select(&[2.0, 1.0], &mut rng) == 0).count();
        let f = zeros as f64 / n as f64;
        assert!((f - 2.0 / 3.0).abs() < 0.01, "{f}");
        assert_eq!(shifted_weights(&[3.0, 1.0]), vec![2.01, 0.01]);
    }

    #[test]
    fn crossover_parents_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_genome(1, 2).unwrap();
        let mut b = a.clone();
        for blk in &mut b.blocks {
            *blk = BlockGene::new(blk.active, BlockType::Contextual, 8, 64, 64, 4);
        }
        let pool = vec![individual(a.clone(), 30.0, 1, 1), individual(b.clone(), 31.0, 1, 1)];
        // with distinct parents some children must mix both genomes
        let mixed = (0..50)
            .map(|_| crossover(&pool, &[30.0, 31.0], &mut rng))
            .filter(|c| *c != a && *c != b)
            .count();
        assert!(mixed > 40);
    }

    #[test]
    fn elitism_dedups_and_keeps_top() {
        let pool: Vec<Individual> = (0..12)
            .map(|i| individual(random_genome(i % 6, 2).unwrap(), 30.0 + (i % 6) as f64, 10, 10))
            .collect();
        let elite = select_elitism(pool, 4, ObjectiveMode::Constrained, None);
        let fit: Vec<f64> = elite.iter().map(|i| i.fitness).collect();
        assert_eq!(fit, vec![35.0, 34.0, 33.0, 32.0]);
    }

    #[test]
    fn pareto_elitism_prefers_first_front() {
        let g = |s| random_genome(s, 2).unwrap();
        let pool = vec![
            individual(g(1), 30.0, 100, 100), // front 0
            individual(g(2), 29.0, 50, 100),  // front 0
            individual(g(3), 28.5, 200, 300), // dominated by both
            individual(g(4), 31.0, 300, 300), // front 0
        ];
        let elite = select_elitism(pool, 3, ObjectiveMode::Pareto, None);
        assert!(elite.iter().all(|i| i.fitness != 28.5));
    }

    #[test]
    fn constrained_elitism_puts_feasible_first() {
        let g = |s| random_genome(s, 2).unwrap();
        let cs = ConstraintSpec::new(150, 1_000).unwrap();
        let pool = vec![
            individual(g(1), 35.0, 200, 10),
            individual(g(2), 29.0, 100, 10),
            individual(g(3), 30.0, 120, 10),
        ];
        let elite = select_elitism(pool, 3, ObjectiveMode::Constrained, Some(&cs));
        let fit: Vec<f64> = elite.iter().map(|i| i.fitness).collect();
        assert_eq!(fit, vec![30.0, 29.0, 35.0]);
    }

    #[test]
    fn initialization_seeds_credit() {
        let mut backend = SurrogateEvaluator::default();
        let s = Search::initialize(small_config(0), &mut backend).unwrap();
        assert_eq!(s.population.individuals.len(), 16);
        assert_eq!(s.population.elitism.len(), 8);
        assert!(s.credit.total_observations() >= 16 * 5);
        assert_eq!(s.history.len(), 1);
        assert_eq!(s.history[0].gen, 0);
    }

    #[test]
    fn generation_breeds_mutants_then_crossovers() {
        let mut backend = SurrogateEvaluator::default();
        let mut s = Search::initialize(small_config(1), &mut backend).unwrap();
        s.step(&mut backend).unwrap();
        let origins: Vec<Origin> = s.population.individuals.iter().map(|i| i.origin).collect();
        assert_eq!(&origins[..8], &[Origin::Mutation; 8]);
        assert_eq!(&origins[8..], &[Origin::Crossover; 8]);
        assert!(s.population.individuals.iter().all(|i| i.genome.is_valid()));
        assert_eq!(s.generation(), 1);
    }

    #[test]
    fn zero_generations_returns_initial_elitism() {
        let mut backend = SurrogateEvaluator::default();
        let cfg = SearchConfig { generations: 0, ..small_config(2) };
        let a = run_search(cfg.clone(), &mut backend).unwrap();
        let b = Search::initialize(cfg, &mut backend).unwrap();
        assert_eq!(a.population.elitism, b.population.elitism);
        assert_eq!(a.history.len(), 1);
    }

    #[test]
    fn runs_are_deterministic_and_best_never_drops() {
        for mode in [ObjectiveMode::Pareto, ObjectiveMode::Constrained] {
            let cfg = SearchConfig { mode, generations: 12, ..small_config(3) };
            let a = run_search(cfg.clone(), &mut SurrogateEvaluator::default()).unwrap();
            let b = run_search(cfg, &mut SurrogateEvaluator::default()).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            for w in a.history.windows(2) {
                assert!(w[1].best >= w[0].best, "{mode:?}: {} < {}", w[1].best, w[0].best);
            }
        }
    }

    #[test]
    fn serialized_state_resumes_identically() {
        let cfg = SearchConfig { generations: 8, ..small_config(4) };
        let full = run_search(cfg.clone(), &mut SurrogateEvaluator::default()).unwrap();
        let mut backend = SurrogateEvaluator::default();
        let mut part = Search::initialize(cfg, &mut backend).unwrap();
        for _ in 0..3 {
            part.step(&mut backend).unwrap();
        }
        let mut resumed: Search = serde_json::from_str(&serde_json::to_string(&part).unwrap()).unwrap();
        resumed.run(&mut backend).unwrap();
        assert_eq!(resumed.history, full.history);
        assert_eq!(resumed.population, full.population);
    }

    /// Fails every request whose id ends in an odd digit.
    struct Flaky(SurrogateEvaluator);

    impl Evaluator for Flaky {
        fn evaluate_batch(&mut self, reqs: &[EvalRequest]) -> Result<Vec<EvalResponse>, EvalError> {
            Ok(reqs
                .iter()
                .map(|r| {
                    let odd = r.id.ends_with(['1', '3', '5', '7', '9']);
                    if odd && !r.id.starts_with("g0-") {
                        EvalResponse::error(r.id.clone(), "boom")
                    } else {
                        self.0.evaluate(&r.id, &r.genome, r.seed)
                    }
                })
                .collect())
        }
    }

    #[test]
    fn failed_evaluations_are_floored_without_credit() {
        let mut backend = Flaky(SurrogateEvaluator::default());
        let mut s = Search::initialize(small_config(5), &mut backend).unwrap();
        let before = s.credit.clone();
        let seen_before = s.credit.total_observations();
        s.step(&mut backend).unwrap();
        let failed: Vec<&Individual> = s.population.individuals.iter().filter(|i| i.failed).collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().all(|i| i.fitness == s.config.floor_fitness));
        let ok_blocks: u64 = s
            .population
            .individuals
            .iter()
            .filter(|i| !i.failed)
            .map(|i| i.genome.active_count() as u64)
            .sum();
        // cache hits are not re-credited, so at most the successes add observations
        assert!(s.credit.total_observations() - seen_before <= ok_blocks);
        assert_ne!(s.credit, before);
    }

    #[test]
    fn config_validation_names_the_field() {
        let bad = SearchConfig { lambda: 7, ..SearchConfig::default() };
        assert_eq!(bad.validate().unwrap_err().field, "lambda");
        let bad = SearchConfig { evaluator: EvaluatorKind::External, ..SearchConfig::default() };
        assert_eq!(bad.validate().unwrap_err().field, "evaluator_command");
        assert!(SearchConfig::default().validate().is_ok());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
