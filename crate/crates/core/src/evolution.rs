//! Evolutionary refinement of a verified solver, using the evaluator score
//! as fitness.
//!
//! Each generation samples parents by rank, applies the variation operators
//! (two crossovers, three mutations), scores offspring in parallel and keeps
//! the best `m` distinct-fitness individuals.

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::analyzer::TaskType;
use crate::executor::Executor;
use crate::llm::{extract_code, extract_tagged, fences, Gateway, LlmError, PromptId, Slots};
use crate::par::{self, Parallelism};
use crate::registry::{describe_for_prompt, ToolSet};
use crate::solver::SolverError;
use crate::template::{lint_solver, CodeTemplate};
use crate::transcript::Transcript;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("population is empty")]
    EmptyPopulation,
    #[error("operator {0} skipped: {1}")]
    OperatorSkipped(Operator, String),
    #[error("seed individual has no valid fitness")]
    InvalidSeed,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Variation(#[from] SolverError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "seed")]
    Seed,
    E1,
    E2,
    M1,
    M2,
    M3,
}

impl Operator {
    pub const VARIATION: [Operator; 5] = [Operator::E1, Operator::E2, Operator::M1, Operator::M2, Operator::M3];

    pub fn is_crossover(self) -> bool {
        matches!(self, Operator::E1 | Operator::E2)
    }

    pub fn prompt(self) -> Option<PromptId> {
        match self {
            Operator::Seed => None,
            Operator::E1 => Some(PromptId::CrossE1),
            Operator::E2 => Some(PromptId::CrossE2),
            Operator::M1 => Some(PromptId::MutM1),
            Operator::M2 => Some(PromptId::MutM2),
            Operator::M3 => Some(PromptId::MutM3),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::Seed => "seed",
            Operator::E1 => "E1",
            Operator::E2 => "E2",
            Operator::M1 => "M1",
            Operator::M2 => "M2",
            Operator::M3 => "M3",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: u64,
    pub code: String,
    pub description: String,
    pub fitness: Option<f64>,
    pub generation_born: usize,
    pub parents: Vec<u64>,
    pub operator: Operator,
}

impl Individual {
    pub fn seed(code: impl Into<String>, fitness: Option<f64>) -> Self {
        Self {
            id: 0,
            code: code.into(),
            description: "initial verified solver".into(),
            fitness: fitness.map(clamp_fitness),
            generation_born: 0,
            parents: Vec::new(),
            operator: Operator::Seed,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.fitness.is_some_and(f64::is_finite)
    }
}

/// Clamps into [0, 1]; non-finite values are invalid.
pub fn clamp_fitness(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub generations: usize,
    pub capacity: usize,
    pub operators_per_gen: Vec<Operator>,
    pub seed: u64,
    /// Parents used by E2 when the population allows.
    pub e2_parents: usize,
    pub parallelism: Parallelism,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            generations: 10,
            capacity: 5,
            operators_per_gen: Operator::VARIATION.to_vec(),
            seed: 0,
            e2_parents: 3,
            parallelism: Parallelism::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        if self.capacity == 0 {
            return Err(EvolutionError::InvalidConfig("capacity m must be at least 1".into()));
        }
        if self.operators_per_gen.contains(&Operator::Seed) {
            return Err(EvolutionError::InvalidConfig("`seed` is not a variation operator".into()));
        }
        if self.e2_parents < 2 {
            return Err(EvolutionError::InvalidConfig("E2 needs at least 2 parents".into()));
        }
        Ok(())
    }
}

/// Members sorted by non-increasing fitness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Individual>,
    pub capacity: usize,
}

impl Population {
    pub fn new(seed: Individual, capacity: usize) -> Self {
        Self {
            members: vec![seed],
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn best(&self) -> Option<&Individual> {
        self.members.first()
    }

    pub fn fitness_vector(&self) -> Vec<f64> {
        self.members.iter().filter_map(|m| m.fitness).collect()
    }
}

/// Rank-weighted selection probabilities for a population of size `n`:
/// rank `r` (1 = best) gets weight `1 / (r + n)`, normalized.
pub fn rank_probabilities(n: usize) -> Result<Vec<f64>, EvolutionError> {
    if n == 0 {
        return Err(EvolutionError::EmptyPopulation);
    }
    let weights: Vec<f64> = (1..=n).map(|r| 1.0 / (r + n) as f64).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

pub fn selection_probabilities(pop: &Population) -> Result<Vec<f64>, EvolutionError> {
    rank_probabilities(pop.len())
}

fn draw_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Samples `count` distinct members by rank weight, renormalizing after each
/// draw. Returns every member when `count` exceeds the population.
pub fn sample_parents<R: Rng>(
    pop: &Population,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Individual>, EvolutionError> {
    let probs = selection_probabilities(pop)?;
    if count >= pop.len() {
        return Ok(pop.members.clone());
    }
    let mut remaining: Vec<usize> = (0..pop.len()).collect();
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        let weights: Vec<f64> = remaining.iter().map(|&i| probs[i]).collect();
        let pick = draw_index(&weights, rng);
        chosen.push(pop.members[remaining.remove(pick)].clone());
    }
    Ok(chosen)
}

/// Empirical single-draw rank frequencies over `draws` samples. Draws are
/// split into fixed chunks with their own seeded streams, so the result does
/// not depend on the thread count.
pub fn selection_frequencies(n: usize, draws: usize, seed: u64, mode: Parallelism) -> Result<Vec<f64>, EvolutionError> {
    const CHUNK: usize = 8192;
    let probs = rank_probabilities(n)?;
    let chunks = draws.div_ceil(CHUNK);
    let counts = par::map_range(mode, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let len = CHUNK.min(draws - c * CHUNK);
        let mut counts = vec![0usize; n];
        for _ in 0..len {
            counts[draw_index(&probs, &mut rng)] += 1;
        }
        counts
    });
    let mut total = vec![0usize; n];
    for c in counts {
        for (t, x) in total.iter_mut().zip(c) {
            *t += x;
        }
    }
    Ok(total.into_iter().map(|c| c as f64 / draws.max(1) as f64).collect())
}

fn by_fitness_desc(a: &Individual, b: &Individual) -> Ordering {
    let fa = a.fitness.unwrap_or(f64::NEG_INFINITY);
    let fb = b.fitness.unwrap_or(f64::NEG_INFINITY);
    fb.total_cmp(&fa)
        .then(a.generation_born.cmp(&b.generation_born))
        .then(a.code.len().cmp(&b.code.len()))
        .then(a.id.cmp(&b.id))
}

/// Drop invalid → dedup equal fitness (earliest-born, then shorter code) →
/// sort descending → truncate to capacity.
pub fn manage_population(pop: &Population, offspring: Vec<Individual>) -> Population {
    let mut pool: Vec<Individual> = pop.members.iter().cloned().chain(offspring).filter(Individual::is_valid).collect();
    pool.sort_by(|a, b| {
        let fa = a.fitness.expect("valid");
        let fb = b.fitness.expect("valid");
        fa.total_cmp(&fb)
            .then(a.generation_born.cmp(&b.generation_born))
            .then(a.code.len().cmp(&b.code.len()))
            .then(a.id.cmp(&b.id))
    });
    pool.dedup_by(|later, earlier| later.fitness == earlier.fitness);
    pool.sort_by(by_fitness_desc);
    pool.truncate(pop.capacity);
    Population {
        members: pool,
        capacity: pop.capacity,
    }
}

/// Scores a candidate solver; `None` marks it invalid.
pub trait FitnessFn: Sync {
    fn fitness(&self, label: &str, code: &str) -> FitnessOutcome;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessOutcome {
    pub fitness: Option<f64>,
    pub error: Option<String>,
}

/// Fitness through the executor: run the solver, then the verified evaluator.
pub struct ExecFitness<'a> {
    pub executor: &'a Executor,
    pub evaluator_code: &'a str,
    pub tools_solve: &'a ToolSet,
    pub tools_eval: &'a ToolSet,
    pub reference_path: &'a Path,
    pub kwargs: &'a Map<String, Value>,
    pub binary: bool,
}

impl FitnessFn for ExecFitness<'_> {
    fn fitness(&self, label: &str, code: &str) -> FitnessOutcome {
        let invalid = |e: String| FitnessOutcome {
            fitness: None,
            error: Some(e),
        };
        let run = match self.executor.run_solver(label, code, self.tools_solve, self.kwargs) {
            Ok(r) => r,
            Err(e) => return invalid(e.to_string()),
        };
        if !run.is_ok() {
            return invalid(run.diagnostics());
        }
        match self.executor.run_evaluator(
            self.evaluator_code,
            &run.result_path(),
            self.reference_path,
            self.tools_eval,
            self.binary,
        ) {
            Ok(s) => FitnessOutcome {
                fitness: Some(s.value),
                error: None,
            },
            Err(e) => invalid(e.to_string()),
        }
    }
}

/// What variation prompts need.
pub struct VaryContext<'a> {
    pub task: &'a str,
    pub tools_solve: &'a ToolSet,
    pub template: &'a CodeTemplate,
    pub gateway: &'a Gateway,
    pub tool_budget: usize,
}

fn render_individual(ind: &Individual) -> String {
    let fitness = ind.fitness.map_or("invalid".to_string(), |f| format!("{f:.6}"));
    format!(
        "### Individual {} (fitness {fitness})\nStrategy: {}\n```python\n{}\n```\n",
        ind.id,
        ind.description.trim(),
        ind.code.trim_end()
    )
}

/// Splits a variation reply into (description, code).
pub fn parse_variation(reply: &str, tools: &ToolSet) -> Result<(String, String), SolverError> {
    let code = extract_code(reply)?;
    lint_solver(&code, tools)?;
    let description = extract_tagged(reply, "description").unwrap_or_else(|| {
        let cut = reply.find("```").unwrap_or(reply.len());
        reply[..cut].trim().to_string()
    });
    let description = if description.trim().is_empty() && fences(reply).len() > 1 {
        String::new()
    } else {
        description.trim().to_string()
    };
    Ok((description, code))
}

/// Applies one operator to `parents` with a single LLM call.
pub fn vary(
    parents: &[Individual],
    op: Operator,
    id: u64,
    generation: usize,
    ctx: &VaryContext<'_>,
    transcript: &mut Transcript,
) -> Result<Individual, EvolutionError> {
    let Some(prompt) = op.prompt() else {
        return Err(EvolutionError::OperatorSkipped(op, "not a variation operator".into()));
    };
    if op.is_crossover() && parents.len() < 2 {
        return Err(EvolutionError::OperatorSkipped(op, "needs at least 2 distinct parents".into()));
    }
    if !op.is_crossover() && parents.len() != 1 {
        return Err(EvolutionError::OperatorSkipped(op, "needs exactly 1 parent".into()));
    }
    let tools = describe_for_prompt(ctx.tools_solve, ctx.tool_budget);
    let mut slots = Slots::from([
        ("task".to_string(), ctx.task.to_string()),
        ("tools".to_string(), if tools.is_empty() { "(no tools available)".into() } else { tools }),
        ("template".to_string(), ctx.template.text().to_string()),
    ]);
    if op.is_crossover() {
        slots.insert("parents".into(), parents.iter().map(render_individual).collect::<Vec<_>>().join("\n"));
    } else {
        slots.insert("parent".into(), render_individual(&parents[0]));
    }
    let reply = ctx.gateway.ask(prompt, &slots, transcript)?;
    let (description, code) = parse_variation(&reply, ctx.tools_solve)?;
    Ok(Individual {
        id,
        code,
        description,
        fitness: None,
        generation_born: generation,
        parents: parents.iter().map(|p| p.id).collect(),
        operator: op,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorOutcome {
    pub operator: Operator,
    pub parents: Vec<u64>,
    /// `ok`, `invalid`, `skipped` or `failed`.
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offspring: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// One line of `evolution.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub population: Vec<f64>,
    pub member_ids: Vec<u64>,
    pub operators: Vec<OperatorOutcome>,
}

#[derive(Debug, Clone)]
pub struct EvolutionOutcome {
    pub best: Individual,
    pub history: Vec<GenerationRecord>,
    pub population: Population,
}

impl EvolutionOutcome {
    pub fn best_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.best_fitness).collect()
    }
}

fn record(generation: usize, pop: &Population, operators: Vec<OperatorOutcome>) -> GenerationRecord {
    GenerationRecord {
        generation,
        best_fitness: pop.best().and_then(|b| b.fitness).unwrap_or(0.0),
        population: pop.fitness_vector(),
        member_ids: pop.members.iter().map(|m| m.id).collect(),
        operators,
    }
}

/// Runs `config.generations` rounds of select → vary → evaluate → manage.
pub fn evolve(
    seed: Individual,
    fitness: &dyn FitnessFn,
    config: &EvolutionConfig,
    ctx: &VaryContext<'_>,
    transcript: &mut Transcript,
) -> Result<EvolutionOutcome, EvolutionError> {
    config.validate()?;
    if !seed.is_valid() {
        return Err(EvolutionError::InvalidSeed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pop = Population::new(seed, config.capacity);
    let mut history = vec![record(0, &pop, Vec::new())];
    let mut next_id = pop.members.iter().map(|m| m.id).max().unwrap_or(0) + 1;

    for generation in 1..=config.generations {
        transcript.stage("evolve_generation", json!({"generation": generation, "population": pop.fitness_vector()}));
        let mut offspring = Vec::new();
        let mut outcomes = Vec::new();
        for &op in &config.operators_per_gen {
            let need = match op {
                Operator::E1 => 2,
                Operator::E2 => config.e2_parents,
                _ => 1,
            };
            if op.is_crossover() && pop.len() < 2 {
                let reason = "population has a single member";
                transcript.diagnostic("evolve", format!("operator {op} skipped: {reason}"));
                outcomes.push(OperatorOutcome {
                    operator: op,
                    parents: Vec::new(),
                    outcome: "skipped".into(),
                    offspring: None,
                    fitness: None,
                    detail: Some(reason.into()),
                });
                continue;
            }
            let parents = sample_parents(&pop, need, &mut rng)?;
            let parent_ids: Vec<u64> = parents.iter().map(|p| p.id).collect();
            match vary(&parents, op, next_id, generation, ctx, transcript) {
                Ok(child) => {
                    next_id += 1;
                    outcomes.push(OperatorOutcome {
                        operator: op,
                        parents: parent_ids,
                        outcome: "ok".into(),
                        offspring: Some(child.id),
                        fitness: None,
                        detail: None,
                    });
                    offspring.push(child);
                }
                Err(e @ EvolutionError::Llm(_)) => return Err(e),
                Err(e @ EvolutionError::Variation(SolverError::Llm(_))) => return Err(e),
                Err(e) => {
                    transcript.diagnostic("evolve", format!("operator {op} failed: {e}"));
                    outcomes.push(OperatorOutcome {
                        operator: op,
                        parents: parent_ids,
                        outcome: "failed".into(),
                        offspring: None,
                        fitness: None,
                        detail: Some(e.to_string()),
                    });
                }
            }
        }

        let scored = par::map(config.parallelism, &offspring, |child| {
            fitness.fitness(&format!("evolve-g{generation}-i{}", child.id), &child.code)
        });
        for (child, score) in offspring.iter_mut().zip(scored) {
            child.fitness = score.fitness.filter(|f| f.is_finite()).map(clamp_fitness);
            if let Some(o) = outcomes.iter_mut().find(|o| o.offspring == Some(child.id)) {
                o.fitness = child.fitness;
                if child.fitness.is_none() {
                    o.outcome = "invalid".into();
                    o.detail = score.error.map(|e| crate::executor::truncate_diagnostics(&e, 2048));
                }
            }
            transcript.evaluation(&format!("evolve-g{generation}-i{}", child.id), child.fitness, None);
        }
        pop = manage_population(&pop, offspring);
        history.push(record(generation, &pop, outcomes));
    }
    let best = pop.best().cloned().ok_or(EvolutionError::EmptyPopulation)?;
    Ok(EvolutionOutcome {
        best,
        history,
        population: pop,
    })
}

/// True when this task type goes through evolution.
pub fn evolves(tau: TaskType) -> bool {
    tau == TaskType::Opt
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ind(id: u64, fitness: Option<f64>, born: usize, code: &str) -> Individual {
        Individual {
            id,
            code: code.into(),
            description: String::new(),
            fitness,
            generation_born: born,
            parents: vec![],
            operator: Operator::M1,
        }
    }

    fn pop_of(fits: &[f64], capacity: usize) -> Population {
        Population {
            members: fits.iter().enumerate().map(|(i, &f)| ind(i as u64, Some(f), 0, "x")).collect(),
            capacity,
        }
    }

    #[test]
    fn probabilities_match_hand_values() {
        assert_eq!(rank_probabilities(1).unwrap(), vec![1.0]);
        let p2 = rank_probabilities(2).unwrap();
        assert!((p2[0] - 4.0 / 7.0).abs() < 1e-12 && (p2[1] - 3.0 / 7.0).abs() < 1e-12);
        let p3 = rank_probabilities(3).unwrap();
        for (got, want) in p3.iter().zip([15.0 / 37.0, 12.0 / 37.0, 10.0 / 37.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(matches!(rank_probabilities(0), Err(EvolutionError::EmptyPopulation)));
    }

    #[test]
    fn management_pipeline() {
        let pop = Population {
            members: vec![ind(0, Some(0.5), 0, "seed")],
            capacity: 5,
        };
        let offspring = vec![ind(1, None, 1, "a"), ind(2, Some(0.5), 1, "b"), ind(3, Some(0.7), 1, "c")];
        let next = manage_population(&pop, offspring);
        assert_eq!(next.fitness_vector(), vec![0.7, 0.5]);
        assert_eq!(next.members[1].id, 0, "earliest-born duplicate survives");

        let seven = pop_of(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7], 5);
        let next = manage_population(&Population { members: vec![], capacity: 5 }, seven.members);
        assert_eq!(next.fitness_vector(), vec![0.7, 0.6, 0.5, 0.4, 0.3]);

        let pop = pop_of(&[0.9, 0.4], 5);
        let next = manage_population(&pop, vec![ind(9, None, 1, "z")]);
        assert_eq!(next, pop);
    }

    #[test]
    fn dedup_prefers_shorter_code_among_same_generation() {
        let pop = Population { members: vec![], capacity: 5 };
        let next = manage_population(&pop, vec![ind(1, Some(0.3), 2, "longer code"), ind(2, Some(0.3), 2, "short")]);
        assert_eq!(next.members.len(), 1);
        assert_eq!(next.members[0].id, 2);
    }

    #[test]
    fn parent_sampling() {
        let single = pop_of(&[0.5], 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_parents(&single, 2, &mut rng).unwrap().len(), 1);

        let pop = pop_of(&[0.9, 0.5, 0.3, 0.1], 5);
        let a: Vec<u64> = sample_parents(&pop, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap().iter().map(|i| i.id).collect();
        let b: Vec<u64> = sample_parents(&pop, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap().iter().map(|i| i.id).collect();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn frequencies_do_not_depend_on_mode() {
        let s = selection_frequencies(3, 20_000, 5, Parallelism::Sequential).unwrap();
        let p = selection_frequencies(3, 20_000, 5, Parallelism::Parallel).unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn variation_reply_parsing() {
        let tools = crate::template::tests::toolset(&["SpectraToSmiles"]);
        let reply = format!(
            "```description\nRaise the beam size.\n```\n```python\n{}```",
            crate::template::tests::SAMPLE.replace("beam_size=10", "beam_size=20").replace("= 10", "= 20")
        );
        let (d, code) = parse_variation(&reply, &tools).unwrap();
        assert_eq!(d, "Raise the beam size.");
        assert!(code.contains("beam_size=20"));
        let prose = format!("Swap tools.\n```python\n{}```", crate::template::tests::SAMPLE);
        assert_eq!(parse_variation(&prose, &tools).unwrap().0, "Swap tools.");
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one_and_decrease(n in 1usize..60) {
            let p = rank_probabilities(n).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for w in p.windows(2) {
                prop_assert!(w[0] > w[1]);
            }
        }

        #[test]
        fn management_invariants(
            base in prop::collection::vec(0.0f64..1.0, 1..6),
            kids in prop::collection::vec(prop::option::of(0.0f64..1.0), 0..8),
            m in 1usize..6,
        ) {
            let mut pop = pop_of(&base, m);
            pop = manage_population(&Population { members: vec![], capacity: m }, pop.members);
            let best_before = pop.best().and_then(|b| b.fitness).unwrap();
            let offspring: Vec<Individual> = kids.iter().enumerate()
                .map(|(i, f)| ind(100 + i as u64, *f, 1, "k")).collect();
            let next = manage_population(&pop, offspring);
            prop_assert!(next.len() <= m);
            let fits = next.fitness_vector();
            prop_assert_eq!(fits.len(), next.len());
            for w in fits.windows(2) {
                prop_assert!(w[0] > w[1]);
            }
            prop_assert!(fits[0] >= best_before);
        }

        #[test]
        fn probabilities_depend_on_rank_only(fits in prop::collection::vec(0.0f64..1.0, 1..10), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let pop = pop_of(&fits, 20);
            let scaled = pop_of(&fits.iter().map(|f| a * f + b).collect::<Vec<_>>(), 20);
            prop_assert_eq!(selection_probabilities(&pop).unwrap(), selection_probabilities(&scaled).unwrap());
        }
    }
}
