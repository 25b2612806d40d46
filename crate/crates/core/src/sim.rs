//! Seeded execution of the induced process.
//!
//! A configuration steps by expanding exactly one entity: the chosen
//! entity is replaced in place by its sampled offspring list, everything
//! else keeps its order, and the action's cost is paid. Static-strategy
//! episodes always expand the first entity; the learner picks entities
//! uniformly instead; entity selection is always an explicit choice of
//! the caller, never implicit.

use crate::model::{ActionId, Bmdp, Config, StaticStrategy, TypeId};
use crate::rng::SimRng;
use std::io;

/// Default step cap for Monte-Carlo episodes.
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// Outcome of expanding one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based position of the expanded entity in the configuration.
    pub entity_index: usize,
    pub entity_type: TypeId,
    pub action: ActionId,
    pub cost: f64,
    pub offspring: Config,
    /// Prefix before the entity, then the offspring, then the suffix.
    pub next_config: Config,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// Sum of all step costs, including a truncated episode's partial sum.
    pub total_cost: f64,
    pub steps: usize,
    /// True iff the empty configuration was reached.
    pub terminated: bool,
    pub trace: Option<Vec<StepRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Share of episodes that hit the step cap; a bias indicator, since
    /// truncated episodes contribute only their partial cost.
    pub truncated_fraction: f64,
}

/// Draw one offspring list of `(q, a)` by inverse CDF over the outcomes in
/// declaration order, using a single uniform draw.
pub fn sample_offspring(model: &Bmdp, q: TypeId, a: ActionId, rng: &mut SimRng) -> Config {
    assert!(
        a.0 < model.num_actions(q),
        "action {} not available for type {}",
        a.0,
        q.0
    );
    let outcomes = &model.action(q, a).outcomes;
    let u = rng.unit();
    let mut acc = 0.0;
    for o in outcomes {
        acc += o.probability;
        if u < acc {
            return Config::from_entities(o.offspring.clone());
        }
    }
    // probabilities sum to 1; guard the last bucket against rounding
    Config::from_entities(
        outcomes
            .last()
            .expect("outcomes are non-empty")
            .offspring
            .clone(),
    )
}

/// Expand the entity at `entity_index` (1-based) with action `a`.
pub fn step(
    model: &Bmdp,
    config: &Config,
    entity_index: usize,
    a: ActionId,
    rng: &mut SimRng,
) -> StepRecord {
    assert!(
        entity_index >= 1 && entity_index <= config.len(),
        "entity index {} out of range 1..={}",
        entity_index,
        config.len()
    );
    let entity_type = config.entities[entity_index - 1];
    let offspring = sample_offspring(model, entity_type, a, rng);
    let mut next = Vec::with_capacity(config.len() - 1 + offspring.len());
    next.extend_from_slice(&config.entities[..entity_index - 1]);
    next.extend_from_slice(&offspring.entities);
    next.extend_from_slice(&config.entities[entity_index..]);
    StepRecord {
        entity_index,
        entity_type,
        action: a,
        cost: model.action(entity_type, a).cost,
        offspring,
        next_config: Config::from_entities(next),
    }
}

/// Run one episode under a static strategy: repeatedly expand the first
/// entity until extinction or `max_steps`.
pub fn run_episode(
    model: &Bmdp,
    start: &Config,
    sigma: &StaticStrategy,
    max_steps: usize,
    rng: &mut SimRng,
    record_trace: bool,
) -> EpisodeResult {
    assert!(sigma.is_valid_for(model), "strategy does not fit the model");
    let mut config = start.clone();
    let mut total_cost = 0.0;
    let mut steps = 0;
    let mut trace = if record_trace { Some(Vec::new()) } else { None };
    while !config.is_empty() && steps < max_steps {
        let q = config.entities[0];
        let record = step(model, &config, 1, sigma.get(q), rng);
        total_cost += record.cost;
        steps += 1;
        config = record.next_config.clone();
        if let Some(t) = trace.as_mut() {
            t.push(record);
        }
    }
    EpisodeResult {
        total_cost,
        steps,
        terminated: config.is_empty(),
        trace,
    }
}

/// Mean and standard error of the episode total cost over independent
/// episodes. Episode `i` draws from substream `i` of `rng`, so the result
/// depends only on `(seed, stream)` and the inputs.
pub fn monte_carlo_estimate(
    model: &Bmdp,
    start: &Config,
    sigma: &StaticStrategy,
    episodes: usize,
    max_steps: usize,
    rng: &SimRng,
) -> McEstimate {
    assert!(episodes >= 1, "need at least one episode");
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut truncated = 0usize;
    for e in 0..episodes {
        let mut episode_rng = rng.substream(e as u64);
        let result = run_episode(model, start, sigma, max_steps, &mut episode_rng, false);
        if !result.terminated {
            truncated += 1;
        }
        let delta = result.total_cost - mean;
        mean += delta / (e + 1) as f64;
        m2 += delta * (result.total_cost - mean);
    }
    let stderr = if episodes > 1 {
        (m2 / (episodes - 1) as f64 / episodes as f64).sqrt()
    } else {
        0.0
    };
    McEstimate {
        mean,
        stderr,
        truncated_fraction: truncated as f64 / episodes as f64,
    }
}

/// Dump a trace, one step per line, tab-separated:
/// `step entity_index type action cost next_size`.
pub fn write_trace<W: io::Write>(w: &mut W, model: &Bmdp, trace: &[StepRecord]) -> io::Result<()> {
    for (i, r) in trace.iter().enumerate() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            r.entity_index,
            model.type_name(r.entity_type),
            model.action_name(r.entity_type, r.action),
            r.cost,
            r.next_config.len()
        )?;
    }
    Ok(())
}
