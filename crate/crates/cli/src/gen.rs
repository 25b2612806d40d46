//! Seeded random model generation.
//!
//! Models are deterministic in the seed. The `subcritical` knob caps every
//! action's expected total offspring at 0.9, which bounds the spectral
//! radius of every strategy's expected offspring matrix by 0.9 and so
//! guarantees finite optimal values under every strategy. The
//! `hierarchical` knob restricts offspring of type `i` to types with
//! higher indices, producing an acyclic dependency graph.

use bmdp_core::model::{
    renormalize_outcomes, ActionSpec, Bmdp, Config, OffspringOutcome, TypeId, TypeSpec,
};
use bmdp_core::rng::SimRng;

/// Expected-offspring cap per action in subcritical mode.
const SUBCRITICAL_ROW_CAP: f64 = 0.9;

/// Smallest raw outcome weight, so renormalization never has to balance a
/// probability below float resolution.
const MIN_WEIGHT: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct GenParams {
    pub n_types: usize,
    /// Each type gets 1..=max_actions actions.
    pub max_actions: usize,
    /// Each action gets 1..=max_outcomes outcomes (before merging).
    pub max_outcomes: usize,
    /// Each outcome spawns 0..=max_offspring_len entities.
    pub max_offspring_len: usize,
    /// Costs drawn uniformly from `[low, high)`.
    pub cost_range: (f64, f64),
    pub subcritical: bool,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_types: 5,
            max_actions: 3,
            max_outcomes: 3,
            max_offspring_len: 3,
            cost_range: (1.0, 10.0),
            subcritical: true,
            seed: 0,
        }
    }
}

impl GenParams {
    fn check(&self) {
        assert!(self.n_types >= 1, "n_types must be at least 1");
        assert!(self.max_actions >= 1, "max_actions must be at least 1");
        assert!(self.max_outcomes >= 1, "max_outcomes must be at least 1");
        let (low, high) = self.cost_range;
        assert!(
            low > 0.0 && high >= low,
            "cost range must satisfy 0 < low <= high"
        );
    }
}

/// A random model over the full dependency graph.
pub fn gen_random_bmdp(params: &GenParams) -> Bmdp {
    generate(params, false)
}

/// A random hierarchical model: type `i` only ever spawns types `> i`, so
/// the dependency graph is acyclic and every value is finite.
pub fn gen_hierarchical_bmdp(params: &GenParams) -> Bmdp {
    generate(params, true)
}

fn generate(params: &GenParams, hierarchical: bool) -> Bmdp {
    params.check();
    let n = params.n_types;
    let mut rng = SimRng::from_seed(params.seed);
    let mut types = Vec::with_capacity(n);

    for q in 0..n {
        let n_actions = 1 + rng.below(params.max_actions);
        let mut actions = Vec::with_capacity(n_actions);
        for a in 0..n_actions {
            let cost = rng.range(params.cost_range.0, params.cost_range.1);
            let n_outcomes = 1 + rng.below(params.max_outcomes);
            let mut weights = Vec::with_capacity(n_outcomes);
            let mut lists: Vec<Vec<TypeId>> = Vec::with_capacity(n_outcomes);
            for _ in 0..n_outcomes {
                weights.push(MIN_WEIGHT + (1.0 - MIN_WEIGHT) * rng.unit());
                let len = if hierarchical && q + 1 >= n {
                    0 // the last type in a hierarchy can only die out
                } else {
                    rng.below(params.max_offspring_len + 1)
                };
                let list = (0..len)
                    .map(|_| {
                        if hierarchical {
                            TypeId(q + 1 + rng.below(n - q - 1))
                        } else {
                            TypeId(rng.below(n))
                        }
                    })
                    .collect();
                lists.push(list);
            }

            if params.subcritical {
                enforce_row_cap(&weights, &mut lists);
            }

            // merge duplicate offspring lists, summing their weights
            let mut outcomes: Vec<OffspringOutcome> = Vec::new();
            for (w, list) in weights.into_iter().zip(lists) {
                match outcomes.iter_mut().find(|o| o.offspring == list) {
                    Some(o) => o.probability += w,
                    None => outcomes.push(OffspringOutcome {
                        probability: w,
                        offspring: list,
                    }),
                }
            }
            let total: f64 = outcomes.iter().map(|o| o.probability).sum();
            for o in outcomes.iter_mut() {
                o.probability /= total;
            }
            renormalize_outcomes(&mut outcomes);

            actions.push(ActionSpec {
                name: format!("a{a}"),
                cost,
                outcomes,
            });
        }
        types.push(TypeSpec {
            name: format!("q{q}"),
            actions,
        });
    }

    let init = Config::single(TypeId(rng.below(n)));
    let model = Bmdp {
        name: None,
        types,
        init,
    };
    debug_assert!(model.validate().is_empty());
    model
}

/// Drop entities until the action's expected total offspring
/// `Σ p_i · |list_i|` is at most the cap. Always removes from the longest
/// list (lowest index on ties), so the result is deterministic.
fn enforce_row_cap(weights: &[f64], lists: &mut [Vec<TypeId>]) {
    let total: f64 = weights.iter().sum();
    loop {
        let expected: f64 = weights
            .iter()
            .zip(lists.iter())
            .map(|(w, l)| w / total * l.len() as f64)
            .sum();
        if expected <= SUBCRITICAL_ROW_CAP {
            return;
        }
        let longest = (0..lists.len())
            .max_by_key(|&i| lists[i].len())
            .expect("at least one outcome");
        lists[longest]
            .pop()
            .expect("expected offspring > 0 implies a non-empty list");
    }
}
