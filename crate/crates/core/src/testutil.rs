//! Shared fixtures and proptest strategies for unit tests.

use crate::model::{
    renormalize_outcomes, ActionSpec, Bmdp, Config, OffspringOutcome, TypeId, TypeSpec, ValueVector,
};
use proptest::prelude::*;

fn action(name: &str, cost: f64, outcomes: Vec<(f64, Vec<usize>)>) -> ActionSpec {
    ActionSpec {
        name: name.into(),
        cost,
        outcomes: outcomes
            .into_iter()
            .map(|(p, off)| OffspringOutcome {
                probability: p,
                offspring: off.into_iter().map(TypeId).collect(),
            })
            .collect(),
    }
}

/// The two-type cloud model: `T` splits into three `S` tasks or runs whole;
/// `S` runs reliably or retries on an unreliable server.
pub fn cloud1() -> Bmdp {
    Bmdp {
        name: Some("cloud1".into()),
        types: vec![
            TypeSpec {
                name: "T".into(),
                actions: vec![
                    action("a1", 1.0, vec![(1.0, vec![1, 1, 1])]),
                    action("a2", 8.0, vec![(1.0, vec![])]),
                ],
            },
            TypeSpec {
                name: "S".into(),
                actions: vec![
                    action("a1", 1.6, vec![(1.0, vec![])]),
                    action("a2", 1.0, vec![(0.4, vec![1]), (0.6, vec![])]),
                ],
            },
        ],
        init: Config::single(TypeId(0)),
    }
}

/// The cloud model with interrupts: `S`'s reliable server may be interrupted
/// by a high-priority task `H`, which in turn may be interrupted with the
/// given probability by two more `H` tasks.
pub fn cloud2_with_interrupt(p_interrupt: f64) -> Bmdp {
    Bmdp {
        name: Some("cloud2".into()),
        types: vec![
            TypeSpec {
                name: "T".into(),
                actions: vec![
                    action("a1", 1.0, vec![(1.0, vec![1, 1, 1])]),
                    action("a2", 8.0, vec![(1.0, vec![])]),
                ],
            },
            TypeSpec {
                name: "S".into(),
                actions: vec![
                    action("a1", 1.6, vec![(0.3, vec![2]), (0.7, vec![])]),
                    action("a2", 1.0, vec![(0.4, vec![1]), (0.6, vec![])]),
                ],
            },
            TypeSpec {
                name: "H".into(),
                actions: vec![action(
                    "a1",
                    0.1,
                    vec![(p_interrupt, vec![2, 2]), (1.0 - p_interrupt, vec![])],
                )],
            },
        ],
        init: Config::single(TypeId(0)),
    }
}

pub fn cloud2() -> Bmdp {
    cloud2_with_interrupt(0.3)
}

/// A single-type model: pay `cost`, then spawn two copies with probability
/// `p_branch`, otherwise die.
pub fn one_type_branching(cost: f64, p_branch: f64) -> Bmdp {
    Bmdp {
        name: None,
        types: vec![TypeSpec {
            name: "H".into(),
            actions: vec![action(
                "a1",
                cost,
                vec![(p_branch, vec![0, 0]), (1.0 - p_branch, vec![])],
            )],
        }],
        init: Config::single(TypeId(0)),
    }
}

/// Random configurations over `max_types` pseudo-types.
pub fn arb_config(max_types: usize, max_len: usize) -> impl Strategy<Value = Config> {
    proptest::collection::vec(0..max_types, 0..=max_len)
        .prop_map(|v| Config::from_entities(v.into_iter().map(TypeId).collect()))
}

/// Random *valid* models: every invariant holds by construction.
pub fn arb_bmdp() -> impl Strategy<Value = Bmdp> {
    (1..5usize).prop_flat_map(|n_types| {
        let ty = arb_type_spec(n_types);
        (
            proptest::collection::vec(ty, n_types),
            proptest::collection::vec(0..n_types, 0..4),
        )
            .prop_map(move |(mut types, init)| {
                for (i, t) in types.iter_mut().enumerate() {
                    t.name = format!("q{i}");
                }
                Bmdp {
                    name: None,
                    types,
                    init: Config::from_entities(init.into_iter().map(TypeId).collect()),
                }
            })
    })
}

fn arb_type_spec(n_types: usize) -> impl Strategy<Value = TypeSpec> {
    proptest::collection::vec(arb_action_spec(n_types), 1..4).prop_map(|mut actions| {
        for (i, a) in actions.iter_mut().enumerate() {
            a.name = format!("a{i}");
        }
        TypeSpec {
            name: String::new(),
            actions,
        }
    })
}

fn arb_action_spec(n_types: usize) -> impl Strategy<Value = ActionSpec> {
    let outcome = (0.05..1.0f64, proptest::collection::vec(0..n_types, 0..4));
    (0.01..10.0f64, proptest::collection::vec(outcome, 1..4)).prop_map(|(cost, raw)| {
        let mut outcomes: Vec<OffspringOutcome> = Vec::new();
        for (w, off) in raw {
            let offspring: Vec<TypeId> = off.into_iter().map(TypeId).collect();
            match outcomes.iter_mut().find(|o| o.offspring == offspring) {
                Some(o) => o.probability += w,
                None => outcomes.push(OffspringOutcome {
                    probability: w,
                    offspring,
                }),
            }
        }
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        for o in outcomes.iter_mut() {
            o.probability /= total;
        }
        renormalize_outcomes(&mut outcomes);
        ActionSpec {
            name: String::new(),
            cost,
            outcomes,
        }
    })
}

/// Random models that may break any invariant; used to exercise `validate`.
pub fn arb_messy_bmdp() -> impl Strategy<Value = Bmdp> {
    let messy_float = prop_oneof![
        3 => -1.0..2.0f64,
        1 => proptest::num::f64::ANY,
    ];
    let outcome = (
        messy_float.clone(),
        proptest::collection::vec(0..8usize, 0..4),
    )
        .prop_map(|(p, off)| OffspringOutcome {
            probability: p,
            offspring: off.into_iter().map(TypeId).collect(),
        });
    let action = (
        messy_float,
        proptest::collection::vec(outcome, 0..4),
        "[a-b]{0,2}",
    )
        .prop_map(|(cost, outcomes, name)| ActionSpec {
            name,
            cost,
            outcomes,
        });
    let ty = (proptest::collection::vec(action, 0..3), "[A-B]{0,2}")
        .prop_map(|(actions, name)| TypeSpec { name, actions });
    (
        proptest::collection::vec(ty, 0..4),
        proptest::collection::vec(0..8usize, 0..4),
    )
        .prop_map(|(types, init)| Bmdp {
            name: None,
            types,
            init: Config::from_entities(init.into_iter().map(TypeId).collect()),
        })
}

/// Random non-negative value vectors, with occasional infinities.
pub fn arb_values(n: usize) -> impl Strategy<Value = ValueVector> {
    proptest::collection::vec(prop_oneof![9 => 0.0..50.0f64, 1 => Just(f64::INFINITY)], n)
        .prop_map(ValueVector::from_values)
}
