//! Domain types for branching Markov decision processes.
//!
//! A model consists of finitely many entity types. Each type offers at
//! least one action; an action has a strictly positive cost and a finite
//! discrete distribution over offspring lists. Identities are dense
//! indices assigned in declaration order so the solver and learner can
//! address tables directly; display names are kept for I/O only.

use std::fmt;

/// Tolerance for the sum of outcome probabilities of one action.
///
/// Decimal literals in model files rarely sum to exactly 1 in binary
/// floating point; sums within this tolerance are accepted and
/// renormalized at load.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Index of an entity type, dense in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId(pub usize);

/// Index of an action, local to its type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub usize);

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One possible offspring list of an action, with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringOutcome {
    /// Probability in `(0, 1]`.
    pub probability: f64,
    /// Types spawned, in order. Empty means the entity just dies.
    pub offspring: Vec<TypeId>,
}

/// An action available to a type: a cost and an offspring distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    pub name: String,
    /// Strictly positive cost incurred whenever the action is taken.
    pub cost: f64,
    /// Non-empty list of outcomes; probabilities sum to 1 and the
    /// offspring lists are pairwise distinct.
    pub outcomes: Vec<OffspringOutcome>,
}

impl ActionSpec {
    /// Expected number of offspring of type `r` when this action is taken.
    pub fn expected_offspring(&self, r: TypeId) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.probability * o.offspring.iter().filter(|&&t| t == r).count() as f64)
            .sum()
    }

    /// Expected total number of offspring when this action is taken.
    pub fn expected_offspring_total(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.probability * o.offspring.len() as f64)
            .sum()
    }
}

/// A declared type together with its available actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpec {
    pub name: String,
    pub actions: Vec<ActionSpec>,
}

/// An ordered list of live entities. The empty configuration is a valid,
/// absorbing state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Config {
    pub entities: Vec<TypeId>,
}

impl Config {
    pub fn empty() -> Self {
        Config {
            entities: Vec::new(),
        }
    }

    pub fn single(q: TypeId) -> Self {
        Config { entities: vec![q] }
    }

    pub fn from_entities(entities: Vec<TypeId>) -> Self {
        Config { entities }
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Concatenation: the entities of `self` followed by those of `other`.
    pub fn concat(&self, other: &Config) -> Config {
        let mut entities = Vec::with_capacity(self.len() + other.len());
        entities.extend_from_slice(&self.entities);
        entities.extend_from_slice(&other.entities);
        Config { entities }
    }
}

/// A branching Markov decision process.
#[derive(Debug, Clone, PartialEq)]
pub struct Bmdp {
    /// Optional display name (from the `bmdp "..."` header of a model file).
    pub name: Option<String>,
    pub types: Vec<TypeSpec>,
    /// Starting configuration; may be empty.
    pub init: Config,
}

impl Bmdp {
    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn type_spec(&self, q: TypeId) -> &TypeSpec {
        &self.types[q.0]
    }

    pub fn type_name(&self, q: TypeId) -> &str {
        &self.types[q.0].name
    }

    pub fn num_actions(&self, q: TypeId) -> usize {
        self.types[q.0].actions.len()
    }

    pub fn action(&self, q: TypeId, a: ActionId) -> &ActionSpec {
        &self.types[q.0].actions[a.0]
    }

    pub fn action_name(&self, q: TypeId, a: ActionId) -> &str {
        &self.action(q, a).name
    }

    pub fn type_ids(&self) -> impl Iterator<Item = TypeId> {
        (0..self.types.len()).map(TypeId)
    }

    pub fn action_ids(&self, q: TypeId) -> impl Iterator<Item = ActionId> {
        (0..self.num_actions(q)).map(ActionId)
    }

    pub fn find_type(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t.name == name).map(TypeId)
    }

    pub fn find_action(&self, q: TypeId, name: &str) -> Option<ActionId> {
        self.types[q.0]
            .actions
            .iter()
            .position(|a| a.name == name)
            .map(ActionId)
    }

    /// All declared `(type, action)` pairs in declaration order.
    pub fn pairs(&self) -> Vec<(TypeId, ActionId)> {
        let mut out = Vec::new();
        for q in self.type_ids() {
            for a in self.action_ids(q) {
                out.push((q, a));
            }
        }
        out
    }

    /// Number of actions per type, in index order.
    pub fn action_counts(&self) -> Vec<usize> {
        self.types.iter().map(|t| t.actions.len()).collect()
    }

    /// Check every structural invariant and return all violations found.
    ///
    /// This is a total function: it never panics on arbitrary structured
    /// input, and an empty result means the model is well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.types.len();

        for (qi, ty) in self.types.iter().enumerate() {
            let at_type = |msg: String| Violation {
                location: format!("type {} (index {})", ty.name, qi),
                message: msg,
            };
            if ty.name.is_empty() {
                out.push(at_type("type name must be non-empty".into()));
            }
            if self.types[..qi].iter().any(|t| t.name == ty.name) {
                out.push(at_type("type name already declared".into()));
            }
            if ty.actions.is_empty() {
                out.push(at_type("type must have at least one action".into()));
            }
            for (ai, act) in ty.actions.iter().enumerate() {
                let at_action = |msg: String| Violation {
                    location: format!("type {} / action {} (index {})", ty.name, act.name, ai),
                    message: msg,
                };
                if act.name.is_empty() {
                    out.push(at_action("action name must be non-empty".into()));
                }
                if ty.actions[..ai].iter().any(|a| a.name == act.name) {
                    out.push(at_action(
                        "action name already declared for this type".into(),
                    ));
                }
                if !act.cost.is_finite() || act.cost <= 0.0 {
                    out.push(at_action(format!(
                        "cost must be strictly positive and finite, got {}",
                        act.cost
                    )));
                }
                if act.outcomes.is_empty() {
                    out.push(at_action("action must have at least one outcome".into()));
                }
                for (oi, outc) in act.outcomes.iter().enumerate() {
                    let at_outcome = |msg: String| Violation {
                        location: format!(
                            "type {} / action {} / outcome {}",
                            ty.name, act.name, oi
                        ),
                        message: msg,
                    };
                    if outc.probability.is_nan()
                        || outc.probability <= 0.0
                        || outc.probability > 1.0
                    {
                        out.push(at_outcome(format!(
                            "probability must be in (0, 1], got {}",
                            outc.probability
                        )));
                    }
                    if let Some(&bad) = outc.offspring.iter().find(|t| t.0 >= n) {
                        out.push(at_outcome(format!(
                            "offspring references undeclared type index {}",
                            bad.0
                        )));
                    }
                    if act.outcomes[..oi]
                        .iter()
                        .any(|o| o.offspring == outc.offspring)
                    {
                        out.push(at_outcome("duplicate offspring list within action".into()));
                    }
                }
                if !act.outcomes.is_empty() {
                    let sum: f64 = act.outcomes.iter().map(|o| o.probability).sum();
                    if sum.is_nan() || (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                        out.push(at_action(format!("probabilities sum to {sum}")));
                    }
                }
            }
        }
        if let Some(&bad) = self.init.entities.iter().find(|t| t.0 >= n) {
            out.push(Violation {
                location: "init".into(),
                message: format!("init references undeclared type index {}", bad.0),
            });
        }
        out
    }
}

/// A structural rule broken by a model, with the location of the offender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Rescale outcome probabilities so the stored values sum to exactly 1.
///
/// Caller guarantees the incoming sum is positive and within
/// [`PROB_SUM_TOLERANCE`] of 1. After dividing by the sum, the residual
/// left by rounding is absorbed into the largest probability.
pub fn renormalize_outcomes(outcomes: &mut [OffspringOutcome]) {
    let sum: f64 = outcomes.iter().map(|o| o.probability).sum();
    debug_assert!(sum > 0.0 && (sum - 1.0).abs() <= PROB_SUM_TOLERANCE);
    // Early return keeps the function idempotent, which is what makes
    // serialize/parse round-trips bit-stable.
    if sum == 1.0 {
        return;
    }
    for o in outcomes.iter_mut() {
        o.probability /= sum;
    }
    // Rebalance the last probability against the left-to-right prefix sum.
    // The recomputed total is then fl(s + (1 - s)), which rounds to
    // exactly 1.0: the subtraction error is at most half an ulp of
    // (1 - s) <= 1. Skipped in the degenerate case where the last
    // probability is below one ulp; the sum is then off by at most an
    // ulp, far inside the validation tolerance.
    let (last, rest) = outcomes.split_last_mut().expect("outcomes are non-empty");
    let prefix: f64 = rest.iter().map(|o| o.probability).sum();
    let balance = 1.0 - prefix;
    if balance > 0.0 {
        last.probability = balance;
    }
    debug_assert!({
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        (total - 1.0).abs() <= f64::EPSILON
    });
}

/// One extended non-negative value per type.
///
/// Entries are finite non-negative floats or `+∞`; NaN and negative
/// values are construction errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector {
    values: Vec<f64>,
}

impl ValueVector {
    pub fn zeros(n: usize) -> Self {
        ValueVector {
            values: vec![0.0; n],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        for &v in &values {
            assert!(
                !v.is_nan() && v >= 0.0,
                "value entries must be >= 0 and not NaN"
            );
        }
        ValueVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, q: TypeId) -> f64 {
        self.values[q.0]
    }

    pub fn set(&mut self, q: TypeId, v: f64) {
        assert!(
            !v.is_nan() && v >= 0.0,
            "value entries must be >= 0 and not NaN"
        );
        self.values[q.0] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest absolute difference over entries where both sides are
    /// finite; entries that are `+∞` on both sides count as equal, and a
    /// finite/infinite mismatch yields `+∞`.
    pub fn max_abs_diff(&self, other: &ValueVector) -> f64 {
        assert_eq!(self.len(), other.len());
        let mut worst = 0.0_f64;
        for (&a, &b) in self.values.iter().zip(&other.values) {
            let d = if a.is_infinite() && b.is_infinite() {
                0.0
            } else {
                (a - b).abs()
            };
            worst = worst.max(d);
        }
        worst
    }
}

/// One non-negative estimate per declared `(type, action)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    entries: Vec<Vec<f64>>,
}

impl QTable {
    /// A table shaped like `action_counts`, filled with `value`.
    pub fn with_shape(action_counts: &[usize], value: f64) -> Self {
        assert!(
            !value.is_nan() && value >= 0.0,
            "Q entries must be >= 0 and not NaN"
        );
        QTable {
            entries: action_counts.iter().map(|&k| vec![value; k]).collect(),
        }
    }

    pub fn filled(model: &Bmdp, value: f64) -> Self {
        Self::with_shape(&model.action_counts(), value)
    }

    /// Build a table entry by entry from the model's declared pairs.
    pub fn from_fn(model: &Bmdp, mut f: impl FnMut(TypeId, ActionId) -> f64) -> Self {
        let mut q = QTable::filled(model, 0.0);
        for (ty, a) in model.pairs() {
            q.set(ty, a, f(ty, a));
        }
        q
    }

    pub fn num_types(&self) -> usize {
        self.entries.len()
    }

    pub fn num_actions(&self, q: TypeId) -> usize {
        self.entries[q.0].len()
    }

    pub fn num_pairs(&self) -> usize {
        self.entries.iter().map(|r| r.len()).sum()
    }

    pub fn get(&self, q: TypeId, a: ActionId) -> f64 {
        self.entries[q.0][a.0]
    }

    pub fn set(&mut self, q: TypeId, a: ActionId, v: f64) {
        assert!(
            !v.is_nan() && v >= 0.0,
            "Q entries must be >= 0 and not NaN"
        );
        self.entries[q.0][a.0] = v;
    }

    /// Lowest-index action attaining the minimum Q-value of type `q`.
    pub fn min_action(&self, q: TypeId) -> (ActionId, f64) {
        let row = &self.entries[q.0];
        assert!(!row.is_empty(), "type {} has no actions", q.0);
        let mut best = (ActionId(0), row[0]);
        for (i, &v) in row.iter().enumerate().skip(1) {
            if v < best.1 {
                best = (ActionId(i), v);
            }
        }
        best
    }

    pub fn min_value(&self, q: TypeId) -> f64 {
        self.min_action(q).1
    }

    /// The greedy per-type minima as a value vector.
    pub fn min_per_type(&self) -> ValueVector {
        ValueVector::from_values(
            (0..self.entries.len())
                .map(|q| self.min_value(TypeId(q)))
                .collect(),
        )
    }

    /// Largest absolute entry-wise difference between two tables of the
    /// same shape.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        assert_eq!(self.entries.len(), other.entries.len());
        let mut worst = 0.0_f64;
        for (ra, rb) in self.entries.iter().zip(&other.entries) {
            assert_eq!(ra.len(), rb.len());
            for (&a, &b) in ra.iter().zip(rb) {
                let d = if a.is_infinite() && b.is_infinite() {
                    0.0
                } else {
                    (a - b).abs()
                };
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// One fixed action per type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticStrategy {
    choices: Vec<ActionId>,
}

impl StaticStrategy {
    pub fn new(choices: Vec<ActionId>) -> Self {
        StaticStrategy { choices }
    }

    /// The strategy that picks the lowest-index action everywhere.
    pub fn first_actions(model: &Bmdp) -> Self {
        StaticStrategy {
            choices: vec![ActionId(0); model.num_types()],
        }
    }

    pub fn get(&self, q: TypeId) -> ActionId {
        self.choices[q.0]
    }

    pub fn choices(&self) -> &[ActionId] {
        &self.choices
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    /// True when there is one choice per type and each choice is an
    /// action the type actually has.
    pub fn is_valid_for(&self, model: &Bmdp) -> bool {
        self.choices.len() == model.num_types()
            && model
                .type_ids()
                .all(|q| self.get(q).0 < model.num_actions(q))
    }
}
