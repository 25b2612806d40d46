//! Branching Markov decision processes: models, exact fixed-point solving,
//! simulation, and tabular Q-learning.
//!
//! A BMDP describes a population of typed entities. At every step one live
//! entity is expanded: the controller picks one of the actions available to
//! the entity's type, pays a strictly positive cost, and the entity is
//! replaced in place by a random finite list of offspring entities. The
//! empty configuration is absorbing, and the quantity of interest is the
//! minimal expected total cost until extinction.
//!
//! Crate layout:
//! - [`model`]: domain types and structural validation.
//! - [`parser`]: the `.bmdp` text format (parsing and canonical output).
//! - [`solver`]: exact per-type optimal values by fixed-point iteration,
//!   static-strategy evaluation, and a one-pass oracle for acyclic models.
//! - [`sim`]: seeded execution of the induced process.
//! - [`learner`]: model-free Q-learning plus the deterministic
//!   expected-update iteration used to check its convergence behaviour.

pub mod learner;
pub mod model;
pub mod parser;
pub mod rng;
pub mod sim;
pub mod solver;

pub use model::{
    ActionId, ActionSpec, Bmdp, Config, OffspringOutcome, QTable, StaticStrategy, TypeId, TypeSpec,
    ValueVector, Violation,
};
pub use parser::{parse_model, serialize_model, ParseError, ParseErrorKind, SourceSpan};
pub use rng::SimRng;

#[cfg(test)]
mod testutil;
