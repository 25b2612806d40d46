//! Frontend pieces for the `bmdp` binary: the random-model generator, the
//! embedded benchmark suite, benchmark execution, and the command
//! implementations.

pub mod bench;
pub mod commands;
pub mod gen;
pub mod suite;

pub use gen::{gen_hierarchical_bmdp, gen_random_bmdp, GenParams};
