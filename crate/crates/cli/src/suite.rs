//! The embedded benchmark suite: the two cloud models, the divergent
//! interrupt variant, and five seeded random models.

use crate::gen::{gen_random_bmdp, GenParams};
use bmdp_core::model::Bmdp;
use bmdp_core::parser::parse_model;

/// Main task splits into three subtasks or runs whole; subtasks run on a
/// reliable or a retrying server.
pub const CLOUD1: &str = r#"bmdp "cloud1"
type T { action a1 cost 1.0 { 1.0: S S S; } action a2 cost 8.0 { 1.0: ; } }
type S { action a1 cost 1.6 { 1.0: ; } action a2 cost 1.0 { 0.4: S; 0.6: ; } }
init T;
"#;

/// The reliable server may be interrupted by a high-priority task `H`,
/// which may itself be interrupted by two more.
pub const CLOUD2: &str = r#"bmdp "cloud2"
type T { action a1 cost 1.0 { 1.0: S S S; } action a2 cost 8.0 { 1.0: ; } }
type S { action a1 cost 1.6 { 0.3: H; 0.7: ; } action a2 cost 1.0 { 0.4: S; 0.6: ; } }
type H { action a1 cost 0.1 { 0.3: H H; 0.7: ; } }
init T;
"#;

/// Interrupt probability raised to 0.5: the expected lifetime of `H`
/// becomes infinite.
pub const CLOUD2_P50: &str = r#"bmdp "cloud2_p50"
type T { action a1 cost 1.0 { 1.0: S S S; } action a2 cost 8.0 { 1.0: ; } }
type S { action a1 cost 1.6 { 0.5: H; 0.5: ; } action a2 cost 1.0 { 0.4: S; 0.6: ; } }
type H { action a1 cost 0.1 { 0.5: H H; 0.5: ; } }
init T;
"#;

/// Seeds of the embedded random models, named `rand<seed>`.
pub const RAND_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

pub struct SuiteModel {
    pub name: String,
    pub model: Bmdp,
    /// Whether the bench runs the learner on this model. Models with an
    /// infinite-valued type are excluded: their Q-tables diverge under
    /// any finite learning budget.
    pub learn: bool,
}

fn embedded(name: &str, text: &str, learn: bool) -> SuiteModel {
    SuiteModel {
        name: name.to_string(),
        model: parse_model(text).expect("embedded model must parse"),
        learn,
    }
}

/// Generator settings for one embedded random model.
pub fn rand_model_params(seed: u64) -> GenParams {
    GenParams {
        // vary the size a little with the seed
        n_types: 3 + (seed as usize % 4),
        seed,
        ..Default::default()
    }
}

pub fn embedded_suite() -> Vec<SuiteModel> {
    let mut suite = vec![
        embedded("cloud1", CLOUD1, true),
        embedded("cloud2", CLOUD2, true),
        embedded("cloud2_p50", CLOUD2_P50, false),
    ];
    for seed in RAND_SEEDS {
        let mut model = gen_random_bmdp(&rand_model_params(seed));
        model.name = Some(format!("rand{seed}"));
        suite.push(SuiteModel {
            name: format!("rand{seed}"),
            model,
            learn: true,
        });
    }
    suite
}
