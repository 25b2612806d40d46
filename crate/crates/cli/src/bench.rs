//! Benchmark runs: exact value, multi-trial learned estimate, timing.

use crate::suite::SuiteModel;
use bmdp_core::learner::{run_learning, LearnParams};
use bmdp_core::model::Bmdp;
use bmdp_core::rng::derive_seed;
use bmdp_core::solver::{
    config_value, value_iterate, ExpectedOffspringMatrix, SolveParams, SolveStatus,
};
use std::time::Instant;

/// One line of the benchmark table.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub name: String,
    pub types: usize,
    /// Exact optimal cost of the initial configuration (may be `+∞`).
    pub optimal_cost: f64,
    /// Mean learned estimate over the trials; absent when learning was
    /// skipped or failed.
    pub estimated_cost: Option<f64>,
    /// Average wall-clock seconds per learning trial.
    pub time_seconds: f64,
    pub ep_l: usize,
    pub ep_n: usize,
    /// Why a row has no estimate, or other per-row incidents.
    pub note: Option<String>,
}

/// Outcome of learning one model over several trials.
pub struct TrialSummary {
    pub estimates: Vec<f64>,
    pub mean_estimate: f64,
    pub avg_seconds: f64,
    pub results: Vec<bmdp_core::learner::LearnResult>,
}

/// Run `trials` independently seeded learning runs (trial `t` uses a seed
/// derived from `params.seed` and `t`).
pub fn run_trials(model: &Bmdp, params: &LearnParams, trials: usize) -> TrialSummary {
    assert!(trials >= 1, "need at least one trial");
    let mut results = Vec::with_capacity(trials);
    let mut seconds = 0.0;
    for t in 0..trials {
        let trial_params = LearnParams {
            seed: derive_seed(params.seed, t as u64),
            ..params.clone()
        };
        let start = Instant::now();
        results.push(run_learning(model, &trial_params));
        seconds += start.elapsed().as_secs_f64();
    }
    let estimates: Vec<f64> = results.iter().map(|r| r.estimate).collect();
    let mean_estimate = estimates.iter().sum::<f64>() / trials as f64;
    TrialSummary {
        estimates,
        mean_estimate,
        avg_seconds: seconds / trials as f64,
        results,
    }
}

/// Q-table averaged over trials; the greedy strategy of the average is the
/// reported learned strategy.
pub fn averaged_q(summary: &TrialSummary, model: &Bmdp) -> bmdp_core::model::QTable {
    let n = summary.results.len() as f64;
    bmdp_core::model::QTable::from_fn(model, |ty, a| {
        summary.results.iter().map(|r| r.q.get(ty, a)).sum::<f64>() / n
    })
}

/// Solve and (where sensible) learn every suite model.
///
/// Models with an infinite-valued type are reported but not learned;
/// models that fail to solve within the iteration budget are marked in
/// the row note and the suite continues.
pub fn run_bench(
    suite: &[SuiteModel],
    learn_params: &LearnParams,
    solve_params: &SolveParams,
    trials: usize,
) -> Vec<BenchRow> {
    suite
        .iter()
        .map(|entry| {
            let exact = value_iterate(&entry.model, solve_params);
            let optimal_cost = config_value(&exact.values, &entry.model.init);
            // Divergence shows up either as a pinned component or, for
            // exactly-critical models whose iterates climb too slowly to
            // pin, as non-convergence with a critical extracted strategy.
            let pinned = exact.values.values().iter().any(|v| v.is_infinite());
            let divergent = pinned
                || (exact.status == SolveStatus::MaxIterationsReached
                    && ExpectedOffspringMatrix::for_strategy(&entry.model, &exact.strategy)
                        .spectral_radius()
                        >= 1.0 - 1e-9);
            let mut note = None;
            if divergent {
                note = Some("inf/diverged".to_string());
            } else if exact.status == SolveStatus::MaxIterationsReached {
                note = Some("exact solve did not converge".to_string());
            }

            if !entry.learn || divergent {
                if note.is_none() {
                    note = Some("learning skipped".to_string());
                }
                return BenchRow {
                    name: entry.name.clone(),
                    types: entry.model.num_types(),
                    optimal_cost,
                    estimated_cost: None,
                    time_seconds: 0.0,
                    ep_l: learn_params.ep_l,
                    ep_n: learn_params.ep_n,
                    note,
                };
            }

            let summary = run_trials(&entry.model, learn_params, trials);
            BenchRow {
                name: entry.name.clone(),
                types: entry.model.num_types(),
                optimal_cost,
                estimated_cost: Some(summary.mean_estimate),
                time_seconds: summary.avg_seconds,
                ep_l: learn_params.ep_l,
                ep_n: learn_params.ep_n,
                note,
            }
        })
        .collect()
}

pub fn fmt_cost(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

/// Render rows as an aligned text table.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>6} {:>14} {:>16} {:>12} {:>6} {:>7}  {}\n",
        "name", "types", "optimal cost", "estimated cost", "time (avg.)", "ep-l", "ep-n", "note"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>6} {:>14} {:>16} {:>12.3} {:>6} {:>7}  {}\n",
            r.name,
            r.types,
            fmt_cost(r.optimal_cost),
            r.estimated_cost
                .map(fmt_cost)
                .unwrap_or_else(|| "-".to_string()),
            r.time_seconds,
            r.ep_l,
            r.ep_n,
            r.note.as_deref().unwrap_or(""),
        ));
    }
    out
}

/// CSV rendering, one row per model.
pub fn format_csv(rows: &[BenchRow]) -> String {
    let mut out =
        String::from("name,types,optimal_cost,estimated_cost,time_avg_seconds,ep_l,ep_n,note\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.name,
            r.types,
            fmt_cost(r.optimal_cost),
            r.estimated_cost.map(fmt_cost).unwrap_or_default(),
            r.time_seconds,
            r.ep_l,
            r.ep_n,
            r.note.as_deref().unwrap_or(""),
        ));
    }
    out
}

pub fn rows_to_json(rows: &[BenchRow]) -> serde_json::Value {
    serde_json::Value::Array(
        rows.iter()
            .map(|r| {
                serde_json::json!({
                    "name": r.name,
                    "types": r.types,
                    "optimal_cost": json_cost(r.optimal_cost),
                    "estimated_cost": r.estimated_cost.map(json_cost),
                    "time_avg_seconds": r.time_seconds,
                    "ep_l": r.ep_l,
                    "ep_n": r.ep_n,
                    "note": r.note,
                })
            })
            .collect(),
    )
}

/// JSON has no infinity literal; infinite costs serialize as the string
/// `"inf"`.
pub fn json_cost(v: f64) -> serde_json::Value {
    if v.is_infinite() {
        serde_json::Value::String("inf".to_string())
    } else {
        serde_json::json!(v)
    }
}
