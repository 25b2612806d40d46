//! Command implementations behind the `bmdp` binary.
//!
//! Each command takes its parsed arguments plus an output sink and returns
//! a process exit code: 0 for success, 1 for input errors, 2 for
//! non-convergence. Keeping them binary-free makes the commands directly
//! testable.

use crate::bench::{
    averaged_q, fmt_cost, format_csv, format_table, json_cost, rows_to_json, run_bench, run_trials,
};
use crate::gen::{gen_hierarchical_bmdp, gen_random_bmdp, GenParams};
use crate::suite::{embedded_suite, SuiteModel};
use bmdp_core::learner::{extract_greedy_strategy, LearnParams};
use bmdp_core::model::{ActionId, Bmdp, StaticStrategy};
use bmdp_core::parser::{parse_model, serialize_model};
use bmdp_core::rng::SimRng;
use bmdp_core::sim::{monte_carlo_estimate, run_episode, write_trace};
use bmdp_core::solver::{config_value, value_iterate, SolveParams, SolveResult, SolveStatus};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;

/// Load, parse and validate a model file; failures are printed with
/// `file:line:column`.
fn load_model(out: &mut dyn Write, path: &Path) -> Result<Bmdp, i32> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(out, "error: cannot read {}: {e}", path.display());
            return Err(EXIT_INPUT_ERROR);
        }
    };
    match parse_model(&text) {
        Ok(model) => Ok(model),
        Err(e) => {
            let _ = writeln!(out, "{}:{e}", path.display());
            Err(EXIT_INPUT_ERROR)
        }
    }
}

fn model_label(model: &Bmdp, path: &Path) -> String {
    model.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    })
}

fn print_solution(out: &mut dyn Write, model: &Bmdp, result: &SolveResult) {
    for q in model.type_ids() {
        let _ = writeln!(
            out,
            "{} {} {}",
            model.type_name(q),
            fmt_cost(result.values.get(q)),
            model.action_name(q, result.strategy.get(q)),
        );
    }
    let _ = writeln!(out, "iterations {}", result.iterations);
}

pub fn cmd_solve(out: &mut dyn Write, path: &Path, params: &SolveParams) -> i32 {
    let model = match load_model(out, path) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let result = value_iterate(&model, params);
    let _ = writeln!(
        out,
        "model {} ({} types)",
        model_label(&model, path),
        model.num_types()
    );
    print_solution(out, &model, &result);
    match result.status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::MaxIterationsReached => {
            let _ = writeln!(
                out,
                "warning: not converged after {} iterations",
                result.iterations
            );
            EXIT_NO_CONVERGENCE
        }
    }
}

fn strategy_json(model: &Bmdp, sigma: &StaticStrategy) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for q in model.type_ids() {
        map.insert(
            model.type_name(q).to_string(),
            serde_json::Value::String(model.action_name(q, sigma.get(q)).to_string()),
        );
    }
    serde_json::Value::Object(map)
}

fn values_json(model: &Bmdp, values: &bmdp_core::model::ValueVector) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for q in model.type_ids() {
        map.insert(model.type_name(q).to_string(), json_cost(values.get(q)));
    }
    serde_json::Value::Object(map)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_learn(
    out: &mut dyn Write,
    path: &Path,
    learn_params: &LearnParams,
    trials: usize,
    compare: bool,
    csv: Option<&Path>,
    json: Option<&Path>,
    solve_params: &SolveParams,
) -> i32 {
    let model = match load_model(out, path) {
        Ok(m) => m,
        Err(code) => return code,
    };
    if trials == 0 {
        let _ = writeln!(out, "error: --trials must be at least 1");
        return EXIT_INPUT_ERROR;
    }

    let summary = run_trials(&model, learn_params, trials);
    let avg_q = averaged_q(&summary, &model);
    let strategy = extract_greedy_strategy(&avg_q, learn_params.tol);

    let _ = writeln!(
        out,
        "model {} ({} types)",
        model_label(&model, path),
        model.num_types()
    );
    let _ = writeln!(out, "mean estimate {:.6}", summary.mean_estimate);
    let per_trial: Vec<String> = summary
        .estimates
        .iter()
        .map(|e| format!("{e:.6}"))
        .collect();
    let _ = writeln!(out, "per-trial estimates [{}]", per_trial.join(", "));
    let _ = writeln!(out, "avg trial time {:.3}s", summary.avg_seconds);
    let strategy_text: Vec<String> = model
        .type_ids()
        .map(|q| {
            format!(
                "{}={}",
                model.type_name(q),
                model.action_name(q, strategy.get(q))
            )
        })
        .collect();
    let _ = writeln!(out, "learned strategy {}", strategy_text.join(","));

    let exact = value_iterate(&model, solve_params);
    if compare {
        let exact_value = config_value(&exact.values, &model.init);
        let _ = writeln!(out, "exact value {}", fmt_cost(exact_value));
        if exact_value.is_finite() && exact_value > 0.0 {
            let rel = (summary.mean_estimate - exact_value).abs() / exact_value;
            let _ = writeln!(out, "relative error {rel:.6}");
        }
    }

    if let Some(csv_path) = csv {
        for (t, result) in summary.results.iter().enumerate() {
            let trial_path = suffixed_path(csv_path, &format!("_t{t}"));
            let mut body = String::from("episode,estimate\n");
            for (episode, estimate) in &result.curve {
                body.push_str(&format!("{episode},{estimate}\n"));
            }
            if let Err(e) = fs::write(&trial_path, body) {
                let _ = writeln!(out, "error: cannot write {}: {e}", trial_path.display());
                return EXIT_INPUT_ERROR;
            }
            let _ = writeln!(out, "curve written to {}", trial_path.display());
        }
    }

    if let Some(json_path) = json {
        let doc = serde_json::json!({
            "model": model_label(&model, path),
            "types": model.num_types(),
            "exact": {
                "values": values_json(&model, &exact.values),
                "strategy": strategy_json(&model, &exact.strategy),
            },
            "learned": {
                "estimate": json_cost(summary.mean_estimate),
                "trials": summary.estimates,
                "strategy": strategy_json(&model, &strategy),
            },
            "params": {
                "epsilon": learn_params.epsilon,
                "alpha": learn_params.alpha,
                "schedule": match learn_params.schedule {
                    bmdp_core::learner::Schedule::Constant => "constant",
                    bmdp_core::learner::Schedule::Harmonic => "harmonic",
                },
                "tol": learn_params.tol,
                "ep_l": learn_params.ep_l,
                "ep_n": learn_params.ep_n,
                "seed": learn_params.seed,
                "q_init": learn_params.q_init,
                "trials": trials,
            },
        });
        if let Err(e) = fs::write(json_path, serde_json::to_string_pretty(&doc).unwrap()) {
            let _ = writeln!(out, "error: cannot write {}: {e}", json_path.display());
            return EXIT_INPUT_ERROR;
        }
        let _ = writeln!(out, "report written to {}", json_path.display());
    }
    EXIT_OK
}

fn suffixed_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path.extension().map(|s| s.to_string_lossy().into_owned());
    let file = match ext {
        Some(ext) => format!("{stem}{suffix}.{ext}"),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(file)
}

/// `optimal`, or an explicit `Type=action` comma list covering every type.
fn parse_strategy_spec(
    out: &mut dyn Write,
    model: &Bmdp,
    spec: &str,
    solve_params: &SolveParams,
) -> Result<StaticStrategy, i32> {
    if spec == "optimal" {
        return Ok(value_iterate(model, solve_params).strategy);
    }
    let mut choices: Vec<Option<ActionId>> = vec![None; model.num_types()];
    for part in spec.split(',').filter(|p| !p.is_empty()) {
        let Some((ty_name, act_name)) = part.split_once('=') else {
            let _ = writeln!(
                out,
                "error: bad strategy entry `{part}`, expected Type=action"
            );
            return Err(EXIT_INPUT_ERROR);
        };
        let Some(q) = model.find_type(ty_name.trim()) else {
            let _ = writeln!(out, "error: unknown type `{}` in strategy", ty_name.trim());
            return Err(EXIT_INPUT_ERROR);
        };
        let Some(a) = model.find_action(q, act_name.trim()) else {
            let _ = writeln!(
                out,
                "error: type `{}` has no action `{}`",
                ty_name.trim(),
                act_name.trim()
            );
            return Err(EXIT_INPUT_ERROR);
        };
        choices[q.0] = Some(a);
    }
    for q in model.type_ids() {
        if choices[q.0].is_none() {
            let _ = writeln!(
                out,
                "error: missing strategy for type {}",
                model.type_name(q)
            );
            return Err(EXIT_INPUT_ERROR);
        }
    }
    Ok(StaticStrategy::new(
        choices.into_iter().map(Option::unwrap).collect(),
    ))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    out: &mut dyn Write,
    path: &Path,
    strategy_spec: &str,
    episodes: usize,
    max_steps: usize,
    seed: u64,
    trace: Option<&Path>,
) -> i32 {
    let model = match load_model(out, path) {
        Ok(m) => m,
        Err(code) => return code,
    };
    if episodes == 0 {
        let _ = writeln!(out, "error: need at least one episode");
        return EXIT_INPUT_ERROR;
    }
    let sigma = match parse_strategy_spec(out, &model, strategy_spec, &SolveParams::default()) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let rng = SimRng::from_seed(seed);

    if let Some(trace_path) = trace {
        let mut episode_rng = rng.substream(0);
        let episode = run_episode(
            &model,
            &model.init,
            &sigma,
            max_steps,
            &mut episode_rng,
            true,
        );
        let mut buf = Vec::new();
        if write_trace(
            &mut buf,
            &model,
            episode.trace.as_deref().unwrap_or_default(),
        )
        .is_ok()
        {
            if let Err(e) = fs::write(trace_path, buf) {
                let _ = writeln!(out, "error: cannot write {}: {e}", trace_path.display());
                return EXIT_INPUT_ERROR;
            }
            let _ = writeln!(
                out,
                "trace of episode 0 written to {}",
                trace_path.display()
            );
        }
    }

    let est = monte_carlo_estimate(&model, &model.init, &sigma, episodes, max_steps, &rng);
    let _ = writeln!(
        out,
        "model {} ({} types)",
        model_label(&model, path),
        model.num_types()
    );
    let strategy_text: Vec<String> = model
        .type_ids()
        .map(|q| {
            format!(
                "{}={}",
                model.type_name(q),
                model.action_name(q, sigma.get(q))
            )
        })
        .collect();
    let _ = writeln!(out, "strategy {}", strategy_text.join(","));
    let _ = writeln!(
        out,
        "episodes {episodes}  max-steps {max_steps}  seed {seed}"
    );
    let _ = writeln!(out, "mean {:.6}", est.mean);
    let _ = writeln!(out, "stderr {:.6}", est.stderr);
    let _ = writeln!(out, "truncated_fraction {:.6}", est.truncated_fraction);
    EXIT_OK
}

pub fn cmd_gen(
    out: &mut dyn Write,
    params: &GenParams,
    hierarchical: bool,
    output: Option<&Path>,
) -> i32 {
    let mut model = if hierarchical {
        gen_hierarchical_bmdp(params)
    } else {
        gen_random_bmdp(params)
    };
    model.name = Some(format!("rand{}", params.seed));
    let text = serialize_model(&model);
    match output {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                let _ = writeln!(out, "error: cannot write {}: {e}", path.display());
                return EXIT_INPUT_ERROR;
            }
            let _ = writeln!(out, "model written to {}", path.display());
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    EXIT_OK
}

pub fn cmd_bench(
    out: &mut dyn Write,
    suite_dir: Option<&Path>,
    learn_params: &LearnParams,
    solve_params: &SolveParams,
    trials: usize,
    csv: Option<&Path>,
    json: Option<&Path>,
) -> i32 {
    if trials == 0 {
        let _ = writeln!(out, "error: --trials must be at least 1");
        return EXIT_INPUT_ERROR;
    }
    let suite = match suite_dir {
        None => embedded_suite(),
        Some(dir) => {
            let mut entries = match fs::read_dir(dir) {
                Ok(e) => e
                    .filter_map(|entry| entry.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|e| e == "bmdp"))
                    .collect::<Vec<_>>(),
                Err(e) => {
                    let _ = writeln!(out, "error: cannot read {}: {e}", dir.display());
                    return EXIT_INPUT_ERROR;
                }
            };
            entries.sort();
            let mut suite = Vec::new();
            for path in entries {
                match fs::read_to_string(&path)
                    .map_err(|e| e.to_string())
                    .and_then(|text| parse_model(&text).map_err(|e| format!("{e}")))
                {
                    Ok(model) => suite.push(SuiteModel {
                        name: model_label(&model, &path),
                        model,
                        learn: true,
                    }),
                    Err(e) => {
                        let _ = writeln!(out, "skipping {}: {e}", path.display());
                    }
                }
            }
            suite
        }
    };

    let rows = run_bench(&suite, learn_params, solve_params, trials);
    let _ = out.write_all(format_table(&rows).as_bytes());
    if let Some(path) = csv {
        if let Err(e) = fs::write(path, format_csv(&rows)) {
            let _ = writeln!(out, "error: cannot write {}: {e}", path.display());
            return EXIT_INPUT_ERROR;
        }
        let _ = writeln!(out, "csv written to {}", path.display());
    }
    if let Some(path) = json {
        let doc = serde_json::to_string_pretty(&rows_to_json(&rows)).unwrap();
        if let Err(e) = fs::write(path, doc) {
            let _ = writeln!(out, "error: cannot write {}: {e}", path.display());
            return EXIT_INPUT_ERROR;
        }
        let _ = writeln!(out, "json written to {}", path.display());
    }
    EXIT_OK
}
