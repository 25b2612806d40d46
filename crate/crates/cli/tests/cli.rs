//! Command-level tests: exit codes, output shapes, and emitted files.

use bmdp_cli::commands::{cmd_bench, cmd_gen, cmd_learn, cmd_simulate, cmd_solve};
use bmdp_cli::gen::GenParams;
use bmdp_cli::suite::{CLOUD1, CLOUD2, CLOUD2_P50};
use bmdp_core::learner::LearnParams;
use bmdp_core::solver::SolveParams;
use std::fs;
use std::path::{Path, PathBuf};

fn write_model(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run<F: FnOnce(&mut Vec<u8>) -> i32>(f: F) -> (i32, String) {
    let mut out = Vec::new();
    let code = f(&mut out);
    (code, String::from_utf8(out).unwrap())
}

#[test]
fn solve_reports_values_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(dir.path(), "cloud1.bmdp", CLOUD1);
    let (code, out) = run(|w| cmd_solve(w, &path, &SolveParams::default()));
    assert_eq!(code, 0);
    assert!(out.contains("T 5.800000 a1"), "{out}");
    assert!(out.contains("S 1.600000 a1"), "{out}");
}

#[test]
fn solve_prints_inf_for_divergent_types() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(dir.path(), "cloud2_p50.bmdp", CLOUD2_P50);
    let params = SolveParams {
        tolerance: 1e-9,
        max_iterations: 300_000,
        v_max: 1e4,
    };
    let (code, out) = run(|w| cmd_solve(w, &path, &params));
    assert_eq!(code, 0);
    assert!(out.contains("H inf"), "{out}");
    assert!(out.contains("S 1.666667 a2"), "{out}");
    assert!(out.contains("T 6.000000 a1"), "{out}");
}

#[test]
fn solve_exit_codes_distinguish_parse_and_convergence_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_model(
        dir.path(),
        "bad.bmdp",
        "type T { action a cost 1.0 { 1.0: X; } } init T;",
    );
    let (code, out) = run(|w| cmd_solve(w, &bad, &SolveParams::default()));
    assert_eq!(code, 1);
    assert!(out.contains("1:35"), "span missing: {out}");
    assert!(out.contains("unknown type"), "{out}");

    // critical self-renewal never settles and cannot pin under this budget
    let critical = write_model(
        dir.path(),
        "critical.bmdp",
        "type H { action a cost 0.1 { 0.5: H H; 0.5: ; } } init H;",
    );
    let params = SolveParams {
        tolerance: 1e-9,
        max_iterations: 50,
        v_max: 1e12,
    };
    let (code, out) = run(|w| cmd_solve(w, &critical, &params));
    assert_eq!(code, 2);
    assert!(out.contains("not converged"), "{out}");

    let (code, _) =
        run(|w| cmd_solve(w, &dir.path().join("missing.bmdp"), &SolveParams::default()));
    assert_eq!(code, 1);
}

#[test]
fn learn_emits_curves_and_stable_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(dir.path(), "cloud1.bmdp", CLOUD1);
    let csv = dir.path().join("curve.csv");
    let json = dir.path().join("report.json");
    let params = LearnParams {
        ep_n: 1000,
        seed: 5,
        ..Default::default()
    };
    let (code, out) = run(|w| {
        cmd_learn(
            w,
            &path,
            &params,
            2,
            true,
            Some(&csv),
            Some(&json),
            &SolveParams::default(),
        )
    });
    assert_eq!(code, 0);
    assert!(out.contains("mean estimate"), "{out}");
    assert!(out.contains("relative error"), "{out}");

    for t in 0..2 {
        let trial = dir.path().join(format!("curve_t{t}.csv"));
        let body = fs::read_to_string(&trial).unwrap();
        assert!(body.starts_with("episode,estimate\n"));
        assert!(body.lines().count() > 100);
    }

    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["model"], "cloud1");
    assert_eq!(doc["types"], 2);
    assert_eq!(doc["exact"]["strategy"]["T"], "a1");
    assert!(doc["exact"]["values"]["S"].is_number());
    assert!(doc["learned"]["estimate"].is_number());
    assert_eq!(doc["learned"]["trials"].as_array().unwrap().len(), 2);
    assert!(doc["learned"]["strategy"].is_object());
    assert_eq!(doc["params"]["ep_n"], 1000);
}

#[test]
fn learn_runs_even_when_undertrained() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(dir.path(), "cloud1.bmdp", CLOUD1);
    let params = LearnParams {
        ep_n: 1,
        seed: 0,
        ..Default::default()
    };
    let (code, out) = run(|w| {
        cmd_learn(
            w,
            &path,
            &params,
            1,
            false,
            None,
            None,
            &SolveParams::default(),
        )
    });
    assert_eq!(code, 0);
    assert!(out.contains("mean estimate"), "{out}");
}

#[test]
fn simulate_validates_strategy_specs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(dir.path(), "cloud1.bmdp", CLOUD1);

    let (code, out) = run(|w| cmd_simulate(w, &path, "T=a2", 100, 100, 1, None));
    assert_eq!(code, 1);
    assert!(out.contains("missing strategy for type S"), "{out}");

    let (code, out) = run(|w| cmd_simulate(w, &path, "T=a1,S=a9", 100, 100, 1, None));
    assert_eq!(code, 1);
    assert!(out.contains("no action `a9`"), "{out}");

    let (code, out) = run(|w| cmd_simulate(w, &path, "optimal", 2000, 100, 1, None));
    assert_eq!(code, 0);
    assert!(out.contains("strategy T=a1,S=a1"), "{out}");
    let mean: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("mean "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((mean - 5.8).abs() < 1e-9, "{mean}");
}

#[test]
fn simulate_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_model(dir.path(), "cloud1.bmdp", CLOUD1);
    let trace = dir.path().join("trace.tsv");
    let (code, _) = run(|w| cmd_simulate(w, &path, "T=a1,S=a1", 10, 100, 3, Some(&trace)));
    assert_eq!(code, 0);
    let body = fs::read_to_string(&trace).unwrap();
    let first = body.lines().next().unwrap();
    assert_eq!(first.split('\t').count(), 6);
    assert!(first.starts_with("1\t1\tT\ta1\t1\t3"), "{first}");
}

#[test]
fn gen_writes_valid_deterministic_models() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.bmdp");
    let out_b = dir.path().join("b.bmdp");
    let params = GenParams {
        seed: 7,
        ..Default::default()
    };
    let (code, _) = run(|w| cmd_gen(w, &params, false, Some(&out_a)));
    assert_eq!(code, 0);
    let (code, _) = run(|w| cmd_gen(w, &params, false, Some(&out_b)));
    assert_eq!(code, 0);
    assert_eq!(
        fs::read_to_string(&out_a).unwrap(),
        fs::read_to_string(&out_b).unwrap()
    );

    let model = bmdp_core::parser::parse_model(&fs::read_to_string(&out_a).unwrap()).unwrap();
    assert_eq!(model.validate(), Vec::new());
}

#[test]
fn bench_runs_directories_and_handles_empty_ones() {
    let dir = tempfile::tempdir().unwrap();
    write_model(dir.path(), "cloud1.bmdp", CLOUD1);
    write_model(dir.path(), "cloud2.bmdp", CLOUD2);
    write_model(dir.path(), "broken.bmdp", "type T {");
    let csv = dir.path().join("rows.csv");
    let params = LearnParams {
        ep_n: 300,
        seed: 1,
        ..Default::default()
    };
    let (code, out) = run(|w| {
        cmd_bench(
            w,
            Some(dir.path()),
            &params,
            &SolveParams::default(),
            1,
            Some(&csv),
            None,
        )
    });
    assert_eq!(code, 0);
    assert!(out.contains("skipping"), "{out}");
    assert!(out.contains("cloud1"), "{out}");
    let body = fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().count(), 3, "{body}"); // header + 2 models

    let empty = tempfile::tempdir().unwrap();
    let (code, out) = run(|w| {
        cmd_bench(
            w,
            Some(empty.path()),
            &params,
            &SolveParams::default(),
            1,
            None,
            None,
        )
    });
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1, "{out}"); // header only
}

#[test]
fn bench_embedded_suite_marks_the_divergent_model() {
    let params = LearnParams {
        ep_n: 100,
        seed: 2,
        ..Default::default()
    };
    let (code, out) = run(|w| cmd_bench(w, None, &params, &SolveParams::default(), 1, None, None));
    assert_eq!(code, 0);
    let p50_line = out.lines().find(|l| l.starts_with("cloud2_p50")).unwrap();
    assert!(p50_line.contains("inf/diverged"), "{p50_line}");
    assert!(out.lines().any(|l| l.starts_with("rand1")), "{out}");
}
