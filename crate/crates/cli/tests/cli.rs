use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmshap_core::fixtures::{synthetic_dataset, FixtureShape};
use mmshap_core::io::{attribution_path, read_json, write_json};
use mmshap_core::{AttributionResult, Dataset, Estimator, VqaTuple};

fn mmshap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmshap")).args(args).output().expect("spawn mmshap")
}

fn ok(args: &[&str]) -> Output {
    let out = mmshap(args);
    assert!(out.status.success(), "mmshap {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_shape() -> FixtureShape {
    FixtureShape {
        frames: 3,
        question_words: 3,
        choice_words: (1, 2),
        n_choices: 3,
        question_types: vec!["what".into(), "why".into()],
    }
}

fn write_dataset(dir: &Path, ds: &Dataset) -> PathBuf {
    let path = dir.join("data.json");
    std::fs::write(&path, ds.to_json()).unwrap();
    path
}

fn read_attr(out: &Path, id: &str) -> AttributionResult {
    read_json(&attribution_path(&out.join("attributions"), id)).unwrap()
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mmshap(&["attribute", "--dataset", "/nonexistent.json", "--adapter", "synthetic:additive", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), &synthetic_dataset("d", 2, 1, &tiny_shape()));
    let out_dir = tmp.path().join("out");
    // no adapter
    assert_eq!(mmshap(&["attribute", "--dataset", s(&data), "--out", s(&out_dir)]).status.code(), Some(2));
    // unknown tuple
    let args = ["attribute", "--dataset", s(&data), "--adapter", "synthetic:additive", "--tuple", "nope", "--out", s(&out_dir)];
    assert_eq!(mmshap(&args).status.code(), Some(2));
    // unknown flag
    assert_eq!(mmshap(&["attribute", "--bogus"]).status.code(), Some(2));
    // exact past the cap
    std::fs::create_dir_all(&out_dir).unwrap();
    let big = write_dataset(&out_dir, &synthetic_dataset("b", 1, 1, &FixtureShape::small()));
    let out = mmshap(&["attribute", "--exact", "--dataset", s(&big), "--adapter", "synthetic:additive", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn attribute_resumes_and_force_recomputes() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset("d", 3, 2, &tiny_shape());
    let data = write_dataset(tmp.path(), &ds);
    let out = tmp.path().join("out");
    let run = |seed: &str, force: bool| {
        let mut args = vec!["attribute", "--dataset", s(&data), "--adapter", "synthetic:interaction:1", "--iterations", "300", "--seed", seed, "--out", s(&out)];
        if force {
            args.push("--force");
        }
        ok(&args);
    };
    run("1", false);
    let first = read_attr(&out, &ds.tuples[0].tuple_id);
    assert_eq!(first.seed, 1);
    assert_eq!(first.estimator, Estimator::MonteCarlo);
    run("2", false);
    assert_eq!(read_attr(&out, &ds.tuples[0].tuple_id), first);
    run("2", true);
    assert_eq!(read_attr(&out, &ds.tuples[0].tuple_id).seed, 2);
    assert!(out.join("attribute.manifest.json").is_file());
}

#[test]
fn exact_ignores_the_seed_and_sampling_follows_it() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset("d", 1, 3, &tiny_shape());
    let data = write_dataset(tmp.path(), &ds);
    let id = &ds.tuples[0].tuple_id;
    let attribute = |dir: &str, seed: &str, exact: bool| {
        let out = tmp.path().join(dir);
        let mut args = vec!["attribute", "--dataset", s(&data), "--adapter", "synthetic:interaction:5", "--iterations", "200", "--no-antithetic", "--seed", seed, "--out", s(&out)];
        if exact {
            args.push("--exact");
        }
        ok(&args);
        read_attr(&out, id)
    };
    let (e1, e2) = (attribute("e1", "1", true), attribute("e2", "2", true));
    assert_eq!(e1.estimator, Estimator::Exact);
    assert_eq!(e1.values, e2.values);
    let (m1, m2) = (attribute("m1", "1", false), attribute("m2", "2", false));
    assert_ne!(m1.values, m2.values);
    assert_eq!(m1.values, attribute("m3", "1", false).values);
}

/// One tuple with four features: a frame, a question word and two
/// one-word answers.
fn four_feature_case(dir: &Path, values: &[f64]) -> (PathBuf, PathBuf) {
    let tuple = VqaTuple {
        tuple_id: "q1".into(),
        frames: vec!["f.jpg".into()],
        question_elements: vec!["what".into()],
        choices: vec![vec!["cup".into()], vec!["plate".into()]],
        ground_truth: 0,
        question_type: None,
    };
    let attr = AttributionResult {
        tuple_id: "q1".into(),
        estimator: Estimator::Exact,
        iterations: 0,
        seed: 0,
        evaluations: 16,
        layout: tuple.layout(),
        values: values.iter().map(|v| vec![*v, -v]).collect(),
        reproducible: true,
    };
    let data = write_dataset(dir, &Dataset { name: "four".into(), tuples: vec![tuple] });
    let attrs = dir.join("attrs");
    write_json(&attribution_path(&attrs, "q1"), &attr).unwrap();
    (data, attrs)
}

#[test]
fn heatmap_rows_are_normalized_and_truncated() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, attrs) = four_feature_case(tmp.path(), &[1.0, -2.0, 0.0, 0.0]);
    let out = tmp.path().join("out");
    ok(&["heatmap", "--dataset", s(&data), "--attributions", s(&attrs), "--out", s(&out)]);
    assert_eq!(std::fs::read_to_string(out.join("heatmap.csv")).unwrap(), "0.5,-1,0,0\n");
    assert!(out.join("heatmap.png").is_file());
    ok(&["heatmap", "--dataset", s(&data), "--attributions", s(&attrs), "--truncate-to", "2", "--out", s(&out)]);
    assert_eq!(std::fs::read_to_string(out.join("heatmap.csv")).unwrap(), "0.5,-1\n");
}

#[test]
fn word_report_and_rank_correlation() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, attrs) = four_feature_case(tmp.path(), &[1.0, -2.0, 0.5, 0.25]);
    let out = tmp.path().join("out");
    ok(&["word-report", "--dataset", s(&data), "--attributions", s(&attrs), "--out", s(&out)]);
    let words = std::fs::read_to_string(out.join("words.csv")).unwrap();
    assert!(words.lines().any(|l| l.starts_with("what,")), "{words}");
    assert!(words.lines().any(|l| l.starts_with("cup,")), "{words}");

    // A single frame ranks trivially; two frames give a defined correlation.
    let ds = synthetic_dataset("d", 2, 4, &tiny_shape());
    let data = write_dataset(tmp.path(), &ds);
    let run = tmp.path().join("run");
    ok(&["attribute", "--dataset", s(&data), "--adapter", "synthetic:additive:3", "--exact", "--out", s(&run)]);
    let rankings = tmp.path().join("rankings.json");
    let body = serde_json::json!({ ds.tuples[0].tuple_id.clone(): [0, 1, 2], ds.tuples[1].tuple_id.clone(): [2, 1, 0] });
    std::fs::write(&rankings, body.to_string()).unwrap();
    ok(&["rank-corr", "--dataset", s(&data), "--rankings", s(&rankings), "--out", s(&run)]);
    let csv = std::fs::read_to_string(run.join("rank_corr.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tuple_id,spearman");
    assert_eq!(lines.len(), 4, "{csv}");
    assert!(lines[3].starts_with("mean,"));

    std::fs::write(&rankings, r#"{"ghost": [0, 1, 2]}"#).unwrap();
    assert!(!mmshap(&["rank-corr", "--dataset", s(&data), "--rankings", s(&rankings), "--out", s(&run)]).status.success());
}

#[test]
fn experiment_manifest_runs_the_mask_table() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset("d", 4, 6, &tiny_shape());
    write_dataset(tmp.path(), &ds);
    let manifest = tmp.path().join("exp.json");
    std::fs::write(
        &manifest,
        r#"{"dataset": "data.json", "adapter": "synthetic:text_biased:2", "output_dir": "exp-out"}"#,
    )
    .unwrap();
    ok(&["experiment", "--manifest", s(&manifest)]);
    let csv = std::fs::read_to_string(tmp.path().join("exp-out/masking.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5, "{csv}");
    assert!(tmp.path().join("exp-out/experiment_summary.json").is_file());

    std::fs::write(&manifest, r#"{"dataset": "data.json", "colour": "red"}"#).unwrap();
    assert!(!mmshap(&["experiment", "--manifest", s(&manifest)]).status.success());
}

#[test]
fn sign_masks_without_attributions_name_the_missing_tuples() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset("d", 2, 6, &tiny_shape());
    let data = write_dataset(tmp.path(), &ds);
    let out = mmshap(&["experiment", "--dataset", s(&data), "--adapter", "synthetic:additive", "--mask", "neg:gt", "--out", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for t in &ds.tuples {
        assert!(err.contains(&t.tuple_id), "{err}");
    }
}

#[test]
fn replace_answers_writes_a_valid_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset("d", 6, 7, &tiny_shape());
    let data = write_dataset(tmp.path(), &ds);
    let out = tmp.path().join("out");
    ok(&["replace-answers", "--dataset", s(&data), "--mode", "new-2", "--type-compat", "--seed", "3", "--out", s(&out)]);
    let written: Vec<PathBuf> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json") && !s(p).ends_with(".manifest.json"))
        .collect();
    assert_eq!(written.len(), 1, "{written:?}");
    let replaced = Dataset::load(&written[0]).unwrap();
    for (before, after) in ds.tuples.iter().zip(&replaced.tuples) {
        assert_eq!(after.n_choices(), before.n_choices() + 2);
        assert_eq!(after.ground_truth_text(), before.ground_truth_text());
    }
    assert_eq!(mmshap(&["replace-answers", "--dataset", s(&data), "--mode", "hard", "--out", s(&out)]).status.code(), Some(2));
}

#[test]
fn ablation_writes_one_row_per_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), &synthetic_dataset("d", 1, 8, &tiny_shape()));
    let out = tmp.path().join("out");
    ok(&["ablate-iterations", "--dataset", s(&data), "--adapter", "synthetic:interaction:2", "--grid", "50,400", "--reference", "exact", "--seeds", "3", "--no-antithetic", "--out", s(&out)]);
    let csv = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    let rows: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), 2, "{csv}");
    assert!(rows[1] < rows[0], "{csv}");
}

#[test]
fn adapter_failure_leaves_a_partial_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    let w = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
    let tuple = VqaTuple {
        tuple_id: "t0".into(),
        frames: vec!["f0.jpg".into(), "f1.jpg".into()],
        question_elements: w("what happens"),
        choices: vec![w("a cup"), w("door"), w("bowl")],
        ground_truth: 1,
        question_type: None,
    };
    let m = tuple.layout().len();
    let data = write_dataset(tmp.path(), &Dataset { name: "one".into(), tuples: vec![tuple] });
    let script = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/fake_adapter.py");
    let adapter = format!("exec:python3 {} 3 {m} fatal", script.display());
    let out = tmp.path().join("out");
    let res = mmshap(&["attribute", "--dataset", s(&data), "--adapter", &adapter, "--iterations", "4000", "--no-cache", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
    let partial: AttributionResult = read_json(&out.join("attributions/t0.partial.json")).unwrap();
    assert_eq!(partial.tuple_id, "t0");
    assert!(partial.iterations < 4000);
    assert!(!out.join("attributions/t0.json").exists());
    assert!(out.join("attribute.manifest.json").is_file());
}

#[test]
fn metrics_tables_cover_both_bases() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_dataset(tmp.path(), &synthetic_dataset("d", 3, 9, &tiny_shape()));
    let out = tmp.path().join("out");
    ok(&["attribute", "--dataset", s(&data), "--adapter", "synthetic:text_biased", "--exact", "--out", s(&out)]);
    ok(&["metrics", "--dataset", s(&data), "--adapter", "synthetic:text_biased", "--basis", "both", "--out", s(&out)]);
    let table = std::fs::read_to_string(out.join("metrics_table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "basis,mc_v,mc_q,mc_a,pfc_v,pfc_q,pfc_a,accuracy");
    assert_eq!(lines.len(), 3, "{table}");
    for row in &lines[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[1], "0", "{row}");
        assert_eq!(cells[4], "0", "{row}");
    }
    assert!(out.join("metrics_ground_truth.csv").is_file() && out.join("metrics_false_mean.csv").is_file());
}

#[test]
fn bundled_dataset_matches_its_generator() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_20.json");
    let expected = synthetic_dataset("synthetic20", 20, 20, &FixtureShape::small()).to_json() + "\n";
    assert_eq!(std::fs::read_to_string(path).unwrap(), expected);
}
