//! End-to-end tests of the `svdd` binary: workflows, file formats, and the
//! documented exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn svdd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svdd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        stderr(out)
    );
}

#[test]
fn train_and_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("train.csv"),
        "0.0,0.0\n1.0,0.0\n0.0,1.0\n1.0,1.0\n0.5,0.5\n",
    )
    .unwrap();
    let out = svdd(
        dir.path(),
        &[
            "train",
            "--input",
            "train.csv",
            "--model",
            "model.json",
            "--s",
            "1.0",
            "--f",
            "0.5",
        ],
    );
    assert_ok(&out);
    assert!(stdout(&out).contains("bandwidth: 1"));
    let model_text = std::fs::read_to_string(dir.path().join("model.json")).unwrap();
    assert!(model_text.contains("\"format_version\": 1"));
    assert!(model_text.contains("\"support_vectors\""));

    std::fs::write(dir.path().join("pts.csv"), "0.5,0.5\n9.0,9.0\n").unwrap();
    let out = svdd(
        dir.path(),
        &[
            "score",
            "--model",
            "model.json",
            "--input",
            "pts.csv",
            "--output",
            "scored.csv",
        ],
    );
    assert_ok(&out);
    assert!(stdout(&out).contains("flagged 1 of 2"));
    let scored = std::fs::read_to_string(dir.path().join("scored.csv")).unwrap();
    let lines: Vec<&str> = scored.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("0.5,0.5,"));
    assert!(lines[0].ends_with(",false"));
    assert!(lines[1].ends_with(",true"));

    // Without --output the CSV goes to stdout.
    let out = svdd(
        dir.path(),
        &["score", "--model", "model.json", "--input", "pts.csv"],
    );
    assert_ok(&out);
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn bandwidth_selection_prints_a_number_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = svdd(
        dir.path(),
        &[
            "simulate",
            "--kind",
            "sphere",
            "--dim",
            "2",
            "--n",
            "200",
            "--seed",
            "4",
            "--output",
            "train.csv",
        ],
    );
    assert_ok(&out);
    let out = svdd(
        dir.path(),
        &[
            "bandwidth",
            "--input",
            "train.csv",
            "--profile",
            "profile.csv",
            "--seed",
            "1",
        ],
    );
    assert_ok(&out);
    let s: f64 = stdout(&out).trim().parse().expect("bandwidth is a number");
    assert!(s > 0.0);
    let profile = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(profile.lines().next().unwrap(), "s,g,h,selected");
    assert_eq!(
        profile.lines().filter(|l| l.ends_with(",1")).count(),
        1,
        "exactly one grid point is marked selected"
    );

    // The dedicated profile command writes the same artifact.
    let out = svdd(
        dir.path(),
        &[
            "profile",
            "--input",
            "train.csv",
            "--output",
            "profile2.csv",
            "--seed",
            "1",
        ],
    );
    assert_ok(&out);
    let profile2 = std::fs::read_to_string(dir.path().join("profile2.csv")).unwrap();
    assert_eq!(profile, profile2);
}

#[test]
fn standardized_models_store_the_transform() {
    let dir = tempfile::tempdir().unwrap();
    // A 10x6 grid with wildly different units per axis, so the model is
    // useless unless the transform is stored and applied at scoring time.
    let rows: String = (0..60)
        .map(|i| format!("{},{}\n", 1000.0 + (i % 10) as f64, 0.001 * (i / 10) as f64))
        .collect();
    std::fs::write(dir.path().join("train.csv"), rows).unwrap();
    let out = svdd(
        dir.path(),
        &[
            "train",
            "--input",
            "train.csv",
            "--model",
            "model.json",
            "--s",
            "1.2",
            "--f",
            "0.1",
            "--standardize",
        ],
    );
    assert_ok(&out);
    let model_text = std::fs::read_to_string(dir.path().join("model.json")).unwrap();
    assert!(model_text.contains("\"standardize\""));
    assert!(model_text.contains("\"mean\""));
    std::fs::write(dir.path().join("pts.csv"), "1004.5,0.0025\n5000,7\n").unwrap();
    let out = svdd(
        dir.path(),
        &["score", "--model", "model.json", "--input", "pts.csv"],
    );
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.lines().next().unwrap().ends_with(",false"));
    assert!(text.lines().nth(1).unwrap().ends_with(",true"));
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = svdd(dir.path(), &["train", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("t.csv"), "0\n1\n").unwrap();
    let out = svdd(
        dir.path(),
        &[
            "train", "--input", "t.csv", "--model", "m.json", "--s", "banana",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("banana"));
}

#[test]
fn data_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x1,x2\n1,2\n1,oops\n").unwrap();
    let out = svdd(
        dir.path(),
        &["train", "--input", "bad.csv", "--model", "m.json", "--s", "1"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 3"));

    let out = svdd(
        dir.path(),
        &["train", "--input", "missing.csv", "--model", "m.json"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("missing.csv"));
}

#[test]
fn bracket_failures_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = svdd(
        dir.path(),
        &[
            "simulate",
            "--kind",
            "sphere",
            "--dim",
            "2",
            "--n",
            "60",
            "--output",
            "t.csv",
        ],
    );
    assert_ok(&out);
    let out = svdd(
        dir.path(),
        &[
            "bandwidth",
            "--input",
            "t.csv",
            "--s-min",
            "1e-9",
            "--s-max",
            "2e-9",
            "--grid-size",
            "8",
        ],
    );
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr(&out));
}

#[test]
fn nonconvergence_exits_with_5() {
    let dir = tempfile::tempdir().unwrap();
    let out = svdd(
        dir.path(),
        &[
            "simulate",
            "--kind",
            "sphere",
            "--dim",
            "2",
            "--n",
            "100",
            "--output",
            "t.csv",
        ],
    );
    assert_ok(&out);
    let out = svdd(
        dir.path(),
        &[
            "train",
            "--input",
            "t.csv",
            "--model",
            "m.json",
            "--s",
            "0.5",
            "--f",
            "0.1",
            "--max-passes",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(5), "stderr: {}", stderr(&out));
}

#[test]
fn study_reports_are_identical_at_any_job_count() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("study.json"),
        r#"{
            "kind": "sphere",
            "dims": [2, 3],
            "replicates": 2,
            "n_train": 120,
            "n_eval": 60,
            "f": 0.05,
            "cv": {"enabled": false, "grid_size": 0},
            "seed": 9
        }"#,
    )
    .unwrap();
    let out = svdd(
        dir.path(),
        &[
            "evaluate",
            "--spec",
            "study.json",
            "--report",
            "r1.csv",
            "--summary",
            "s1.json",
            "--jobs",
            "1",
        ],
    );
    assert_ok(&out);
    let out = svdd(
        dir.path(),
        &[
            "evaluate",
            "--spec",
            "study.json",
            "--report",
            "r4.csv",
            "--jobs",
            "4",
        ],
    );
    assert_ok(&out);
    let r1 = std::fs::read(dir.path().join("r1.csv")).unwrap();
    let r4 = std::fs::read(dir.path().join("r4.csv")).unwrap();
    assert_eq!(r1, r4, "report bytes must not depend on the worker count");
    let report = String::from_utf8(r1).unwrap();
    assert_eq!(
        report.lines().next().unwrap(),
        "replicate,dim,shapes,s_trace,f1_trace,s_best,f1_best,ratio"
    );
    assert_eq!(report.lines().count(), 5);
    let summary = std::fs::read_to_string(dir.path().join("s1.json")).unwrap();
    assert!(summary.contains("\"f1_trace\""));
}

#[test]
fn yaml_specs_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("study.yaml"),
        "kind: sphere\ndims: [2]\nreplicates: 1\nn_train: 100\nn_eval: 40\nf: 0.05\ncv:\n  enabled: false\n  grid_size: 0\n",
    )
    .unwrap();
    let out = svdd(dir.path(), &["evaluate", "--spec", "study.yaml"]);
    assert_ok(&out);
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn lattice_scoring_writes_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = svdd(
        dir.path(),
        &[
            "simulate",
            "--kind",
            "two-donuts-circle",
            "--seed",
            "2",
            "--output",
            "scene.csv",
        ],
    );
    assert_ok(&out);
    let scene = std::fs::read_to_string(dir.path().join("scene.csv")).unwrap();
    assert_eq!(scene.lines().count(), 3001);

    std::fs::write(
        dir.path().join("tiny.csv"),
        "0,0\n1,0\n0,1\n1,1\n0.5,0.5\n0.2,0.8\n",
    )
    .unwrap();
    let out = svdd(
        dir.path(),
        &[
            "train",
            "--input",
            "tiny.csv",
            "--model",
            "m.json",
            "--s",
            "0.7",
            "--f",
            "0.34",
        ],
    );
    assert_ok(&out);
    let out = svdd(
        dir.path(),
        &[
            "grid",
            "--model",
            "m.json",
            "--input",
            "tiny.csv",
            "--output",
            "grid.csv",
            "--resolution",
            "21",
        ],
    );
    assert_ok(&out);
    let grid = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines[0], "x,y,dist2,outlier");
    assert_eq!(lines.len(), 1 + 21 * 21);
    // The lattice spans the exact bounding box.
    assert!(lines[1].starts_with("0,0,"));
    assert!(lines.last().unwrap().starts_with("1,1,"));
}

#[test]
fn labeled_simulation_writes_labels() {
    let dir = tempfile::tempdir().unwrap();
    let out = svdd(
        dir.path(),
        &[
            "simulate",
            "--kind",
            "cube",
            "--dim",
            "3",
            "--n",
            "100",
            "--labeled",
            "--seed",
            "6",
            "--output",
            "eval.csv",
        ],
    );
    assert_ok(&out);
    let text = std::fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x1,x2,x3,label");
    assert_eq!(text.lines().filter(|l| l.ends_with(",inlier")).count(), 50);
    assert_eq!(text.lines().filter(|l| l.ends_with(",outlier")).count(), 50);

    // The fixed scene has no labeled variant.
    let out = svdd(
        dir.path(),
        &[
            "simulate",
            "--kind",
            "two-donuts-circle",
            "--labeled",
            "--output",
            "x.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}
