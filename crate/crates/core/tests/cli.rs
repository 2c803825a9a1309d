use std::path::Path;
use std::process::{Command, Output};

fn symnlf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symnlf"))
        .args(args)
        .current_dir(dir)
        .env_remove("SYMNLF_SEED")
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const LABELLED: &str = "# toy network\nalice bob 3\nbob carol 4\ncarol dave 2\ndave alice 5\nalice carol 1\nbob dave 2\neve alice 3\neve carol 4\n";

#[test]
fn train_predict_evaluate_with_labels_and_scaling() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("net.txt"), LABELLED).unwrap();
    let out = symnlf(
        dir.path(),
        &[
            "train",
            "--input",
            "net.txt",
            "--model-out",
            "m.json",
            "--report-out",
            "r.json",
            "--d",
            "3",
            "--scale-lo",
            "0",
            "--scale-hi",
            "1",
            "--max-iters",
            "20",
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(report["test_rmse"].as_f64().unwrap().is_finite());
    assert!(report.get("wall_time_ms").is_none());

    std::fs::write(
        dir.path().join("q.txt"),
        "alice bob\nzed alice\ncarol eve\n",
    )
    .unwrap();
    let out = symnlf(
        dir.path(),
        &["predict", "--model", "m.json", "--queries", "q.txt"],
    );
    assert!(out.status.success());
    let lines: Vec<String> = text(&out.stdout).lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("alice bob "));
    let g: f64 = lines[0].split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(
        g > 0.5 && g < 6.0,
        "prediction {g} should be on the original scale"
    );
    assert!(text(&out.stderr).contains("line 2: unknown node 'zed'"));

    let out = symnlf(
        dir.path(),
        &["evaluate", "--model", "m.json", "--input", "net.txt"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["edges"], 8);
}

#[test]
fn predict_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("net.txt"), LABELLED).unwrap();
    assert!(symnlf(
        dir.path(),
        &[
            "train",
            "--input",
            "net.txt",
            "--model-out",
            "m.json",
            "--max-iters",
            "3"
        ]
    )
    .status
    .success());
    std::fs::write(dir.path().join("empty.txt"), "").unwrap();
    let out = symnlf(
        dir.path(),
        &["predict", "--model", "m.json", "--queries", "empty.txt"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    std::fs::write(dir.path().join("bad.txt"), "x y\n").unwrap();
    let out = symnlf(
        dir.path(),
        &["predict", "--model", "m.json", "--queries", "bad.txt"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        symnlf(dir.path(), &["train", "--bogus"]).status.code(),
        Some(1)
    );
    assert_eq!(symnlf(dir.path(), &[]).status.code(), Some(1));
    let help = symnlf(dir.path(), &["cv", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(text(&help.stdout).contains("CSV columns"));
    assert!(text(&help.stdout).contains("[default: 0.2]"));

    let missing = symnlf(
        dir.path(),
        &["train", "--input", "nope.txt", "--model-out", "m.json"],
    );
    assert_eq!(missing.status.code(), Some(2));
    std::fs::write(dir.path().join("loop.txt"), "0 0 1\n0 1 2\n1 2 3\n2 3 1\n").unwrap();
    let looped = symnlf(
        dir.path(),
        &["train", "--input", "loop.txt", "--model-out", "m.json"],
    );
    assert_eq!(looped.status.code(), Some(2));
    let dropped = symnlf(
        dir.path(),
        &[
            "train",
            "--input",
            "loop.txt",
            "--model-out",
            "m.json",
            "--self-loops",
            "drop",
            "--max-iters",
            "2",
        ],
    );
    assert!(dropped.status.success(), "{}", text(&dropped.stderr));
    let bad_lambda = symnlf(
        dir.path(),
        &[
            "train",
            "--input",
            "loop.txt",
            "--model-out",
            "m.json",
            "--self-loops",
            "drop",
            "--lambda",
            "-1",
        ],
    );
    assert_eq!(bad_lambda.status.code(), Some(1));
}

#[test]
fn seed_env_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, extra: &[&str], out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_symnlf"));
        cmd.current_dir(dir.path()).env_remove("SYMNLF_SEED");
        if let Some(s) = env {
            cmd.env("SYMNLF_SEED", s);
        }
        let mut args = vec!["synth", "--nodes", "20", "--output", out];
        args.extend_from_slice(extra);
        assert!(cmd.args(&args).status().unwrap().success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let env7 = run(Some("7"), &[], "a.txt");
    let flag7 = run(None, &["--seed", "7"], "b.txt");
    let both = run(Some("8"), &["--seed", "7"], "c.txt");
    let default = run(None, &[], "d.txt");
    assert_eq!(env7, flag7);
    assert_eq!(both, flag7);
    assert_ne!(default, flag7);
    let sidecar: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("a.txt.planted.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sidecar["seed"], 7);
    assert_eq!(sidecar["planted"].as_array().unwrap().len(), 20 * 4);
}

#[test]
fn cv_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert!(symnlf(
        dir.path(),
        &[
            "synth",
            "--nodes",
            "40",
            "--density",
            "0.3",
            "--output",
            "g.txt"
        ]
    )
    .status
    .success());
    std::fs::write(
        dir.path().join("run.cfg"),
        "d = 4\nmax-iters = 15\ncompare = true\nrepeats = 2\n",
    )
    .unwrap();
    let out = symnlf(
        dir.path(),
        &[
            "cv",
            "--input",
            "g.txt",
            "--config",
            "run.cfg",
            "--repeats",
            "3",
            "--csv-out",
            "cv.csv",
            "--summary-out",
            "s.json",
            "--timing",
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("cv.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "optimizer,row,rmse,rmse_std,iterations,stop_reason,time_ms"
    );
    assert_eq!(csv.lines().count(), 1 + 2 * (3 + 1));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert!(summary["first-order"].is_object());
}

#[test]
fn parallel_flag_matches_sequential_output() {
    let dir = tempfile::tempdir().unwrap();
    assert!(
        symnlf(dir.path(), &["synth", "--nodes", "50", "--output", "g.txt"])
            .status
            .success()
    );
    let base = ["train", "--input", "g.txt", "--d", "4", "--max-iters", "15"];
    let seq = symnlf(
        dir.path(),
        &[&base[..], &["--model-out", "a.json"]].concat(),
    );
    let par = symnlf(
        dir.path(),
        &[&base[..], &["--model-out", "b.json", "--parallel", "3"]].concat(),
    );
    assert!(seq.status.success() && par.status.success());
    assert_eq!(seq.stdout, par.stdout);
    assert_eq!(
        std::fs::read(dir.path().join("a.json")).unwrap(),
        std::fs::read(dir.path().join("b.json")).unwrap()
    );
}

#[test]
fn toy_network_trains_and_missing_input_is_named() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.txt"), "0 1 1.5\n1 2 2.0\n0 2 1.0\n").unwrap();
    let out = symnlf(
        dir.path(),
        &[
            "train",
            "--input",
            "toy.txt",
            "--model-out",
            "m.json",
            "--cg-max-iters",
            "10",
            "--d",
            "2",
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(dir.path().join("m.json").exists());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["iterations_run"].as_u64().unwrap() >= 1);

    let out = symnlf(
        dir.path(),
        &["train", "--input", "absent.txt", "--model-out", "m.json"],
    );
    assert_ne!(out.status.code(), Some(0));
    let err = text(&out.stderr);
    assert!(err.contains("absent.txt"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn synth_complete_graph_and_weight_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = symnlf(
        dir.path(),
        &[
            "synth",
            "--nodes",
            "10",
            "--density",
            "1.0",
            "--d-true",
            "3",
            "--output",
            "k.txt",
        ],
    );
    assert!(out.status.success());
    let body = std::fs::read_to_string(dir.path().join("k.txt")).unwrap();
    let weights: Vec<f64> = body
        .lines()
        .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(weights.len(), 45);
    assert!(weights.iter().all(|w| *w > 0.0 && *w < 4.0));
}

#[test]
fn cv_row_count_without_compare() {
    let dir = tempfile::tempdir().unwrap();
    assert!(symnlf(
        dir.path(),
        &[
            "synth",
            "--nodes",
            "30",
            "--density",
            "0.4",
            "--output",
            "g.txt"
        ]
    )
    .status
    .success());
    let out = symnlf(
        dir.path(),
        &[
            "cv",
            "--input",
            "g.txt",
            "--train-fraction",
            "0.2",
            "--repeats",
            "2",
            "--max-iters",
            "5",
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = text(&out.stdout);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("second-order,mean,"));
}

#[test]
fn planted_data_fits_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    assert!(symnlf(
        dir.path(),
        &[
            "synth",
            "--nodes",
            "80",
            "--density",
            "0.4",
            "--d-true",
            "3",
            "--seed",
            "11",
            "--output",
            "g.txt"
        ]
    )
    .status
    .success());
    let flags = ["--d", "3", "--lambda", "0"];
    std::fs::create_dir(dir.path().join("s")).unwrap();
    let train = [
        "train",
        "--input",
        "g.txt",
        "--model-out",
        "m.json",
        "--train-fraction",
        "0.9",
        "--validation-fraction",
        "0",
        "--export-split",
        "s",
    ];
    let out = symnlf(dir.path(), &[&train[..], &flags].concat());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let out = symnlf(
        dir.path(),
        &["predict", "--model", "m.json", "--queries", "s/train.txt"],
    );
    let truth = std::fs::read_to_string(dir.path().join("s/train.txt")).unwrap();
    for (pred, line) in text(&out.stdout).lines().zip(truth.lines()) {
        let g: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
        let p: f64 = pred.split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!((g - p).abs() <= 1e-3, "{line} -> {pred}");
    }

    let out = symnlf(
        dir.path(),
        &[
            &[
                "cv",
                "--input",
                "g.txt",
                "--train-fraction",
                "0.5",
                "--repeats",
                "2",
                "--summary-out",
                "s.json",
            ][..],
            &flags,
        ]
        .concat(),
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert!(summary["second-order"]["rmse_mean"].as_f64().unwrap() <= 0.05);
}
