use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_margin-paths"));
    cmd.env_remove("MARGIN_PATHS_OUT");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout(&help).contains("margin-scaling"));
    let version = run(&["--version"]);
    assert_eq!(code(&version), 0);
    let sub_help = run(&["compare", "--help"]);
    assert_eq!(code(&sub_help), 0);
    assert!(stdout(&sub_help).contains("--angle-gate"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["--frobnicate"])), 1);
    assert_eq!(code(&run(&["nosuchcommand"])), 1);
    assert_eq!(code(&run(&["gd", "--max-steps", "ten"])), 1);
}

#[test]
fn dry_run_validates_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let ok = run(&[
        "regpath",
        "--loss",
        "exp",
        "--data",
        "margin_scaling:n=10",
        "--bmax",
        "16",
        "--dry-run",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&ok), 0, "stderr: {}", stderr(&ok));
    assert!(stdout(&ok).contains("dry-run ok"));
    assert!(!out.exists());

    let bad = run(&[
        "regpath",
        "--loss",
        "exp",
        "--data",
        "margin_scaling:n=10",
        "--bmax",
        "0.5",
        "--dry-run",
    ]);
    assert_eq!(code(&bad), 1);
    assert!(stderr(&bad).contains("bmax"));
}

#[test]
fn gd_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gd");
    let res = run(&[
        "gd",
        "--loss",
        "exp",
        "--data",
        "margin_scaling:n=10",
        "--max-steps",
        "500",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let trace = std::fs::read_to_string(out.join("gd_trace.csv")).unwrap();
    assert!(trace.starts_with("t,risk,grad_norm,norm,dir_0,dir_1,descent_residual\n"));
    let summary = read_json(&out.join("gd_summary.json"));
    assert_eq!(summary["steps"], 500);
    assert_eq!(summary["verdict"], true);
    assert!(summary["final_risk"].as_f64().unwrap() > 0.0);
}

#[test]
fn regpath_ends_exactly_at_bmax() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rp");
    let res = run(&[
        "regpath",
        "--loss",
        "poly:b=1",
        "--data",
        "margin_scaling:n=10",
        "--bmax",
        "24",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let csv = std::fs::read_to_string(out.join("regpath.csv")).unwrap();
    assert!(csv.starts_with("B,risk,boundary,collinearity_residual,w_0,w_1,dir_0,dir_1\n"));
    let summary = read_json(&out.join("regpath_summary.json"));
    assert_eq!(summary["final_b"], 24.0);
    assert_eq!(summary["points"], 6);
    assert_eq!(summary["final_boundary"], true);
    assert!(summary["final_collinearity_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn compare_meets_the_angle_gate_on_tail_losses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let res = run(&[
        "compare",
        "--loss",
        "exp",
        "--loss",
        "logistic",
        "--data",
        "margin_scaling:n=20",
        "--bmax",
        "64",
        "--max-steps",
        "20000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let summary = read_json(&out.join("compare_summary.json"));
    assert_eq!(summary["verdict"], true);
    let cells = summary["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    for cell in cells {
        assert!(cell["final_angle"].as_f64().unwrap() <= 0.02);
        assert_eq!(cell["decreasing_last_octaves"], true);
    }
    let pairs = std::fs::read_to_string(out.join("compare_pairs.csv")).unwrap();
    assert!(pairs.starts_with("loss,t,B,angle\n"));
    assert!(pairs.lines().skip(1).all(|l| {
        l.starts_with("exp,") || l.starts_with("logistic,")
    }));
}

#[test]
fn compare_outputs_are_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    let par = dir.path().join("par");
    let args = |out: &Path, jobs: &str| {
        vec![
            "compare".to_string(),
            "--loss".into(),
            "exp".into(),
            "--loss".into(),
            "logistic".into(),
            "--loss".into(),
            "poly:b=2".into(),
            "--data".into(),
            "margin_scaling:n=20".into(),
            "--bmax".into(),
            "32".into(),
            "--max-steps".into(),
            "5000".into(),
            "--jobs".into(),
            jobs.into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let r1 = bin().args(args(&seq, "1")).output().unwrap();
    let r3 = bin().args(args(&par, "3")).output().unwrap();
    assert_eq!(code(&r1), code(&r3));
    for name in ["compare_summary.json", "compare_pairs.csv"] {
        let a = std::fs::read(seq.join(name)).unwrap();
        let b = std::fs::read(par.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between --jobs 1 and --jobs 3");
    }
}

#[test]
fn margin_scaling_b2_slope_sits_in_the_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ms2");
    let res = run(&["margin-scaling", "--b", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let summary = read_json(&out.join("margin_scaling_summary.json"));
    assert_eq!(summary["verdict"], true);
    let slope = summary["report"]["slope"].as_f64().unwrap();
    let expected = summary["report"]["expected_slope"].as_f64().unwrap();
    assert!((expected + 1.0 / 3.0).abs() < 1e-12);
    assert!((slope - expected).abs() <= 0.08);
    let csv = std::fs::read_to_string(out.join("margin_scaling.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("n,margin,pq_ratio,u_gap,gamma_hat\n"));
}

#[test]
fn margin_scaling_b1_exits_two_at_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ms1");
    let res = run(&["margin-scaling", "--b", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2, "stderr: {}", stderr(&res));
    let summary = read_json(&out.join("margin_scaling_summary.json"));
    assert_eq!(summary["verdict"], false);
    let slope = summary["report"]["slope"].as_f64().unwrap();
    assert!((slope - (-0.410036)).abs() < 1e-4, "slope {slope}");
    assert!(summary["report"]["gamma_hat_spread"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn margin_scaling_outputs_are_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    let par = dir.path().join("par");
    for (out, jobs) in [(&seq, "1"), (&par, "4")] {
        let res = run(&[
            "margin-scaling",
            "--b",
            "2",
            "--ns",
            "5,10,25,50",
            "--bmax",
            "512",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    }
    for name in ["margin_scaling_summary.json", "margin_scaling.csv"] {
        let a = std::fs::read(seq.join(name)).unwrap();
        let b = std::fs::read(par.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between --jobs 1 and --jobs 4");
    }
}

#[test]
fn oscillate_passes_at_default_size_and_is_inconclusive_at_fifty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("osc");
    let res = run(&["oscillate", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let summary = read_json(&out.join("oscillate_summary.json"));
    assert_eq!(summary["verdict"], true);
    assert!(summary["report"]["separation"].as_f64().unwrap() > 0.05);
    let checks = std::fs::read_to_string(out.join("oscillate_checks.csv")).unwrap();
    assert!(checks.starts_with("phase,radius,angle\n"));
    assert!(checks.contains("\nrecip,") || checks.contains("recip,"));

    let small = run(&["oscillate", "--n", "50", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&small), 1);
    assert!(stderr(&small).contains("inconclusive"));
}

#[test]
fn validate_loss_verdict_depends_on_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let res = run(&[
        "validate-loss",
        "--loss",
        "splice-recip-exp",
        "--out",
        raw.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2, "stderr: {}", stderr(&res));
    let summary = read_json(&raw.join("validate_loss_summary.json"));
    assert_eq!(summary["verdict"], false);
    assert!(summary["violations"].as_u64().unwrap() > 0);
    let csv = std::fs::read_to_string(raw.join("validate_loss_violations.csv")).unwrap();
    assert!(csv.lines().count() > 1);

    let positive = dir.path().join("pos");
    let res = run(&[
        "validate-loss",
        "--loss",
        "splice-recip-exp",
        "--grid-lo",
        "0.05",
        "--out",
        positive.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let summary = read_json(&positive.join("validate_loss_summary.json"));
    assert_eq!(summary["verdict"], true);
    assert_eq!(summary["violations"], 0);
}

#[test]
fn validate_loss_logistic_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("vl");
    let res = run(&["validate-loss", "--loss", "logistic", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let summary = read_json(&out.join("validate_loss_summary.json"));
    assert_eq!(summary["violations"], 0);
    assert_eq!(summary["decay_ok"], true);
}

#[test]
fn gen_data_output_feeds_the_other_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    let res = run(&[
        "gen-data",
        "--data",
        "clouds",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let csv_path = out.join("dataset.csv");
    let gd_out = dir.path().join("gd");
    let gd = run(&[
        "gd",
        "--loss",
        "logistic",
        "--data",
        csv_path.to_str().unwrap(),
        "--max-steps",
        "200",
        "--out",
        gd_out.to_str().unwrap(),
    ]);
    assert_eq!(code(&gd), 0, "stderr: {}", stderr(&gd));

    let not_generator = run(&["gen-data", "--data", "some/file.csv"]);
    assert_eq!(code(&not_generator), 1);
    assert!(stderr(&not_generator).contains("generator"));
}

#[test]
fn config_file_drives_runs_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{
  "loss": ["exp", "logistic"],
  "data": "margin_scaling:n=20",
  "b_max": 64.0,
  "max_steps": 20000,
  "out": "PLACEHOLDER"
}"#
        .replace("PLACEHOLDER", dir.path().join("from-config").to_str().unwrap()),
    )
    .unwrap();
    let res = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    assert!(dir.path().join("from-config").join("compare_summary.json").exists());

    let tightened = run(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--angle-gate",
        "1e-7",
        "--out",
        dir.path().join("tight").to_str().unwrap(),
    ]);
    assert_eq!(code(&tightened), 2);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"loss": "exp", "frobnicate": 1}"#).unwrap();
    let rejected = run(&["compare", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&rejected), 1);
    assert!(stderr(&rejected).contains("frobnicate"));
}

#[test]
fn env_var_sets_the_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let res = bin()
        .env("MARGIN_PATHS_OUT", &out)
        .args(["validate-loss", "--loss", "exp"])
        .output()
        .unwrap();
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    assert!(out.join("validate_loss_summary.json").exists());
}

#[test]
fn descent_violation_exits_with_the_verdict_code() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "gd",
        "--loss",
        "logistic",
        "--data",
        "margin_scaling:n=20",
        "--eta",
        "1000",
        "--max-steps",
        "10",
        "--out",
        dir.path().join("gd").to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("descent inequality violated"));
}

#[test]
fn decompose_writes_the_split_and_separator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dec");
    let res = run(&[
        "decompose",
        "--data",
        "clouds:seed=1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "stderr: {}", stderr(&res));
    let doc = read_json(&out.join("decomposition.json"));
    assert!(doc["sc_indices"].as_array().unwrap().is_empty());
    assert_eq!(doc["comp_indices"].as_array().unwrap().len(), 25);
    assert!(doc["separator"]["gamma"].as_f64().unwrap() > 0.0);
    let summary = read_json(&out.join("decompose_summary.json"));
    assert_eq!(summary["separable_points"], 25);
    assert_eq!(summary["spanned_points"], 0);
}
