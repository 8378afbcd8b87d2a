use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcop::trace::read_trace;

const FAST: [&str; 4] = ["--oracle-runs", "3", "--oracle-budget", "4000"];

fn dcop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcop")).args(args).env_remove("DCOP_OUT").env("RUST_LOG", "warn").output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn files_with_suffix(root: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.to_string_lossy().ends_with(suffix) {
                found.push(path);
            }
        }
    }
    found.sort();
    found
}

/// Manifest without its timestamp line.
fn manifest_body(out: &Path) -> String {
    let text = fs::read_to_string(out.join("manifest.tsv")).unwrap();
    text.lines().skip(1).collect::<Vec<_>>().join("\n")
}

fn run_g24_2(out: &Path, extra: &[&str]) -> String {
    let out = out.to_str().unwrap();
    let mut args = vec!["run", "--instances", "G24_2", "--severities", "20", "--out", out];
    args.extend(FAST);
    args.extend(extra);
    ok(&dcop(&args))
}

#[test]
fn single_instance_grid_writes_120_traces_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = run_g24_2(dir.path(), &[]);
    assert!(stdout.contains("120 runs executed, 0 skipped"), "{stdout}");

    let traces: Vec<PathBuf> = files_with_suffix(&dir.path().join("traces"), ".tsv")
        .into_iter()
        .filter(|p| !p.to_string_lossy().ends_with(".improvements.tsv"))
        .collect();
    assert_eq!(traces.len(), 120);
    assert_eq!(files_with_suffix(&dir.path().join("traces"), ".done").len(), 120);
    for path in &traces {
        let trace = read_trace(path).unwrap();
        assert!(trace.evaluations.abs_diff(10_000) <= 20);
    }
    let body = manifest_body(dir.path());
    assert_eq!(body.lines().filter(|l| l.starts_with("G24_2\t20\t")).count(), 120);
    assert!(dir.path().join("optima/G24_2_S20.tsv").exists());

    let stdout = run_g24_2(dir.path(), &["--resume"]);
    assert!(stdout.contains("0 runs executed, 120 skipped"), "{stdout}");
    assert_eq!(manifest_body(dir.path()), body);

    // A damaged trace is rerun and restored byte for byte.
    let victim = dir.path().join("traces/G24_2/S20/penalty/run07.tsv");
    let original = fs::read(&victim).unwrap();
    fs::write(&victim, b"garbage").unwrap();
    let stdout = run_g24_2(dir.path(), &["--resume"]);
    assert!(stdout.contains("1 runs executed, 119 skipped"), "{stdout}");
    assert_eq!(fs::read(&victim).unwrap(), original);

    // A changed run parameter invalidates every marker.
    let stdout = run_g24_2(dir.path(), &["--resume", "--cr", "0.3", "--runs", "2"]);
    assert!(stdout.contains("8 runs executed, 0 skipped"), "{stdout}");
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        run_g24_2(dir.path(), &["--runs", "3", "--seed", "42"]);
    }
    let files_a = files_with_suffix(a.path(), ".tsv");
    assert!(!files_a.is_empty());
    for fa in files_a.iter().filter(|p| !p.ends_with("manifest.tsv")) {
        let fb = b.path().join(fa.strip_prefix(a.path()).unwrap());
        assert_eq!(fs::read(fa).unwrap(), fs::read(&fb).unwrap(), "{}", fa.display());
    }
    assert_eq!(manifest_body(a.path()), manifest_body(b.path()));

    let c = tempfile::tempdir().unwrap();
    run_g24_2(c.path(), &["--runs", "3", "--seed", "43"]);
    let rel = "traces/G24_2/S20/epsilon/run00.tsv";
    assert_ne!(fs::read(a.path().join(rel)).unwrap(), fs::read(c.path().join(rel)).unwrap());
}

#[test]
fn flags_override_environment_which_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let (from_file, from_env) = (dir.path().join("file-out"), dir.path().join("env-out"));
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        format!(
            "instances = [\"G24_f\"]\nstrategies = [\"feasibility\"]\nruns = 2\nout = {:?}\noracle-runs = 2\noracle-budget = 2000\nf-min = 0.3\n",
            from_file.to_str().unwrap()
        ),
    )
    .unwrap();
    let run = |extra: &[&str], env: Option<&Path>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dcop"));
        cmd.args(["run", "--config", config.to_str().unwrap()]).args(extra).env("RUST_LOG", "warn");
        match env {
            Some(p) => cmd.env("DCOP_OUT", p),
            None => cmd.env_remove("DCOP_OUT"),
        };
        ok(&cmd.output().unwrap())
    };

    assert!(run(&[], None).contains("2 runs executed"));
    assert!(from_file.join("manifest.tsv").exists());

    assert!(run(&["--runs", "3"], Some(&from_env)).contains("3 runs executed"));
    assert!(from_env.join("traces/G24_f/S20/feasibility/run02.tsv").exists());

    let flag_out = dir.path().join("flag-out");
    run(&["--runs", "1", "--out", flag_out.to_str().unwrap()], Some(&from_env));
    assert!(flag_out.join("traces/G24_f/S20/feasibility/run00.tsv").exists());
    assert!(!flag_out.join("traces/G24_f/S20/feasibility/run01.tsv").exists());
}

#[test]
fn environment_only_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env");
    let status = Command::new(env!("CARGO_BIN_EXE_dcop"))
        .args(["run", "--instances", "G24_f", "--strategies", "penalty", "--runs", "1"])
        .args(FAST)
        .env("DCOP_OUT", &out)
        .env("DCOP_RUNS", "5")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    ok(&status);
    assert_eq!(files_with_suffix(&out.join("traces"), ".done").len(), 1);
}

#[test]
fn bad_configuration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "population = 20\n").unwrap();
    let out = dcop(&["run", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("population"));

    for args in [
        &["run", "--severities", "30"][..],
        &["run", "--instances", "G99"],
        &["run", "--strategies", "annealing"],
        &["run", "--np", "3"],
        &["run", "--bound-policy", "wrap"],
    ] {
        let out = dcop(&[args, &["--out", dir.path().to_str().unwrap()]].concat());
        assert!(!out.status.success(), "{args:?} accepted");
    }
}

#[test]
fn missing_optima_fail_fast_without_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dcop(&["run", "--instances", "G24_4", "--severities", "50", "--no-oracle", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("G24_4 S=50"), "{stderr}");
    assert!(!dir.path().join("traces").exists());
}

#[test]
fn oracle_report_and_stats_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let common = ["--instances", "G24_1,G24_3", "--severities", "20", "--runs", "4", "--out", out];
    let stdout = ok(&dcop(&[&["oracle"][..], &common, &FAST].concat()));
    assert!(stdout.starts_with("2 optima tables"), "{stdout}");
    let stdout = ok(&dcop(&[&["oracle"][..], &common, &FAST].concat()));
    assert!(stdout.starts_with("0 optima tables"), "{stdout}");

    ok(&dcop(&[&["run"][..], &common, &FAST].concat()));
    ok(&dcop(&[&["report"][..], &common, &FAST].concat()));
    let reports = dir.path().join("reports");
    for name in ["measures.tsv", "offline_error.txt", "dominance.txt", "window_measures.txt", "normality.tsv"] {
        assert!(reports.join(name).exists(), "{name}");
    }
    let offline = fs::read_to_string(reports.join("offline_error.txt")).unwrap();
    assert!(offline.contains("G24_1 S=20") && offline.contains("G24_3 S=20"));
    assert!(files_with_suffix(&reports.join("plots"), ".tsv").len() >= 2);

    let stats = ok(&dcop(&[&["stats"][..], &common, &FAST].concat()));
    assert!(stats.contains("G24_3 S=20"), "{stats}");
}

#[test]
fn feasratio_exit_code_reflects_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let pass = dcop(&["feasratio", "--instances", "G24_1,G24_6c", "--samples", "100000", "--out", out]);
    assert_eq!(pass.status.code(), Some(0));
    let stdout = String::from_utf8(pass.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);

    let fail = dcop(&["feasratio", "--instances", "G24_3", "--severities", "10", "--samples", "100000", "--out", out]);
    assert_eq!(fail.status.code(), Some(2));
    assert!(String::from_utf8(fail.stdout).unwrap().contains("false"));
}
