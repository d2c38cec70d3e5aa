use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn flagtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flagtune")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn space_check_and_sample() {
    let space = scenario("crashpair.space");
    let out = ok(&flagtune(&["space", "check", space.to_str().unwrap()]));
    assert!(out.contains("4 parameters"), "{out}");
    let a = ok(&flagtune(&["--seed", "5", "space", "sample", "-n", "4", space.to_str().unwrap()]));
    let b = ok(&flagtune(&["--seed", "5", "space", "sample", "-n", "4", space.to_str().unwrap()]));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 4);
}

#[test]
fn malformed_space_exits_one_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.space");
    fs::write(&bad, "a {x").unwrap();
    let out = flagtune(&["space", "check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn unknown_flag_exits_one() {
    assert_eq!(flagtune(&["tune", "--no-such-flag"]).status.code(), Some(1));
}

#[test]
fn tune_validate_rank_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let sc = scenario("quadratic.toml");
    let sc = sc.to_str().unwrap();
    let base = ["--scenario", sc, "--out", out, "--seed", "11"];
    let run = |extra: &[&str]| ok(&flagtune(&[&base[..], extra].concat()));

    run(&["tune", "--runs", "2", "--validation-runs", "2"]);
    for f in ["summary.csv", "final.cfg", "validation-load-1.csv", "validation-load-1.txt", "ranking-load-1.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let fin = fs::read_to_string(dir.path().join("final.cfg")).unwrap();
    assert!(fin.contains("x=") && fin.contains("y="));

    let log = dir.path().join("validation-runs-load-1.jsonl");
    let log = log.to_str().unwrap();
    let ranked = run(&["rank", log]);
    assert_eq!(ranked, fs::read_to_string(dir.path().join("ranking-load-1.csv")).unwrap());
    assert!(ranked.lines().any(|l| l.contains(",default,")));

    run(&["plot-data", "--kind", "ecdf", log]);
    run(&["plot-data", "--kind", "scatter", "--label", "run-01", log]);
    run(&["plot-data", "--kind", "trajectory", out]);
    let ecdf = fs::read_to_string(dir.path().join("ecdf-default.csv")).unwrap();
    assert!(ecdf.starts_with("runtime,probability\n") && ecdf.trim_end().ends_with(",1.0000"));
    let scatter = fs::read_to_string(dir.path().join("scatter-run-01.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 1 + 2 * 2);
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.lines().skip(1).all(|l| l.starts_with("run-0")));

    let table = run(&["validate", dir.path().join("final.cfg").to_str().unwrap(), "--runs", "1"]);
    assert!(table.contains("final"), "{table}");
}

#[test]
fn tune_is_reproducible() {
    let sc = scenario("quadratic.toml");
    let read = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        ok(&flagtune(&[
            "--scenario", sc.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", seed,
            "tune", "--runs", "2", "--no-validate",
        ]));
        fs::read_to_string(dir.path().join("summary.csv")).unwrap()
    };
    assert_eq!(read("4"), read("4"));
}

#[test]
fn scan_proposes_the_crashing_pair() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("crashpair.toml");
    let out = ok(&flagtune(&[
        "--scenario", sc.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "scan", "--samples", "200",
    ]));
    assert!(out.contains("forbid {a=true, b=true}"), "{out}");
    let refined = fs::read_to_string(dir.path().join("crashpair.space.refined")).unwrap();
    assert!(refined.contains("{a=true, b=true}"));
    let crashes = fs::read_to_string(dir.path().join("crashes.txt")).unwrap();
    assert!(crashes.lines().all(|l| l.contains("a=true") && l.contains("b=true")));
}

#[test]
fn ablate_writes_path() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("t.cfg");
    fs::write(&target, "x=63 y=27\n").unwrap();
    let sc = scenario("quadratic.toml");
    let out = ok(&flagtune(&[
        "--scenario", sc.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
        "ablate", target.to_str().unwrap(), "--runs-per-eval", "1",
    ]));
    assert!(out.contains("approx. portion of rel. impr."), "{out}");
    let csv = fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn missing_target_program_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(scenario("quadratic.space"), dir.path().join("q.space")).unwrap();
    let toml = dir.path().join("s.toml");
    fs::write(
        &toml,
        "space = \"q.space\"\ncommand = \"/nonexistent/program {params}\"\ninstances = [\"i\"]\ncutoff = 1.0\nbudget = { runs = 5 }\n",
    )
    .unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "x=1 y=1\n").unwrap();
    let out = flagtune(&[
        "--scenario", toml.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
        "validate", cfg.to_str().unwrap(), "--runs", "1",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
