use std::path::PathBuf;
use std::time::Instant;

use flagtune::paramspace::parse_space;
use flagtune::runner::{
    execute_run, run_batch, HarnessError, ObjectiveSource, Outcome, RunSpec, ScenarioSpec,
};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn scenario(command: &str, instances: &[&str], cutoff: f64) -> ScenarioSpec {
    ScenarioSpec::new(command, instances.iter().map(|s| s.to_string()).collect(), cutoff).unwrap()
}

fn spec(instance: &str) -> RunSpec {
    let space = parse_space("a {true, false} [true]").unwrap();
    RunSpec::new(space.default_config(), instance, 0)
}

#[test]
fn burn_calibrated_success() {
    // Calibrate the loop rate of the shell stub on this host.
    let probe = "200000";
    let cal = scenario(&format!("sh {} {{instance}}", fixture("burn.sh")), &[probe], 60.0);
    let r = execute_run(&cal, &spec(probe)).unwrap();
    assert_eq!(r.outcome, Outcome::Success);
    let per_iter = r.measured.max(1e-3) / 200_000.0;
    let iters = ((0.2 / per_iter) as u64).to_string();

    let s = scenario(&format!("sh {} {{instance}}", fixture("burn.sh")), &[&iters], 60.0);
    let r = execute_run(&s, &spec(&iters)).unwrap();
    assert_eq!(r.outcome, Outcome::Success);
    assert!((r.measured - 0.2).abs() <= 0.1, "measured {}", r.measured);
    assert_eq!(r.load, 1);
}

#[test]
fn infinite_loop_times_out() {
    let s = scenario(&format!("sh {}", fixture("forever.sh")), &["i"], 1.0);
    let start = Instant::now();
    let r = execute_run(&s, &spec("i")).unwrap();
    assert_eq!(r.outcome, Outcome::Timeout);
    assert!(r.measured >= 1.0);
    assert!(r.measured <= s.cutoff * s.wall_guard);
    assert!(start.elapsed().as_secs_f64() < 1.0 * s.wall_guard + 0.5);
}

#[test]
fn wall_guard_catches_idle_target() {
    let s = scenario(&format!("sh {}", fixture("sleeper.sh")), &["i"], 0.5);
    let start = Instant::now();
    let r = execute_run(&s, &spec("i")).unwrap();
    assert_eq!(r.outcome, Outcome::Timeout);
    assert!(r.measured >= 0.5 && r.measured <= 1.0);
    let took = start.elapsed().as_secs_f64();
    assert!((1.0..1.5).contains(&took), "took {took}");
}

#[test]
fn nonzero_exit_is_crash() {
    let s = scenario(&format!("sh {}", fixture("exit3.sh")), &["i"], 10.0);
    let r = execute_run(&s, &spec("i")).unwrap();
    assert_eq!(r.outcome, Outcome::Crash);
    assert_eq!(r.exit, flagtune::runner::ExitStatus::Code(3));
}

#[test]
fn missing_binary_is_harness_error() {
    let s = scenario("/definitely/not/here {params}", &["i"], 10.0);
    assert!(matches!(execute_run(&s, &spec("i")), Err(HarnessError::Spawn { .. })));
    assert!(matches!(execute_run(&s, &spec("other")), Err(HarnessError::UnknownInstance(_))));
}

#[test]
fn reported_metric() {
    let mut s = scenario(&format!("sh {} {{params}}", fixture("additive.sh")), &["i"], 10.0);
    s.objective = ObjectiveSource::Reported;
    let r = execute_run(&s, &spec("i")).unwrap();
    assert_eq!(r.outcome, Outcome::Success);
    assert_eq!(r.reported, Some(1.0));
    assert_eq!(r.runtime(), 1.0);

    let mut s = scenario(&format!("sh {}", fixture("noresult.sh")), &["i"], 10.0);
    s.objective = ObjectiveSource::Reported;
    assert_eq!(execute_run(&s, &spec("i")).unwrap().outcome, Outcome::Crash);
    s.objective = ObjectiveSource::CpuTime;
    let r = execute_run(&s, &spec("i")).unwrap();
    assert_eq!((r.outcome, r.reported), (Outcome::Success, None));
}

#[test]
fn env_scrub_removes_variables() {
    std::env::set_var("FLAGTUNE_SCRUB_ME", "1");
    let mut s = scenario("sh -c {instance}", &["test -z \"$FLAGTUNE_SCRUB_ME\""], 10.0);
    assert_eq!(execute_run(&s, &spec(&s.instances[0].clone())).unwrap().outcome, Outcome::Crash);
    s.env_scrub = vec!["FLAGTUNE_SCRUB*".into()];
    assert_eq!(execute_run(&s, &spec(&s.instances[0].clone())).unwrap().outcome, Outcome::Success);
}

#[test]
fn batch_preserves_order_and_limits_concurrency() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    let s = scenario(&format!("sh {} {{instance}}", fixture("counter.sh")), &[&d], 10.0).with_jobs(4);
    let specs: Vec<RunSpec> = (0..12).map(|i| RunSpec { seed: i, ..spec(&d) }).collect();
    let results = run_batch(&s, &specs);
    assert_eq!(results.len(), 12);
    for (r, sp) in results.iter().zip(&specs) {
        let r = r.as_ref().unwrap();
        assert_eq!(r.spec, *sp);
        assert_eq!(r.load, 4);
        assert_eq!(r.outcome, Outcome::Success);
    }
    let mut peak = 0;
    for e in std::fs::read_dir(dir.path()).unwrap() {
        let e = e.unwrap();
        if e.file_name().to_string_lossy().starts_with("peaks.") {
            let n: usize = std::fs::read_to_string(e.path()).unwrap().trim().parse().unwrap();
            peak = peak.max(n);
        }
    }
    assert!((1..=4).contains(&peak), "peak {peak}");
}

#[test]
fn batch_keeps_going_after_harness_errors() {
    let s = scenario(&format!("sh {}", fixture("exit3.sh")), &["i"], 10.0).with_jobs(2);
    let results = run_batch(&s, &[spec("i"), spec("nope"), spec("i")]);
    assert!(results[0].is_ok());
    assert!(matches!(results[1], Err(HarnessError::UnknownInstance(_))));
    assert!(results[2].is_ok());
}
