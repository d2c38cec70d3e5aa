use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::exec::{execute_run, HarnessError};
use super::result::{Outcome, RunResult, RunSpec};
use super::scenario::ScenarioSpec;

/// Execute `specs` with at most `scenario.jobs` runs in flight.
///
/// Results come back in request order; a harness error in one element does
/// not stop the others.
pub fn run_batch(scenario: &ScenarioSpec, specs: &[RunSpec]) -> Vec<Result<RunResult, HarnessError>> {
    run_parallel(scenario.jobs, specs, |spec| execute_run(scenario, spec))
}

/// Apply `run` to every spec on up to `jobs` worker threads, preserving order.
pub fn run_parallel<F>(jobs: usize, specs: &[RunSpec], run: F) -> Vec<Result<RunResult, HarnessError>>
where
    F: Fn(&RunSpec) -> Result<RunResult, HarnessError> + Sync,
{
    let workers = jobs.max(1).min(specs.len());
    if workers <= 1 {
        return specs.iter().map(&run).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunResult, HarnessError>>>> =
        specs.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = specs.get(i) else { break };
                let r = run(spec);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

/// Something that can execute runs: the real process runner, or an
/// in-process stand-in.
pub trait Evaluator: Sync {
    fn evaluate(&self, specs: &[RunSpec]) -> Vec<Result<RunResult, HarnessError>>;
}

/// Runs the scenario's command as child processes.
#[derive(Debug, Clone)]
pub struct ProcessEvaluator {
    pub scenario: ScenarioSpec,
}

impl ProcessEvaluator {
    pub fn new(scenario: ScenarioSpec) -> Self {
        ProcessEvaluator { scenario }
    }
}

impl Evaluator for ProcessEvaluator {
    fn evaluate(&self, specs: &[RunSpec]) -> Vec<Result<RunResult, HarnessError>> {
        run_batch(&self.scenario, specs)
    }
}

/// Evaluates a pure function of the run spec instead of spawning processes.
///
/// The function returns an outcome and a runtime in seconds; runtimes at or
/// above `cutoff` are classified as timeouts, mirroring the process runner.
pub struct FnEvaluator<F> {
    pub cutoff: f64,
    pub jobs: usize,
    pub f: F,
}

impl<F> FnEvaluator<F>
where
    F: Fn(&RunSpec) -> (Outcome, f64) + Sync,
{
    pub fn new(cutoff: f64, f: F) -> Self {
        FnEvaluator { cutoff, jobs: 1, f }
    }
}

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&RunSpec) -> (Outcome, f64) + Sync,
{
    fn evaluate(&self, specs: &[RunSpec]) -> Vec<Result<RunResult, HarnessError>> {
        specs
            .iter()
            .map(|spec| {
                let (outcome, time) = (self.f)(spec);
                let (outcome, measured) = if time >= self.cutoff {
                    (Outcome::Timeout, self.cutoff)
                } else {
                    (outcome, time)
                };
                Ok(RunResult {
                    spec: spec.clone(),
                    outcome,
                    measured,
                    reported: None,
                    exit: match outcome {
                        Outcome::Success => super::result::ExitStatus::Code(0),
                        Outcome::Crash => super::result::ExitStatus::Code(1),
                        Outcome::Timeout => super::result::ExitStatus::Signal(libc::SIGTERM),
                    },
                    wall: measured,
                    timestamp: 0.0,
                    load: self.jobs,
                })
            })
            .collect()
    }
}
