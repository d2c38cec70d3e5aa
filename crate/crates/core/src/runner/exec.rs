use std::io::{BufRead, BufReader};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use super::result::{ExitStatus, Outcome, RunResult, RunSpec};
use super::scenario::{ObjectiveSource, ScenarioSpec};
use super::template::TemplateError;

/// Upper bound on the interval between CPU-time checks of a running child.
pub const POLL_INTERVAL: Duration = Duration::from_millis(50);
/// Time between the polite termination signal and the forced kill.
pub const KILL_GRACE: Duration = Duration::from_secs(2);

/// Failures of the harness itself, as opposed to failures of the target.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot spawn `{program}`: {source}")]
    Spawn { program: String, source: std::io::Error },
    #[error("instance `{0}` is not part of the scenario")]
    UnknownInstance(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("waiting for child failed: {0}")]
    Wait(std::io::Error),
}

/// Expand the scenario's command template for one run.
pub fn render_command(scenario: &ScenarioSpec, spec: &RunSpec) -> Result<Vec<String>, TemplateError> {
    scenario.command.render(&spec.config, &spec.instance, spec.seed)
}

fn resolve_program(program: &str, dir: &Path) -> PathBuf {
    let p = Path::new(program);
    if p.is_relative() && program.contains('/') {
        dir.join(p)
    } else {
        p.to_path_buf()
    }
}

fn clock_ticks() -> f64 {
    // SAFETY: sysconf has no preconditions.
    let t = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    if t > 0 {
        t as f64
    } else {
        100.0
    }
}

/// CPU seconds of a live process (plus its reaped children) from procfs.
fn live_cpu_seconds(pid: i32, ticks: f64) -> Option<f64> {
    let stat = std::fs::read_to_string(format!("/proc/{pid}/stat")).ok()?;
    let rest = &stat[stat.rfind(')')? + 2..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    // Fields 14-17 of stat(5): utime stime cutime cstime; `rest` starts at field 3.
    let total: u64 = fields
        .get(11..15)?
        .iter()
        .map(|f| f.parse::<u64>().unwrap_or(0))
        .sum();
    Some(total as f64 / ticks)
}

fn timeval_secs(tv: libc::timeval) -> f64 {
    tv.tv_sec as f64 + tv.tv_usec as f64 * 1e-6
}

/// Non-blocking reap; `Some` once the child has exited.
fn try_reap(pid: i32, block: bool) -> std::io::Result<Option<(i32, libc::rusage)>> {
    let mut status = 0;
    // SAFETY: rusage is plain data and fully written by wait4 on success.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let flags = if block { 0 } else { libc::WNOHANG };
    loop {
        // SAFETY: pointers are to live locals.
        let r = unsafe { libc::wait4(pid, &mut status, flags, &mut usage) };
        if r == pid {
            return Ok(Some((status, usage)));
        }
        if r == 0 {
            return Ok(None);
        }
        let err = std::io::Error::last_os_error();
        if err.kind() != std::io::ErrorKind::Interrupted {
            return Err(err);
        }
    }
}

fn signal_group(pgid: i32, sig: i32) {
    // SAFETY: killpg only sends a signal; errors (e.g. ESRCH) are ignored.
    unsafe {
        libc::killpg(pgid, sig);
    }
}

/// Parse `RESULT: <decimal>`.
pub fn parse_result_line(line: &str) -> Option<f64> {
    let v: f64 = line.trim().strip_prefix("RESULT:")?.trim().parse().ok()?;
    (v.is_finite() && v >= 0.0).then_some(v)
}

/// Run the target once under the scenario's CPU cutoff and wall-clock guard.
pub fn execute_run(scenario: &ScenarioSpec, spec: &RunSpec) -> Result<RunResult, HarnessError> {
    if !scenario.instances.contains(&spec.instance) {
        return Err(HarnessError::UnknownInstance(spec.instance.clone()));
    }
    let argv = render_command(scenario, spec)?;
    let program = resolve_program(&argv[0], &scenario.working_dir);

    let mut cmd = Command::new(&program);
    cmd.args(&argv[1..])
        .current_dir(&scenario.working_dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .process_group(0);
    if !scenario.env_scrub.is_empty() {
        cmd.env_clear()
            .envs(std::env::vars_os().filter(|(k, _)| !k.to_str().is_some_and(|k| scenario.scrubbed(k))));
    }

    let start = Instant::now();
    let mut child = cmd.spawn().map_err(|source| HarnessError::Spawn {
        program: program.display().to_string(),
        source,
    })?;
    let pid = child.id() as i32;
    let stdout = child.stdout.take().expect("stdout is piped");
    let reader = thread::spawn(move || {
        let mut last = None;
        for line in BufReader::new(stdout).lines() {
            let Ok(line) = line else { break };
            if let Some(v) = parse_result_line(&line) {
                last = Some(v);
            }
        }
        last
    });

    let ticks = clock_ticks();
    let wall_limit = Duration::from_secs_f64(scenario.cutoff * scenario.wall_guard);
    let mut sleep = Duration::from_millis(1);
    let mut killed = false;
    let (status, usage) = loop {
        if let Some(done) = try_reap(pid, false).map_err(HarnessError::Wait)? {
            break done;
        }
        let cpu = live_cpu_seconds(pid, ticks).unwrap_or(0.0);
        if cpu >= scenario.cutoff || start.elapsed() >= wall_limit {
            killed = true;
            signal_group(pid, libc::SIGTERM);
            let grace_end = Instant::now() + KILL_GRACE;
            let mut reaped = None;
            while Instant::now() < grace_end {
                if let Some(done) = try_reap(pid, false).map_err(HarnessError::Wait)? {
                    reaped = Some(done);
                    break;
                }
                thread::sleep(Duration::from_millis(10));
            }
            break match reaped {
                Some(done) => done,
                None => {
                    signal_group(pid, libc::SIGKILL);
                    try_reap(pid, true).map_err(HarnessError::Wait)?.expect("blocking wait4 returns the child")
                }
            };
        }
        thread::sleep(sleep);
        sleep = (sleep * 2).min(POLL_INTERVAL);
    };
    // Leftover descendants would skew later measurements.
    signal_group(pid, libc::SIGKILL);
    let wall = start.elapsed().as_secs_f64();
    let reported = reader.join().unwrap_or(None);

    let exit = if libc::WIFEXITED(status) {
        ExitStatus::Code(libc::WEXITSTATUS(status))
    } else {
        ExitStatus::Signal(libc::WTERMSIG(status))
    };
    let cpu = timeval_secs(usage.ru_utime) + timeval_secs(usage.ru_stime);
    let cap = scenario.cutoff * scenario.wall_guard;
    let timed_out = killed || cpu >= scenario.cutoff;
    let (outcome, measured) = if timed_out {
        (Outcome::Timeout, cpu.clamp(scenario.cutoff, cap))
    } else if exit != ExitStatus::Code(0)
        || (scenario.objective == ObjectiveSource::Reported && reported.is_none())
    {
        (Outcome::Crash, cpu)
    } else {
        (Outcome::Success, cpu)
    };
    let reported = if scenario.objective == ObjectiveSource::Reported {
        reported
    } else {
        None
    };

    Ok(RunResult {
        spec: spec.clone(),
        outcome,
        measured,
        reported,
        exit,
        wall,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0),
        load: scenario.jobs,
    })
}
