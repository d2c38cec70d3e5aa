//! Penalized average runtime (PAR-k), aggregates, relative improvement and
//! empirical CDFs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::history::RunHistory;
use crate::paramspace::Configuration;
use crate::runner::{Outcome, RunResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectiveError {
    #[error("no runs to score")]
    Empty,
    #[error("no runs of the configuration on instance `{0}`")]
    MissingInstance(String),
    #[error("default score must be positive, got {0}")]
    NonPositiveDefault(String),
    #[error("negative runtime {0}")]
    NegativeTime(String),
}

/// Cutoff and penalization factor of a PAR-k objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub cutoff: f64,
    pub k: u32,
}

impl ObjectiveSpec {
    pub fn new(cutoff: f64) -> Self {
        ObjectiveSpec { cutoff, k: 10 }
    }

    pub fn penalty(&self) -> f64 {
        self.k as f64 * self.cutoff
    }

    /// Contribution of one run: its runtime on success, `k * cutoff` otherwise.
    pub fn run_cost(&self, run: &RunResult) -> f64 {
        match run.outcome {
            Outcome::Success => run.runtime(),
            Outcome::Timeout | Outcome::Crash => self.penalty(),
        }
    }
}

/// Mean PAR-k contribution over `results`.
pub fn par_score(results: &[RunResult], spec: &ObjectiveSpec) -> Result<f64, ObjectiveError> {
    par_of(results.iter(), spec)
}

pub(crate) fn par_of<'a>(
    results: impl Iterator<Item = &'a RunResult>,
    spec: &ObjectiveSpec,
) -> Result<f64, ObjectiveError> {
    let (mut sum, mut n) = (0.0, 0usize);
    for r in results {
        sum += spec.run_cost(r);
        n += 1;
    }
    if n == 0 {
        return Err(ObjectiveError::Empty);
    }
    Ok(sum / n as f64)
}

/// Per-instance PAR-k with outcome counts.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceScore {
    pub instance: String,
    pub par: f64,
    pub n_success: usize,
    pub n_timeout: usize,
    pub n_crash: usize,
}

impl InstanceScore {
    pub fn runs(&self) -> usize {
        self.n_success + self.n_timeout + self.n_crash
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub config_id: String,
    pub per_instance: Vec<InstanceScore>,
    /// PAR-k over the pooled runs of all instances.
    pub overall: f64,
}

impl ScoreReport {
    pub fn n_success(&self) -> usize {
        self.per_instance.iter().map(|s| s.n_success).sum()
    }

    pub fn n_timeout(&self) -> usize {
        self.per_instance.iter().map(|s| s.n_timeout).sum()
    }

    pub fn n_crash(&self) -> usize {
        self.per_instance.iter().map(|s| s.n_crash).sum()
    }

    pub fn n_runs(&self) -> usize {
        self.per_instance.iter().map(InstanceScore::runs).sum()
    }

    /// Rows `config_id,instance,par_k,n_success,n_timeout,n_crash`, one per
    /// instance followed by an `ALL` row.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for s in &self.per_instance {
            let _ = writeln!(
                out,
                "{},{},{:.3},{},{},{}",
                self.config_id, s.instance, s.par, s.n_success, s.n_timeout, s.n_crash
            );
        }
        let _ = writeln!(
            out,
            "{},ALL,{:.3},{},{},{}",
            self.config_id,
            self.overall,
            self.n_success(),
            self.n_timeout(),
            self.n_crash()
        );
        out
    }

    /// Aligned text table.
    pub fn render_table(&self) -> String {
        let width = self
            .per_instance
            .iter()
            .map(|s| s.instance.len())
            .max()
            .unwrap_or(0)
            .max("instance".len());
        let mut out = format!("configuration {}\n", self.config_id);
        let _ = writeln!(out, "{:<width$}  {:>12}  {:>7}  {:>7}  {:>7}", "instance", "PAR-k [s]", "success", "timeout", "crash");
        for s in &self.per_instance {
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.3}  {:>7}  {:>7}  {:>7}",
                s.instance, s.par, s.n_success, s.n_timeout, s.n_crash
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.3}  {:>7}  {:>7}  {:>7}",
            "overall",
            self.overall,
            self.n_success(),
            self.n_timeout(),
            self.n_crash()
        );
        out
    }
}

/// Score a set of runs, grouped by instance in the order of `instances`.
pub fn score_runs(
    config_id: &str,
    runs: &[&RunResult],
    instances: &[String],
    spec: &ObjectiveSpec,
) -> Result<ScoreReport, ObjectiveError> {
    let mut by_instance: BTreeMap<&str, Vec<&RunResult>> = BTreeMap::new();
    for r in runs {
        by_instance.entry(r.spec.instance.as_str()).or_default().push(r);
    }
    let mut per_instance = Vec::with_capacity(instances.len());
    let mut pooled = Vec::new();
    for inst in instances {
        let rs = by_instance
            .get(inst.as_str())
            .ok_or_else(|| ObjectiveError::MissingInstance(inst.clone()))?;
        let count = |o: Outcome| rs.iter().filter(|r| r.outcome == o).count();
        per_instance.push(InstanceScore {
            instance: inst.clone(),
            par: par_of(rs.iter().copied(), spec)?,
            n_success: count(Outcome::Success),
            n_timeout: count(Outcome::Timeout),
            n_crash: count(Outcome::Crash),
        });
        pooled.extend(rs.iter().copied());
    }
    Ok(ScoreReport {
        config_id: config_id.to_string(),
        per_instance,
        overall: par_of(pooled.into_iter(), spec)?,
    })
}

/// PAR-k of `config` in `history`, per instance and pooled over all runs.
pub fn aggregate_score(
    history: &RunHistory,
    config: &Configuration,
    instances: &[String],
    spec: &ObjectiveSpec,
) -> Result<ScoreReport, ObjectiveError> {
    let runs: Vec<&RunResult> = history.runs_of(config).collect();
    score_runs(&config.id().0, &runs, instances, spec)
}

/// Percentage by which `configured` improves on `default`; negative when worse.
pub fn relative_improvement(default: f64, configured: f64) -> Result<f64, ObjectiveError> {
    if !(default > 0.0) {
        return Err(ObjectiveError::NonPositiveDefault(default.to_string()));
    }
    Ok(100.0 * (default - configured) / default)
}

/// Empirical CDF: one `(value, fraction of samples <= value)` step per distinct value.
pub fn ecdf(times: &[f64]) -> Result<Vec<(f64, f64)>, ObjectiveError> {
    if times.is_empty() {
        return Err(ObjectiveError::Empty);
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
        return Err(ObjectiveError::NegativeTime(t.to_string()));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &t) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 = p,
            _ => out.push((t, p)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paramspace::parse_space;
    use crate::runner::{ExitStatus, RunSpec};

    pub(crate) fn run(outcome: Outcome, t: f64) -> RunResult {
        run_on("i", outcome, t)
    }

    fn run_on(instance: &str, outcome: Outcome, t: f64) -> RunResult {
        let space = parse_space("a {true, false} [true]").unwrap();
        RunResult {
            spec: RunSpec::new(space.default_config(), instance, 0),
            outcome,
            measured: t,
            reported: None,
            exit: ExitStatus::Code(0),
            wall: t,
            timestamp: 0.0,
            load: 1,
        }
    }

    #[test]
    fn par_examples() {
        let spec = ObjectiveSpec::new(60.0);
        let all: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&t| run(Outcome::Success, t)).collect();
        assert_eq!(par_score(&all, &spec).unwrap(), 2.0);
        let mixed = [run(Outcome::Success, 30.0), run(Outcome::Timeout, 60.0)];
        assert_eq!(par_score(&mixed, &spec).unwrap(), 315.0);
        assert_eq!(par_score(&[run(Outcome::Crash, 0.3)], &spec).unwrap(), 600.0);
        assert_eq!(par_score(&[], &spec), Err(ObjectiveError::Empty));
    }

    #[test]
    fn reported_metric_is_preferred() {
        let mut r = run(Outcome::Success, 5.0);
        r.reported = Some(1.5);
        assert_eq!(ObjectiveSpec::new(60.0).run_cost(&r), 1.5);
    }

    #[test]
    fn aggregate_is_run_weighted() {
        let spec = ObjectiveSpec::new(60.0);
        let runs = [
            run_on("a", Outcome::Success, 2.0),
            run_on("b", Outcome::Success, 4.0),
            run_on("b", Outcome::Success, 4.0),
            run_on("b", Outcome::Success, 4.0),
        ];
        let refs: Vec<&RunResult> = runs.iter().collect();
        let rep = score_runs("c", &refs, &["a".into(), "b".into()], &spec).unwrap();
        assert_eq!(rep.per_instance[0].par, 2.0);
        assert_eq!(rep.per_instance[1].par, 4.0);
        assert_eq!(rep.overall, 3.5);
        assert_eq!(
            score_runs("c", &refs, &["a".into(), "z".into()], &spec),
            Err(ObjectiveError::MissingInstance("z".into()))
        );
        assert!(rep.csv_rows().ends_with("c,ALL,3.500,4,0,0\n"));
    }

    #[test]
    fn aggregate_from_history() {
        let mut h = RunHistory::new();
        h.push(run(Outcome::Success, 1.0));
        h.push(run(Outcome::Success, 3.0));
        let cfg = h.runs()[0].spec.config.clone();
        let rep = aggregate_score(&h, &cfg, &["i".into()], &ObjectiveSpec::new(60.0)).unwrap();
        assert_eq!((rep.per_instance[0].par, rep.overall), (2.0, 2.0));
    }

    #[test]
    fn relative_improvement_examples() {
        let r = relative_improvement(4.546, 4.010).unwrap();
        assert_eq!(format!("{r:.2}"), "11.79");
        let r = relative_improvement(11.401, 10.246).unwrap();
        assert_eq!(format!("{r:.2}"), "10.13");
        assert_eq!(relative_improvement(3.0, 3.0).unwrap(), 0.0);
        assert!(relative_improvement(0.0, 1.0).is_err());
        assert!(relative_improvement(1.0, 2.0).unwrap() < 0.0);
    }

    #[test]
    fn ecdf_examples() {
        assert_eq!(
            ecdf(&[3.0, 1.0, 2.0]).unwrap(),
            vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]
        );
        assert_eq!(ecdf(&[5.0, 5.0]).unwrap(), vec![(5.0, 1.0)]);
        assert!(ecdf(&[1.0, -0.5]).is_err());
        assert_eq!(ecdf(&[]), Err(ObjectiveError::Empty));
    }
}
