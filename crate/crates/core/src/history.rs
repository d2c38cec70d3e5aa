//! Append-only run history with per-configuration indexes and the
//! incumbent trajectory.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::objective::{par_of, ObjectiveSpec};
use crate::paramspace::{ConfigId, Configuration};
use crate::runner::RunResult;

/// One incumbent change.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    /// Wall-clock seconds since the configurator started.
    pub wall: f64,
    /// Target time charged to the configurator so far (sum of run costs).
    pub charged: f64,
    /// Runs executed so far.
    pub runs_used: u64,
    pub config: Configuration,
    pub config_id: ConfigId,
    pub score: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RunHistory {
    runs: Vec<RunResult>,
    by_config: HashMap<Configuration, Vec<usize>>,
    by_key: HashMap<(Configuration, String, u64), usize>,
    configs: Vec<Configuration>,
    trajectory: Vec<TrajectoryEntry>,
}

impl RunHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, run: RunResult) {
        let i = self.runs.len();
        let cfg = &run.spec.config;
        match self.by_config.get_mut(cfg) {
            Some(v) => v.push(i),
            None => {
                self.configs.push(cfg.clone());
                self.by_config.insert(cfg.clone(), vec![i]);
            }
        }
        self.by_key
            .entry((cfg.clone(), run.spec.instance.clone(), run.spec.seed))
            .or_insert(i);
        self.runs.push(run);
    }

    pub fn runs(&self) -> &[RunResult] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Distinct configurations in order of first appearance.
    pub fn configurations(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn contains_config(&self, config: &Configuration) -> bool {
        self.by_config.contains_key(config)
    }

    pub fn runs_of<'a>(&'a self, config: &Configuration) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.by_config
            .get(config)
            .into_iter()
            .flatten()
            .map(move |&i| &self.runs[i])
    }

    pub fn n_runs_of(&self, config: &Configuration) -> usize {
        self.by_config.get(config).map_or(0, Vec::len)
    }

    /// First recorded run of `config` on `(instance, seed)`.
    pub fn lookup(&self, config: &Configuration, instance: &str, seed: u64) -> Option<&RunResult> {
        self.by_key
            .get(&(config.clone(), instance.to_string(), seed))
            .map(|&i| &self.runs[i])
    }

    /// PAR-k of `config` restricted to the given `(instance, seed)` keys;
    /// `None` if any key has no run.
    pub fn par_on(&self, config: &Configuration, keys: &[(String, u64)], spec: &ObjectiveSpec) -> Option<f64> {
        let runs: Option<Vec<&RunResult>> = keys.iter().map(|(i, s)| self.lookup(config, i, *s)).collect();
        par_of(runs?.into_iter(), spec).ok()
    }

    pub fn trajectory(&self) -> &[TrajectoryEntry] {
        &self.trajectory
    }

    pub(crate) fn record_incumbent(&mut self, entry: TrajectoryEntry) {
        debug_assert!(
            self.trajectory.last().is_none_or(|last| entry.score <= last.score),
            "incumbent score increased"
        );
        self.trajectory.push(entry);
    }
}

/// Rows `elapsed_seconds,config_id,training_par_k,n_runs` with a header line.
///
/// `elapsed_seconds` is the charged target time, which is reproducible for a
/// deterministic target, unlike wall-clock time.
pub fn trajectory_csv(entries: &[TrajectoryEntry]) -> String {
    let mut out = String::from("elapsed_seconds,config_id,training_par_k,n_runs\n");
    for e in entries {
        let _ = writeln!(out, "{:.3},{},{:.6},{}", e.charged, e.config_id, e.score, e.n_runs);
    }
    out
}
