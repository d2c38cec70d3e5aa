use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::template::{CommandTemplate, TemplateError};
use crate::objective::ObjectiveSpec;

/// Where the per-run cost comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveSource {
    /// user + system CPU seconds of the target process.
    #[default]
    CpuTime,
    /// The last `RESULT: <decimal>` line the target prints on stdout.
    Reported,
}

/// How much target execution a configurator may spend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Runs(u64),
    WallSeconds(f64),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid scenario file: {0}")]
    Format(String),
    #[error("command template: {0}")]
    Template(#[from] TemplateError),
    #[error("instance list is empty")]
    NoInstances,
    #[error("cutoff must be a positive number of seconds, got {0}")]
    Cutoff(f64),
    #[error("par_factor must be at least 1")]
    ParFactor,
    #[error("jobs must be at least 1")]
    Jobs,
    #[error("wall_guard must be at least 1, got {0}")]
    WallGuard(f64),
    #[error("budget must allow at least one run")]
    Budget,
    #[error("training_rounds must be at least 1")]
    Rounds,
    #[error("canary instance `{0}` is not in the instance list")]
    UnknownCanary(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    space: PathBuf,
    command: String,
    instances: Vec<String>,
    cutoff: f64,
    #[serde(default = "default_par")]
    par_factor: u32,
    #[serde(default)]
    objective: ObjectiveSource,
    #[serde(default = "one")]
    jobs: usize,
    #[serde(default = "default_guard")]
    wall_guard: f64,
    budget: Budget,
    canary: Option<String>,
    #[serde(default)]
    env_scrub: Vec<String>,
    #[serde(default = "one")]
    training_rounds: usize,
    working_dir: Option<PathBuf>,
}

fn default_par() -> u32 {
    10
}

fn one() -> usize {
    1
}

fn default_guard() -> f64 {
    2.0
}

/// A complete tuning job.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub space_file: PathBuf,
    pub command: CommandTemplate,
    pub instances: Vec<String>,
    pub cutoff: f64,
    pub par_factor: u32,
    pub objective: ObjectiveSource,
    /// Maximum simultaneous target processes; also the load tag of every run.
    pub jobs: usize,
    pub wall_guard: f64,
    pub budget: Budget,
    pub canary: Option<String>,
    /// Environment variables removed before spawning; a trailing `*` matches a prefix.
    pub env_scrub: Vec<String>,
    /// Passes over the instance list that make up an incumbent's run set.
    pub training_rounds: usize,
    pub working_dir: PathBuf,
}

impl ScenarioSpec {
    /// Scenario with default knobs; mostly useful in code and tests.
    pub fn new(command: &str, instances: Vec<String>, cutoff: f64) -> Result<Self, ScenarioError> {
        let spec = ScenarioSpec {
            space_file: PathBuf::new(),
            command: CommandTemplate::parse(command)?,
            instances,
            cutoff,
            par_factor: default_par(),
            objective: ObjectiveSource::CpuTime,
            jobs: 1,
            wall_guard: default_guard(),
            budget: Budget::Runs(1000),
            canary: None,
            env_scrub: Vec::new(),
            training_rounds: 1,
            working_dir: PathBuf::from("."),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// Parse a scenario; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let raw: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Format(e.to_string()))?;
        let working_dir = match raw.working_dir {
            Some(d) if d.is_absolute() => d,
            Some(d) => base_dir.join(d),
            None => base_dir.to_path_buf(),
        };
        let space_file = if raw.space.is_absolute() {
            raw.space
        } else {
            base_dir.join(raw.space)
        };
        let spec = ScenarioSpec {
            space_file,
            command: CommandTemplate::parse(&raw.command)?,
            instances: raw.instances,
            cutoff: raw.cutoff,
            par_factor: raw.par_factor,
            objective: raw.objective,
            jobs: raw.jobs,
            wall_guard: raw.wall_guard,
            budget: raw.budget,
            canary: raw.canary,
            env_scrub: raw.env_scrub,
            training_rounds: raw.training_rounds,
            working_dir,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.instances.is_empty() {
            return Err(ScenarioError::NoInstances);
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(ScenarioError::Cutoff(self.cutoff));
        }
        if self.par_factor < 1 {
            return Err(ScenarioError::ParFactor);
        }
        if self.jobs < 1 {
            return Err(ScenarioError::Jobs);
        }
        if !(self.wall_guard >= 1.0 && self.wall_guard.is_finite()) {
            return Err(ScenarioError::WallGuard(self.wall_guard));
        }
        if self.training_rounds < 1 {
            return Err(ScenarioError::Rounds);
        }
        match self.budget {
            Budget::Runs(n) if n >= 1 => {}
            Budget::WallSeconds(s) if s > 0.0 => {}
            _ => return Err(ScenarioError::Budget),
        }
        if let Some(c) = &self.canary {
            if !self.instances.contains(c) {
                return Err(ScenarioError::UnknownCanary(c.clone()));
            }
        }
        Ok(())
    }

    pub fn objective_spec(&self) -> ObjectiveSpec {
        ObjectiveSpec {
            cutoff: self.cutoff,
            k: self.par_factor,
        }
    }

    /// The instance used for crash scans: the declared canary or the first instance.
    pub fn canary_instance(&self) -> &str {
        self.canary.as_deref().unwrap_or(&self.instances[0])
    }

    /// Same scenario at a different concurrency limit.
    pub fn with_jobs(&self, jobs: usize) -> Self {
        ScenarioSpec {
            jobs: jobs.max(1),
            ..self.clone()
        }
    }

    pub(crate) fn scrubbed(&self, key: &str) -> bool {
        self.env_scrub.iter().any(|pat| match pat.strip_suffix('*') {
            Some(prefix) => key.starts_with(prefix),
            None => key == pat,
        })
    }
}
