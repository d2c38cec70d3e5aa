//! Greedy ablation: walk from a default to a target configuration one
//! parameter change at a time, always taking the change that scores best,
//! and attribute the total improvement to the individual changes.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::objective::{par_score, ObjectiveSpec};
use crate::paramspace::{config_diff, ConfigError, Configuration, DiffEntry, ParameterSpace, Value};
use crate::runner::{Evaluator, HarnessError, RunSpec, ScenarioSpec};

/// Runs per (configuration, instance) of one ablation evaluation.
pub const DEFAULT_RUNS_PER_EVAL: usize = 10;

#[derive(Debug, Error)]
pub enum AblationError {
    #[error("current and target configurations are identical")]
    NothingToChange,
    #[error("no valid single change leads towards the target after {} steps", .0.steps.len())]
    Stuck(Box<AblationPath>),
    #[error("runs per evaluation must be at least 1")]
    NoRuns,
    #[error("no instances to evaluate on")]
    NoInstances,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// One candidate modification: `parameter` set to its target value, with any
/// parameters whose activity changes as a consequence.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationCandidate {
    pub parameter: String,
    pub config: Configuration,
}

/// Single-parameter moves from `current` towards `target`, ordered by
/// parameter name; moves that violate a forbidden clause are left out.
pub fn ablation_candidates(
    space: &ParameterSpace,
    current: &Configuration,
    target: &Configuration,
) -> Result<Vec<AblationCandidate>, AblationError> {
    let diff = config_diff(current, target)?;
    if diff.is_empty() {
        return Err(AblationError::NothingToChange);
    }
    let mut out = Vec::new();
    for d in diff {
        let Some(to) = d.right else { continue };
        let mut values = current.values().clone();
        values.insert(d.name.clone(), to.clone());
        let repaired = space.repair(&values, |p| target.get(&p.name).cloned().unwrap_or_else(|| p.default.clone()));
        if repaired.get(&d.name) != Some(&to) {
            // Parent not yet at its target value: the change would not stick.
            continue;
        }
        match space.validate_config(&repaired) {
            Ok(config) => out.push(AblationCandidate {
                parameter: d.name,
                config,
            }),
            Err(ConfigError::Forbidden(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationOptions {
    /// Instances to evaluate on; empty means all of the scenario's.
    pub instances: Vec<String>,
    pub runs_per_eval: usize,
    pub seed: u64,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions {
            instances: Vec::new(),
            runs_per_eval: DEFAULT_RUNS_PER_EVAL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationStep {
    /// 1-based distance from the default.
    pub round: usize,
    pub parameter: String,
    /// `None` when inactive.
    pub from: Option<Value>,
    pub to: Option<Value>,
    /// Other parameters whose value or activity changed with this step.
    pub side_effects: Vec<DiffEntry>,
    pub score: f64,
    /// Percent of the total improvement; may exceed 100 or be negative.
    /// When the target is not better than the default this is the raw score
    /// delta instead.
    pub portion: f64,
    /// Every candidate evaluated this round, by parameter name.
    pub round_scores: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationPath {
    pub default_score: f64,
    pub target_score: f64,
    pub steps: Vec<AblationStep>,
    pub instances: Vec<String>,
    pub runs_per_eval: usize,
    /// Set when the target did not beat the default; portions are then unnormalized.
    pub target_not_better: bool,
}

struct Scorer<'a, E: Evaluator + ?Sized> {
    evaluator: &'a E,
    objective: ObjectiveSpec,
    keys: Vec<(String, u64)>,
    cache: HashMap<Configuration, f64>,
}

impl<E: Evaluator + ?Sized> Scorer<'_, E> {
    /// Scores of `configs`, evaluating uncached ones in one batch.
    fn scores(&mut self, configs: &[&Configuration]) -> Result<Vec<f64>, AblationError> {
        let mut fresh: Vec<&Configuration> = configs.iter().copied().filter(|c| !self.cache.contains_key(*c)).collect();
        fresh.dedup();
        let specs: Vec<RunSpec> = fresh
            .iter()
            .flat_map(|c| self.keys.iter().map(|(i, s)| RunSpec::new((*c).clone(), i.clone(), *s)))
            .collect();
        let mut results = Vec::with_capacity(specs.len());
        for r in self.evaluator.evaluate(&specs) {
            results.push(r?);
        }
        for (c, chunk) in fresh.iter().zip(results.chunks(self.keys.len())) {
            let score = par_score(chunk, &self.objective).expect("non-empty run list");
            self.cache.insert((*c).clone(), score);
        }
        Ok(configs.iter().map(|c| self.cache[*c]).collect())
    }
}

/// Greedy path from `default` to `target`.
///
/// Every configuration is scored by PAR-k over the same `(instance, seed)`
/// pairs: `runs_per_eval` seeds per instance.
pub fn ablation_path<E: Evaluator + ?Sized>(
    evaluator: &E,
    scenario: &ScenarioSpec,
    space: &ParameterSpace,
    default: &Configuration,
    target: &Configuration,
    opts: &AblationOptions,
) -> Result<AblationPath, AblationError> {
    if opts.runs_per_eval == 0 {
        return Err(AblationError::NoRuns);
    }
    let instances = if opts.instances.is_empty() {
        scenario.instances.clone()
    } else {
        opts.instances.clone()
    };
    if instances.is_empty() {
        return Err(AblationError::NoInstances);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let keys = instances
        .iter()
        .flat_map(|i| (0..opts.runs_per_eval).map(|_| i.clone()).collect::<Vec<_>>())
        .map(|i| (i, rng.random::<u32>() as u64))
        .collect();
    let mut scorer = Scorer {
        evaluator,
        objective: scenario.objective_spec(),
        keys,
        cache: HashMap::new(),
    };
    let ends = scorer.scores(&[default, target])?;
    let mut path = AblationPath {
        default_score: ends[0],
        target_score: ends[1],
        steps: Vec::new(),
        instances,
        runs_per_eval: opts.runs_per_eval,
        target_not_better: ends[1] >= ends[0],
    };
    if path.target_not_better {
        log::warn!(
            "target scores {} against default {}; portions are unnormalized",
            path.target_score,
            path.default_score
        );
    }

    let mut current = default.clone();
    let mut before = path.default_score;
    while current != *target {
        let candidates = ablation_candidates(space, &current, target)?;
        if candidates.is_empty() {
            finish_portions(&mut path);
            return Err(AblationError::Stuck(Box::new(path)));
        }
        let configs: Vec<&Configuration> = candidates.iter().map(|c| &c.config).collect();
        let scores = scorer.scores(&configs)?;
        // Candidates are in parameter-name order, so the first minimum wins ties.
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s < scores[best] {
                best = i;
            }
        }
        let chosen = &candidates[best];
        let diff = config_diff(&current, &chosen.config)?;
        let (main, side_effects): (Vec<DiffEntry>, Vec<DiffEntry>) =
            diff.into_iter().partition(|d| d.name == chosen.parameter);
        let main = main.into_iter().next().expect("chosen parameter changes");
        path.steps.push(AblationStep {
            round: path.steps.len() + 1,
            parameter: chosen.parameter.clone(),
            from: main.left,
            to: main.right,
            side_effects,
            score: scores[best],
            portion: before - scores[best],
            round_scores: candidates.iter().map(|c| c.parameter.clone()).zip(scores.iter().copied()).collect(),
        });
        before = scores[best];
        current = chosen.config.clone();
    }
    finish_portions(&mut path);
    Ok(path)
}

/// Turn the raw per-step deltas stored in `portion` into percentages, unless
/// there is no improvement to divide by.
fn finish_portions(path: &mut AblationPath) {
    if path.target_not_better {
        return;
    }
    let total = path.default_score - path.target_score;
    for s in &mut path.steps {
        s.portion = 100.0 * s.portion / total;
    }
}

fn show(v: &Option<Value>) -> String {
    v.as_ref().map_or_else(|| "inactive".to_string(), |v| v.to_string())
}

/// Text table of the path.
pub fn render_path(path: &AblationPath) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "default PAR: {:.4}  target PAR: {:.4}", path.default_score, path.target_score);
    if path.target_not_better {
        s.push_str("warning: target is not better than default; portions are raw PAR changes\n");
    }
    let rows: Vec<[String; 5]> = path
        .steps
        .iter()
        .map(|st| {
            [
                st.round.to_string(),
                st.parameter.clone(),
                show(&st.from),
                show(&st.to),
                if path.target_not_better {
                    format!("{:+.4}", -st.portion)
                } else {
                    format!("{:.1}%", st.portion)
                },
            ]
        })
        .collect();
    let header = ["distance from default", "parameter modified", "from", "to", "approx. portion of rel. impr."];
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: [&str; 5]| {
        let mut l = String::new();
        for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                l.push_str("  ");
            }
            let _ = write!(l, "{c:<w$}");
        }
        l.trim_end().to_string() + "\n"
    };
    s.push_str(&line(header));
    for r in &rows {
        s.push_str(&line([&r[0], &r[1], &r[2], &r[3], &r[4]]));
    }
    s
}

/// Machine-readable path rows.
pub fn path_csv(path: &AblationPath) -> String {
    let mut s = String::from("distance_from_default,parameter,from,to,par_k,portion_percent\n");
    for st in &path.steps {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{:.3}",
            st.round,
            st.parameter,
            show(&st.from),
            show(&st.to),
            st.score,
            st.portion
        );
    }
    s
}
