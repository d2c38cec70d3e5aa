use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ConfigureError;
use crate::history::{RunHistory, TrajectoryEntry};
use crate::objective::ObjectiveSpec;
use crate::paramspace::Configuration;
use crate::runner::{Budget, Evaluator, Outcome, RunSpec, ScenarioSpec};

/// The fixed sequence of `(instance, seed)` pairs every configuration is run
/// on, so that incumbent and challengers are compared on matched runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedLadder {
    keys: Vec<(String, u64)>,
}

impl SeedLadder {
    /// `rounds` passes over `instances`, each pass in a seeded shuffled order
    /// with a fresh seed per entry.
    pub fn new(instances: &[String], rounds: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1add_e400_0000);
        let mut keys = Vec::with_capacity(instances.len() * rounds);
        for _ in 0..rounds.max(1) {
            let mut order: Vec<&String> = instances.iter().collect();
            order.shuffle(&mut rng);
            for inst in order {
                keys.push((inst.clone(), rng.random::<u32>() as u64));
            }
        }
        SeedLadder { keys }
    }

    pub fn keys(&self) -> &[(String, u64)] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// State of one configurator run: history, ladder and budget accounting.
pub struct Session<'a, E: Evaluator + ?Sized> {
    evaluator: &'a E,
    pub history: RunHistory,
    pub objective: ObjectiveSpec,
    pub ladder: SeedLadder,
    budget: Budget,
    runs_used: u64,
    charged: f64,
    started: Instant,
}

impl<'a, E: Evaluator + ?Sized> Session<'a, E> {
    pub fn new(evaluator: &'a E, scenario: &ScenarioSpec, budget: Budget, seed: u64) -> Self {
        Session {
            evaluator,
            history: RunHistory::new(),
            objective: scenario.objective_spec(),
            ladder: SeedLadder::new(&scenario.instances, scenario.training_rounds, seed),
            budget,
            runs_used: 0,
            charged: 0.0,
            started: Instant::now(),
        }
    }

    pub fn runs_used(&self) -> u64 {
        self.runs_used
    }

    pub fn charged(&self) -> f64 {
        self.charged
    }

    pub fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn remaining_runs(&self) -> u64 {
        match self.budget {
            Budget::Runs(n) => n.saturating_sub(self.runs_used),
            Budget::WallSeconds(s) => {
                if self.elapsed() < s {
                    u64::MAX
                } else {
                    0
                }
            }
        }
    }

    pub fn exhausted(&self) -> bool {
        self.remaining_runs() == 0
    }

    /// Number of leading ladder entries `config` has runs for.
    pub fn coverage(&self, config: &Configuration) -> usize {
        self.ladder
            .keys()
            .iter()
            .take_while(|(i, s)| self.history.lookup(config, i, *s).is_some())
            .count()
    }

    /// Run `config` on the first `n` ladder entries it lacks, within budget.
    /// Returns whether all `n` are now covered.
    pub fn ensure_prefix(&mut self, config: &Configuration, n: usize) -> Result<bool, ConfigureError> {
        let n = n.min(self.ladder.len());
        let missing: Vec<RunSpec> = self.ladder.keys()[..n]
            .iter()
            .filter(|(i, s)| self.history.lookup(config, i, *s).is_none())
            .map(|(i, s)| RunSpec::new(config.clone(), i.clone(), *s))
            .collect();
        if missing.is_empty() {
            return Ok(true);
        }
        let allowed = self.remaining_runs().min(missing.len() as u64) as usize;
        if allowed == 0 {
            return Ok(false);
        }
        let batch = &missing[..allowed];
        let results = self.evaluator.evaluate(batch);
        for r in results {
            let r = r?;
            self.runs_used += 1;
            self.charged += match r.outcome {
                Outcome::Timeout => self.objective.cutoff,
                _ => r.runtime(),
            };
            self.history.push(r);
        }
        Ok(allowed == missing.len())
    }

    pub fn par_on_prefix(&self, config: &Configuration, n: usize) -> Option<f64> {
        self.history.par_on(config, &self.ladder.keys()[..n], &self.objective)
    }

    pub(crate) fn record(&mut self, config: &Configuration, score: f64, n_runs: usize) {
        let entry = TrajectoryEntry {
            wall: self.elapsed(),
            charged: self.charged,
            runs_used: self.runs_used,
            config: config.clone(),
            config_id: config.id(),
            score,
            n_runs,
        };
        self.history.record_incumbent(entry);
    }
}

/// Race `challenger` against `incumbent` on doubling prefixes of the
/// incumbent's run set; return whichever is incumbent afterwards.
///
/// The challenger is dropped as soon as its PAR-k on the shared runs exceeds
/// the incumbent's, and promoted only after matching the full run set with a
/// strictly lower score.
pub fn intensify<E: Evaluator + ?Sized>(
    session: &mut Session<'_, E>,
    incumbent: &Configuration,
    challenger: &Configuration,
) -> Result<Configuration, ConfigureError> {
    if challenger == incumbent {
        return Ok(incumbent.clone());
    }
    let full = session.coverage(incumbent);
    if full == 0 {
        return Err(ConfigureError::NoIncumbentRuns);
    }
    let mut size = 1;
    loop {
        let size_now = size.min(full);
        if !session.ensure_prefix(challenger, size_now)? {
            return Ok(incumbent.clone());
        }
        let c = session.par_on_prefix(challenger, size_now).expect("challenger covered");
        let i = session.par_on_prefix(incumbent, size_now).expect("incumbent covered");
        if c > i {
            return Ok(incumbent.clone());
        }
        if size_now == full {
            if c < i {
                session.record(challenger, c, full);
                return Ok(challenger.clone());
            }
            return Ok(incumbent.clone());
        }
        size *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paramspace::{parse_space, ParameterSpace};
    use crate::runner::FnEvaluator;

    fn setup(instances: usize) -> (ParameterSpace, ScenarioSpec) {
        let space = parse_space("x integer [0, 10] [5]").unwrap();
        let inst = (0..instances).map(|i| format!("i{i}")).collect();
        (space, ScenarioSpec::new("synthetic", inst, 100.0).unwrap())
    }

    fn x_of(spec: &RunSpec) -> f64 {
        spec.config.get("x").unwrap().as_f64().unwrap()
    }

    #[test]
    fn ladder_is_deterministic_and_covers_instances() {
        let inst: Vec<String> = (0..5).map(|i| i.to_string()).collect();
        let a = SeedLadder::new(&inst, 3, 9);
        assert_eq!(a, SeedLadder::new(&inst, 3, 9));
        assert_eq!(a.len(), 15);
        for round in a.keys().chunks(5) {
            let mut names: Vec<_> = round.iter().map(|k| k.0.clone()).collect();
            names.sort();
            assert_eq!(names, inst);
        }
    }

    #[test]
    fn worse_challenger_rejected_after_one_run() {
        let (space, scenario) = setup(8);
        let eval = FnEvaluator::new(100.0, |s: &RunSpec| (Outcome::Success, 1.0 + x_of(s)));
        let mut session = Session::new(&eval, &scenario, Budget::Runs(1000), 1);
        let inc = space.default_config();
        assert!(session.ensure_prefix(&inc, 8).unwrap());
        let before = session.runs_used();
        let worse = space.parse_config("x=9").unwrap();
        assert_eq!(intensify(&mut session, &inc, &worse).unwrap(), inc);
        assert_eq!(session.runs_used() - before, 1);
        assert_eq!(session.history.n_runs_of(&worse), 1);
    }

    #[test]
    fn dominant_challenger_promoted_with_full_run_set() {
        let (space, scenario) = setup(8);
        let eval = FnEvaluator::new(100.0, |s: &RunSpec| (Outcome::Success, 1.0 + x_of(s)));
        let mut session = Session::new(&eval, &scenario, Budget::Runs(1000), 1);
        let inc = space.default_config();
        session.ensure_prefix(&inc, 8).unwrap();
        let better = space.parse_config("x=1").unwrap();
        assert_eq!(intensify(&mut session, &inc, &better).unwrap(), better);
        assert_eq!(session.history.n_runs_of(&better), 8);
        assert_eq!(session.history.trajectory().len(), 1);
        assert_eq!(session.history.trajectory()[0].score, 2.0);
    }

    #[test]
    fn identical_challenger_keeps_incumbent() {
        let (space, scenario) = setup(4);
        let eval = FnEvaluator::new(100.0, |_: &RunSpec| (Outcome::Success, 1.0));
        let mut session = Session::new(&eval, &scenario, Budget::Runs(1000), 1);
        let inc = space.default_config();
        session.ensure_prefix(&inc, 4).unwrap();
        // Same score on every run: a tie retains the incumbent.
        let twin = space.parse_config("x=2").unwrap();
        assert_eq!(intensify(&mut session, &inc, &twin).unwrap(), inc);
        assert_eq!(intensify(&mut session, &inc, &inc.clone()).unwrap(), inc);
    }

    #[test]
    fn budget_cuts_race_short() {
        let (space, scenario) = setup(8);
        let eval = FnEvaluator::new(100.0, |s: &RunSpec| (Outcome::Success, 1.0 + x_of(s)));
        let mut session = Session::new(&eval, &scenario, Budget::Runs(10), 1);
        let inc = space.default_config();
        session.ensure_prefix(&inc, 8).unwrap();
        let better = space.parse_config("x=0").unwrap();
        assert_eq!(intensify(&mut session, &inc, &better).unwrap(), inc);
        assert_eq!(session.runs_used(), 10);
        assert!(session.exhausted());
    }

    #[test]
    fn challenger_without_incumbent_runs_is_an_error() {
        let (space, scenario) = setup(1);
        let eval = FnEvaluator::new(100.0, |_: &RunSpec| (Outcome::Success, 1.0));
        let mut session = Session::new(&eval, &scenario, Budget::Runs(10), 1);
        let c = space.parse_config("x=1").unwrap();
        assert!(matches!(
            intensify(&mut session, &space.default_config(), &c),
            Err(ConfigureError::NoIncumbentRuns)
        ));
    }
}
