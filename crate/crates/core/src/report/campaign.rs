use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::ReportError;
use crate::configure::{random_search, smbo_configure, ConfiguratorResult, SmboOptions};
use crate::history::trajectory_csv;
use crate::paramspace::ParameterSpace;
use crate::runner::{write_records, Budget, Evaluator, RunRecord, ScenarioSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Smbo(SmboOptions),
    Random,
}

/// A set of independent configurator runs plus their validation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub runs: usize,
    pub master_seed: u64,
    /// Validation runs per (configuration, instance).
    pub validation_runs: usize,
    /// Concurrency limits to validate at.
    pub load_levels: Vec<usize>,
    pub strategy: Strategy,
    pub budget: Budget,
    /// Configurator runs executed at the same time.
    pub parallel: usize,
}

impl CampaignSpec {
    pub fn new(budget: Budget, master_seed: u64) -> Self {
        CampaignSpec {
            runs: 25,
            master_seed,
            validation_runs: 100,
            load_levels: vec![1],
            strategy: Strategy::Smbo(SmboOptions::standard()),
            budget,
            parallel: 1,
        }
    }

    pub fn check(&self) -> Result<(), ReportError> {
        if self.runs == 0 || self.validation_runs == 0 || self.parallel == 0 {
            return Err(ReportError::InvalidCampaign("counts must be at least 1".into()));
        }
        if self.load_levels.is_empty() || self.load_levels.contains(&0) {
            return Err(ReportError::InvalidCampaign("load levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seed of configurator run `index` (0-based): SplitMix64 applied to
/// `master + (index + 1) * 0x9E3779B97F4A7C15`, wrapping.
pub fn derive_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug)]
pub struct CampaignRun {
    pub index: usize,
    pub seed: u64,
    /// Failure message when the configurator run aborted.
    pub outcome: Result<ConfiguratorResult, String>,
}

#[derive(Debug)]
pub struct Campaign {
    pub runs: Vec<CampaignRun>,
    /// Index into `runs` of the lowest training score; ties go to the earlier run.
    pub best_training: Option<usize>,
}

impl Campaign {
    pub fn best(&self) -> Option<&ConfiguratorResult> {
        self.best_training.and_then(|i| self.runs[i].outcome.as_ref().ok())
    }

    /// Successful runs with their labels `run-01`, `run-02`, ...
    pub fn incumbents(&self) -> Vec<(String, &ConfiguratorResult)> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|res| (run_label(r.index), res)))
            .collect()
    }

    /// One row per configurator run.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("run,seed,status,config_id,training_par_k,n_runs,runs_used,best_training\n");
        for r in &self.runs {
            let best = self.best_training == Some(r.index);
            match &r.outcome {
                Ok(res) => {
                    let n_runs = res.trajectory().last().map_or(0, |t| t.n_runs);
                    let _ = writeln!(
                        s,
                        "{},{},ok,{},{:.6},{},{},{}",
                        run_label(r.index),
                        r.seed,
                        res.incumbent.id(),
                        res.training_score,
                        n_runs,
                        res.runs_used,
                        best
                    );
                }
                Err(e) => {
                    let msg = e.replace([',', '\n'], " ");
                    let _ = writeln!(s, "{},{},failed: {msg},,,,,false", run_label(r.index), r.seed);
                }
            }
        }
        s
    }
}

pub fn run_label(index: usize) -> String {
    format!("run-{:02}", index + 1)
}

/// Execute `spec.runs` configurator runs with seeds from [`derive_seed`].
///
/// A failing run is recorded and the others continue.
pub fn run_campaign<E: Evaluator + ?Sized>(
    evaluator: &E,
    scenario: &ScenarioSpec,
    space: &ParameterSpace,
    spec: &CampaignSpec,
) -> Result<Campaign, ReportError> {
    spec.check()?;
    let one = |index: usize| -> CampaignRun {
        let seed = derive_seed(spec.master_seed, index);
        let outcome = match &spec.strategy {
            Strategy::Smbo(opts) => smbo_configure(evaluator, scenario, space, spec.budget, seed, opts),
            Strategy::Random => random_search(evaluator, scenario, space, spec.budget, seed),
        };
        if let Err(e) = &outcome {
            log::warn!("configurator run {} failed: {e}", run_label(index));
        }
        CampaignRun {
            index,
            seed,
            outcome: outcome.map_err(|e| e.to_string()),
        }
    };

    let runs: Vec<CampaignRun> = if spec.parallel <= 1 {
        (0..spec.runs).map(one).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<CampaignRun>>> = (0..spec.runs).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..spec.parallel.min(spec.runs) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= spec.runs {
                        break;
                    }
                    let r = one(i);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock").expect("every run filled"))
            .collect()
    };

    let best_training = runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|res| (r.index, res.training_score)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    Ok(Campaign { runs, best_training })
}

/// Persist `run-XX/{trajectory.csv, incumbent.cfg, runs.jsonl}` and `summary.csv`.
pub fn write_campaign(campaign: &Campaign, dir: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(dir)?;
    for (label, res) in campaign.incumbents() {
        let run_dir = dir.join(&label);
        fs::create_dir_all(&run_dir)?;
        fs::write(run_dir.join("trajectory.csv"), trajectory_csv(res.trajectory()))?;
        fs::write(run_dir.join("incumbent.cfg"), format!("{}\n", res.incumbent.canonical()))?;
        let records: Vec<RunRecord> = res.history.runs().iter().map(|r| RunRecord::from_result(r, None)).collect();
        write_records(fs::File::create(run_dir.join("runs.jsonl"))?, &records)?;
    }
    fs::write(dir.join("summary.csv"), campaign.summary_csv())?;
    Ok(())
}
