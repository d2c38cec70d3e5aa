use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ReportError;
use crate::history::{trajectory_csv, TrajectoryEntry};
use crate::objective::{ecdf, ObjectiveSpec};
use crate::runner::RunResult;

/// Inputs of one plot-data file.
#[derive(Debug, Clone, Copy)]
pub enum PlotSource<'a> {
    /// Runtime distribution of one configuration; failed runs count at the penalty.
    Ecdf {
        runs: &'a [&'a RunResult],
        objective: &'a ObjectiveSpec,
    },
    /// Per-run times of two configurations matched on `(instance, seed)`.
    Scatter {
        default: &'a [&'a RunResult],
        configured: &'a [&'a RunResult],
        objective: &'a ObjectiveSpec,
    },
    Trajectory(&'a [TrajectoryEntry]),
}

/// File content for `source`.
pub fn plot_data(source: &PlotSource<'_>) -> Result<String, ReportError> {
    match *source {
        PlotSource::Ecdf { runs, objective } => {
            let times: Vec<f64> = runs.iter().map(|r| objective.run_cost(r)).collect();
            let mut s = String::from("runtime,probability\n");
            for (t, p) in ecdf(&times)? {
                let _ = writeln!(s, "{t},{p:.4}");
            }
            Ok(s)
        }
        PlotSource::Scatter {
            default,
            configured,
            objective,
        } => {
            let mut by_key: HashMap<(&str, u64), &RunResult> = HashMap::new();
            for r in configured {
                by_key.insert((r.spec.instance.as_str(), r.spec.seed), r);
            }
            if by_key.len() != default.len() || default.len() != configured.len() {
                let unmatched = default
                    .iter()
                    .find(|r| !by_key.contains_key(&(r.spec.instance.as_str(), r.spec.seed)))
                    .or_else(|| configured.first());
                return Err(match unmatched {
                    Some(r) => ReportError::Unmatched {
                        instance: r.spec.instance.clone(),
                        seed: r.spec.seed,
                    },
                    None => ReportError::EmptyTable,
                });
            }
            let mut rows = Vec::with_capacity(default.len());
            for d in default {
                let c = by_key
                    .get(&(d.spec.instance.as_str(), d.spec.seed))
                    .ok_or_else(|| ReportError::Unmatched {
                        instance: d.spec.instance.clone(),
                        seed: d.spec.seed,
                    })?;
                rows.push((d.spec.instance.clone(), d.spec.seed, objective.run_cost(d), objective.run_cost(c)));
            }
            rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut s = String::from("instance,seed,default,configured\n");
            for (i, seed, d, c) in rows {
                let _ = writeln!(s, "{i},{seed},{d},{c}");
            }
            Ok(s)
        }
        PlotSource::Trajectory(entries) => Ok(trajectory_csv(entries)),
    }
}

/// Write the data for `source` to `path`.
pub fn emit_plot_data(source: &PlotSource<'_>, path: &Path) -> Result<(), ReportError> {
    let content = plot_data(source)?;
    fs::write(path, content)?;
    Ok(())
}
