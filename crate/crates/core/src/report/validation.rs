use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ReportError;
use crate::objective::{par_score, relative_improvement, ObjectiveSpec};
use crate::paramspace::Configuration;
use crate::runner::{Evaluator, ProcessEvaluator, RunResult, RunSpec, ScenarioSpec};

/// Label of the default configuration's row.
pub const DEFAULT_LABEL: &str = "default";

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub label: String,
    pub config: Configuration,
    pub config_id: String,
    /// Pooled PAR-k; `None` when every run failed in the harness.
    pub overall: Option<f64>,
    /// PAR-k per instance, in table instance order.
    pub per_instance: Vec<Option<f64>>,
    /// Harness errors per instance, excluded from the scores.
    pub harness_errors: Vec<usize>,
    pub n_runs: usize,
    /// Against the default row's overall score.
    pub rel_impr: Option<f64>,
}

/// Validation scores at one load level; the first row is the default.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationTable {
    pub load: usize,
    pub runs_per_instance: usize,
    pub instances: Vec<String>,
    pub rows: Vec<ValidationRow>,
}

impl ValidationTable {
    pub fn default_row(&self) -> &ValidationRow {
        &self.rows[0]
    }
}

/// Matched `(instance, seed)` pairs shared by every configuration.
pub fn validation_keys(instances: &[String], runs_per_instance: usize, seed: u64) -> Vec<(String, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    instances
        .iter()
        .flat_map(|i| std::iter::repeat_n(i, runs_per_instance))
        .map(|i| (i.clone(), rng.random::<u32>() as u64))
        .collect()
}

/// Labelled configurations with the default first and duplicates removed.
fn row_set(default: &Configuration, configs: &[(String, Configuration)]) -> Vec<(String, Configuration)> {
    let mut out: Vec<(String, Configuration)> = vec![(DEFAULT_LABEL.to_string(), default.clone())];
    for (label, c) in configs {
        if !out.iter().any(|(_, o)| o == c) {
            out.push((label.clone(), c.clone()));
        }
    }
    out
}

/// Validate on the real target at concurrency limit `load`.
pub fn validate_configurations(
    scenario: &ScenarioSpec,
    default: &Configuration,
    configs: &[(String, Configuration)],
    runs_per_instance: usize,
    load: usize,
    seed: u64,
) -> Result<(ValidationTable, Vec<(String, RunResult)>), ReportError> {
    let evaluator = ProcessEvaluator::new(scenario.with_jobs(load));
    validate_with(&evaluator, scenario, default, configs, runs_per_instance, load, seed)
}

/// Validate with any evaluator; its runs must carry load tag `load`.
///
/// Returns the table and the labelled runs it was computed from.
pub fn validate_with<E: Evaluator + ?Sized>(
    evaluator: &E,
    scenario: &ScenarioSpec,
    default: &Configuration,
    configs: &[(String, Configuration)],
    runs_per_instance: usize,
    load: usize,
    seed: u64,
) -> Result<(ValidationTable, Vec<(String, RunResult)>), ReportError> {
    if runs_per_instance == 0 {
        return Err(ReportError::InvalidCampaign("validation runs must be at least 1".into()));
    }
    let rows = row_set(default, configs);
    let keys = validation_keys(&scenario.instances, runs_per_instance, seed);
    let specs: Vec<RunSpec> = rows
        .iter()
        .flat_map(|(_, c)| keys.iter().map(|(i, s)| RunSpec::new(c.clone(), i.clone(), *s)))
        .collect();
    let mut runs = Vec::with_capacity(specs.len());
    let mut errors: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (spec, r) in specs.iter().zip(evaluator.evaluate(&specs)) {
        let label = &rows[specs_row(&rows, &spec.config)].0;
        match r {
            Ok(r) => runs.push((label.clone(), r)),
            Err(e) => {
                log::warn!("harness error for {label} on {}: {e}", spec.instance);
                *errors.entry((label.clone(), spec.instance.clone())).or_default() += 1;
            }
        }
    }
    let table = table_from_runs(
        &scenario.objective_spec(),
        &scenario.instances,
        load,
        runs_per_instance,
        &rows,
        &runs,
        &errors,
    )?;
    Ok((table, runs))
}

fn specs_row(rows: &[(String, Configuration)], c: &Configuration) -> usize {
    rows.iter().position(|(_, r)| r == c).expect("spec built from rows")
}

/// Build a table from labelled runs; the first of `rows` is the default.
///
/// `errors` counts harness errors per `(label, instance)`.
pub fn table_from_runs(
    objective: &ObjectiveSpec,
    instances: &[String],
    load: usize,
    runs_per_instance: usize,
    rows: &[(String, Configuration)],
    runs: &[(String, RunResult)],
    errors: &BTreeMap<(String, String), usize>,
) -> Result<ValidationTable, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyTable);
    }
    let mut grouped: HashMap<(&str, &str), Vec<RunResult>> = HashMap::new();
    for (label, r) in runs {
        if r.load != load {
            return Err(ReportError::MixedLoad {
                expected: load,
                found: r.load,
            });
        }
        grouped
            .entry((label.as_str(), r.spec.instance.as_str()))
            .or_default()
            .push(r.clone());
    }
    let mut out_rows = Vec::with_capacity(rows.len());
    for (label, config) in rows {
        let mut pooled = Vec::new();
        let mut per_instance = Vec::with_capacity(instances.len());
        let mut harness_errors = Vec::with_capacity(instances.len());
        for inst in instances {
            let rs = grouped.get(&(label.as_str(), inst.as_str()));
            per_instance.push(rs.map(|rs| par_score(rs, objective)).transpose()?);
            pooled.extend(rs.into_iter().flatten().cloned());
            harness_errors.push(errors.get(&(label.clone(), inst.clone())).copied().unwrap_or(0));
        }
        out_rows.push(ValidationRow {
            label: label.clone(),
            config: config.clone(),
            config_id: config.id().0,
            overall: if pooled.is_empty() {
                None
            } else {
                Some(par_score(&pooled, objective)?)
            },
            per_instance,
            harness_errors,
            n_runs: pooled.len(),
            rel_impr: None,
        });
    }
    let default = out_rows[0].overall;
    for row in &mut out_rows {
        row.rel_impr = match (default, row.overall) {
            (Some(d), Some(c)) => relative_improvement(d, c).ok(),
            _ => None,
        };
    }
    out_rows[0].rel_impr = default.map(|_| 0.0);
    Ok(ValidationTable {
        load,
        runs_per_instance,
        instances: instances.to_vec(),
        rows: out_rows,
    })
}

fn num(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.decimals$}"))
}

fn rel(d: Option<f64>, c: Option<f64>) -> Option<f64> {
    match (d, c) {
        (Some(d), Some(c)) => relative_improvement(d, c).ok(),
        _ => None,
    }
}

/// Long-form rows `load,label,config_id,instance,par_k,rel_impr_percent,n_runs,harness_errors`;
/// instance `ALL` carries the pooled score.
pub fn table_csv(table: &ValidationTable) -> String {
    let mut s = String::from("load,label,config_id,instance,par_k,rel_impr_percent,n_runs,harness_errors\n");
    let default = table.default_row();
    for row in &table.rows {
        for (j, inst) in table.instances.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                table.load,
                row.label,
                row.config_id,
                inst,
                num(row.per_instance[j], 6),
                num(rel(default.per_instance[j], row.per_instance[j]), 4),
                table.runs_per_instance - row.harness_errors[j],
                row.harness_errors[j]
            );
        }
        let _ = writeln!(
            s,
            "{},{},{},ALL,{},{},{},{}",
            table.load,
            row.label,
            row.config_id,
            num(row.overall, 6),
            num(row.rel_impr, 4),
            row.n_runs,
            row.harness_errors.iter().sum::<usize>()
        );
    }
    s
}

/// Text table: one line per instance plus an overall line; for every
/// configured row the columns are its PAR-k and relative improvement,
/// after the default's PAR-k.
pub fn render_table(table: &ValidationTable) -> String {
    let mut header = vec!["instance".to_string(), DEFAULT_LABEL.to_string()];
    for row in &table.rows[1..] {
        header.push(row.label.clone());
        header.push("rel. impr.".to_string());
    }
    let mut lines: Vec<Vec<String>> = vec![header];
    let scores = |j: Option<usize>| -> Vec<String> {
        let pick = |row: &ValidationRow| j.map_or(row.overall, |j| row.per_instance[j]);
        let d = pick(table.default_row());
        let mut cells = vec![num(d, 3)];
        for row in &table.rows[1..] {
            let c = pick(row);
            cells.push(num(c, 3));
            cells.push(rel(d, c).map_or_else(|| "NA".to_string(), |r| format!("{r:.2}%")));
        }
        cells
    };
    for (j, inst) in table.instances.iter().enumerate() {
        let mut l = vec![inst.clone()];
        l.extend(scores(Some(j)));
        lines.push(l);
    }
    let mut l = vec!["overall".to_string()];
    l.extend(scores(None));
    lines.push(l);

    let cols = lines[0].len();
    let widths: Vec<usize> = (0..cols).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
    let mut s = format!(
        "load {}, {} runs per instance, PAR-k in seconds\n",
        table.load, table.runs_per_instance
    );
    for l in &lines {
        let mut out = String::new();
        for (c, cell) in l.iter().enumerate() {
            if c == 0 {
                let _ = write!(out, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(out, "  {cell:>w$}", w = widths[c]);
            }
        }
        s.push_str(out.trim_end());
        s.push('\n');
    }
    let errors: usize = table.rows.iter().flat_map(|r| &r.harness_errors).sum();
    if errors > 0 {
        let _ = writeln!(s, "harness errors excluded: {errors}");
    }
    for row in &table.rows[1..] {
        let _ = writeln!(s, "{} = {}", row.label, row.config_id);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub rank: usize,
    pub label: String,
    pub config_id: String,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub rows: Vec<RankedRow>,
    pub default_score: Option<f64>,
    pub load: usize,
}

/// Rows by ascending overall PAR-k, ties by config id, unscored rows last.
pub fn rank_by_validation(table: &ValidationTable, top: usize) -> Ranking {
    let mut order: Vec<&ValidationRow> = table.rows.iter().collect();
    order.sort_by(|a, b| {
        let key = |r: &ValidationRow| r.overall.unwrap_or(f64::INFINITY);
        key(a)
            .total_cmp(&key(b))
            .then_with(|| a.config_id.cmp(&b.config_id))
            .then_with(|| a.label.cmp(&b.label))
    });
    Ranking {
        rows: order
            .into_iter()
            .take(top)
            .enumerate()
            .map(|(i, r)| RankedRow {
                rank: i + 1,
                label: r.label.clone(),
                config_id: r.config_id.clone(),
                score: r.overall,
            })
            .collect(),
        default_score: table.default_row().overall,
        load: table.load,
    }
}

pub fn ranking_csv(ranking: &Ranking) -> String {
    let mut s = String::from("rank,label,config_id,par_k,default_par_k\n");
    for r in &ranking.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.rank,
            r.label,
            r.config_id,
            num(r.score, 6),
            num(ranking.default_score, 6)
        );
    }
    s
}
