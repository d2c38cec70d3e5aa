//! Space hardening: sample many configurations, run them on a canary
//! instance, and mine the crashes for forbidden clauses and domain cuts.
//!
//! The mining procedure is a reconstruction: single assignments and pairs of
//! categorical assignments become candidate forbidden clauses, and every
//! numeric parameter gets an upper and a lower threshold cut. Proposals are
//! advisory; [`apply_proposals`] produces a patched space for review.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::paramspace::{
    render_space, Configuration, Domain, ForbiddenClause, OverConstrained, ParameterSpace, SpaceError, Value,
};
use crate::runner::{Evaluator, HarnessError, Outcome, RunSpec};

/// Samples drawn by [`crash_scan`] when no count is given.
pub const DEFAULT_SCAN_SIZE: usize = 100_000;

/// Runs submitted to the evaluator at once during a scan.
const SCAN_CHUNK: usize = 1024;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("scan size must be at least 1")]
    EmptyScan,
    #[error("no crashing configurations to generalize")]
    NoCrashes,
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    OverConstrained(#[from] OverConstrained),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub samples: usize,
    /// Upper bound on the non-crashing configurations retained (uniform reservoir).
    pub keep_non_crashing: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            samples: DEFAULT_SCAN_SIZE,
            keep_non_crashing: 20_000,
        }
    }
}

/// Outcome of a crash scan. Timed-out samples are in neither list.
#[derive(Debug, Clone)]
pub struct CrashReport {
    pub sampled: usize,
    pub crashing: Vec<Configuration>,
    pub non_crashing: Vec<Configuration>,
    pub n_non_crashing: usize,
    pub canary: String,
}

impl CrashReport {
    pub fn crash_rate(&self) -> f64 {
        self.crashing.len() as f64 / self.sampled as f64
    }
}

/// Run `opts.samples` seeded random configurations once each on the canary.
pub fn crash_scan<E: Evaluator + ?Sized>(
    evaluator: &E,
    space: &ParameterSpace,
    canary: &str,
    opts: &ScanOptions,
    seed: u64,
) -> Result<CrashReport, RefineError> {
    if opts.samples == 0 {
        return Err(RefineError::EmptyScan);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7265_7365_7276_6f69);
    let mut report = CrashReport {
        sampled: opts.samples,
        crashing: Vec::new(),
        non_crashing: Vec::new(),
        n_non_crashing: 0,
        canary: canary.to_string(),
    };
    let mut drawn = 0;
    while drawn < opts.samples {
        let n = SCAN_CHUNK.min(opts.samples - drawn);
        let mut specs = Vec::with_capacity(n);
        for _ in 0..n {
            let config = space.sample_with(&mut rng)?;
            specs.push(RunSpec::new(config, canary, rng.random::<u32>() as u64));
        }
        drawn += n;
        for r in evaluator.evaluate(&specs) {
            let r = r?;
            match r.outcome {
                Outcome::Crash => report.crashing.push(r.spec.config),
                Outcome::Success => {
                    report.n_non_crashing += 1;
                    if report.non_crashing.len() < opts.keep_non_crashing {
                        report.non_crashing.push(r.spec.config);
                    } else {
                        let j = keep_rng.random_range(0..report.n_non_crashing);
                        if j < opts.keep_non_crashing {
                            report.non_crashing[j] = r.spec.config;
                        }
                    }
                }
                Outcome::Timeout => {}
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProposalKind {
    Forbidden(ForbiddenClause),
    /// Restrict a numeric parameter to `[lo, hi]`.
    DomainReduction { parameter: String, lo: Value, hi: Value },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementProposal {
    pub kind: ProposalKind,
    /// Fraction of crashing configurations the proposal excludes.
    pub support: f64,
    /// Fraction of non-crashing configurations it would also exclude.
    pub false_positive: f64,
}

impl fmt::Display for RefinementProposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ProposalKind::Forbidden(c) => write!(f, "forbid {c}")?,
            ProposalKind::DomainReduction { parameter, lo, hi } => write!(f, "restrict {parameter} to [{lo}, {hi}]")?,
        }
        write!(f, "  support {:.4}  false-positive {:.4}", self.support, self.false_positive)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalOptions {
    pub min_support: f64,
    pub max_false_positive: f64,
}

impl Default for ProposalOptions {
    fn default() -> Self {
        ProposalOptions {
            min_support: 0.9,
            max_false_positive: 0.05,
        }
    }
}

type Assignment = (String, Value);

fn categorical_assignments<'a>(space: &ParameterSpace, c: &'a Configuration) -> Vec<(&'a String, &'a Value)> {
    c.values()
        .iter()
        .filter(|(n, _)| space.parameter(n).is_some_and(|p| !p.domain.is_numeric()))
        .collect()
}

fn fraction(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

/// Candidate clauses of one or two categorical assignments, with their crash counts.
fn mine_clauses(space: &ParameterSpace, crashes: &[Configuration]) -> HashMap<Vec<Assignment>, usize> {
    let mut counts: HashMap<Vec<Assignment>, usize> = HashMap::new();
    for c in crashes {
        let cats = categorical_assignments(space, c);
        for (i, (n1, v1)) in cats.iter().enumerate() {
            *counts.entry(vec![((*n1).clone(), (*v1).clone())]).or_default() += 1;
            for (n2, v2) in &cats[i + 1..] {
                let key = vec![((*n1).clone(), (*v1).clone()), ((*n2).clone(), (*v2).clone())];
                *counts.entry(key).or_default() += 1;
            }
        }
    }
    counts
}

fn clause_proposals(
    space: &ParameterSpace,
    report: &CrashReport,
    non_crashing: &[Configuration],
    opts: &ProposalOptions,
) -> Vec<RefinementProposal> {
    let n_crash = report.crashing.len();
    let default = space.default_values();
    let mut candidates: Vec<(Vec<Assignment>, usize)> = mine_clauses(space, &report.crashing)
        .into_iter()
        .filter(|(_, count)| fraction(*count, n_crash) >= opts.min_support)
        .collect();
    candidates.sort_by_cached_key(|(a, _)| (a.len(), ForbiddenClause::new(a.clone()).to_string()));

    let mut out: Vec<RefinementProposal> = Vec::new();
    let mut emitted_singles: Vec<Assignment> = Vec::new();
    for (assignments, count) in candidates {
        if assignments.len() == 2 && assignments.iter().any(|a| emitted_singles.contains(a)) {
            continue;
        }
        let clause = ForbiddenClause::new(assignments.clone());
        if clause.is_satisfied_by(&default) {
            continue;
        }
        let fp = non_crashing.iter().filter(|c| clause.is_satisfied_by(c.values())).count();
        let proposal = RefinementProposal {
            kind: ProposalKind::Forbidden(clause),
            support: fraction(count, n_crash),
            false_positive: fraction(fp, non_crashing.len()),
        };
        if proposal.false_positive <= opts.max_false_positive {
            if assignments.len() == 1 {
                emitted_singles.push(assignments[0].clone());
            }
            out.push(proposal);
        }
    }
    out
}

/// Count of sorted `xs` strictly above (`upper`) or below `t`.
fn count_beyond(xs: &[f64], t: f64, upper: bool) -> usize {
    if upper {
        xs.len() - xs.partition_point(|x| *x <= t)
    } else {
        xs.partition_point(|x| *x < t)
    }
}

fn reduction_proposals(
    space: &ParameterSpace,
    report: &CrashReport,
    non_crashing: &[Configuration],
    opts: &ProposalOptions,
) -> Vec<RefinementProposal> {
    let n_crash = report.crashing.len();
    let n_ok = non_crashing.len();
    let sorted_values = |configs: &[Configuration], name: &str| -> Vec<f64> {
        let mut v: Vec<f64> = configs.iter().filter_map(|c| c.get(name).and_then(Value::as_f64)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let mut out = Vec::new();
    for p in space.parameters() {
        let (lo, hi) = match &p.domain {
            Domain::Integer { lo, hi } => (Value::Int(*lo), Value::Int(*hi)),
            Domain::Real { lo, hi, .. } => (Value::Real(*lo), Value::Real(*hi)),
            Domain::Categorical(_) => continue,
        };
        let crash_vals = sorted_values(&report.crashing, &p.name);
        let ok_vals = sorted_values(non_crashing, &p.name);
        let default = p.default.as_f64().unwrap_or(f64::NAN);
        for upper in [true, false] {
            // Thresholds are observed non-crashing values; among equal scores
            // the least restrictive bound wins.
            let mut best: Option<(f64, f64, f64)> = None;
            let thresholds: Box<dyn Iterator<Item = &f64>> = if upper {
                Box::new(ok_vals.iter().rev())
            } else {
                Box::new(ok_vals.iter())
            };
            for &t in thresholds {
                if (upper && t < default) || (!upper && t > default) {
                    break;
                }
                let support = fraction(count_beyond(&crash_vals, t, upper), n_crash);
                let fp = fraction(count_beyond(&ok_vals, t, upper), n_ok);
                let better = best.is_none_or(|(_, s, f)| support > s || (support == s && fp < f));
                if better {
                    best = Some((t, support, fp));
                }
            }
            let Some((t, support, fp)) = best else { continue };
            if support < opts.min_support || fp > opts.max_false_positive {
                continue;
            }
            let bound = p.domain.parse_value(&Value::Real(t).to_string()).unwrap_or(Value::Real(t));
            let (new_lo, new_hi) = if upper { (lo.clone(), bound) } else { (bound, hi.clone()) };
            if new_lo == lo && new_hi == hi {
                continue;
            }
            out.push(RefinementProposal {
                kind: ProposalKind::DomainReduction {
                    parameter: p.name.clone(),
                    lo: new_lo,
                    hi: new_hi,
                },
                support,
                false_positive: fp,
            });
        }
    }
    out
}

/// Generalize the crashes of `report` into proposals meeting `opts`, ranked
/// by support (descending), then false-positive estimate (ascending).
///
/// False positives are estimated against `non_crashing`.
pub fn propose_refinements(
    space: &ParameterSpace,
    report: &CrashReport,
    non_crashing: &[Configuration],
    opts: &ProposalOptions,
) -> Result<Vec<RefinementProposal>, RefineError> {
    if report.crashing.is_empty() {
        return Err(RefineError::NoCrashes);
    }
    let mut out = clause_proposals(space, report, non_crashing, opts);
    out.extend(reduction_proposals(space, report, non_crashing, opts));
    out.sort_by(|a, b| {
        b.support
            .total_cmp(&a.support)
            .then(a.false_positive.total_cmp(&b.false_positive))
            .then_with(|| a.to_string().cmp(&b.to_string()))
    });
    Ok(out)
}

/// Apply proposals in order; reductions on the same parameter intersect.
pub fn apply_proposals(space: &ParameterSpace, proposals: &[RefinementProposal]) -> Result<ParameterSpace, RefineError> {
    let mut out = space.clone();
    for p in proposals {
        out = match &p.kind {
            ProposalKind::Forbidden(c) => {
                if out.forbidden().contains(c) {
                    continue;
                }
                out.with_forbidden(c.clone())?
            }
            ProposalKind::DomainReduction { parameter, lo, hi } => {
                let current = &out.parameter(parameter).ok_or_else(|| SpaceError::UnknownParameter(parameter.clone()))?.domain;
                let domain = match (current, lo, hi) {
                    (Domain::Integer { lo: a, hi: b }, Value::Int(l), Value::Int(h)) => Domain::Integer {
                        lo: (*a).max(*l),
                        hi: (*b).min(*h),
                    },
                    (Domain::Real { lo: a, hi: b, log }, l, h) => Domain::Real {
                        lo: a.max(l.as_f64().unwrap_or(*a)),
                        hi: b.min(h.as_f64().unwrap_or(*b)),
                        log: *log,
                    },
                    (d, _, _) => d.clone(),
                };
                out.with_domain(parameter, domain)?
            }
        };
    }
    Ok(out)
}

/// Human-readable proposal report.
pub fn render_proposals(report: &CrashReport, proposals: &[RefinementProposal]) -> String {
    let mut s = format!(
        "canary: {}\nsampled: {}\ncrashing: {} ({:.4})\nnon-crashing: {}\n",
        report.canary,
        report.sampled,
        report.crashing.len(),
        report.crash_rate(),
        report.n_non_crashing
    );
    if proposals.is_empty() {
        s.push_str("no proposals\n");
    }
    for (i, p) in proposals.iter().enumerate() {
        s.push_str(&format!("{}. {p}\n", i + 1));
    }
    s
}

/// Space-DSL text of the space with every proposal applied.
pub fn render_refined(space: &ParameterSpace, proposals: &[RefinementProposal]) -> Result<String, RefineError> {
    Ok(render_space(&apply_proposals(space, proposals)?))
}

/// Per-parameter value counts among crashes; a quick look before mining.
pub fn crash_histogram(report: &CrashReport) -> BTreeMap<String, BTreeMap<String, usize>> {
    let mut out: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for c in &report.crashing {
        for (n, v) in c.values() {
            *out.entry(n.clone()).or_default().entry(v.to_string()).or_default() += 1;
        }
    }
    out
}
