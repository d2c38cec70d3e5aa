use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::forest::PerformanceModel;
use super::ConfigureError;
use crate::paramspace::{Configuration, Domain, ParameterSpace, Value};

/// Knobs of challenger selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOptions {
    /// Random configurations scored to seed the local searches.
    pub random_starts: usize,
    /// Random neighbours drawn per numeric parameter.
    pub numeric_neighbours: usize,
    /// Standard deviation of numeric neighbour moves in normalized units.
    pub neighbour_sd: f64,
    pub max_local_steps: usize,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            random_starts: 10_000,
            numeric_neighbours: 4,
            neighbour_sd: 0.2,
            max_local_steps: 100,
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement of a Gaussian prediction over the incumbent score.
pub fn expected_improvement(mean: f64, variance: f64, incumbent: f64) -> Result<f64, ConfigureError> {
    if !(variance >= 0.0) {
        return Err(ConfigureError::NegativeVariance(variance));
    }
    let sd = variance.sqrt();
    let gap = incumbent - mean;
    if sd == 0.0 {
        return Ok(gap.max(0.0));
    }
    let z = gap / sd;
    Ok((gap * std_normal_cdf(z) + sd * std_normal_pdf(z)).max(0.0))
}

/// EI in the model's log space against a cost in seconds.
fn log_ei(model: &PerformanceModel, config: &Configuration, incumbent_cost: f64) -> f64 {
    let p = model.predict_features(&model.encoder().encode(config));
    let f_star = incumbent_cost.max(super::forest::MIN_COST).log10();
    expected_improvement(p.log_mean, p.log_variance, f_star).unwrap_or(0.0)
}

/// Single-parameter moves from `config`, all valid.
fn neighbours(
    space: &ParameterSpace,
    config: &Configuration,
    opts: &SelectionOptions,
    rng: &mut ChaCha8Rng,
) -> Vec<Configuration> {
    let normal = Normal::new(0.0, opts.neighbour_sd).expect("positive sd");
    let mut out = Vec::new();
    for p in space.parameters() {
        let Some(current) = config.get(&p.name) else { continue };
        let mut moves: Vec<Value> = Vec::new();
        match &p.domain {
            Domain::Categorical(vals) => {
                moves.extend(vals.iter().filter(|v| Some(v.as_str()) != current.as_str()).map(|v| Value::Cat(v.clone())));
            }
            Domain::Integer { lo, hi } => {
                let v = match current {
                    Value::Int(v) => *v,
                    _ => continue,
                };
                if v > *lo {
                    moves.push(Value::Int(v - 1));
                }
                if v < *hi {
                    moves.push(Value::Int(v + 1));
                }
                let unit = p.domain.normalize(current).unwrap_or(0.0);
                for _ in 0..opts.numeric_neighbours {
                    if let Some(m) = p.domain.denormalize(unit + normal.sample(rng)) {
                        moves.push(m);
                    }
                }
            }
            Domain::Real { .. } => {
                let unit = p.domain.normalize(current).unwrap_or(0.0);
                for _ in 0..opts.numeric_neighbours {
                    if let Some(m) = p.domain.denormalize(unit + normal.sample(rng)) {
                        moves.push(m);
                    }
                }
            }
        }
        let mut seen = HashSet::new();
        for m in moves {
            if &m == current || !seen.insert(m.clone()) {
                continue;
            }
            if let Ok(c) = space.with_value(config, &p.name, m, |q| q.default.clone()) {
                out.push(c);
            }
        }
    }
    out
}

fn local_search(
    model: &PerformanceModel,
    space: &ParameterSpace,
    start: Configuration,
    start_ei: f64,
    incumbent_cost: f64,
    opts: &SelectionOptions,
    rng: &mut ChaCha8Rng,
) -> Configuration {
    let (mut current, mut best) = (start, start_ei);
    for _ in 0..opts.max_local_steps {
        let mut improved = None;
        for n in neighbours(space, &current, opts, rng) {
            let ei = log_ei(model, &n, incumbent_cost);
            if ei > best {
                best = ei;
                improved = Some(n);
            }
        }
        match improved {
            Some(n) => current = n,
            None => break,
        }
    }
    current
}

/// Propose `count` challengers: EI-maximizing and uniformly random
/// configurations interleaved one-to-one, EI first.
pub fn select_challengers(
    model: &PerformanceModel,
    space: &ParameterSpace,
    count: usize,
    incumbent_cost: f64,
    seed: u64,
) -> Result<Vec<Configuration>, ConfigureError> {
    select_challengers_excluding(model, space, count, incumbent_cost, seed, &HashSet::new(), &SelectionOptions::default())
}

/// As [`select_challengers`], but EI picks avoid configurations in `exclude`
/// where an unexcluded alternative is available.
pub fn select_challengers_excluding(
    model: &PerformanceModel,
    space: &ParameterSpace,
    count: usize,
    incumbent_cost: f64,
    seed: u64,
    exclude: &HashSet<Configuration>,
    opts: &SelectionOptions,
) -> Result<Vec<Configuration>, ConfigureError> {
    if model.encoder().space_id() != space.id() {
        return Err(ConfigureError::SpaceMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ei = count.div_ceil(2);
    let n_random = count / 2;

    let mut starts: Vec<(f64, String, Configuration)> = Vec::with_capacity(opts.random_starts);
    for _ in 0..opts.random_starts.max(1) {
        let c = space.sample_with(&mut rng)?;
        let ei = log_ei(model, &c, incumbent_cost);
        starts.push((ei, c.canonical(), c));
    }
    starts.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    starts.dedup_by(|a, b| a.1 == b.1);

    let mut picked: Vec<Configuration> = Vec::new();
    let mut taken: HashSet<Configuration> = HashSet::new();
    for (ei, _, start) in &starts {
        if picked.len() == n_ei {
            break;
        }
        let mut c = local_search(model, space, start.clone(), *ei, incumbent_cost, opts, &mut rng);
        if exclude.contains(&c) || taken.contains(&c) {
            c = start.clone();
        }
        if exclude.contains(&c) || taken.contains(&c) {
            continue;
        }
        taken.insert(c.clone());
        picked.push(c);
    }
    // Everything excluded: fall back to the best starts regardless.
    for (_, _, start) in &starts {
        if picked.len() == n_ei {
            break;
        }
        if taken.insert(start.clone()) {
            picked.push(start.clone());
        }
    }

    let mut out = Vec::with_capacity(count);
    let mut ei_iter = picked.into_iter();
    let mut random_left = n_random;
    while out.len() < count {
        match ei_iter.next() {
            Some(c) => out.push(c),
            None => {
                out.push(space.sample_with(&mut rng)?);
                random_left = random_left.saturating_sub(1);
                continue;
            }
        }
        if random_left > 0 && out.len() < count {
            out.push(space.sample_with(&mut rng)?);
            random_left -= 1;
        }
    }
    Ok(out)
}
