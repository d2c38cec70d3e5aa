use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::features::FeatureEncoder;
use super::ConfigureError;
use crate::history::RunHistory;
use crate::objective::ObjectiveSpec;
use crate::paramspace::{Configuration, ParameterSpace};

/// Smallest cost admitted into log space.
pub const MIN_COST: f64 = 1e-6;

/// Random-forest knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestOptions {
    pub trees: usize,
    pub min_leaf: usize,
    /// Fraction of feature slots considered at each split.
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions {
            trees: 40,
            min_leaf: 3,
            feature_fraction: 5.0 / 6.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A regression tree stored as a flat node array; node 0 is the root.
#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    /// Number of training rows this tree was grown on.
    pub n_samples: usize,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    fn grow(xs: &[Vec<f64>], ys: &[f64], rows: Vec<usize>, opts: &ForestOptions, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = RegressionTree {
            nodes: Vec::new(),
            n_samples: rows.len(),
        };
        let n_features = xs.first().map_or(0, Vec::len);
        let per_split = ((n_features as f64 * opts.feature_fraction).ceil() as usize).clamp(1, n_features.max(1));
        let mut features: Vec<usize> = (0..n_features).collect();
        tree.build(xs, ys, rows, opts.min_leaf.max(1), per_split, &mut features, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &mut self,
        xs: &[Vec<f64>],
        ys: &[f64],
        rows: Vec<usize>,
        min_leaf: usize,
        per_split: usize,
        features: &mut [usize],
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&r| ys[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        let constant = rows.iter().all(|&r| ys[r] == ys[rows[0]]);
        if rows.len() < 2 * min_leaf || constant || features.is_empty() {
            return id;
        }

        features.shuffle(rng);
        let total_sse = sse(rows.iter().map(|&r| ys[r]));
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.clone();
        for &f in features.iter().take(per_split) {
            sorted.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]));
            let n = sorted.len();
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            let sum_all: f64 = sorted.iter().map(|&r| ys[r]).sum();
            let sq_all: f64 = sorted.iter().map(|&r| ys[r] * ys[r]).sum();
            for i in 0..n - 1 {
                let y = ys[sorted[i]];
                sum_l += y;
                sq_l += y * y;
                let n_l = i + 1;
                let n_r = n - n_l;
                let (a, b) = (xs[sorted[i]][f], xs[sorted[i + 1]][f]);
                if a == b || n_l < min_leaf || n_r < min_leaf {
                    continue;
                }
                let sum_r = sum_all - sum_l;
                let sq_r = sq_all - sq_l;
                let cost = (sq_l - sum_l * sum_l / n_l as f64) + (sq_r - sum_r * sum_r / n_r as f64);
                if best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, f, a + (b - a) / 2.0));
                }
            }
        }
        let Some((cost, feature, threshold)) = best else {
            return id;
        };
        if !(cost < total_sse) {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&row| xs[row][feature] <= threshold);
        let left = self.build(xs, ys, l, min_leaf, per_split, features, rng);
        let right = self.build(xs, ys, r, min_leaf, per_split, features, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

fn sse(ys: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum, sq) = ys.fold((0usize, 0.0, 0.0), |(n, s, q), y| (n + 1, s + y, q + y * y));
    if n == 0 {
        0.0
    } else {
        sq - sum * sum / n as f64
    }
}

/// Predicted cost of a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// `10^log_mean`, in seconds.
    pub mean: f64,
    /// Across-tree variance of the per-tree predictions in seconds.
    pub variance: f64,
    /// Mean of the per-tree log10 predictions.
    pub log_mean: f64,
    /// Across-tree variance of the per-tree log10 predictions.
    pub log_variance: f64,
}

/// Bootstrap ensemble of regression trees over encoded configurations,
/// trained on log10 per-run costs.
#[derive(Debug, Clone)]
pub struct PerformanceModel {
    encoder: FeatureEncoder,
    trees: Vec<RegressionTree>,
    /// Hash of the training rows the model was fitted on.
    pub fingerprint: String,
}

impl PerformanceModel {
    /// Fit on explicit `(configuration, cost in seconds)` pairs.
    pub fn fit_pairs(
        space: &ParameterSpace,
        pairs: &[(Configuration, f64)],
        opts: &ForestOptions,
    ) -> Result<Self, ConfigureError> {
        if pairs.is_empty() {
            return Err(ConfigureError::InsufficientHistory);
        }
        let encoder = FeatureEncoder::new(space);
        let mut hasher = Sha256::new();
        let mut xs = Vec::with_capacity(pairs.len());
        let mut ys = Vec::with_capacity(pairs.len());
        for (c, cost) in pairs {
            if c.space_id() != space.id() {
                return Err(ConfigureError::SpaceMismatch);
            }
            hasher.update(c.canonical().as_bytes());
            hasher.update(cost.to_bits().to_le_bytes());
            xs.push(encoder.encode(c));
            ys.push(cost.max(MIN_COST).log10());
        }
        let digest = hasher.finalize();
        let fingerprint = digest[..8].iter().map(|b| format!("{b:02x}")).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let n = xs.len();
        let trees = (0..opts.trees.max(1))
            .map(|_| {
                let rows: Vec<usize> = if opts.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::grow(&xs, &ys, rows, opts, &mut rng)
            })
            .collect();
        Ok(PerformanceModel {
            encoder,
            trees,
            fingerprint,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    pub fn predict_features(&self, x: &[f64]) -> Prediction {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let n = preds.len() as f64;
        let log_mean = preds.iter().sum::<f64>() / n;
        let log_variance = (preds.iter().map(|p| (p - log_mean).powi(2)).sum::<f64>() / n).max(0.0);
        let secs: Vec<f64> = preds.iter().map(|p| 10f64.powf(*p)).collect();
        let sec_mean = secs.iter().sum::<f64>() / n;
        let variance = (secs.iter().map(|s| (s - sec_mean).powi(2)).sum::<f64>() / n).max(0.0);
        Prediction {
            mean: 10f64.powf(log_mean),
            variance,
            log_mean,
            log_variance,
        }
    }

    pub fn predict(&self, config: &Configuration) -> Result<Prediction, ConfigureError> {
        if config.space_id() != self.encoder.space_id() {
            return Err(ConfigureError::SpaceMismatch);
        }
        Ok(self.predict_features(&self.encoder.encode(config)))
    }
}

/// Fit a model on every run in `history`, each labelled with its PAR-k contribution.
pub fn fit_model(
    space: &ParameterSpace,
    history: &RunHistory,
    spec: &ObjectiveSpec,
    opts: &ForestOptions,
) -> Result<PerformanceModel, ConfigureError> {
    if history.configurations().len() < 2 {
        return Err(ConfigureError::InsufficientHistory);
    }
    let pairs: Vec<(Configuration, f64)> = history
        .runs()
        .iter()
        .map(|r| (r.spec.config.clone(), spec.run_cost(r)))
        .collect();
    PerformanceModel::fit_pairs(space, &pairs, opts)
}

/// Predicted mean and variance of `config`.
pub fn predict(model: &PerformanceModel, config: &Configuration) -> Result<(f64, f64), ConfigureError> {
    let p = model.predict(config)?;
    Ok((p.mean, p.variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paramspace::parse_space;

    fn grid_space() -> ParameterSpace {
        parse_space("x integer [0, 20] [0]\ny integer [0, 20] [0]").unwrap()
    }

    fn cfg(s: &ParameterSpace, x: i64, y: i64) -> Configuration {
        s.parse_config(&format!("x={x} y={y}")).unwrap()
    }

    #[test]
    fn constant_labels() {
        let s = grid_space();
        let pairs: Vec<_> = (0..30).map(|i| (cfg(&s, i % 21, (i * 7) % 21), 2.5)).collect();
        let m = PerformanceModel::fit_pairs(&s, &pairs, &ForestOptions::default()).unwrap();
        let (mean, var) = predict(&m, &cfg(&s, 3, 4)).unwrap();
        assert!((mean - 2.5).abs() < 1e-12);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn bootstrap_sizes_match_training_rows() {
        let s = grid_space();
        let pairs: Vec<_> = (0..17).map(|i| (cfg(&s, i, 20 - i), 1.0 + i as f64)).collect();
        let opts = ForestOptions { trees: 7, ..Default::default() };
        let m = PerformanceModel::fit_pairs(&s, &pairs, &opts).unwrap();
        assert_eq!(m.trees().len(), 7);
        assert!(m.trees().iter().all(|t| t.n_samples == 17));
    }

    #[test]
    fn single_tree_has_zero_variance() {
        let s = grid_space();
        let pairs: Vec<_> = (0..40).map(|i| (cfg(&s, i % 21, (i * 3) % 21), 1.0 + (i % 5) as f64)).collect();
        let opts = ForestOptions { trees: 1, ..Default::default() };
        let m = PerformanceModel::fit_pairs(&s, &pairs, &opts).unwrap();
        for x in 0..21 {
            assert_eq!(m.predict(&cfg(&s, x, 20 - x)).unwrap().variance, 0.0);
        }
    }

    #[test]
    fn one_point_leaves_reproduce_labels() {
        // Oracle: with one point per leaf and no resampling, the leaf reached
        // by a training point holds exactly that point.
        let s = grid_space();
        let pairs: Vec<_> = (0..21).map(|i| (cfg(&s, i % 21, (i * 5) % 21), 0.1 + i as f64 * 0.37)).collect();
        let opts = ForestOptions {
            trees: 5,
            min_leaf: 1,
            feature_fraction: 1.0,
            bootstrap: false,
            seed: 4,
        };
        let m = PerformanceModel::fit_pairs(&s, &pairs, &opts).unwrap();
        for (c, label) in &pairs {
            let p = m.predict(c).unwrap();
            assert!((p.mean - label).abs() < 1e-9 * label, "{} vs {label}", p.mean);
            assert!(p.variance < 1e-18);
        }
        assert!(m.trees().iter().all(|t| t.n_leaves() == 21));
    }

    #[test]
    fn deterministic_given_seed() {
        let s = grid_space();
        let pairs: Vec<_> = (0..50).map(|i| (cfg(&s, i % 21, (i * 11) % 21), 1.0 + ((i * 13) % 7) as f64)).collect();
        let a = PerformanceModel::fit_pairs(&s, &pairs, &ForestOptions::default()).unwrap();
        let b = PerformanceModel::fit_pairs(&s, &pairs, &ForestOptions::default()).unwrap();
        assert_eq!(a.fingerprint, b.fingerprint);
        for x in 0..21 {
            assert_eq!(a.predict(&cfg(&s, x, x)).unwrap(), b.predict(&cfg(&s, x, x)).unwrap());
        }
    }

    #[test]
    fn space_mismatch() {
        let s = grid_space();
        let other = parse_space("z integer [0, 1] [0]").unwrap();
        let pairs = vec![(cfg(&s, 1, 1), 1.0), (cfg(&s, 2, 2), 2.0)];
        let m = PerformanceModel::fit_pairs(&s, &pairs, &ForestOptions::default()).unwrap();
        assert!(matches!(m.predict(&other.default_config()), Err(ConfigureError::SpaceMismatch)));
    }
}
