use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use proptest::prelude::*;

use flagtune::configure::{expected_improvement, random_search, smbo_configure, ForestOptions, PerformanceModel, SmboOptions};
use flagtune::objective::{ecdf, par_score, ObjectiveSpec};
use flagtune::paramspace::{parse_space, render_space, Configuration, ParameterSpace};
use flagtune::runner::{Budget, ExitStatus, FnEvaluator, Outcome, RunResult, RunSpec, ScenarioSpec};

#[derive(Debug, Clone)]
enum Kind {
    Int(i64, i64),
    Real(f64, f64, bool),
    Cat(usize),
}

fn kind() -> impl Strategy<Value = Kind> {
    prop_oneof![
        (-50i64..50, 0i64..100).prop_map(|(lo, w)| Kind::Int(lo, lo + w)),
        (0.001f64..10.0, 1.0f64..1000.0, any::<bool>()).prop_map(|(lo, f, log)| Kind::Real(lo, lo * (1.0 + f), log)),
        (2usize..5).prop_map(Kind::Cat),
    ]
}

/// Space text with up to one condition per parameter (parent must be an
/// earlier categorical) and at most one forbidden clause over categoricals.
fn space_text() -> impl Strategy<Value = String> {
    (prop::collection::vec((kind(), any::<u8>(), any::<u8>()), 1..7), any::<u8>(), any::<bool>()).prop_map(
        |(params, fsel, forbid)| {
            let mut lines = Vec::new();
            let mut conds = Vec::new();
            let mut cats: Vec<(usize, usize)> = Vec::new();
            for (i, (k, d, c)) in params.iter().enumerate() {
                match k {
                    Kind::Int(lo, hi) => {
                        let def = lo + (*d as i64) % (hi - lo + 1);
                        lines.push(format!("p{i} integer [{lo}, {hi}] [{def}]"));
                    }
                    Kind::Real(lo, hi, log) => {
                        let def = lo + (hi - lo) * (*d as f64 / 255.0);
                        let def = def.clamp(*lo, *hi);
                        lines.push(format!("p{i} real [{lo}, {hi}] [{def}]{}", if *log { " log" } else { "" }));
                    }
                    Kind::Cat(n) => {
                        let vals: Vec<String> = (0..*n).map(|v| format!("v{v}")).collect();
                        lines.push(format!("p{i} {{{}}} [v{}]", vals.join(", "), *d as usize % n));
                    }
                }
                if let Some(&(parent, n)) = cats.get(*c as usize % (cats.len() + 1)) {
                    conds.push(format!("p{i} | p{parent} in {{v{}}}", *c as usize % n));
                }
                if let Kind::Cat(n) = k {
                    cats.push((i, *n));
                }
            }
            let unconditional: Vec<&(usize, usize)> =
                cats.iter().filter(|(i, _)| !conds.iter().any(|c| c.starts_with(&format!("p{i} |")))).collect();
            if forbid && !unconditional.is_empty() {
                let &&(i, n) = &unconditional[fsel as usize % unconditional.len()];
                // Forbid a value of one parameter that the default does not use.
                let def: usize = lines[i].rsplit("[v").next().unwrap().trim_end_matches(']').parse().unwrap();
                conds.push(format!("{{p{i}=v{}}}", (def + 1) % n));
            }
            lines.extend(conds);
            lines.join("\n")
        },
    )
}

fn hash_of(c: &Configuration) -> u64 {
    let mut h = DefaultHasher::new();
    c.hash(&mut h);
    h.finish()
}

fn parents_active(space: &ParameterSpace, c: &Configuration) -> bool {
    c.values().keys().all(|name| match space.condition_for(name) {
        None => true,
        Some(cond) => c.get(&cond.parent).is_some_and(|v| cond.values.contains(v)),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn render_parse_round_trip(text in space_text()) {
        let space = parse_space(&text).unwrap();
        let again = parse_space(&render_space(&space)).unwrap();
        prop_assert_eq!(render_space(&space), render_space(&again));
        prop_assert_eq!(space.id(), again.id());
    }

    #[test]
    fn samples_are_valid(text in space_text(), seed in any::<u64>()) {
        let space = parse_space(&text).unwrap();
        let c = space.sample_random(seed).unwrap();
        prop_assert_eq!(&space.validate_config(c.values()).unwrap(), &c);
        prop_assert!(space.violated_clause(c.values()).is_none());
        prop_assert_eq!(space.sample_random(seed).unwrap(), c);
    }

    #[test]
    fn active_set_is_key_set_and_closed_under_parents(text in space_text(), seed in any::<u64>()) {
        let space = parse_space(&text).unwrap();
        let c = space.sample_random(seed).unwrap();
        let active = space.active_parameters(c.values()).unwrap();
        prop_assert!(active.iter().eq(c.values().keys()));
        prop_assert!(parents_active(&space, &c));
        let d = space.default_config();
        prop_assert!(parents_active(&space, &d));
    }

    #[test]
    fn canonical_form_decides_equality(text in space_text(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let space = parse_space(&text).unwrap();
        let a = space.sample_random(s1).unwrap();
        let b = space.sample_random(s2).unwrap();
        let back = space.parse_config(&a.canonical()).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(hash_of(&back), hash_of(&a));
        prop_assert_eq!(back.id(), a.id());
        prop_assert_eq!(a == b, a.canonical() == b.canonical());
        prop_assert_eq!(a == b, a.id() == b.id());
        let canon = a.canonical();
        let words: Vec<&str> = canon.split(' ').map(|w| w.split('=').next().unwrap()).collect();
        let mut sorted = words.clone();
        sorted.sort();
        prop_assert_eq!(words, sorted);
    }
}

fn run(outcome: Outcome, t: f64) -> RunResult {
    let config = parse_space("a {x} [x]").unwrap().default_config();
    RunResult {
        spec: RunSpec::new(config, "i", 0),
        outcome,
        measured: t,
        reported: None,
        exit: ExitStatus::Code(0),
        wall: t,
        timestamp: 0.0,
        load: 1,
    }
}

fn outcome() -> impl Strategy<Value = Outcome> {
    prop_oneof![Just(Outcome::Success), Just(Outcome::Timeout), Just(Outcome::Crash)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn par_never_drops_when_a_run_fails(
        cutoff in 0.5f64..100.0,
        runs in prop::collection::vec((outcome(), 0.0f64..1.0), 1..30),
        which in any::<prop::sample::Index>(),
        k in 1u32..20,
    ) {
        let spec = ObjectiveSpec { cutoff, k };
        let rs: Vec<RunResult> = runs.iter().map(|(o, f)| run(*o, f * cutoff)).collect();
        let base = par_score(&rs, &spec).unwrap();
        let mut worse = rs.clone();
        let i = which.index(worse.len());
        worse[i].outcome = Outcome::Timeout;
        prop_assert!(par_score(&worse, &spec).unwrap() >= base - 1e-12);
        let harsher = ObjectiveSpec { cutoff, k: k + 1 };
        prop_assert!(par_score(&rs, &harsher).unwrap() >= base - 1e-12);
        // Direct oracle.
        let sum: f64 = rs.iter().map(|r| match r.outcome {
            Outcome::Success => r.measured,
            _ => k as f64 * cutoff,
        }).sum();
        prop_assert!((base - sum / rs.len() as f64).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn ecdf_matches_counting(times in prop::collection::vec(prop_oneof![0.0f64..10.0, (0u8..5).prop_map(f64::from)], 1..60)) {
        let steps = ecdf(&times).unwrap();
        let n = times.len() as f64;
        let mut prev = (f64::NEG_INFINITY, 0.0);
        for &(t, p) in &steps {
            prop_assert!(t > prev.0 && p > prev.1);
            let count = times.iter().filter(|x| **x <= t).count() as f64;
            prop_assert!((p - count / n).abs() < 1e-12);
            prev = (t, p);
        }
        prop_assert_eq!(steps.last().unwrap().1, 1.0);
        let mut distinct = times.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assert_eq!(steps.len(), distinct.len());
    }

    #[test]
    fn ecdf_of_uniform_samples_within_dkw_bound(seed in any::<u64>(), n in 200usize..2000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let steps = ecdf(&xs).unwrap();
        // Dvoretzky-Kiefer-Wolfowitz at alpha = 1e-9.
        let eps = ((2.0f64 / 1e-9).ln() / (2.0 * n as f64)).sqrt();
        let mut below = 0.0;
        let mut d: f64 = 0.0;
        for &(t, p) in &steps {
            d = d.max((p - t).abs()).max((below - t).abs());
            below = p;
        }
        prop_assert!(d <= eps, "D = {d}, bound {eps}");
    }

    #[test]
    fn ei_is_nonnegative_and_matches_quadrature(mean in -5.0f64..5.0, sd in 0.0f64..3.0, inc in -5.0f64..5.0) {
        let ei = expected_improvement(mean, sd * sd, inc).unwrap();
        prop_assert!(ei >= 0.0);
        prop_assert!(ei >= (inc - mean).max(0.0) - 1e-12);
        // E[max(inc - X, 0)] for X ~ N(mean, sd^2) by the trapezoid rule.
        let oracle = if sd == 0.0 {
            (inc - mean).max(0.0)
        } else {
            let (lo, hi, steps) = (mean - 12.0 * sd, inc.max(mean - 12.0 * sd), 20_000);
            let h = (hi - lo) / steps as f64;
            let f = |x: f64| (inc - x) * (-0.5 * ((x - mean) / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
            (0..steps).map(|i| 0.5 * h * (f(lo + i as f64 * h) + f(lo + (i + 1) as f64 * h))).sum()
        };
        prop_assert!((ei - oracle).abs() < 1e-6, "{ei} vs {oracle}");
    }
}

fn grid() -> ParameterSpace {
    parse_space("x integer [0, 15] [0]\ny integer [0, 15] [0]\nm {a, b, c} [a]").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forest_argmin_survives_label_scaling(cx in 0i64..16, cy in 0i64..16, scale_exp in -2i32..3, seed in any::<u64>()) {
        let s = grid();
        let mut pairs = Vec::new();
        for x in 0..16 {
            for y in (0..16).step_by(3) {
                let c = s.parse_config(&format!("m=a x={x} y={y}")).unwrap();
                let cost = 1.0 + ((x - cx).pow(2) + (y - cy).pow(2)) as f64 + 0.001 * x as f64;
                pairs.push((c, cost));
            }
        }
        let scale = 10f64.powi(scale_exp);
        let scaled: Vec<(Configuration, f64)> = pairs.iter().map(|(c, y)| (c.clone(), y * scale)).collect();
        let opts = ForestOptions { seed, ..Default::default() };
        let m1 = PerformanceModel::fit_pairs(&s, &pairs, &opts).unwrap();
        let m2 = PerformanceModel::fit_pairs(&s, &scaled, &opts).unwrap();
        let argmin = |m: &PerformanceModel| {
            pairs.iter().map(|(c, _)| (m.predict(c).unwrap().log_mean, c.canonical()))
                .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))).unwrap().1
        };
        prop_assert_eq!(argmin(&m1), argmin(&m2));
    }
}

fn synthetic(s: &RunSpec) -> (Outcome, f64) {
    let x = s.config.get("x").unwrap().as_f64().unwrap();
    let y = s.config.get("y").unwrap().as_f64().unwrap();
    let bump = if s.config.get("m").unwrap().as_str() == Some("c") { 0.5 } else { 0.0 };
    (Outcome::Success, 1.0 + ((x - 11.0).powi(2) + (y - 4.0).powi(2)) / 20.0 + bump)
}

fn quick_smbo() -> SmboOptions {
    SmboOptions {
        challengers_per_iteration: 3,
        selection: flagtune::configure::SelectionOptions { random_starts: 100, ..Default::default() },
        forest: ForestOptions { trees: 10, ..Default::default() },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn smbo_replays_and_incumbent_never_worsens(seed in any::<u64>()) {
        let s = grid();
        let sc = ScenarioSpec::new("synthetic", vec!["i1".into(), "i2".into()], 60.0).unwrap();
        let eval = FnEvaluator::new(60.0, synthetic);
        let key = |r: &flagtune::configure::ConfiguratorResult| -> Vec<(u64, String, u64)> {
            r.trajectory().iter().map(|e| (e.runs_used, e.config_id.0.clone(), e.score.to_bits())).collect()
        };
        let a = smbo_configure(&eval, &sc, &s, Budget::Runs(40), seed, &quick_smbo()).unwrap();
        let b = smbo_configure(&eval, &sc, &s, Budget::Runs(40), seed, &quick_smbo()).unwrap();
        prop_assert_eq!(key(&a), key(&b));
        for r in [&a, &random_search(&eval, &sc, &s, Budget::Runs(40), seed).unwrap()] {
            let t = r.trajectory();
            prop_assert!(t.windows(2).all(|w| w[1].score <= w[0].score && w[1].runs_used >= w[0].runs_used));
            prop_assert!(r.runs_used <= 40);
            prop_assert_eq!(t.last().unwrap().score, r.training_score);
        }
    }
}
