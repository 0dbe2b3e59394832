mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use approx::assert_abs_diff_eq;
use common::{history_of, obs, unit_space};
use priorband::bench::builtin;
use priorband::distributions::{IncumbentDistribution, PriorDistribution};
use priorband::esp::{
    activate_incumbent, density_split, dynamic_weights, first_evaluation_plan, random_proportion,
    tradeoff_weights, EnsemblePolicy, EspConfig, ModePlacement, RandomPolicy, Strategy,
    TradeoffContext, TradeoffPolicy,
};
use priorband::optimizer::{run, Algorithm, OptimizerSpec};
use priorband::scheduler::{Accounting, BracketPlan, History, RungLadder, SampleRequest, Sampler};
use priorband::space::Configuration;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn ladder() -> RungLadder {
    RungLadder::new(3, 81, 3).unwrap()
}

fn prior_at(x: &[f64]) -> Arc<PriorDistribution> {
    Arc::new(
        PriorDistribution::new(
            unit_space(x.len(), 3, 81),
            Configuration::from_reals(x),
            0.25,
        )
        .unwrap(),
    )
}

fn incumbent_at(x: &[f64]) -> IncumbentDistribution {
    IncumbentDistribution::new(
        unit_space(x.len(), 3, 81),
        Configuration::from_reals(x),
        0.25,
        0.5,
    )
    .unwrap()
}

/// A finished first bracket of the (3, 81, 3) plan: 27 + 9 + 3 + 1
/// evaluations, charged 243 epochs under continuation.
fn first_bracket_history(points: impl Fn(u64) -> [f64; 2], loss: impl Fn(u64) -> f64) -> History {
    let l = ladder();
    let mut v = Vec::new();
    let mut t = 0;
    let sizes = [27u64, 9, 3, 1];
    for (rung, &n) in sizes.iter().enumerate() {
        for id in 0..n {
            t += 1;
            let mut o = obs(id, &points(id), rung, &l, loss(id), t);
            o.charged = l.fidelity(rung) - if rung == 0 { 0 } else { l.fidelity(rung - 1) };
            v.push(o);
        }
    }
    history_of(v)
}

#[test]
fn fixed_tradeoff_examples() {
    let h = History::new();
    let prior = prior_at(&[0.5, 0.5]);
    let inc = incumbent_at(&[0.2, 0.2]);
    let ctx = |p, b| TradeoffContext {
        history: &h,
        prior: &prior,
        incumbent: &inc,
        p_pi_old: p,
        bracket_index: b,
    };
    let constant = EspConfig {
        tradeoff_policy: TradeoffPolicy::ConstantRatio,
        ..EspConfig::default()
    };
    let (a, b) = tradeoff_weights(&constant, &ctx(0.8, 7)).unwrap();
    assert_abs_diff_eq!(a, 0.6, epsilon = 1e-12);
    assert_abs_diff_eq!(b, 0.2, epsilon = 1e-12);

    let decay = EspConfig {
        tradeoff_policy: TradeoffPolicy::HalvingDecay,
        ..EspConfig::default()
    };
    let (a, b) = tradeoff_weights(&decay, &ctx(0.8, 0)).unwrap();
    assert_abs_diff_eq!(a, 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(b, 0.4, epsilon = 1e-12);
    let (a, b) = tradeoff_weights(&decay, &ctx(0.5, 2)).unwrap();
    assert_abs_diff_eq!(a, 0.1, epsilon = 1e-12);
    assert_abs_diff_eq!(b, 0.4, epsilon = 1e-12);
    let (a, b) = tradeoff_weights(&decay, &ctx(0.5, 5000)).unwrap();
    assert!((0.0..1e-300).contains(&a) && b == 0.5);

    // density scores need at least eta observations somewhere
    assert!(tradeoff_weights(&EspConfig::default(), &ctx(0.5, 0)).is_err());
}

#[test]
fn activation_rule() {
    let plan = BracketPlan::new(&ladder());
    let acc = Accounting::Continuation;
    assert_eq!(plan.first_bracket_cost(acc), 243);
    assert!(!activate_incumbent(&History::new(), &plan, acc));

    // plenty of budget, but nothing at z_max
    let l = ladder();
    let low = history_of((0..100).map(|i| obs(i, &[0.5], 0, &l, 1.0, i)).collect());
    assert!(low.consumed_budget() >= 243);
    assert!(!activate_incumbent(&low, &plan, acc));

    let full = first_bracket_history(|i| [i as f64 / 27.0, 0.5], |i| i as f64);
    assert_eq!(full.consumed_budget(), 243);
    assert!(activate_incumbent(&full, &plan, acc));

    // a z_max observation alone is not enough
    let top = history_of(vec![obs(0, &[0.5], 3, &l, 1.0, 81)]);
    assert!(!activate_incumbent(&top, &plan, acc));

    // fresh accounting raises the bar
    assert!(!activate_incumbent(&full, &plan, Accounting::Fresh));
}

#[test]
fn activation_after_simulated_first_bracket() {
    let f = builtin("mfh3-good").unwrap();
    let space = Arc::new(f.space().clone());
    let prior = Arc::new(
        PriorDistribution::new(space, Configuration::from_reals(&[0.3, 0.3, 0.3]), 0.25).unwrap(),
    );
    let mut spec = OptimizerSpec::new(Algorithm::Priorband);
    spec.esp.mode_placement = ModePlacement::NoMode;
    let l = RungLadder::new(3, 100, 3).unwrap();
    let plan = BracketPlan::new(&l);
    let cost = plan.first_bracket_cost(Accounting::Continuation);
    let out = run(&spec, f.as_ref(), Some(prior), 1, cost, 0).unwrap();
    assert_eq!(out.history.consumed_budget(), cost);
    assert!(activate_incumbent(
        &out.history,
        &plan,
        Accounting::Continuation
    ));
    // every draw happened before activation
    assert!(out.trace.iter().all(|t| t.p_inc == 0.0));
}

#[test]
fn first_draws_split_evenly() {
    let prior = prior_at(&[0.5, 0.5]);
    let mut policy = EnsemblePolicy::new(
        EspConfig::default(),
        prior,
        BracketPlan::new(&ladder()),
        Accounting::Continuation,
    )
    .unwrap();
    let h = History::new();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 100_000;
    for i in 0..n {
        let req = SampleRequest {
            history: &h,
            config_id: i,
            rung: 0,
            bracket_index: 0,
        };
        policy.sample(&req, &mut rng).unwrap();
    }
    let trace = policy.take_trace();
    let count = |s| trace.iter().filter(|t| t.strategy == s).count() as f64 / n as f64;
    assert_abs_diff_eq!(count(Strategy::Uniform), 0.5, epsilon = 0.01);
    assert_abs_diff_eq!(count(Strategy::Prior), 0.5, epsilon = 0.01);
    assert_eq!(count(Strategy::Incumbent), 0.0);
}

#[test]
fn incumbent_loses_when_the_best_sit_on_the_mode() {
    let mode = [0.5, 0.5];
    // the best configurations are exactly the prior mode; the incumbent
    // (lowest loss) is elsewhere at a lower rung
    let h = first_bracket_history(
        |i| {
            if i < 9 {
                mode
            } else {
                [0.05 + i as f64 / 40.0, 0.9]
            }
        },
        |i| i as f64,
    );
    let mut v = h.observations().to_vec();
    let l = ladder();
    v.push(obs(99, &[0.95, 0.05], 0, &l, -10.0, 1000));
    let h = history_of(v);
    let policy = EnsemblePolicy::new(
        EspConfig::default(),
        prior_at(&mode),
        BracketPlan::new(&l),
        Accounting::Continuation,
    )
    .unwrap();
    let (p, inc) = policy.probabilities(&h, 0, 0).unwrap();
    assert!(inc.is_some());
    assert!(p.p_inc > 0.0 && p.p_inc < p.p_pi, "{p:?}");
    assert!(p.is_valid());
}

#[test]
fn strategy_frequencies_match_recorded_probabilities() {
    let l = ladder();
    let h = first_bracket_history(
        |i| [i as f64 / 27.0, 1.0 - i as f64 / 27.0],
        |i| (i as f64 - 4.0).powi(2),
    );
    let mut policy = EnsemblePolicy::new(
        EspConfig::default(),
        prior_at(&[0.25, 0.7]),
        BracketPlan::new(&l),
        Accounting::Continuation,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 20_000;
    for i in 0..n {
        let req = SampleRequest {
            history: &h,
            config_id: i,
            rung: 1,
            bracket_index: 1,
        };
        policy.sample(&req, &mut rng).unwrap();
    }
    let trace = policy.take_trace();
    let p = trace[0].probabilities();
    assert!(p.p_inc > 0.05 && p.p_pi > 0.05, "{p:?}");
    assert!(trace.iter().all(|t| t.probabilities() == p));
    let observed = [Strategy::Uniform, Strategy::Prior, Strategy::Incumbent]
        .map(|s| trace.iter().filter(|t| t.strategy == s).count() as f64);
    let expected = [p.p_u, p.p_pi, p.p_inc].map(|q| q * n as f64);
    let chi2: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let p_value = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "chi2 = {chi2}, p = {p_value}");
}

fn priorband_run(
    placement: ModePlacement,
    random: RandomPolicy,
    seed: u64,
) -> priorband::scheduler::SimOutcome {
    let f = builtin("mfh3-good").unwrap();
    let space = Arc::new(f.space().clone());
    let prior = Arc::new(
        PriorDistribution::new(space, Configuration::from_reals(&[0.2, 0.6, 0.8]), 0.25).unwrap(),
    );
    let mut spec = OptimizerSpec::new(Algorithm::Priorband);
    spec.esp.mode_placement = placement;
    spec.esp.random_policy = random;
    run(&spec, f.as_ref(), Some(prior), 1, 2000, seed).unwrap()
}

#[test]
fn run_trace_invariants() {
    let plan = BracketPlan::new(&RungLadder::new(3, 100, 3).unwrap());
    for seed in 0..5 {
        let out = priorband_run(ModePlacement::ModeAtMax, RandomPolicy::Geometric, seed);
        let h = &out.history;
        assert_eq!(h.observations()[0].config_id, 0);
        assert_eq!(h.observations()[0].fidelity, 100);
        assert_eq!(h.observations()[0].bracket_id, None);

        // one record per policy draw, none for the mode
        let drawn: BTreeSet<u64> = h
            .observations()
            .iter()
            .skip(1)
            .map(|o| o.config_id)
            .collect();
        let traced: Vec<u64> = out.trace.iter().map(|t| t.config_id).collect();
        assert_eq!(traced.len(), drawn.len());
        assert_eq!(traced.iter().copied().collect::<BTreeSet<_>>(), drawn);

        let mut active = false;
        let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
        for o in h.observations() {
            seen.insert(o.config_id, o.event_index);
        }
        for (k, t) in out.trace.iter().enumerate() {
            assert_eq!(t.i, k);
            assert!(t.probabilities().is_valid(), "{t:?}");
            let (p_u, _) = random_proportion(t.rung, 3, &EspConfig::default()).unwrap();
            assert_abs_diff_eq!(t.p_u, p_u, epsilon = 1e-12);
            if t.p_inc > 0.0 {
                active = true;
            }
            if !active {
                assert_abs_diff_eq!(t.p_pi, 1.0 - p_u, epsilon = 1e-12);
            }
        }
        assert!(active, "2000 epochs exceed the first bracket");
        // activation cannot precede the first bracket's budget
        let first_inc = out.trace.iter().position(|t| t.p_inc > 0.0).unwrap();
        let cid = out.trace[first_inc].config_id;
        let start = h
            .observations()
            .iter()
            .find(|o| o.config_id == cid)
            .unwrap()
            .start;
        let done: u64 = h
            .observations()
            .iter()
            .filter(|o| o.end <= start)
            .map(|o| o.charged)
            .sum();
        assert!(done >= plan.first_bracket_cost(Accounting::Continuation));
    }
}

#[test]
fn no_mode_starts_with_a_policy_draw() {
    let out = priorband_run(ModePlacement::NoMode, RandomPolicy::Geometric, 3);
    let first = &out.history.observations()[0];
    assert!(first.bracket_id.is_some());
    assert_eq!(out.trace[0].config_id, first.config_id);
    assert_eq!(first.fidelity, 4);
}

#[test]
fn mode_at_min_evaluates_mode_at_lowest_rung() {
    let out = priorband_run(ModePlacement::ModeAtMin, RandomPolicy::Constant50, 3);
    let first = &out.history.observations()[0];
    assert_eq!(first.config, Configuration::from_reals(&[0.2, 0.6, 0.8]));
    assert_eq!((first.rung, first.fidelity, first.bracket_id), (0, 4, None));
    assert!(out.trace.iter().all(|t| t.p_u == 0.5));
}

#[test]
fn first_evaluation_plans() {
    let f = builtin("mfh3-good").unwrap();
    let prior = PriorDistribution::new(
        Arc::new(f.space().clone()),
        Configuration::from_reals(&[0.1, 0.2, 0.3]),
        0.25,
    )
    .unwrap();
    let l = RungLadder::new(3, 100, 3).unwrap();
    let max = first_evaluation_plan(ModePlacement::ModeAtMax, &prior, &l).unwrap();
    assert_eq!((max.rung, max.fidelity), (3, 100));
    assert_eq!(&max.config, prior.mode());
    assert!(first_evaluation_plan(ModePlacement::NoMode, &prior, &l).is_none());

    let prior81 = prior_at(&[0.1, 0.2]);
    let min = first_evaluation_plan(ModePlacement::ModeAtMin, &prior81, &ladder()).unwrap();
    assert_eq!((min.rung, min.fidelity), (0, 3));
}

/// Three configurations at one rung of a history with eta = 3.
fn three_config_history(xs: &[[f64; 2]; 3], losses: [f64; 3]) -> History {
    let l = ladder();
    history_of(
        (0..3)
            .map(|i| obs(i as u64, &xs[i], 1, &l, losses[i], 10 + i as u64))
            .collect(),
    )
}

/// Direct S_pi / S_inc over a history sorted by (loss, end, id).
fn brute_scores(h: &History, prior: &PriorDistribution, inc: &IncumbentDistribution) -> (f64, f64) {
    let mut v: Vec<_> = h.observations().iter().collect();
    v.sort_by(|a, b| a.loss.partial_cmp(&b.loss).unwrap().then(a.end.cmp(&b.end)));
    let n = v.len();
    v.iter().enumerate().fold((0.0, 0.0), |(sp, si), (i, o)| {
        let w = (n - i) as f64;
        (
            sp + w * prior.pdf(&o.config).unwrap(),
            si + w * inc.pdf(&o.config).unwrap(),
        )
    })
}

proptest! {
    #[test]
    fn density_split_scale_invariant(
        pairs in prop::collection::vec((1e-6f64..10.0, 1e-6f64..10.0), 1..20),
        scale in 1e-3f64..1e3,
        p_old in 0.0f64..=1.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (p, q) = density_split(&a, &b, p_old);
        let sa: Vec<f64> = a.iter().map(|x| x * scale).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * scale).collect();
        let (ps, qs) = density_split(&sa, &sb, p_old);
        prop_assert!((p - ps).abs() <= 1e-12 && (q - qs).abs() <= 1e-12);
        prop_assert!((p + q - p_old).abs() <= 1e-12);
        prop_assert!(p >= 0.0 && q >= 0.0);
    }

    #[test]
    fn better_rank_for_prior_mass_raises_prior_score(
        far in prop::array::uniform2(0.05f64..1.0),
        other in prop::array::uniform2(0.0f64..1.0),
        t in 0.0f64..0.95,
        pair in prop::sample::select(vec![(0usize, 1usize), (0, 2), (1, 2)]),
    ) {
        // prior at the origin, incumbent at (1, 1): shrinking a point toward
        // the origin adds prior mass and removes incumbent mass
        let prior = prior_at(&[0.0, 0.0]);
        let inc = incumbent_at(&[1.0, 1.0]);
        let (i, j) = pair;
        let mut xs = [other; 3];
        xs[i] = far;
        xs[j] = [t * far[0], t * far[1]];
        let mut losses = [0.0, 1.0, 2.0];
        let before = three_config_history(&xs, losses);
        losses.swap(i, j);
        let after = three_config_history(&xs, losses);

        let (sp0, _) = brute_scores(&before, &prior, &inc);
        let (sp1, _) = brute_scores(&after, &prior, &inc);
        prop_assert!(sp1 > sp0);
        let (p0, _) = dynamic_weights(&before, &prior, &inc, 3, 0.75).unwrap();
        let (p1, _) = dynamic_weights(&after, &prior, &inc, 3, 0.75).unwrap();
        prop_assert!(p1 >= p0 - 1e-15);
    }

    #[test]
    fn probabilities_always_valid(seed in 0u64..1000, rung in 0usize..4, random in 0usize..3, tradeoff in 0usize..3) {
        let l = ladder();
        let h = first_bracket_history(
            |i| [((i * 7 + seed) % 27) as f64 / 27.0, ((i * 13 + seed) % 27) as f64 / 27.0],
            |i| ((i * 31 + seed) % 17) as f64,
        );
        let cfg = EspConfig {
            random_policy: [RandomPolicy::Geometric, RandomPolicy::Linear, RandomPolicy::Constant50][random],
            tradeoff_policy: [TradeoffPolicy::DensityScores, TradeoffPolicy::ConstantRatio, TradeoffPolicy::HalvingDecay][tradeoff],
            ..EspConfig::default()
        };
        let policy = EnsemblePolicy::new(cfg, prior_at(&[0.3, 0.6]), BracketPlan::new(&l), Accounting::Continuation).unwrap();
        let (p, inc) = policy.probabilities(&h, rung, seed as usize % 4).unwrap();
        prop_assert!(p.is_valid(), "{:?}", p);
        prop_assert!(inc.is_some());
        let (p_u, _) = random_proportion(rung, 3, &cfg).unwrap();
        prop_assert!((p.p_u - p_u).abs() <= 1e-12);
    }
}
