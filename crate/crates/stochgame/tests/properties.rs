mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stochgame::checks::{
    check_mdvss_against, markovian_evaluate, optimal_value, variance_of_value, MarkovianPlan, Property,
};
use stochgame::exact::{
    bellman, bellman_fixed, evaluate, flux, greedy, policy_iteration_observed, q_from_v, random_strategy,
    stationary_distribution, strategy_iteration, SolverEvent,
};
use stochgame::game::StochasticGame;
use stochgame::qvi::{qvi_run, VsEntry};
use stochgame::sampler::GenerativeModel;
use stochgame::scalar::{max_abs, max_abs_diff};
use stochgame::{Direction, Game, Player, QviConstants, Strategy as Pure, VsSequence};

fn game_strategy() -> impl Strategy<Value = Game> {
    (2usize..7, 1usize..4, 0.3f64..0.97, any::<u64>()).prop_map(|(n, k, g, seed)| common::sparse_game(n, k, g, seed))
}

fn unit_game_strategy() -> impl Strategy<Value = Game> {
    (2usize..6, 1usize..4, 0.3f64..0.9, any::<u64>()).prop_map(|(n, k, g, seed)| common::random_game(n, k, g, seed))
}

fn values(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rows_sum_to_one(g in game_strategy()) {
        for (s, a) in g.pairs() {
            let sum: f64 = g.transition_row(s, a).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn mirror_is_an_involution(g in unit_game_strategy()) {
        let back = g.mirror().unwrap().mirror().unwrap();
        prop_assert_eq!(back.owners(), g.owners());
        for (s, a) in g.pairs() {
            prop_assert!((back.reward(s, a) - g.reward(s, a)).abs() <= 1e-15);
            prop_assert_eq!(back.transition_row(s, a), g.transition_row(s, a));
        }
    }

    #[test]
    fn mirror_maps_optimum(g in unit_game_strategy()) {
        let v = optimal_value(&g).unwrap();
        let w = optimal_value(&g.mirror().unwrap()).unwrap();
        let beta = g.horizon();
        for s in 0..g.num_states() {
            prop_assert!((v[s] + w[s] - beta).abs() < 1e-8);
        }
    }

    #[test]
    fn affine_map_keeps_greedy(g in game_strategy(), scale in 0.1f64..10.0, offset in -3.0f64..3.0) {
        let mapped = g.affine_reward_map(scale, offset).unwrap();
        let sol = |h: &Game| {
            let (sigma, _) = strategy_iteration(h, &Pure::first_actions(h)).unwrap();
            let v = evaluate(h, &sigma).unwrap();
            let q = q_from_v(h, &v);
            (greedy(h, &q).1, q)
        };
        let (a, qa) = sol(&g);
        let (b, _) = sol(&mapped);
        // Ties can legitimately resolve differently; compare only clear winners.
        for s in 0..g.num_states() {
            if a.get(s) != b.get(s) {
                let row = qa.row(s);
                prop_assert!((row[a.get(s)] - row[b.get(s)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn bellman_contracts(g in game_strategy(), seed in any::<u64>()) {
        let n = g.num_states();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let v1: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v2: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let lhs = max_abs_diff(&bellman(&g, &v1), &bellman(&g, &v2));
        prop_assert!(lhs <= g.gamma() * max_abs_diff(&v1, &v2) + 1e-12);
    }

    #[test]
    fn bellman_is_monotone(g in game_strategy(), v in values(6, 5.0), bump in prop::collection::vec(0.0f64..2.0, 6)) {
        let n = g.num_states();
        let v1 = &v[..n];
        let v2: Vec<f64> = v1.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let (t1, t2) = (bellman(&g, v1), bellman(&g, &v2));
        prop_assert!(t1.iter().zip(&t2).all(|(a, b)| *a <= b + 1e-12));
    }

    #[test]
    fn evaluate_is_a_fixed_point(g in game_strategy(), seed in any::<u64>()) {
        let sigma = random_strategy(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let v = evaluate(&g, &sigma).unwrap();
        prop_assert!(max_abs_diff(&bellman_fixed(&g, &sigma, &v), &v) <= 1e-9);
    }

    #[test]
    fn policy_iteration_values_rise_for_max(g in game_strategy()) {
        // Make every state max-owned: a single-player maximization problem.
        let owners = vec![Player::Max; g.num_states()];
        let actions = (0..g.num_states()).map(|s| g.actions(s).to_vec()).collect();
        let mdp = StochasticGame::new(owners, actions, g.gamma()).unwrap();
        let mut seen: Vec<Vec<f64>> = Vec::new();
        policy_iteration_observed(&mdp, &Pure::first_actions(&mdp), None, |ev| {
            if let SolverEvent::Evaluated { values, .. } = ev {
                seen.push(values.to_vec());
            }
        }).unwrap();
        for w in seen.windows(2) {
            prop_assert!(w[0].iter().zip(&w[1]).all(|(a, b)| *b >= a - 1e-9));
        }
    }

    #[test]
    fn strategy_iteration_is_an_equilibrium(g in game_strategy()) {
        let (sigma, _) = strategy_iteration(&g, &Pure::first_actions(&g)).unwrap();
        let v = evaluate(&g, &sigma).unwrap();
        let vmin = stochgame::checks::best_response_value(&g, &sigma, Player::Min).unwrap();
        let vmax = stochgame::checks::best_response_value(&g, &sigma, Player::Max).unwrap();
        for s in 0..g.num_states() {
            prop_assert!(vmin[s] <= v[s] + 1e-7);
            prop_assert!(vmax[s] >= v[s] - 1e-7);
        }
        let v_star = optimal_value(&g).unwrap();
        prop_assert!(max_abs_diff(&v, &v_star) < 1e-7);
    }

    #[test]
    fn flux_sandwich_per_strategy(g in unit_game_strategy(), seed in any::<u64>()) {
        let sigma = random_strategy(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let x = flux(&g, &sigma).unwrap();
        let l = stationary_distribution(&g, &sigma).unwrap();
        let beta = g.horizon();
        let (cmin, cmax) = l.iter().fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
        let total: f64 = x.iter().sum();
        prop_assert!((total - g.num_states() as f64 * beta).abs() < 1e-8 * total);
        for &xi in &x {
            prop_assert!(beta * cmin / cmax <= xi + 1e-9);
            prop_assert!(xi <= beta * cmax / cmin + 1e-9);
        }
    }

    #[test]
    fn popoviciu_bound(g in game_strategy(), v in values(6, 10.0)) {
        let v = &v[..g.num_states()];
        let (lo, hi) = v.iter().fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
        let cap = (hi - lo) * (hi - lo) / 4.0;
        for var in variance_of_value(&g, v) {
            prop_assert!(var >= 0.0 && var <= cap + 1e-12);
        }
    }

    #[test]
    fn constant_plan_reproduces_evaluate(g in game_strategy(), seed in any::<u64>(), k in 0usize..4) {
        let tail = random_strategy(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let plan = MarkovianPlan { prefix: vec![tail.clone(); k], tail: tail.clone() };
        let v = evaluate(&g, &tail).unwrap();
        let out = markovian_evaluate(&g, &plan).unwrap();
        for stage in &out.stage_values {
            prop_assert!(max_abs_diff(stage, &v) <= 1e-10 * max_abs(&v).max(1.0));
        }
    }

    #[test]
    fn sampler_is_reproducible(g in unit_game_strategy(), seed in any::<u64>(), v in values(6, 3.0)) {
        let v = &v[..g.num_states()];
        let a = GenerativeModel::new(&g, seed);
        let b = GenerativeModel::new(&g, seed);
        let ea = a.estimate_mean_and_var(v, 50).unwrap();
        let eb = b.estimate_mean_and_var(v, 50).unwrap();
        prop_assert_eq!(ea.mean, eb.mean);
        prop_assert_eq!(a.sample_count(), b.sample_count());
    }

    #[test]
    fn qvi_run_invariants(g in unit_game_strategy(), seed in any::<u64>(), decreasing in any::<bool>()) {
        let model = GenerativeModel::new(&g, seed);
        let beta = g.horizon();
        let run = QviConstants::default().derive(g.gamma(), beta, 0.1, g.num_pairs()).unwrap().with_m1(64);
        let (v0, dir) = if decreasing {
            (vec![beta; g.num_states()], Direction::Decreasing)
        } else {
            (vec![0.0; g.num_states()], Direction::Increasing)
        };
        let seq = qvi_run(&model, &v0, &Pure::new(vec![0; g.num_states()]), &run, dir).unwrap();
        prop_assert!(seq.is_well_formed());
        for e in &seq.entries {
            prop_assert!(e.q.iter().all(|&x| (0.0..=beta).contains(&x)));
        }
        let counts = model.sample_count();
        // Reading counters or the game leaves them untouched.
        let _ = model.num_pairs();
        prop_assert_eq!(model.sample_count(), counts.clone());
        prop_assert_eq!(counts.0, run.samples(g.num_pairs()));
    }
}

/// The exact fixed-point sequence `v = v*`, `Q = r + γPv*` passes; breaking
/// any one inequality is caught.
#[test]
fn fixed_point_sequence_and_mutations() {
    for seed in 0..10 {
        let g = common::random_game(5, 3, 0.8, 7000 + seed);
        let v_star = optimal_value(&g).unwrap();
        let q = q_from_v(&g, &v_star);
        let (_, sigma) = greedy(&g, &q);
        let run = QviConstants::default().derive(0.8, 1.0, 0.1, g.num_pairs()).unwrap();
        let entry = VsEntry {
            v: v_star.clone(),
            q: q.as_slice().to_vec(),
            sigma: sigma.clone(),
            xi: vec![0.0; g.num_pairs()],
        };
        let seq = VsSequence {
            direction: Direction::Decreasing,
            entries: vec![entry.clone(), entry.clone(), entry.clone()],
            constants: run,
            samples: 0,
        };
        assert!(check_mdvss_against(&g, &seq, None, &v_star).unwrap().passed);

        let caught = |s: &VsSequence, want: Property| {
            let r = check_mdvss_against(&g, s, None, &v_star).unwrap();
            assert!(r.violations.iter().any(|v| v.property == want), "{want:?} not caught: {r}");
        };
        // Chain goes up.
        let mut m = seq.clone();
        m.entries[1].v[0] += 0.5;
        caught(&m, Property::ChainMonotone);
        // Terminal below v*.
        let mut m = seq.clone();
        m.entries[2].v[1] -= 0.5;
        caught(&m, Property::TerminalBound);
        // Q above its bound.
        let mut m = seq.clone();
        m.entries[1].q[0] += 0.5;
        caught(&m, Property::QBound);
        // v above what Q supports.
        let mut m = seq.clone();
        m.entries[2].q.iter_mut().for_each(|x| *x -= 0.5);
        caught(&m, Property::GreedyBound);
        // Wrong strategy: a strictly worse action for min breaks T_σ v ≤ v.
        let mut m = seq.clone();
        let s = (0..g.num_states()).find(|&s| g.owner(s) == Player::Min).unwrap();
        let row = q.row(s);
        let worst = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        if row[worst] > row[sigma.get(s)] + 1e-6 {
            m.entries[1].sigma.actions[s] = worst;
            caught(&m, Property::StrategyOperator);
        }
    }
}

/// Batch means over many seeds sit within 3 standard errors of `P v`.
#[test]
fn batch_means_are_unbiased() {
    let g = common::random_game(4, 2, 0.9, 77);
    let v = [0.0, 1.0, 3.0, -2.0];
    let seeds = 400;
    let m = 25;
    let mut sums = vec![0.0; g.num_pairs()];
    let mut sq = vec![0.0; g.num_pairs()];
    for seed in 0..seeds {
        let model = GenerativeModel::new(&g, seed);
        let est = model.estimate_mean_and_var(&v, m).unwrap();
        for (k, x) in est.mean.iter().enumerate() {
            sums[k] += x;
            sq[k] += x * x;
        }
    }
    for (k, (s, a)) in g.pairs().enumerate() {
        let exact = g.expect(s, a, &v);
        let mean = sums[k] / seeds as f64;
        let var = sq[k] / seeds as f64 - mean * mean;
        let se = (var / seeds as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * se + 1e-12, "pair {k}: {mean} vs {exact} (se {se})");
    }
}

/// Over 50 seeds the fraction of runs failing the decreasing-sequence check
/// stays within `δ + 3√(δ/50)`.
#[test]
fn mdvss_failure_rate() {
    let delta = 0.1;
    let g = common::random_game(4, 2, 0.7, 88);
    let v_star = optimal_value(&g).unwrap();
    let beta = g.horizon();
    let mut failures = 0;
    for seed in 0..50 {
        let model = GenerativeModel::new(&g, seed);
        let run = QviConstants::default().derive(0.7, beta, delta, g.num_pairs()).unwrap();
        let seq = qvi_run(&model, &vec![beta; 4], &Pure::new(vec![0; 4]), &run, Direction::Decreasing).unwrap();
        if !check_mdvss_against(&g, &seq, None, &v_star).unwrap().passed {
            failures += 1;
        }
    }
    let limit = delta + 3.0 * (delta / 50.0).sqrt();
    assert!(failures as f64 / 50.0 <= limit, "{failures}/50 failed");
}

/// Point-mass games have exact estimates, so every run certifies.
#[test]
fn deterministic_games_always_certify() {
    for seed in 0..20 {
        let g = common::deterministic_game(6, 3, 0.8, 9000 + seed);
        let v_star = optimal_value(&g).unwrap();
        let model = GenerativeModel::new(&g, seed);
        let run = QviConstants::default().derive(0.8, 5.0, 0.1, g.num_pairs()).unwrap();
        let seq = qvi_run(&model, &[5.0; 6], &Pure::new(vec![0; 6]), &run, Direction::Decreasing).unwrap();
        let report = check_mdvss_against(&g, &seq, None, &v_star).unwrap();
        assert!(report.passed, "seed {seed}: {report}");
    }
}

#[test]
fn single_precision_agrees() {
    let g = common::random_game(6, 3, 0.9, 5);
    let g32: stochgame::Game32 = stochgame::io::game_from_json(&stochgame::io::game_to_json(&g).unwrap()).unwrap();
    let v = optimal_value(&g).unwrap();
    let (v32, _, _) = stochgame::exact::value_iteration(&g32, 1e-4f32).unwrap();
    for (a, b) in v.iter().zip(&v32) {
        assert!((a - *b as f64).abs() < 1e-3);
    }
    let (s64, _) = strategy_iteration(&g, &Pure::first_actions(&g)).unwrap();
    let (s32, _) = strategy_iteration(&g32, &Pure::first_actions(&g32)).unwrap();
    let v_s32 = evaluate(&g, &s32).unwrap();
    assert!(max_abs_diff(&v_s32, &evaluate(&g, &s64).unwrap()) < 1e-3);
}
