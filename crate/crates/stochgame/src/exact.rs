//! Full-knowledge planning: Bellman operators, exact strategy evaluation,
//! value/policy/strategy iteration, stationary distributions and flux.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{mean, PartialStrategy, Player, QFunction, StochasticGame, Strategy};
use crate::linalg::{apply_transpose, solve_resolvent};
use crate::scalar::{max_abs_diff, strictly_greater, Scalar};

/// Default iteration cap for value iteration.
pub const VALUE_ITERATION_CAP: usize = 10_000_000;
/// Cap on improvement rounds in policy and strategy iteration.
pub const IMPROVEMENT_CAP: usize = 1_000_000;
/// Cap on power-iteration steps for stationary distributions.
pub const POWER_ITERATION_CAP: usize = 1_000_000;
/// Largest strategy space `ratio_scan` will enumerate.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// Relative margin an action must beat the incumbent by before a switch.
/// Keeps floating-point noise from breaking exact ties.
pub fn improvement_rtol<F: Scalar>() -> F {
    F::lit(1e-10).max(F::epsilon() * F::lit(64.0))
}

/// One solver step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord<F> {
    pub iteration: usize,
    pub residual: F,
    /// `(state, old action, new action)`.
    pub changes: Vec<(usize, usize, usize)>,
    pub policy_evaluations: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace<F> {
    pub records: Vec<TraceRecord<F>>,
}

impl<F: Scalar> SolveTrace<F> {
    pub fn policy_evaluations(&self) -> usize {
        self.records.last().map_or(0, |r| r.policy_evaluations)
    }

    /// Records that changed the strategy.
    pub fn improving(&self) -> impl Iterator<Item = &TraceRecord<F>> {
        self.records.iter().filter(|r| !r.changes.is_empty())
    }

    fn push(&mut self, residual: F, changes: Vec<(usize, usize, usize)>, evaluations: usize) {
        let iteration = self.records.len();
        self.records.push(TraceRecord {
            iteration,
            residual,
            changes,
            policy_evaluations: evaluations,
        });
    }
}

/// Callback payload for the observed variants of policy and strategy iteration.
#[derive(Debug)]
pub enum SolverEvent<'a, F> {
    /// A strategy was evaluated exactly.
    Evaluated {
        strategy: &'a Strategy,
        values: &'a [F],
        evaluations: usize,
    },
    /// The min player's greedy step changed the strategy.
    MinUpdated { strategy: &'a Strategy },
}

/// `Q(s,a) = r(s,a) + γ⟨P(·|s,a), v⟩`.
pub fn q_from_v<F: Scalar>(game: &StochasticGame<F>, v: &[F]) -> QFunction<F> {
    assert_eq!(v.len(), game.num_states(), "value length");
    let m = mean(v);
    let g = game.gamma();
    let flat = game
        .pairs()
        .map(|(s, a)| game.reward(s, a) + g * game.expect_with_mean(s, a, v, m))
        .collect();
    QFunction::from_flat(game, flat).unwrap()
}

/// Owner-optimal value and action per state; ties go to the lowest index.
pub fn greedy<F: Scalar>(game: &StochasticGame<F>, q: &QFunction<F>) -> (Vec<F>, Strategy) {
    let n = game.num_states();
    let mut v = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for s in 0..n {
        let (a, x) = best_in_row(game.owner(s), q.row(s));
        v.push(x);
        sigma.push(a);
    }
    (v, Strategy::new(sigma))
}

pub(crate) fn best_in_row<F: Scalar>(player: Player, row: &[F]) -> (usize, F) {
    let mut best = 0;
    for a in 1..row.len() {
        if player.prefers(row[a], row[best]) {
            best = a;
        }
    }
    (best, row[best])
}

/// Bellman operator `T[v]`.
pub fn bellman<F: Scalar>(game: &StochasticGame<F>, v: &[F]) -> Vec<F> {
    greedy(game, &q_from_v(game, v)).0
}

/// `T_σ[v] = r_σ + γP_σ v`.
pub fn bellman_fixed<F: Scalar>(game: &StochasticGame<F>, sigma: &Strategy, v: &[F]) -> Vec<F> {
    let m = mean(v);
    (0..game.num_states())
        .map(|s| {
            let a = sigma.get(s);
            game.reward(s, a) + game.gamma() * game.expect_with_mean(s, a, v, m)
        })
        .collect()
}

/// Half Bellman operator: `pi` is played on `player`'s states, the other
/// player optimizes.
pub fn half_bellman<F: Scalar>(
    game: &StochasticGame<F>,
    v: &[F],
    pi: &PartialStrategy,
    player: Player,
) -> Result<Vec<F>> {
    pi.check_covers(game, player)?;
    let q = q_from_v(game, v);
    Ok((0..game.num_states())
        .map(|s| {
            if game.owner(s) == player {
                q.get(s, pi.get(s).unwrap())
            } else {
                best_in_row(game.owner(s), q.row(s)).1
            }
        })
        .collect())
}

/// Exact value of `sigma`, from a direct sparse solve of `(I - γP_σ)v = r_σ`.
pub fn evaluate<F: Scalar>(game: &StochasticGame<F>, sigma: &Strategy) -> Result<Vec<F>> {
    sigma.check(game)?;
    let r: Vec<F> = (0..game.num_states())
        .map(|s| game.reward(s, sigma.get(s)))
        .collect();
    Ok(solve_resolvent(game, sigma, game.gamma(), &r, false))
}

/// Iterates `T` from zero until successive iterates differ by at most
/// `tol·(1-γ)/(2γ)`, which bounds the distance to `v*` by `tol/2`.
pub fn value_iteration<F: Scalar>(
    game: &StochasticGame<F>,
    tol: F,
) -> Result<(Vec<F>, Strategy, SolveTrace<F>)> {
    value_iteration_capped(game, tol, VALUE_ITERATION_CAP)
}

pub fn value_iteration_capped<F: Scalar>(
    game: &StochasticGame<F>,
    tol: F,
    cap: usize,
) -> Result<(Vec<F>, Strategy, SolveTrace<F>)> {
    if !(tol > F::zero()) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let g = game.gamma();
    let stop = tol * (F::one() - g) / (F::lit(2.0) * g);
    let mut v = vec![F::zero(); game.num_states()];
    let mut sigma = Strategy::first_actions(game);
    let mut trace = SolveTrace::default();
    for _ in 0..cap {
        let (next, next_sigma) = greedy(game, &q_from_v(game, &v));
        let residual = max_abs_diff(&next, &v);
        trace.push(residual, sigma.diff(&next_sigma), 0);
        v = next;
        sigma = next_sigma;
        if residual <= stop {
            let (_, final_sigma) = greedy(game, &q_from_v(game, &v));
            return Ok((v, final_sigma, trace));
        }
    }
    Err(Error::IterationCap { limit: cap })
}

/// Switches every `player` state whose best action strictly beats the
/// incumbent. Returns the flips and the largest improvement.
fn improve<F: Scalar>(
    game: &StochasticGame<F>,
    q: &QFunction<F>,
    sigma: &mut Strategy,
    player: Player,
) -> (Vec<(usize, usize, usize)>, F) {
    let rtol = improvement_rtol::<F>();
    let mut flips = Vec::new();
    let mut residual = F::zero();
    for s in 0..game.num_states() {
        if game.owner(s) != player {
            continue;
        }
        let row = q.row(s);
        let cur = sigma.get(s);
        let (best, x) = best_in_row(player, row);
        let gain = (x - row[cur]).abs();
        residual = residual.max(gain);
        let better = match player {
            Player::Max => strictly_greater(x, row[cur], rtol),
            Player::Min => strictly_greater(-x, -row[cur], rtol),
        };
        if better && best != cur {
            flips.push((s, cur, best));
            sigma.actions[s] = best;
        }
    }
    (flips, residual)
}

/// Howard's policy iteration for one optimizing player.
///
/// With `fixed = Some((p, pi))` the states of `p` play `pi` and the opponent
/// optimizes. Without it, all states with more than one action must share an
/// owner, who then optimizes.
pub fn policy_iteration<F: Scalar>(
    game: &StochasticGame<F>,
    pi_init: &Strategy,
    fixed: Option<(Player, &PartialStrategy)>,
) -> Result<(Strategy, SolveTrace<F>)> {
    policy_iteration_observed(game, pi_init, fixed, |_| {})
}

pub fn policy_iteration_observed<F: Scalar>(
    game: &StochasticGame<F>,
    pi_init: &Strategy,
    fixed: Option<(Player, &PartialStrategy)>,
    mut observe: impl FnMut(SolverEvent<'_, F>),
) -> Result<(Strategy, SolveTrace<F>)> {
    pi_init.check(game)?;
    let mut sigma = pi_init.clone();
    let optimizer = match fixed {
        Some((p, pi)) => {
            pi.check_covers(game, p)?;
            for s in 0..game.num_states() {
                if game.owner(s) == p {
                    sigma.actions[s] = pi.get(s).unwrap();
                }
            }
            p.opponent()
        }
        None => single_optimizer(game)?,
    };
    let mut trace = SolveTrace::default();
    for evaluations in 1..=IMPROVEMENT_CAP {
        let v = evaluate(game, &sigma)?;
        observe(SolverEvent::Evaluated {
            strategy: &sigma,
            values: &v,
            evaluations,
        });
        let q = q_from_v(game, &v);
        let (flips, residual) = improve(game, &q, &mut sigma, optimizer);
        let done = flips.is_empty();
        trace.push(residual, flips, evaluations);
        if done {
            return Ok((sigma, trace));
        }
    }
    Err(Error::IterationCap {
        limit: IMPROVEMENT_CAP,
    })
}

fn single_optimizer<F: Scalar>(game: &StochasticGame<F>) -> Result<Player> {
    let mut found: Option<usize> = None;
    for s in 0..game.num_states() {
        if game.num_actions(s) < 2 {
            continue;
        }
        match found {
            None => found = Some(s),
            Some(f) if game.owner(f) != game.owner(s) => {
                return Err(Error::NotSinglePlayer { first: f, second: s })
            }
            _ => {}
        }
    }
    Ok(found.map_or_else(|| game.owner(0), |s| game.owner(s)))
}

/// Strategy iteration: Step I optimizes the max player by policy iteration
/// against the current min strategy, starting from the current joint
/// strategy; Step II updates the min player greedily on the value of the
/// last Step I evaluation. Stops when neither step changes anything.
///
/// Step II reuses that evaluation, so only Step I spends policy evaluations.
pub fn strategy_iteration<F: Scalar>(
    game: &StochasticGame<F>,
    sigma_init: &Strategy,
) -> Result<(Strategy, SolveTrace<F>)> {
    strategy_iteration_observed(game, sigma_init, |_| {})
}

pub fn strategy_iteration_observed<F: Scalar>(
    game: &StochasticGame<F>,
    sigma_init: &Strategy,
    mut observe: impl FnMut(SolverEvent<'_, F>),
) -> Result<(Strategy, SolveTrace<F>)> {
    sigma_init.check(game)?;
    let mut sigma = sigma_init.clone();
    let mut trace = SolveTrace::default();
    let mut evaluations = 0;
    for _ in 0..IMPROVEMENT_CAP {
        let mut changed = false;
        let q = loop {
            let v = evaluate(game, &sigma)?;
            evaluations += 1;
            observe(SolverEvent::Evaluated {
                strategy: &sigma,
                values: &v,
                evaluations,
            });
            let q = q_from_v(game, &v);
            let (flips, residual) = improve(game, &q, &mut sigma, Player::Max);
            let done = flips.is_empty();
            trace.push(residual, flips, evaluations);
            if done {
                break q;
            }
            changed = true;
            if evaluations >= IMPROVEMENT_CAP {
                return Err(Error::IterationCap {
                    limit: IMPROVEMENT_CAP,
                });
            }
        };
        let (flips, residual) = improve(game, &q, &mut sigma, Player::Min);
        if !flips.is_empty() {
            changed = true;
            trace.push(residual, flips, evaluations);
            observe(SolverEvent::MinUpdated { strategy: &sigma });
        }
        if !changed {
            return Ok((sigma, trace));
        }
    }
    Err(Error::IterationCap {
        limit: IMPROVEMENT_CAP,
    })
}

/// Stationary distribution of the chain `P_σ` by power iteration.
///
/// Plain iteration is tried first; if it has not settled after a tenth of the
/// budget (periodic chains never do) the lazy chain `(I + P_σ)/2`, which has
/// the same stationary law, takes over.
pub fn stationary_distribution<F: Scalar>(game: &StochasticGame<F>, sigma: &Strategy) -> Result<Vec<F>> {
    sigma.check(game)?;
    let n = game.num_states();
    let tol = F::lit(1e-13).max(F::epsilon() * F::lit(100.0));
    let half = F::lit(0.5);
    let mut lambda = vec![F::one() / F::from_usize_lossy(n); n];
    for step in 0..POWER_ITERATION_CAP {
        let next = apply_transpose(game, sigma, &lambda);
        let gap = max_abs_diff(&next, &lambda);
        lambda = if step < POWER_ITERATION_CAP / 10 {
            next
        } else {
            lambda.iter().zip(&next).map(|(&a, &b)| (a + b) * half).collect()
        };
        if gap <= tol {
            let total: F = lambda.iter().copied().sum();
            return Ok(lambda.into_iter().map(|x| x / total).collect());
        }
    }
    Err(Error::NonConvergence {
        iterations: POWER_ITERATION_CAP,
    })
}

/// Flux `x^σ = (I - γP_σᵀ)⁻¹ 1`, the discounted visitation mass from the
/// all-ones start.
pub fn flux<F: Scalar>(game: &StochasticGame<F>, sigma: &Strategy) -> Result<Vec<F>> {
    sigma.check(game)?;
    let ones = vec![F::one(); game.num_states()];
    Ok(solve_resolvent(game, sigma, game.gamma(), &ones, true))
}

/// Flux and stationary extrema over a set of strategies.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport<F> {
    pub delta_min: F,
    pub delta_max: F,
    pub c_min: F,
    pub c_max: F,
    pub strategies_scanned: usize,
    /// Strategies whose stationary distribution did not converge.
    pub skipped: usize,
    /// Largest `‖(1-γ)x^σ/|S| - λ_σ‖∞` seen.
    pub max_limit_gap: F,
}

impl<F: Scalar> RatioReport<F> {
    pub fn flux_ratio(&self) -> F {
        self.delta_max / self.delta_min
    }

    pub fn ergodicity_ratio(&self) -> F {
        self.c_max / self.c_min
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategySource {
    /// Every pure stationary strategy.
    Enumerate,
    /// `count` strategies drawn uniformly at random.
    Sample { count: usize, seed: u64 },
}

/// Number of pure stationary strategies, as a float to survive overflow.
pub fn strategy_count<F: Scalar>(game: &StochasticGame<F>) -> f64 {
    (0..game.num_states())
        .map(|s| game.num_actions(s) as f64)
        .product()
}

/// Calls `f` on every pure stationary strategy in odometer order.
pub fn for_each_strategy<F: Scalar>(game: &StochasticGame<F>, mut f: impl FnMut(&Strategy)) {
    let n = game.num_states();
    let mut sigma = Strategy::first_actions(game);
    loop {
        f(&sigma);
        let mut s = 0;
        loop {
            if s == n {
                return;
            }
            sigma.actions[s] += 1;
            if sigma.actions[s] < game.num_actions(s) {
                break;
            }
            sigma.actions[s] = 0;
            s += 1;
        }
    }
}

pub fn random_strategy<F: Scalar, R: Rng>(game: &StochasticGame<F>, rng: &mut R) -> Strategy {
    Strategy::new(
        (0..game.num_states())
            .map(|s| rng.random_range(0..game.num_actions(s)))
            .collect(),
    )
}

/// Extremes of flux and stationary mass under one strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyRatios<F> {
    pub delta_min: F,
    pub delta_max: F,
    pub c_min: F,
    pub c_max: F,
    /// `‖(1-γ)x^σ/|S| - λ_σ‖∞`.
    pub limit_gap: F,
}

pub fn ratio_scan<F: Scalar>(game: &StochasticGame<F>, source: StrategySource) -> Result<RatioReport<F>> {
    ratio_scan_observed(game, source, |_, _| {})
}

/// [`ratio_scan`] that also hands each strategy and its extremes to `observe`;
/// `None` marks a strategy skipped for a non-converging stationary law.
pub fn ratio_scan_observed<F: Scalar>(
    game: &StochasticGame<F>,
    source: StrategySource,
    mut observe: impl FnMut(&Strategy, Option<&StrategyRatios<F>>),
) -> Result<RatioReport<F>> {
    let mut report = RatioReport {
        delta_min: F::infinity(),
        delta_max: F::neg_infinity(),
        c_min: F::infinity(),
        c_max: F::neg_infinity(),
        strategies_scanned: 0,
        skipped: 0,
        max_limit_gap: F::zero(),
    };
    let n = F::from_usize_lossy(game.num_states());
    let scale = (F::one() - game.gamma()) / n;
    let mut failure = None;
    let mut visit = |sigma: &Strategy| {
        if failure.is_some() {
            return;
        }
        report.strategies_scanned += 1;
        let lambda = match stationary_distribution(game, sigma) {
            Ok(l) => l,
            Err(Error::NonConvergence { .. }) => {
                report.skipped += 1;
                observe(sigma, None);
                return;
            }
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let x = match flux(game, sigma) {
            Ok(x) => x,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let mut r = StrategyRatios {
            delta_min: F::infinity(),
            delta_max: F::neg_infinity(),
            c_min: F::infinity(),
            c_max: F::neg_infinity(),
            limit_gap: F::zero(),
        };
        for (&xi, &li) in x.iter().zip(&lambda) {
            r.delta_min = r.delta_min.min(xi);
            r.delta_max = r.delta_max.max(xi);
            r.c_min = r.c_min.min(li);
            r.c_max = r.c_max.max(li);
            r.limit_gap = r.limit_gap.max((xi * scale - li).abs());
        }
        report.delta_min = report.delta_min.min(r.delta_min);
        report.delta_max = report.delta_max.max(r.delta_max);
        report.c_min = report.c_min.min(r.c_min);
        report.c_max = report.c_max.max(r.c_max);
        report.max_limit_gap = report.max_limit_gap.max(r.limit_gap);
        observe(sigma, Some(&r));
    };
    match source {
        StrategySource::Enumerate => {
            let count = strategy_count(game);
            if count > ENUMERATION_LIMIT as f64 {
                return Err(Error::EnumerationTooLarge {
                    count,
                    limit: ENUMERATION_LIMIT,
                });
            }
            for_each_strategy(game, &mut visit);
        }
        StrategySource::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..count {
                let sigma = random_strategy(game, &mut rng);
                visit(&sigma);
            }
        }
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
