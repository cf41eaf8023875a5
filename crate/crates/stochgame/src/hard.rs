//! Lower-bound instances: HI1 forces policy iteration to flip one action per
//! evaluation, HI2 makes strategy iteration spend quadratically many
//! evaluations. Both come with path verifiers and distributional checks.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checks::{CheckReport, Property, Violation};
use crate::error::{Error, Result};
use crate::exact::{
    evaluate, policy_iteration_observed, stationary_distribution, strategy_iteration_observed,
    SolveTrace, SolverEvent,
};
use crate::game::{Action, Player, StochasticGame, Strategy};

/// Action index of `U` (uniform jump) wherever it exists.
pub const U: usize = 0;
/// Action index of `R` (step right) wherever it exists.
pub const R: usize = 1;

/// Shape of an HI1 instance. State `i` of the chain `1..=T` has index `i-1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hi1Meta {
    pub t: usize,
    pub s_prime: usize,
    pub beta_factor: f64,
    pub gamma: f64,
    pub r_t: f64,
}

impl Hi1Meta {
    /// Indices of the states that can step right: chain states `T-S'..=T-1`.
    pub fn right_states(&self) -> Range<usize> {
        self.t - self.s_prime - 1..self.t - 1
    }

    /// Index of the last chain state `T`, the only rewarding one.
    pub fn last(&self) -> usize {
        self.t - 1
    }

    /// `U` everywhere.
    pub fn pi_zero(&self) -> Strategy {
        Strategy::new(vec![U; self.t])
    }

    /// `R` on the `i` right-capable states closest to `T`.
    pub fn pi(&self, i: usize) -> Strategy {
        let mut s = self.pi_zero();
        for k in 1..=i.min(self.s_prime) {
            s.actions[self.t - 1 - k] = R;
        }
        s
    }

    /// `R` wherever available.
    pub fn pi_e(&self) -> Strategy {
        self.pi(self.s_prime)
    }

    /// Closed-form stationary distribution of `π^e`:
    /// `[1,…,1,2,…,S'+1]/(T-S'-1+(S'+1)(S'+2)/2)`.
    pub fn pi_e_stationary(&self) -> Vec<f64> {
        let sp = self.s_prime;
        let norm = (self.t - sp - 1) as f64 + ((sp + 1) * (sp + 2)) as f64 / 2.0;
        (0..self.t)
            .map(|s| {
                let k = s as isize - (self.t - sp - 1) as isize;
                if k <= 0 {
                    1.0 / norm
                } else {
                    (k + 1) as f64 / norm
                }
            })
            .collect()
    }
}

/// `S' = ⌊√(T/12)⌋`, which keeps `6S'² ≤ T/2`.
pub fn hi1_s_prime(t: usize) -> usize {
    isqrt(t / 12)
}

/// HI1 with `r_T = 1`.
pub fn build_hi1(t: usize, beta_factor: f64) -> Result<(StochasticGame<f64>, Hi1Meta)> {
    build_hi1_with_reward(t, beta_factor, 1.0)
}

/// HI1: a maximization MDP on a chain of `T` states. Every state may jump
/// uniformly (`U`); the `S'` states before the last may also step right (`R`).
/// Only `U` at the last state pays, `r_T`. `γ = 1 - 1/(beta_factor·T)`.
pub fn build_hi1_with_reward(t: usize, beta_factor: f64, r_t: f64) -> Result<(StochasticGame<f64>, Hi1Meta)> {
    if t < 48 {
        return Err(Error::InvalidParameter(format!("HI1 needs T >= 48, got {t}")));
    }
    if !(beta_factor >= 1.0) {
        return Err(Error::InvalidParameter(format!("beta factor must be at least 1, got {beta_factor}")));
    }
    let s_prime = isqrt(t / 12);
    let gamma = 1.0 - 1.0 / (beta_factor * t as f64);
    let meta = Hi1Meta {
        t,
        s_prime,
        beta_factor,
        gamma,
        r_t,
    };
    let right = meta.right_states();
    let actions = (0..t)
        .map(|s| {
            let reward = if s == t - 1 { r_t } else { 0.0 };
            let mut row = vec![Action::uniform(reward)];
            if right.contains(&s) {
                row.push(Action::point(0.0, s + 1));
            }
            row
        })
        .collect();
    let game = StochasticGame::new(vec![Player::Max; t], actions, gamma)?;
    Ok((game, meta))
}

fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Result of an HI1 path check.
#[derive(Clone, Debug)]
pub struct Hi1PathOutcome {
    pub trace: SolveTrace<f64>,
    pub report: CheckReport,
    pub meta: Hi1Meta,
    /// Values of the last chain state along the run, one per evaluation.
    pub last_state_values: Vec<f64>,
}

impl Hi1PathOutcome {
    /// Iterations that changed the policy.
    pub fn iterations(&self) -> usize {
        self.trace.improving().count()
    }
}

/// Runs policy iteration from `π^0` and checks the predicted path: one flip
/// per iteration at `T-1, T-2, …, T-S'`, exactly `S'` iterations, and the
/// policy after `⌊S'/4⌋` iterations still more than `0.1·r_T` short of the
/// final value at state `T`.
pub fn verify_pi_path_hi1(t: usize, beta_factor: f64) -> Result<Hi1PathOutcome> {
    let (game, meta) = build_hi1(t, beta_factor)?;
    verify_pi_path_on(&game, meta)
}

pub fn verify_pi_path_on(game: &StochasticGame<f64>, meta: Hi1Meta) -> Result<Hi1PathOutcome> {
    let mut last_state_values = Vec::new();
    let (_, trace) = policy_iteration_observed(game, &meta.pi_zero(), None, |ev| {
        if let SolverEvent::Evaluated { values, .. } = ev {
            last_state_values.push(values[meta.last()]);
        }
    })?;
    let mut bad = Vec::new();
    for (k, rec) in trace.improving().enumerate() {
        let want = meta.t.checked_sub(2 + k);
        let ok = rec.changes.len() == 1 && Some(rec.changes[0].0) == want && rec.changes[0].1 == U && rec.changes[0].2 == R;
        if !ok {
            bad.push(Violation::described(
                Property::PathStep,
                rec.changes.len() as f64,
                1.0,
                format!("iteration {}: flips {:?}, expected state {:?} U->R", k + 1, rec.changes, want),
            ));
        }
    }
    let iterations = trace.improving().count();
    if iterations != meta.s_prime {
        bad.push(Violation::described(
            Property::Count,
            iterations as f64,
            meta.s_prime as f64,
            "policy iteration count",
        ));
    }
    // Policy after i improving iterations is the (i+1)-th evaluated one.
    let i = meta.s_prime / 4;
    if let (Some(&early), Some(&last)) = (last_state_values.get(i), last_state_values.last()) {
        let gap = last - early;
        if !(gap > 0.1 * meta.r_t) {
            bad.push(Violation::described(
                Property::Gap,
                gap,
                0.1 * meta.r_t,
                format!("value gap at state T after {i} iterations"),
            ));
        }
    }
    Ok(Hi1PathOutcome {
        trace,
        report: CheckReport::from_violations(bad),
        meta,
        last_state_values,
    })
}

/// Checks `1/(2T) ≤ λ_π ≤ (S'+1)/T` entrywise for `π^0`, `π^e` and
/// `num_policies` uniformly random policies.
pub fn hi1_distribution_bounds(t: usize, num_policies: usize, seed: u64) -> Result<CheckReport> {
    let (game, meta) = build_hi1(t, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policies = vec![meta.pi_zero(), meta.pi_e()];
    for _ in 0..num_policies {
        let mut p = meta.pi_zero();
        for s in meta.right_states() {
            p.actions[s] = rng.random_range(0..2);
        }
        policies.push(p);
    }
    let lo = 1.0 / (2.0 * t as f64);
    let hi = (meta.s_prime + 1) as f64 / t as f64;
    let tol = 1e-12;
    let mut bad = Vec::new();
    for (k, p) in policies.iter().enumerate() {
        let lambda = match stationary_distribution(&game, p) {
            Ok(l) => l,
            Err(Error::NonConvergence { iterations }) => {
                bad.push(Violation::described(
                    Property::NonConvergence,
                    iterations as f64,
                    0.0,
                    format!("policy {k} skipped"),
                ));
                continue;
            }
            Err(e) => return Err(e),
        };
        for (s, &x) in lambda.iter().enumerate() {
            if x < lo - tol || x > hi + tol {
                let mut v = Violation::described(Property::StationaryBound, x, if x < lo { lo } else { hi }, format!("policy {k}"));
                v.state = s;
                bad.push(v);
            }
        }
    }
    Ok(CheckReport::from_violations(bad))
}

/// Free parameters of HI2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hi2Rewards {
    pub s_prime: usize,
    pub s_b: usize,
    pub s_b_prime: usize,
    /// `r_1 ≥ … ≥ r_{S'}`, paid by the switching state's actions.
    pub r: Vec<f64>,
    pub r_delta: f64,
    pub r_delta_prime: f64,
    pub r_g: f64,
    pub gamma: f64,
}

/// Default HI2 parameters for `T ≥ 400`: `S' = ⌊√T/4⌋`, `S_b = max(1, round(S'/5))`,
/// `S_b' = 3S'`, `r_g = 1`, `r_i = 0.6 - 0.2(i-1)/(S'-1)`,
/// `r_δ = r_δ' = 1/(2√T)`, `γ = 1 - 1/(8T)`.
///
/// These reproduce the predicted strategy-iteration path at `T = 400` and
/// `T = 1600`; the path verifier certifies them for any other `T`.
pub fn default_hi2_rewards(t: usize) -> Result<Hi2Rewards> {
    if t < 400 {
        return Err(Error::InvalidParameter(format!("HI2 defaults need T >= 400, got {t}")));
    }
    let s_prime = isqrt(t) / 4;
    let root = (t as f64).sqrt();
    let r = (1..=s_prime)
        .map(|i| 0.6 - 0.2 * (i - 1) as f64 / (s_prime - 1) as f64)
        .collect();
    Ok(Hi2Rewards {
        s_prime,
        s_b: ((s_prime as f64 / 5.0).round() as usize).max(1),
        s_b_prime: 3 * s_prime,
        r,
        r_delta: 0.5 / root,
        r_delta_prime: 0.5 / root,
        r_g: 1.0,
        gamma: 1.0 - 1.0 / (8.0 * t as f64),
    })
}

/// State indices of an HI2 instance. Chain positions are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hi2Meta {
    pub t: usize,
    pub rewards: Hi2Rewards,
    pub num_states: usize,
}

impl Hi2Meta {
    pub fn dummies(&self) -> Range<usize> {
        0..self.t
    }

    /// Min-player state `s_{m_j}`.
    pub fn m(&self, j: usize) -> usize {
        debug_assert!((1..=self.rewards.s_prime).contains(&j));
        self.t + j - 1
    }

    /// Min boosting state `s_{b_j}`.
    pub fn b(&self, j: usize) -> usize {
        debug_assert!((1..=self.rewards.s_b).contains(&j));
        self.t + self.rewards.s_prime + j - 1
    }

    /// Goal state `s_g`.
    pub fn goal(&self) -> usize {
        self.t + self.rewards.s_prime + self.rewards.s_b
    }

    /// Max-player state `s_{M_j}`.
    pub fn big_m(&self, j: usize) -> usize {
        debug_assert!((1..=self.rewards.s_prime).contains(&j));
        self.goal() + j
    }

    /// Max boosting state `s_{B_j}`.
    pub fn big_b(&self, j: usize) -> usize {
        debug_assert!((1..=self.rewards.s_b_prime).contains(&j));
        self.goal() + self.rewards.s_prime + j
    }

    /// Switching state `s_*`.
    pub fn star(&self) -> usize {
        self.goal() + self.rewards.s_prime + self.rewards.s_b_prime + 1
    }

    /// `(π_min^(i), π_max^(k,z))`: `R` at `s_{m_1..m_i}` and `s_{M_1..M_z}`,
    /// action `a_k` at `s_*`. Uses `k = 1` when `k = 0`.
    pub fn strategy(&self, i: usize, k: usize, z: usize) -> Strategy {
        let mut s = Strategy::new(vec![0; self.num_states]);
        for j in 1..=i {
            s.actions[self.m(j)] = R;
        }
        for j in 1..=z {
            s.actions[self.big_m(j)] = R;
        }
        s.actions[self.star()] = k.max(1) - 1;
        s
    }

    /// Inverse of [`strategy`](Self::strategy); `None` if the strategy is
    /// not of that form.
    pub fn label(&self, s: &Strategy) -> Option<PathLabel> {
        let sp = self.rewards.s_prime;
        let prefix = |f: &dyn Fn(usize) -> usize| -> Option<usize> {
            let k = (1..=sp).take_while(|&j| s.get(f(j)) == R).count();
            (k + 1..=sp).all(|j| s.get(f(j)) == U).then_some(k)
        };
        Some(PathLabel {
            min_prefix: prefix(&|j| self.m(j))?,
            star_action: s.get(self.star()) + 1,
            max_prefix: prefix(&|j| self.big_m(j))?,
        })
    }
}

/// `(i, k, z)` of a strategy `(π_min^(i), π_max^(k,z))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathLabel {
    pub min_prefix: usize,
    pub star_action: usize,
    pub max_prefix: usize,
}

impl std::fmt::Display for PathLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(min {}, a_{}, max {})", self.min_prefix, self.star_action, self.max_prefix)
    }
}

/// HI2 with `T` dummy states. Rewards lie in `[-1, 1]`; map them to `[0,1]`
/// with [`StochasticGame::affine_reward_map`] before sampling-based solvers.
pub fn build_hi2(t: usize, rewards: &Hi2Rewards) -> Result<(StochasticGame<f64>, Hi2Meta)> {
    let p = rewards;
    if p.s_prime < 2 || p.r.len() != p.s_prime || p.s_b == 0 || p.s_b_prime == 0 || t == 0 {
        return Err(Error::InvalidParameter(format!(
            "inconsistent HI2 sizes: S'={} with {} rewards, S_b={}, S_b'={}, T={t}",
            p.s_prime,
            p.r.len(),
            p.s_b,
            p.s_b_prime
        )));
    }
    let n = t + 2 * p.s_prime + p.s_b + p.s_b_prime + 2;
    let meta = Hi2Meta {
        t,
        rewards: p.clone(),
        num_states: n,
    };
    let mut owners = vec![Player::Min; n];
    let mut actions: Vec<Vec<Action<f64>>> = vec![Vec::new(); n];
    for s in meta.dummies() {
        actions[s] = vec![Action::uniform(0.0)];
    }
    for j in 1..=p.s_prime {
        let next = if j > 1 { meta.m(j - 1) } else { meta.b(p.s_b) };
        actions[meta.m(j)] = vec![Action::uniform(0.0), Action::point(p.r_delta, next)];
    }
    for j in 1..=p.s_b {
        let next = if j > 1 { meta.b(j - 1) } else { meta.goal() };
        actions[meta.b(j)] = vec![Action::point(0.0, next)];
    }
    actions[meta.goal()] = vec![Action::uniform(-p.r_g)];
    for j in 1..=p.s_prime {
        let s = meta.big_m(j);
        owners[s] = Player::Max;
        let next = if j > 1 { meta.big_m(j - 1) } else { meta.big_b(p.s_b_prime) };
        actions[s] = vec![Action::uniform(0.0), Action::point(-p.r_delta_prime, next)];
    }
    for j in 1..=p.s_b_prime {
        let s = meta.big_b(j);
        owners[s] = Player::Max;
        let next = if j > 1 { meta.big_b(j - 1) } else { meta.star() };
        actions[s] = vec![Action::point(0.0, next)];
    }
    owners[meta.star()] = Player::Max;
    actions[meta.star()] = (1..=p.s_prime)
        .map(|i| Action::point(p.r[i - 1], meta.m(i)))
        .collect();
    let game = StochasticGame::new(owners, actions, p.gamma)?;
    Ok((game, meta))
}

/// One step of the predicted strategy-iteration path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathStep {
    /// The strategy with this label is evaluated.
    Evaluate(PathLabel),
    /// The min player's greedy update produces this label.
    MinUpdate(PathLabel),
}

/// Predicted path from `(π_min^(0), π_max^(1,0))`: evaluate `(0, a_1, z)` for
/// `z = 0..=S'`; then for `i = 1..S'`: min update to `(i, a_i, S')`, evaluate
/// it, and evaluate `(i, a_{i+1}, z)` for `z = 0..=S'`.
pub fn predicted_hi2_path(s_prime: usize) -> Vec<PathStep> {
    let l = |i, k, z| PathLabel {
        min_prefix: i,
        star_action: k,
        max_prefix: z,
    };
    let mut path: Vec<PathStep> = (0..=s_prime).map(|z| PathStep::Evaluate(l(0, 1, z))).collect();
    for i in 1..s_prime {
        path.push(PathStep::MinUpdate(l(i, i, s_prime)));
        path.push(PathStep::Evaluate(l(i, i, s_prime)));
        path.extend((0..=s_prime).map(|z| PathStep::Evaluate(l(i, i + 1, z))));
    }
    path
}

/// Result of an HI2 path check.
#[derive(Clone, Debug)]
pub struct Hi2PathOutcome {
    pub trace: SolveTrace<f64>,
    pub report: CheckReport,
    pub meta: Hi2Meta,
    /// Evaluations spent while the run followed the predicted path.
    pub path_evaluations: usize,
    /// All evaluations until strategy iteration stopped.
    pub total_evaluations: usize,
    /// Observed steps, decoded; `None` where the strategy has no label.
    pub observed: Vec<(bool, Option<PathLabel>)>,
}

/// Allowed range of total policy evaluations: `[S'(S'-1), S'(S'+2)]`.
pub fn hi2_evaluation_bounds(s_prime: usize) -> (usize, usize) {
    (s_prime * (s_prime - 1), s_prime * (s_prime + 2))
}

/// Runs strategy iteration from `(π_min^(0), π_max^(1,0))` and compares every
/// step with [`predicted_hi2_path`]. Each evaluated-to-evaluated step is one
/// of three moves: a reset of the max strategy to `(i+1, 0)`, a
/// one-state extension `z → z+1`, or the min update `i → i+1`. Also checks
/// the total number of evaluations against [`hi2_evaluation_bounds`].
pub fn verify_si_path_hi2(t: usize, rewards: &Hi2Rewards) -> Result<Hi2PathOutcome> {
    let (game, meta) = build_hi2(t, rewards)?;
    let init = meta.strategy(0, 1, 0);
    let mut observed = Vec::new();
    let (_, trace) = strategy_iteration_observed(&game, &init, |ev| match ev {
        SolverEvent::Evaluated { strategy, .. } => observed.push((true, meta.label(strategy))),
        SolverEvent::MinUpdated { strategy } => observed.push((false, meta.label(strategy))),
    })?;
    let predicted = predicted_hi2_path(rewards.s_prime);
    let mut bad = Vec::new();
    let mut path_evaluations = 0;
    for (k, want) in predicted.iter().enumerate() {
        let got = observed.get(k).copied();
        let (is_eval, label) = match *want {
            PathStep::Evaluate(l) => (true, l),
            PathStep::MinUpdate(l) => (false, l),
        };
        if got != Some((is_eval, Some(label))) {
            let shown = match got {
                None => "run ended".to_string(),
                Some((e, Some(l))) => format!("{} {l}", if e { "evaluate" } else { "min update" }),
                Some((e, None)) => format!("{} unlabeled strategy", if e { "evaluate" } else { "min update" }),
            };
            bad.push(Violation::described(
                Property::PathStep,
                k as f64,
                predicted.len() as f64,
                format!("step {k}: expected {want:?}, observed {shown}"),
            ));
            break;
        }
        if is_eval {
            path_evaluations += 1;
        }
    }
    let total_evaluations = trace.policy_evaluations();
    let (lo, hi) = hi2_evaluation_bounds(rewards.s_prime);
    if total_evaluations < lo || total_evaluations > hi {
        bad.push(Violation::described(
            Property::Count,
            total_evaluations as f64,
            hi as f64,
            format!(
                "total policy evaluations {total_evaluations} outside [{lo}, {hi}] ({path_evaluations} on the predicted path)"
            ),
        ));
    }
    Ok(Hi2PathOutcome {
        trace,
        report: CheckReport::from_violations(bad),
        meta,
        path_evaluations,
        total_evaluations,
        observed,
    })
}

/// `(1-γ)·T'·v̄` for a strategy, with `v̄` the average value over all `T'` states.
pub fn scaled_average_value(game: &StochasticGame<f64>, sigma: &Strategy) -> Result<f64> {
    let v = evaluate(game, sigma)?;
    Ok((1.0 - game.gamma()) * v.iter().sum::<f64>())
}

/// Signs of `(1-γ)T'v̄` over the grid `i ∈ [1,S']`, `z ∈ [0,S']`: negative
/// for `(π_min^(i), π_max^(i,z))` and positive for `(π_min^(i), π_max^(i+1,z))`
/// when `i+1 ≤ S'`. The positive cells must also lie within `band` of
/// `-(i+S_b+1)r_g + (1+z+S_b')r_i`.
pub fn hi2_vbar_signs(t: usize, rewards: &Hi2Rewards, band: f64) -> Result<CheckReport> {
    let (game, meta) = build_hi2(t, rewards)?;
    let p = rewards;
    let mut bad = Vec::new();
    for i in 1..=p.s_prime {
        for z in 0..=p.s_prime {
            let neg = scaled_average_value(&game, &meta.strategy(i, i, z))?;
            if !(neg < 0.0) {
                bad.push(Violation::described(
                    Property::ValueSign,
                    neg,
                    0.0,
                    format!("(min {i}, a_{i}, max {z}) should be negative"),
                ));
            }
            if i + 1 > p.s_prime {
                continue;
            }
            let pos = scaled_average_value(&game, &meta.strategy(i, i + 1, z))?;
            if !(pos > 0.0) {
                bad.push(Violation::described(
                    Property::ValueSign,
                    pos,
                    0.0,
                    format!("(min {i}, a_{}, max {z}) should be positive", i + 1),
                ));
            }
            let predicted = -((i + p.s_b + 1) as f64) * p.r_g + (1 + z + p.s_b_prime) as f64 * p.r[i - 1];
            if (pos - predicted).abs() > band {
                bad.push(Violation::described(
                    Property::ValueBand,
                    pos,
                    predicted,
                    format!("(min {i}, a_{}, max {z}) outside band {band}", i + 1),
                ));
            }
        }
    }
    Ok(CheckReport::from_violations(bad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hi1_sizes() {
        for (t, sp) in [(48, 2), (192, 4), (768, 8)] {
            let (g, meta) = build_hi1(t, 4.0).unwrap();
            assert_eq!(meta.s_prime, sp);
            assert!(6 * sp * sp <= t / 2);
            assert_eq!((0..t).filter(|&s| g.num_actions(s) == 2).count(), sp);
            assert!(g.validate().is_empty());
        }
        assert!(build_hi1(47, 1.0).is_err());
        assert!(build_hi1(48, 0.5).is_err());
    }

    #[test]
    fn hi1_named_strategies() {
        let (_, meta) = build_hi1(48, 1.0).unwrap();
        assert_eq!(meta.right_states(), 45..47);
        assert_eq!(meta.pi(1).actions[46], R);
        assert_eq!(meta.pi(1).actions[45], U);
        assert_eq!(meta.pi_e().actions[45], R);
        let l = meta.pi_e_stationary();
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((l[47] / l[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hi2_default_parameters() {
        let r = default_hi2_rewards(400).unwrap();
        assert_eq!((r.s_prime, r.s_b, r.s_b_prime), (5, 1, 15));
        assert!(r.r.windows(2).all(|w| w[0] > w[1]));
        assert!(r.r.iter().all(|&x| 0.0 < x && x < r.r_g));
        assert!(default_hi2_rewards(399).is_err());
        assert_eq!(default_hi2_rewards(1600).unwrap().s_prime, 10);
    }

    #[test]
    fn hi2_layout_and_labels() {
        let r = default_hi2_rewards(400).unwrap();
        let (g, meta) = build_hi2(400, &r).unwrap();
        assert_eq!(g.num_states(), 400 + 2 * 5 + 1 + 15 + 2);
        assert_eq!(meta.star(), g.num_states() - 1);
        let s = meta.strategy(2, 3, 4);
        assert_eq!(
            meta.label(&s),
            Some(PathLabel {
                min_prefix: 2,
                star_action: 3,
                max_prefix: 4
            })
        );
        let mut broken = s.clone();
        broken.actions[meta.m(4)] = R;
        assert_eq!(meta.label(&broken), None);
    }

    #[test]
    fn predicted_path_length() {
        let path = predicted_hi2_path(5);
        let evals = path.iter().filter(|p| matches!(p, PathStep::Evaluate(_))).count();
        assert_eq!(evals, 5 * 5 + 2 * 5 - 1);
        assert_eq!(path.len() - evals, 4);
    }
}
