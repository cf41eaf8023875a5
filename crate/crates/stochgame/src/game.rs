//! Game model: state ownership, sparse transitions, rewards, discount.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row sums must match 1 to this tolerance.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Row-sum tolerance at precision `F`: [`PROBABILITY_TOLERANCE`], widened to
/// a few ulps when `F` cannot represent probabilities that finely.
pub fn probability_tolerance<F: Scalar>() -> f64 {
    PROBABILITY_TOLERANCE.max(4.0 * F::epsilon().as_f64())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Min,
    Max,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Min => Player::Max,
            Player::Max => Player::Min,
        }
    }

    /// Whether `a` is better than `b` from this player's point of view.
    pub fn prefers<F: Scalar>(self, a: F, b: F) -> bool {
        match self {
            Player::Min => a < b,
            Player::Max => a > b,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Min => f.write_str("min"),
            Player::Max => f.write_str("max"),
        }
    }
}

/// Next-state law of one action.
#[derive(Clone, Debug, PartialEq)]
pub enum Transition<F> {
    /// Explicit `(target, probability)` entries.
    Sparse(Vec<(usize, F)>),
    /// Uniform over every state of the game, including the source.
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Action<F> {
    pub reward: F,
    pub transition: Transition<F>,
}

impl<F: Scalar> Action<F> {
    pub fn point(reward: F, next: usize) -> Self {
        Action {
            reward,
            transition: Transition::Sparse(vec![(next, F::one())]),
        }
    }

    pub fn uniform(reward: F) -> Self {
        Action {
            reward,
            transition: Transition::Uniform,
        }
    }

    pub fn sparse(reward: F, entries: Vec<(usize, F)>) -> Self {
        Action {
            reward,
            transition: Transition::Sparse(entries),
        }
    }
}

/// One violated well-formedness condition.
#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    NoStates,
    OwnerCountMismatch { owners: usize, states: usize },
    NoActions { state: usize },
    Gamma { gamma: f64 },
    RowSum { state: usize, action: usize, sum: f64 },
    NegativeProbability { state: usize, action: usize, target: usize, p: f64 },
    TargetOutOfRange { state: usize, action: usize, target: usize },
    NonFinite { state: usize, action: usize },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ValidationIssue::NoStates => write!(f, "game has no states"),
            ValidationIssue::OwnerCountMismatch { owners, states } => {
                write!(f, "{owners} owners for {states} states")
            }
            ValidationIssue::NoActions { state } => write!(f, "state {state} has no actions"),
            ValidationIssue::Gamma { gamma } => write!(f, "discount {gamma} outside (0,1)"),
            ValidationIssue::RowSum { state, action, sum } => {
                write!(f, "transition sum {sum} ≠ 1 at ({state},{action})")
            }
            ValidationIssue::NegativeProbability { state, action, target, p } => {
                write!(f, "negative probability {p} toward {target} at ({state},{action})")
            }
            ValidationIssue::TargetOutOfRange { state, action, target } => {
                write!(f, "target {target} out of range at ({state},{action})")
            }
            ValidationIssue::NonFinite { state, action } => {
                write!(f, "non-finite reward or probability at ({state},{action})")
            }
        }
    }
}

/// Every violated invariant of a game. Empty iff the game is well formed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return f.write_str("ok");
        }
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Discounted two-player turn-based zero-sum stochastic game.
///
/// Immutable after construction. State-action pairs are numbered in state
/// order, which is the layout used by [`QFunction`].
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticGame<F> {
    owners: Vec<Player>,
    actions: Vec<Vec<Action<F>>>,
    offsets: Vec<usize>,
    gamma: F,
    reward_bound: F,
}

impl<F: Scalar> StochasticGame<F> {
    /// Builds a game and rejects it unless [`validate`](Self::validate) is empty.
    pub fn new(owners: Vec<Player>, actions: Vec<Vec<Action<F>>>, gamma: F) -> Result<Self> {
        let game = Self::new_unchecked(owners, actions, gamma);
        let report = game.validate();
        if report.is_empty() {
            Ok(game)
        } else {
            Err(Error::InvalidGame(report))
        }
    }

    /// Builds without validation, so malformed games can be inspected.
    pub fn new_unchecked(owners: Vec<Player>, actions: Vec<Vec<Action<F>>>, gamma: F) -> Self {
        let mut offsets = Vec::with_capacity(actions.len() + 1);
        offsets.push(0);
        for row in &actions {
            offsets.push(offsets.last().unwrap() + row.len());
        }
        let reward_bound = actions
            .iter()
            .flatten()
            .fold(F::zero(), |m, a| m.max(a.reward.abs()));
        StochasticGame {
            owners,
            actions,
            offsets,
            gamma,
            reward_bound,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let n = self.actions.len();
        if n == 0 {
            issues.push(ValidationIssue::NoStates);
        }
        if self.owners.len() != n {
            issues.push(ValidationIssue::OwnerCountMismatch {
                owners: self.owners.len(),
                states: n,
            });
        }
        let g = self.gamma.as_f64();
        if !(g > 0.0 && g < 1.0) {
            issues.push(ValidationIssue::Gamma { gamma: g });
        }
        for (s, row) in self.actions.iter().enumerate() {
            if row.is_empty() {
                issues.push(ValidationIssue::NoActions { state: s });
            }
            for (a, act) in row.iter().enumerate() {
                if !act.reward.is_finite() {
                    issues.push(ValidationIssue::NonFinite { state: s, action: a });
                }
                let Transition::Sparse(entries) = &act.transition else {
                    continue;
                };
                let mut sum = 0.0;
                for &(t, p) in entries {
                    let p = p.as_f64();
                    if !p.is_finite() {
                        issues.push(ValidationIssue::NonFinite { state: s, action: a });
                        continue;
                    }
                    if t >= n {
                        issues.push(ValidationIssue::TargetOutOfRange {
                            state: s,
                            action: a,
                            target: t,
                        });
                    }
                    if p < 0.0 {
                        issues.push(ValidationIssue::NegativeProbability {
                            state: s,
                            action: a,
                            target: t,
                            p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > probability_tolerance::<F>() {
                    issues.push(ValidationIssue::RowSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
        }
        ValidationReport { issues }
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    /// Total number of state-action pairs.
    pub fn num_pairs(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn gamma(&self) -> F {
        self.gamma
    }

    /// `1/(1-γ)`, the value range of a `[0,1]`-reward game.
    pub fn horizon(&self) -> F {
        F::one() / (F::one() - self.gamma)
    }

    pub fn reward_bound(&self) -> F {
        self.reward_bound
    }

    pub fn owner(&self, s: usize) -> Player {
        self.owners[s]
    }

    pub fn owners(&self) -> &[Player] {
        &self.owners
    }

    pub fn actions(&self, s: usize) -> &[Action<F>] {
        &self.actions[s]
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.actions[s].len()
    }

    pub fn action(&self, s: usize, a: usize) -> &Action<F> {
        &self.actions[s][a]
    }

    pub fn reward(&self, s: usize, a: usize) -> F {
        self.actions[s][a].reward
    }

    /// Flat index of pair `(s, a)`.
    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        self.offsets[s] + a
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Inverse of [`pair_index`](Self::pair_index).
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_states()).flat_map(move |s| (0..self.num_actions(s)).map(move |a| (s, a)))
    }

    pub fn rewards_in_unit_interval(&self) -> bool {
        self.actions
            .iter()
            .flatten()
            .all(|a| a.reward >= F::zero() && a.reward <= F::one())
    }

    pub(crate) fn require_unit_rewards(&self) -> Result<()> {
        for (s, a) in self.pairs() {
            let r = self.reward(s, a);
            if !(r >= F::zero() && r <= F::one()) {
                return Err(Error::RewardOutOfUnitInterval {
                    state: s,
                    action: a,
                    reward: r.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// `⟨P(·|s,a), v⟩`; `mean` must be the average of `v` (used by uniform rows).
    #[inline]
    pub(crate) fn expect_with_mean(&self, s: usize, a: usize, v: &[F], mean: F) -> F {
        match &self.actions[s][a].transition {
            Transition::Uniform => mean,
            Transition::Sparse(entries) => entries.iter().map(|&(t, p)| p * v[t]).sum(),
        }
    }

    /// `⟨P(·|s,a), v⟩`.
    pub fn expect(&self, s: usize, a: usize, v: &[F]) -> F {
        self.expect_with_mean(s, a, v, mean(v))
    }

    /// Dense copy of row `P(·|s,a)`.
    pub fn transition_row(&self, s: usize, a: usize) -> Vec<F> {
        let n = self.num_states();
        match &self.actions[s][a].transition {
            Transition::Uniform => vec![F::one() / F::from_usize_lossy(n); n],
            Transition::Sparse(entries) => {
                let mut row = vec![F::zero(); n];
                for &(t, p) in entries {
                    row[t] = row[t] + p;
                }
                row
            }
        }
    }

    /// Same game with a different discount.
    pub fn with_gamma(&self, gamma: F) -> Result<Self> {
        let mut g = self.clone();
        g.gamma = gamma;
        let report = g.validate();
        if report.is_empty() {
            Ok(g)
        } else {
            Err(Error::InvalidGame(report))
        }
    }

    /// Same game with `f(s, a, r)` as rewards.
    pub fn map_rewards(&self, mut f: impl FnMut(usize, usize, F) -> F) -> Self {
        let actions = self
            .actions
            .iter()
            .enumerate()
            .map(|(s, row)| {
                row.iter()
                    .enumerate()
                    .map(|(a, act)| Action {
                        reward: f(s, a, act.reward),
                        transition: act.transition.clone(),
                    })
                    .collect()
            })
            .collect();
        Self::new_unchecked(self.owners.clone(), actions, self.gamma)
    }

    /// Roles swapped and rewards replaced by `1 - r`. Requires rewards in `[0,1]`.
    ///
    /// The mirrored optimum satisfies `v'* = 1/(1-γ) - v*`, and its min player
    /// optimum is the original max player optimum.
    pub fn mirror(&self) -> Result<Self> {
        self.require_unit_rewards()?;
        let mut g = self.map_rewards(|_, _, r| F::one() - r);
        g.owners = self.owners.iter().map(|p| p.opponent()).collect();
        Ok(g)
    }

    /// Rewards `(r + offset) / scale`. Optimal strategies are unchanged and
    /// every strategy value maps to `(v + offset/(1-γ)) / scale`.
    pub fn affine_reward_map(&self, scale: F, offset: F) -> Result<Self> {
        if !(scale > F::zero()) {
            return Err(Error::NonPositiveScale(scale.as_f64()));
        }
        Ok(self.map_rewards(|_, _, r| (r + offset) / scale))
    }

    /// Rows rescaled to sum to one. Only done on request, never implicitly.
    pub fn renormalized(&self) -> Self {
        let actions = self
            .actions
            .iter()
            .map(|row| {
                row.iter()
                    .map(|act| match &act.transition {
                        Transition::Uniform => act.clone(),
                        Transition::Sparse(entries) => {
                            let sum: F = entries.iter().map(|e| e.1).sum();
                            Action::sparse(
                                act.reward,
                                entries.iter().map(|&(t, p)| (t, p / sum)).collect(),
                            )
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new_unchecked(self.owners.clone(), actions, self.gamma)
    }
}

pub(crate) fn mean<F: Scalar>(v: &[F]) -> F {
    if v.is_empty() {
        return F::zero();
    }
    v.iter().copied().sum::<F>() / F::from_usize_lossy(v.len())
}

/// One pure action per state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Strategy {
    pub actions: Vec<usize>,
}

impl Strategy {
    pub fn new(actions: Vec<usize>) -> Self {
        Strategy { actions }
    }

    /// Action 0 everywhere.
    pub fn first_actions<F: Scalar>(game: &StochasticGame<F>) -> Self {
        Strategy::new(vec![0; game.num_states()])
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, s: usize) -> usize {
        self.actions[s]
    }

    pub fn check<F: Scalar>(&self, game: &StochasticGame<F>) -> Result<()> {
        if self.actions.len() != game.num_states() {
            return Err(Error::DimensionMismatch {
                what: "strategy",
                expected: game.num_states(),
                found: self.actions.len(),
            });
        }
        for (s, &a) in self.actions.iter().enumerate() {
            if a >= game.num_actions(s) {
                return Err(Error::InvalidAction { state: s, action: a });
            }
        }
        Ok(())
    }

    /// The part of the strategy played by `player`.
    pub fn restrict<F: Scalar>(&self, game: &StochasticGame<F>, player: Player) -> PartialStrategy {
        PartialStrategy {
            actions: self
                .actions
                .iter()
                .enumerate()
                .map(|(s, &a)| (game.owner(s) == player).then_some(a))
                .collect(),
        }
    }

    /// Replaces the entries that `part` defines.
    pub fn overlay(&self, part: &PartialStrategy) -> Strategy {
        Strategy::new(
            self.actions
                .iter()
                .zip(&part.actions)
                .map(|(&a, p)| p.unwrap_or(a))
                .collect(),
        )
    }

    /// `(state, old, new)` for every state where the strategies differ.
    pub fn diff(&self, other: &Strategy) -> Vec<(usize, usize, usize)> {
        self.actions
            .iter()
            .zip(&other.actions)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(s, (&a, &b))| (s, a, b))
            .collect()
    }
}

/// Actions on a subset of states, typically one player's states.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialStrategy {
    pub actions: Vec<Option<usize>>,
}

impl PartialStrategy {
    pub fn get(&self, s: usize) -> Option<usize> {
        self.actions[s]
    }

    /// Errors unless every state owned by `player` has a valid action.
    pub fn check_covers<F: Scalar>(&self, game: &StochasticGame<F>, player: Player) -> Result<()> {
        if self.actions.len() != game.num_states() {
            return Err(Error::DimensionMismatch {
                what: "partial strategy",
                expected: game.num_states(),
                found: self.actions.len(),
            });
        }
        for s in 0..game.num_states() {
            match self.actions[s] {
                Some(a) if a >= game.num_actions(s) => {
                    return Err(Error::InvalidAction { state: s, action: a })
                }
                None if game.owner(s) == player => return Err(Error::MissingAction { state: s }),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Per-state values, in discounted cumulative reward units.
pub type ValueVector<F> = Vec<F>;

/// Values per state-action pair, laid out by [`StochasticGame::pair_index`].
#[derive(Clone, Debug, PartialEq)]
pub struct QFunction<F> {
    values: Vec<F>,
    offsets: Vec<usize>,
}

impl<F: Scalar> QFunction<F> {
    pub fn filled(game: &StochasticGame<F>, x: F) -> Self {
        QFunction {
            values: vec![x; game.num_pairs()],
            offsets: game.offsets().to_vec(),
        }
    }

    pub fn from_flat(game: &StochasticGame<F>, values: Vec<F>) -> Result<Self> {
        if values.len() != game.num_pairs() {
            return Err(Error::DimensionMismatch {
                what: "q-function",
                expected: game.num_pairs(),
                found: values.len(),
            });
        }
        Ok(QFunction {
            values,
            offsets: game.offsets().to_vec(),
        })
    }

    pub fn num_states(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn get(&self, s: usize, a: usize) -> F {
        self.values[self.offsets[s] + a]
    }

    pub fn set(&mut self, s: usize, a: usize, x: F) {
        self.values[self.offsets[s] + a] = x;
    }

    pub fn row(&self, s: usize) -> &[F] {
        &self.values[self.offsets[s]..self.offsets[s + 1]]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn into_flat(self) -> Vec<F> {
        self.values
    }

    /// Whether the pair layout matches `game`.
    pub fn fits<G: Scalar>(&self, game: &StochasticGame<G>) -> bool {
        self.offsets == game.offsets()
    }
}
