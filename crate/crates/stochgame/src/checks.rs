//! Validators for value-strategy sequences, the ε-optimality implication,
//! Markovian plans and the variance Bellman identity.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{bellman, bellman_fixed, evaluate, greedy, half_bellman, policy_iteration, value_iteration};
use crate::game::{mean, Player, StochasticGame, Strategy};
use crate::qvi::{Direction, VsSequence};
use crate::scalar::{max_abs_diff, Scalar};

/// Slack on every comparison.
pub const CHECK_SLACK: f64 = 1e-8;
/// Tolerance of the value iteration that supplies `v*`.
pub const V_STAR_TOLERANCE: f64 = 1e-10;

/// Which inequality failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    /// Successive values move in the sequence direction.
    ChainMonotone,
    /// The terminal value stays on the far side of `v*`.
    TerminalBound,
    /// `T_σ[v]` against `v`.
    StrategyOperator,
    /// `T[v]` against `v`.
    BellmanOperator,
    /// Half Bellman operator of the sequence player against `v`.
    HalfOperator,
    /// Q against `r + γPv_prev ± ε`.
    QBound,
    /// `v` against `V[Q]`.
    GreedyBound,
    /// Best-response value against `v* ± ε`.
    EpsOptimal,
    /// A solver step left the predicted strategy path.
    PathStep,
    /// Iteration or evaluation count outside its predicted range.
    Count,
    /// Suboptimality witness of an intermediate policy.
    Gap,
    /// Stationary distribution entry outside its bounds.
    StationaryBound,
    /// Average value with the wrong sign.
    ValueSign,
    /// Average value outside its predicted band.
    ValueBand,
    /// A chain whose stationary distribution could not be computed.
    NonConvergence,
}

impl Property {
    /// Number of the defining property the check belongs to.
    pub fn group(self) -> u8 {
        match self {
            Property::ChainMonotone | Property::TerminalBound => 1,
            Property::StrategyOperator | Property::BellmanOperator | Property::HalfOperator => 2,
            Property::QBound => 3,
            Property::GreedyBound => 4,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub property: Property,
    /// Sequence entry, when the check is per entry.
    pub entry: Option<usize>,
    pub state: usize,
    pub action: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Violation {
    /// Violation with a free-form explanation and no state-level location.
    pub fn described(property: Property, lhs: f64, rhs: f64, note: impl Into<String>) -> Self {
        Violation {
            property,
            entry: None,
            state: 0,
            action: None,
            lhs,
            rhs,
            slack: 0.0,
            note: note.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.property)?;
        if let Some(i) = self.entry {
            write!(f, " at entry {i}")?;
        }
        write!(f, ", state {}", self.state)?;
        if let Some(a) = self.action {
            write!(f, " action {a}")?;
        }
        write!(f, ": lhs {} vs rhs {} (slack {})", self.lhs, self.rhs, self.slack)?;
        if !self.note.is_empty() {
            write!(f, " [{}]", self.note)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        CheckReport {
            passed: violations.is_empty(),
            violations,
        }
    }

    pub fn merge(mut self, other: CheckReport) -> Self {
        self.violations.extend(other.violations);
        self.passed = self.violations.is_empty();
        self
    }

    /// Violated property groups, sorted and deduplicated.
    pub fn groups(&self) -> Vec<u8> {
        let mut g: Vec<u8> = self.violations.iter().map(|v| v.property.group()).collect();
        g.sort_unstable();
        g.dedup();
        g
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed {
            return f.write_str("passed");
        }
        writeln!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// `var(s,a) = ⟨P, v²⟩ - ⟨P, v⟩²`, floored at zero, in pair order.
pub fn variance_of_value<F: Scalar>(game: &StochasticGame<F>, v: &[F]) -> Vec<F> {
    let sq: Vec<F> = v.iter().map(|&x| x * x).collect();
    let (m, m2) = (mean(v), mean(&sq));
    game.pairs()
        .map(|(s, a)| {
            let e = game.expect_with_mean(s, a, v, m);
            (game.expect_with_mean(s, a, &sq, m2) - e * e).max(F::zero())
        })
        .collect()
}

/// Collects `lhs ≤ rhs + slack` (decreasing) or `lhs ≥ rhs - slack`
/// (increasing) failures.
struct Checker {
    direction: Direction,
    slack: f64,
    out: Vec<Violation>,
}

impl Checker {
    fn below<F: Scalar>(&mut self, p: Property, entry: Option<usize>, state: usize, action: Option<usize>, lhs: F, rhs: F) {
        let (l, r) = (lhs.as_f64(), rhs.as_f64());
        let ok = match self.direction {
            Direction::Decreasing => l <= r + self.slack,
            Direction::Increasing => l >= r - self.slack,
        };
        if !ok {
            self.out.push(Violation {
                property: p,
                entry,
                state,
                action,
                lhs: l,
                rhs: r,
                slack: self.slack,
                note: String::new(),
            });
        }
    }
}

/// `v*` from value iteration at the checking tolerance.
pub fn optimal_value<F: Scalar>(game: &StochasticGame<F>) -> Result<Vec<F>> {
    Ok(value_iteration(game, F::lit(V_STAR_TOLERANCE))?.0)
}

fn check_sequence<F: Scalar>(
    game: &StochasticGame<F>,
    seq: &VsSequence<F>,
    eps_override: Option<F>,
    v_star: &[F],
    want: Direction,
) -> Result<CheckReport> {
    if seq.direction != want {
        return Err(Error::DirectionMismatch {
            expected: want.name(),
            found: seq.direction.name(),
        });
    }
    let n = game.num_states();
    for e in &seq.entries {
        if e.v.len() != n {
            return Err(Error::DimensionMismatch {
                what: "sequence values",
                expected: n,
                found: e.v.len(),
            });
        }
        e.sigma.check(game)?;
        if e.q.len() != game.num_pairs() || e.xi.len() != game.num_pairs() {
            return Err(Error::DimensionMismatch {
                what: "sequence q-function",
                expected: game.num_pairs(),
                found: e.q.len().min(e.xi.len()),
            });
        }
    }
    let player = match want {
        Direction::Decreasing => Player::Min,
        Direction::Increasing => Player::Max,
    };
    let sign = match want {
        Direction::Decreasing => F::one(),
        Direction::Increasing => -F::one(),
    };
    let mut c = Checker {
        direction: want,
        slack: CHECK_SLACK,
        out: Vec::new(),
    };
    let last = seq.entries.len() - 1;
    for (i, e) in seq.entries.iter().enumerate() {
        if i > 0 {
            let prev = &seq.entries[i - 1].v;
            for s in 0..n {
                c.below(Property::ChainMonotone, Some(i), s, None, e.v[s], prev[s]);
            }
        }
        let ts = bellman_fixed(game, &e.sigma, &e.v);
        let t = bellman(game, &e.v);
        let h = half_bellman(game, &e.v, &e.sigma.restrict(game, player), player)?;
        for s in 0..n {
            c.below(Property::StrategyOperator, Some(i), s, None, ts[s], e.v[s]);
            c.below(Property::BellmanOperator, Some(i), s, None, t[s], e.v[s]);
            c.below(Property::HalfOperator, Some(i), s, None, h[s], e.v[s]);
        }
        let q = e.q_function(game)?;
        if i > 0 {
            let prev = &seq.entries[i - 1].v;
            let m = mean(prev);
            for (k, (s, a)) in game.pairs().enumerate() {
                let eps = eps_override.unwrap_or(e.xi[k]);
                let rhs = game.reward(s, a) + game.gamma() * game.expect_with_mean(s, a, prev, m) + sign * eps;
                c.below(Property::QBound, Some(i), s, Some(a), q.get(s, a), rhs);
            }
        }
        let (vq, _) = greedy(game, &q);
        for s in 0..n {
            c.below(Property::GreedyBound, Some(i), s, None, e.v[s], vq[s]);
        }
        if i == last {
            for s in 0..n {
                // Terminal value lies beyond v*: v* ≤ v (decreasing), v* ≥ v (increasing).
                c.below(Property::TerminalBound, Some(i), s, None, v_star[s], e.v[s]);
            }
        }
    }
    Ok(CheckReport::from_violations(c.out))
}

/// Certifies a decreasing sequence: monotone chain ending above `v*`;
/// `T_σ[v]`, `T[v]` and the min half operator all at most `v`;
/// `Q^(i) ≤ r + γPv^(i-1) + ε^(i)`; and `v^(i) ≤ V[Q^(i)]`.
///
/// `ε^(i)` is the sequence's own bound unless `eps_override` replaces it.
pub fn check_mdvss<F: Scalar>(
    game: &StochasticGame<F>,
    seq: &VsSequence<F>,
    eps_override: Option<F>,
) -> Result<CheckReport> {
    let v_star = optimal_value(game)?;
    check_mdvss_against(game, seq, eps_override, &v_star)
}

/// [`check_mdvss`] with a precomputed `v*`.
pub fn check_mdvss_against<F: Scalar>(
    game: &StochasticGame<F>,
    seq: &VsSequence<F>,
    eps_override: Option<F>,
    v_star: &[F],
) -> Result<CheckReport> {
    check_sequence(game, seq, eps_override, v_star, Direction::Decreasing)
}

/// Mirror of [`check_mdvss`] with every inequality reversed and the max
/// player's half operator.
pub fn check_mivss<F: Scalar>(
    game: &StochasticGame<F>,
    seq: &VsSequence<F>,
    eps_override: Option<F>,
) -> Result<CheckReport> {
    let v_star = optimal_value(game)?;
    check_mivss_against(game, seq, eps_override, &v_star)
}

pub fn check_mivss_against<F: Scalar>(
    game: &StochasticGame<F>,
    seq: &VsSequence<F>,
    eps_override: Option<F>,
    v_star: &[F],
) -> Result<CheckReport> {
    check_sequence(game, seq, eps_override, v_star, Direction::Increasing)
}

/// Value of the opponent's exact best response to `part` of `sigma`.
pub fn best_response_value<F: Scalar>(
    game: &StochasticGame<F>,
    sigma: &Strategy,
    fixed: Player,
) -> Result<Vec<F>> {
    let part = sigma.restrict(game, fixed);
    let (br, _) = policy_iteration(game, sigma, Some((fixed, &part)))?;
    evaluate(game, &br)
}

/// With `ε = ‖v^(R) - v*‖∞`, the terminal strategy's worst case is within `ε`
/// of `v*`: `v^{π_min} ≤ v* + ε` (decreasing) or `v^{π_max} ≥ v* - ε`.
pub fn check_eps_optimal_implication<F: Scalar>(
    game: &StochasticGame<F>,
    seq: &VsSequence<F>,
) -> Result<CheckReport> {
    let v_star = optimal_value(game)?;
    check_eps_optimal_implication_against(game, seq, &v_star)
}

pub fn check_eps_optimal_implication_against<F: Scalar>(
    game: &StochasticGame<F>,
    seq: &VsSequence<F>,
    v_star: &[F],
) -> Result<CheckReport> {
    let term = seq.terminal();
    term.sigma.check(game)?;
    let eps = max_abs_diff(&term.v, v_star);
    let (fixed, sign) = match seq.direction {
        Direction::Decreasing => (Player::Min, F::one()),
        Direction::Increasing => (Player::Max, -F::one()),
    };
    let value = best_response_value(game, &term.sigma, fixed)?;
    let mut c = Checker {
        direction: seq.direction,
        slack: CHECK_SLACK,
        out: Vec::new(),
    };
    for s in 0..game.num_states() {
        c.below(Property::EpsOptimal, None, s, None, value[s], v_star[s] + sign * eps);
    }
    Ok(CheckReport::from_violations(c.out))
}

/// Finite list of stage strategies followed by a stationary tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovianPlan {
    pub prefix: Vec<Strategy>,
    pub tail: Strategy,
}

impl MarkovianPlan {
    /// Strategy played at stage `t`.
    pub fn stage(&self, t: usize) -> &Strategy {
        self.prefix.get(t).unwrap_or(&self.tail)
    }

    fn check<F: Scalar>(&self, game: &StochasticGame<F>) -> Result<()> {
        for s in &self.prefix {
            s.check(game)?;
        }
        self.tail.check(game)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkovianValues<F> {
    /// Values from stage 0 to `prefix.len()`; the last is the tail value.
    pub stage_values: Vec<Vec<F>>,
    /// Variance of the discounted return from each start state.
    pub variance: Vec<F>,
}

fn stage_rewards<F: Scalar>(game: &StochasticGame<F>, sigma: &Strategy) -> Vec<F> {
    (0..game.num_states()).map(|s| game.reward(s, sigma.get(s))).collect()
}

fn apply_stage<F: Scalar>(game: &StochasticGame<F>, sigma: &Strategy, x: &[F]) -> Vec<F> {
    let m = mean(x);
    (0..game.num_states())
        .map(|s| game.expect_with_mean(s, sigma.get(s), x, m))
        .collect()
}

/// Stage values and return variance of a plan, from backward recursions on
/// the first and second moments of the discounted return.
pub fn markovian_evaluate<F: Scalar>(game: &StochasticGame<F>, plan: &MarkovianPlan) -> Result<MarkovianValues<F>> {
    plan.check(game)?;
    let g = game.gamma();
    let two = F::lit(2.0);
    let tail_v = evaluate(game, &plan.tail)?;
    let r = stage_rewards(game, &plan.tail);
    let pv = apply_stage(game, &plan.tail, &tail_v);
    let rhs: Vec<F> = r.iter().zip(&pv).map(|(&ri, &p)| ri * ri + two * g * ri * p).collect();
    let mut second = crate::linalg::solve_resolvent(game, &plan.tail, g * g, &rhs, false);
    let mut stage_values = vec![tail_v];
    for sigma in plan.prefix.iter().rev() {
        let next = stage_values.last().unwrap();
        let r = stage_rewards(game, sigma);
        let pv = apply_stage(game, sigma, next);
        let pm = apply_stage(game, sigma, &second);
        let v: Vec<F> = r.iter().zip(&pv).map(|(&ri, &p)| ri + g * p).collect();
        second = (0..r.len())
            .map(|s| r[s] * r[s] + two * g * r[s] * pv[s] + g * g * pm[s])
            .collect();
        stage_values.push(v);
    }
    stage_values.reverse();
    let variance = stage_values[0]
        .iter()
        .zip(&second)
        .map(|(&v, &m)| (m - v * v).max(F::zero()))
        .collect();
    Ok(MarkovianValues {
        stage_values,
        variance,
    })
}

/// Largest per-state gap between the return variance and the series
/// `Σ_t γ^{2(t+1)} P^{π0}…P^{π(t-1)} var(v_{t+1})_{π(t)}`, truncated once
/// `γ^{2t}·B² < 1e-12` with `B` the value range.
pub fn variance_bellman_residual<F: Scalar>(game: &StochasticGame<F>, plan: &MarkovianPlan) -> Result<F> {
    let lhs = markovian_evaluate(game, plan)?;
    let n = game.num_states();
    let g2 = game.gamma() * game.gamma();
    let range = game.reward_bound() * game.horizon();
    let bound = range * range;
    let cutoff = F::lit(1e-12);
    let k = plan.prefix.len();
    let value_at = |t: usize| &lhs.stage_values[t.min(k)];
    // Row s of `reach` is the stage-t state distribution from start s.
    let mut reach: Vec<Vec<F>> = (0..n)
        .map(|s| (0..n).map(|j| if j == s { F::one() } else { F::zero() }).collect())
        .collect();
    let mut rhs = vec![F::zero(); n];
    let mut weight = F::one();
    let mut t = 0;
    while weight * bound >= cutoff {
        let sigma = plan.stage(t);
        let pairs_var = variance_of_value(game, value_at(t + 1));
        let w: Vec<F> = (0..n)
            .map(|s| pairs_var[game.pair_index(s, sigma.get(s))])
            .collect();
        let coef = weight * g2;
        for s in 0..n {
            let term: F = reach[s].iter().zip(&w).map(|(&p, &x)| p * x).sum();
            rhs[s] = rhs[s] + coef * term;
        }
        reach = reach
            .iter()
            .map(|row| crate::linalg::apply_transpose(game, sigma, row))
            .collect();
        weight = weight * g2;
        t += 1;
    }
    Ok(max_abs_diff(&lhs.variance, &rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Action;

    fn coin() -> StochasticGame<f64> {
        StochasticGame::new(
            vec![Player::Min, Player::Max, Player::Min],
            vec![
                vec![Action::sparse(0.0, vec![(1, 0.5), (2, 0.5)]), Action::uniform(0.5)],
                vec![Action::point(1.0, 0)],
                vec![Action::point(0.0, 0), Action::point(0.25, 2)],
            ],
            0.8,
        )
        .unwrap()
    }

    #[test]
    fn popoviciu_two_point() {
        let g = coin();
        let var = variance_of_value(&g, &[0.0, 3.0, 0.0]);
        assert!((var[0] - 2.25).abs() < 1e-12);
        assert_eq!(var[2], 0.0);
        assert!(variance_of_value(&g, &[2.0; 3]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stationary_plan_reduces_to_evaluate() {
        let g = coin();
        let sigma = Strategy::new(vec![0, 0, 1]);
        let plan = MarkovianPlan {
            prefix: vec![sigma.clone(); 2],
            tail: sigma.clone(),
        };
        let out = markovian_evaluate(&g, &plan).unwrap();
        let v = evaluate(&g, &sigma).unwrap();
        for stage in &out.stage_values {
            assert!(max_abs_diff(stage, &v) < 1e-10);
        }
        let empty = MarkovianPlan {
            prefix: vec![],
            tail: sigma,
        };
        assert_eq!(markovian_evaluate(&g, &empty).unwrap().stage_values, vec![v]);
    }

    #[test]
    fn deterministic_game_has_no_variance() {
        let g = StochasticGame::new(
            vec![Player::Min, Player::Max],
            vec![vec![Action::point(1.0, 1)], vec![Action::point(0.3, 0)]],
            0.9,
        )
        .unwrap();
        let plan = MarkovianPlan {
            prefix: vec![],
            tail: Strategy::first_actions(&g),
        };
        assert!(markovian_evaluate(&g, &plan).unwrap().variance.iter().all(|&x: &f64| x.abs() < 1e-9));
        assert!(variance_bellman_residual(&g, &plan).unwrap() < 1e-9);
    }

    #[test]
    fn variance_identity_small() {
        let g = coin();
        let plan = MarkovianPlan {
            prefix: vec![Strategy::new(vec![1, 0, 0]), Strategy::new(vec![0, 0, 1])],
            tail: Strategy::new(vec![0, 0, 0]),
        };
        assert!(variance_bellman_residual(&g, &plan).unwrap() < 1e-6);
    }

    #[test]
    fn report_merge_and_groups() {
        let v = Violation {
            property: Property::QBound,
            entry: Some(1),
            state: 0,
            action: Some(0),
            lhs: 1.0,
            rhs: 0.0,
            slack: CHECK_SLACK,
            note: String::new(),
        };
        let r = CheckReport::default().merge(CheckReport::from_violations(vec![v]));
        assert!(!r.passed);
        assert_eq!(r.groups(), vec![3]);
        assert!(CheckReport::from_violations(vec![]).passed);
    }
}
