//! Variance-reduced Q-value iteration.
//!
//! `qvi_mdvss` emits a monotone decreasing value-strategy sequence and
//! `qvi_mivss` its increasing mirror. `solve` halves the error bound `u`
//! round after round, feeding each terminal value and strategy into the next.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::best_in_row;
use crate::game::{PartialStrategy, Player, QFunction, StochasticGame, Strategy};
use crate::sampler::{derive_seed, GenerativeModel};
use crate::scalar::Scalar;

/// Stream tag separating the mirrored run's samples from the direct run's.
const MIRROR_STREAM: u64 = 0x6d69_7272_6f72;

/// Tunable absolute constants of the algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QviConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
}

impl Default for QviConstants {
    fn default() -> Self {
        QviConstants {
            c1: 4.0,
            c2: 1.0,
            c3: 1.0,
            c: 1.0,
            big_c: 0.1,
        }
    }
}

/// Quantities derived for one run at a given `u` and `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConstants {
    pub gamma: f64,
    pub beta: f64,
    pub u: f64,
    pub delta: f64,
    /// Number of rounds `R`.
    pub rounds: usize,
    pub m1: usize,
    pub m2: usize,
    pub l: f64,
    pub alpha1: f64,
    /// Floor shift `C`.
    pub big_c: f64,
}

impl QviConstants {
    fn check(&self) -> Result<()> {
        let all = [self.c1, self.c2, self.c3, self.c, self.big_c];
        if all.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("constants must be positive: {self:?}")))
        }
    }

    /// `β = 1/(1-γ)`, `R = ⌈c1·β·ln(β/u)⌉`, `m₁ = ⌈c2·β³·max(1,u⁻²)·ln(8|S||A|/δ)⌉`,
    /// `m₂ = ⌈c3·β²·ln(2R|S||A|/δ)⌉`, `L = c·ln(|S||A|/(δ(1-γ)u))`, `α₁ = L/m₁`.
    ///
    /// Two guards: the log factor of `R` is floored at `ln 2` so `u = β` still
    /// runs rounds, and `L` is floored at 1. If `α₁` would exceed 1, `m₁` is
    /// raised to `⌈L⌉`.
    pub fn derive(&self, gamma: f64, u: f64, delta: f64, pairs: usize) -> Result<RunConstants> {
        self.check()?;
        let beta = 1.0 / (1.0 - gamma);
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("discount {gamma} outside (0,1)")));
        }
        if !(u > 0.0 && u <= beta * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!("u = {u} outside (0, {beta}]")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} outside (0,1)")));
        }
        let sa = pairs as f64;
        let rounds = ((self.c1 * beta * (beta / u).ln().max(std::f64::consts::LN_2)).ceil() as usize).max(1);
        let mut m1 = (self.c2 * beta.powi(3) * (1.0f64).max(u.powi(-2)) * (8.0 * sa / delta).ln()).ceil() as usize;
        let m2 = ((self.c3 * beta * beta * (2.0 * rounds as f64 * sa / delta).ln()).ceil() as usize).max(1);
        let l = (self.c * (sa / (delta * (1.0 - gamma) * u)).ln()).max(1.0);
        m1 = m1.max(l.ceil() as usize).max(1);
        Ok(RunConstants {
            gamma,
            beta,
            u,
            delta,
            rounds,
            m1,
            m2,
            l,
            alpha1: l / m1 as f64,
            big_c: self.big_c,
        })
    }
}

impl RunConstants {
    /// Same run with the initial batch size replaced; `α₁` follows.
    pub fn with_m1(mut self, m1: usize) -> Self {
        self.m1 = m1.max(self.l.ceil() as usize).max(1);
        self.alpha1 = self.l / self.m1 as f64;
        self
    }

    /// Samples one run draws: `|S||A|·(m₁ + R·m₂)`.
    pub fn samples(&self, pairs: usize) -> u64 {
        pairs as u64 * (self.m1 as u64 + self.rounds as u64 * self.m2 as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Decreasing,
    Increasing,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Decreasing => "decreasing",
            Direction::Increasing => "increasing",
        }
    }
}

/// One iterate. Entry `i ≥ 1` holds the Q register read in round `i`, which
/// was built from `v^(i-1)`; entry 0 holds the clip bound (`β` decreasing,
/// `0` increasing) and a zero error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VsEntry<F> {
    pub v: Vec<F>,
    /// Flat Q-function in pair order.
    pub q: Vec<F>,
    pub sigma: Strategy,
    pub xi: Vec<F>,
}

impl<F: Scalar> VsEntry<F> {
    pub fn q_function(&self, game: &StochasticGame<F>) -> Result<QFunction<F>> {
        QFunction::from_flat(game, self.q.clone())
    }
}

/// Iterate log of one QVI run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VsSequence<F> {
    pub direction: Direction,
    pub entries: Vec<VsEntry<F>>,
    pub constants: RunConstants,
    pub samples: u64,
}

impl<F: Scalar> VsSequence<F> {
    pub fn terminal(&self) -> &VsEntry<F> {
        self.entries.last().expect("sequences are never empty")
    }

    /// Deterministic invariants: finite entries, monotone values, clipped Q
    /// and nonnegative error bounds.
    pub fn is_well_formed(&self) -> bool {
        let beta = F::lit(self.constants.beta);
        let finite = self.entries.iter().all(|e| {
            e.v.iter().chain(&e.q).chain(&e.xi).all(|x| x.is_finite())
        });
        let clipped = self
            .entries
            .iter()
            .all(|e| e.q.iter().all(|&x| x >= F::zero() && x <= beta));
        let xi_ok = self.entries.iter().all(|e| e.xi.iter().all(|&x| x >= F::zero()));
        let monotone = self.entries.windows(2).all(|w| {
            w[0].v.iter().zip(&w[1].v).all(|(&a, &b)| match self.direction {
                Direction::Decreasing => b <= a,
                Direction::Increasing => b >= a,
            })
        });
        finite && clipped && xi_ok && monotone
    }
}

/// Decreasing sequence from `v0`, `sigma0` with error bound `u`.
///
/// Caller contract: `v* ≤ v0 ≤ v* + u`, `v0 ≥ T[v0]` and `v0 ≥ T_{σ0}[v0]`.
pub fn qvi_mdvss<F: Scalar>(
    model: &GenerativeModel<'_, F>,
    u: F,
    delta: F,
    v0: &[F],
    sigma0: &Strategy,
    consts: &QviConstants,
) -> Result<VsSequence<F>> {
    let run = consts.derive(model.gamma().as_f64(), u.as_f64(), delta.as_f64(), model.num_pairs())?;
    qvi_run(model, v0, sigma0, &run, Direction::Decreasing)
}

/// Increasing sequence; the mirror of [`qvi_mdvss`].
///
/// Caller contract: `v* - u ≤ v0 ≤ v*`, `v0 ≤ T[v0]` and `v0 ≤ T_{σ0}[v0]`.
pub fn qvi_mivss<F: Scalar>(
    model: &GenerativeModel<'_, F>,
    u: F,
    delta: F,
    v0: &[F],
    sigma0: &Strategy,
    consts: &QviConstants,
) -> Result<VsSequence<F>> {
    let run = consts.derive(model.gamma().as_f64(), u.as_f64(), delta.as_f64(), model.num_pairs())?;
    qvi_run(model, v0, sigma0, &run, Direction::Increasing)
}

/// Runs one sequence with explicit constants.
pub fn qvi_run<F: Scalar>(
    model: &GenerativeModel<'_, F>,
    v0: &[F],
    sigma0: &Strategy,
    run: &RunConstants,
    direction: Direction,
) -> Result<VsSequence<F>> {
    model.require_unit_rewards()?;
    let n = model.num_states();
    if v0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial values",
            expected: n,
            found: v0.len(),
        });
    }
    if sigma0.len() != n {
        return Err(Error::DimensionMismatch {
            what: "initial strategy",
            expected: n,
            found: sigma0.len(),
        });
    }
    for s in 0..n {
        if sigma0.get(s) >= model.num_actions(s) {
            return Err(Error::InvalidAction {
                state: s,
                action: sigma0.get(s),
            });
        }
    }
    let before = model.total_samples();
    let sign = match direction {
        Direction::Decreasing => F::one(),
        Direction::Increasing => -F::one(),
    };
    let gamma = model.gamma();
    let beta = F::lit(run.beta);
    let alpha = F::lit(run.alpha1);
    let bias = alpha.powf(F::lit(0.75)) * beta;
    let floor_shift = F::lit(run.big_c) * (F::one() - gamma) * F::lit(run.u);
    let clip = |x: F| x.max(F::zero()).min(beta);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|s| (0..model.num_actions(s)).map(move |a| (s, a)))
        .collect();
    let rewards: Vec<F> = pairs.iter().map(|&(s, a)| model.reward(s, a)).collect();

    // Initial batch: one-sided confidence shift of the estimate of P v0.
    let est = model.estimate_mean_and_var(v0, run.m1)?;
    let spread: Vec<F> = est
        .variance
        .as_ref()
        .unwrap()
        .iter()
        .map(|&var| (alpha * var).sqrt())
        .collect();
    let w: Vec<F> = est
        .mean
        .iter()
        .zip(&spread)
        .map(|(&m, &sd)| m + sign * (sd + bias))
        .collect();
    let xi: Vec<F> = spread
        .iter()
        .map(|&sd| F::lit(2.0) * sd + F::lit(2.0) * (bias + floor_shift))
        .collect();
    let mut q = model.q_filled(F::zero());
    for (k, x) in q.as_mut_slice().iter_mut().enumerate() {
        *x = clip(rewards[k] + gamma * w[k]);
    }

    let start_q = match direction {
        Direction::Decreasing => beta,
        Direction::Increasing => F::zero(),
    };
    let mut entries = Vec::with_capacity(run.rounds + 1);
    entries.push(VsEntry {
        v: v0.to_vec(),
        q: vec![start_q; pairs.len()],
        sigma: sigma0.clone(),
        xi: vec![F::zero(); pairs.len()],
    });

    for _ in 1..=run.rounds {
        let prev = entries.last().unwrap();
        let mut v = Vec::with_capacity(n);
        let mut sigma = Vec::with_capacity(n);
        for s in 0..n {
            let (a, x) = best_in_row(model.owner(s), q.row(s));
            // Monotonicity repair: never move against the sequence direction.
            let keep = match direction {
                Direction::Decreasing => x >= prev.v[s],
                Direction::Increasing => x <= prev.v[s],
            };
            if keep {
                v.push(prev.v[s]);
                sigma.push(prev.sigma.get(s));
            } else {
                v.push(x);
                sigma.push(a);
            }
        }
        let diff = model.estimate_diff_mean(&v, v0, run.m2)?;
        let next: Vec<F> = (0..pairs.len())
            .map(|k| clip(rewards[k] + gamma * (w[k] + diff.mean[k] + sign * floor_shift)))
            .collect();
        entries.push(VsEntry {
            v,
            q: q.as_slice().to_vec(),
            sigma: Strategy::new(sigma),
            xi: xi.clone(),
        });
        q.as_mut_slice().copy_from_slice(&next);
    }

    Ok(VsSequence {
        direction,
        entries,
        constants: *run,
        samples: model.total_samples() - before,
    })
}

/// Summary of one halving round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub player: Player,
    pub index: usize,
    pub u: f64,
    pub constants: RunConstants,
    pub samples: u64,
    /// The sequence met its deterministic invariants.
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult<F> {
    pub pi_min: PartialStrategy,
    pub pi_max: PartialStrategy,
    /// `pi_min` and `pi_max` joined.
    pub strategy: Strategy,
    /// Terminal value of the decreasing chain: an upper estimate of `v*`.
    pub v_hat: Vec<F>,
    /// `β - v'` from the mirrored chain: a lower estimate of `v*`.
    pub v_lower: Vec<F>,
    /// `u^(j) = β/2^j`.
    pub schedule: Vec<f64>,
    pub rounds: Vec<RoundSummary>,
    pub total_samples: u64,
    /// Sequences of the direct run, one per halving round.
    pub min_sequences: Vec<VsSequence<F>>,
    /// Sequences of the mirrored run.
    pub max_sequences: Vec<VsSequence<F>>,
}

/// Number of halving rounds `⌈log₂(β/ε)⌉`.
pub fn halving_rounds(gamma: f64, epsilon: f64) -> usize {
    let beta = 1.0 / (1.0 - gamma);
    ((beta / epsilon).log2().ceil() as usize).max(1)
}

/// Decreasing chain from `β·1`, one sequence per halving round.
pub fn halving_chain<F: Scalar>(
    model: &GenerativeModel<'_, F>,
    epsilon: f64,
    delta: f64,
    consts: &QviConstants,
) -> Result<Vec<VsSequence<F>>> {
    let gamma = model.gamma().as_f64();
    let beta = 1.0 / (1.0 - gamma);
    let rounds = halving_rounds(gamma, epsilon);
    let per_round = delta / rounds as f64;
    let mut v = vec![F::lit(beta); model.num_states()];
    let mut sigma = Strategy::new(vec![0; model.num_states()]);
    let mut out = Vec::with_capacity(rounds);
    for j in 0..rounds {
        let u = beta / 2f64.powi(j as i32);
        let run = consts.derive(gamma, u, per_round, model.num_pairs())?;
        let seq = qvi_run(model, &v, &sigma, &run, Direction::Decreasing)?;
        log::debug!(
            "round {j}: u={u:.4} R={} m1={} m2={} samples={}",
            run.rounds,
            run.m1,
            run.m2,
            seq.samples
        );
        v = seq.terminal().v.clone();
        sigma = seq.terminal().sigma.clone();
        out.push(seq);
    }
    Ok(out)
}

/// ε-optimal strategies for both players with probability at least `1-δ`.
///
/// The min player comes from the decreasing chain on the game, the max player
/// from the same chain on the mirrored game, where its states belong to min.
pub fn solve<F: Scalar>(
    model: &GenerativeModel<'_, F>,
    epsilon: f64,
    delta: f64,
    consts: &QviConstants,
) -> Result<SolveResult<F>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} outside (0,1)")));
    }
    model.require_unit_rewards()?;
    let beta = 1.0 / (1.0 - model.gamma().as_f64());
    let before = model.total_samples();
    let min_sequences = halving_chain(model, epsilon, delta, consts)?;
    let mirror = model.mirrored(derive_seed(model.master_seed(), MIRROR_STREAM))?;
    let max_sequences = halving_chain(&mirror, epsilon, delta, consts)?;
    let n = model.num_states();

    let min_term = min_sequences.last().unwrap().terminal();
    let max_term = max_sequences.last().unwrap().terminal();
    let pick = |want: Player, sigma: &Strategy| PartialStrategy {
        actions: (0..n)
            .map(|s| (model.owner(s) == want).then(|| sigma.get(s)))
            .collect(),
    };
    let pi_min = pick(Player::Min, &min_term.sigma);
    let pi_max = pick(Player::Max, &max_term.sigma);
    let strategy = Strategy::new(
        (0..n)
            .map(|s| pi_min.get(s).or(pi_max.get(s)).unwrap())
            .collect(),
    );
    let summarize = |player, seqs: &[VsSequence<F>]| -> Vec<RoundSummary> {
        seqs.iter()
            .enumerate()
            .map(|(index, seq)| RoundSummary {
                player,
                index,
                u: seq.constants.u,
                constants: seq.constants,
                samples: seq.samples,
                success: seq.is_well_formed(),
            })
            .collect()
    };
    let mut rounds = summarize(Player::Min, &min_sequences);
    rounds.extend(summarize(Player::Max, &max_sequences));
    Ok(SolveResult {
        pi_min,
        pi_max,
        strategy,
        v_hat: min_term.v.clone(),
        v_lower: max_term.v.iter().map(|&x| F::lit(beta) - x).collect(),
        schedule: min_sequences.iter().map(|s| s.constants.u).collect(),
        rounds,
        total_samples: model.total_samples() - before + mirror.total_samples(),
        min_sequences,
        max_sequences,
    })
}
