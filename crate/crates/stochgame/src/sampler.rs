//! Generative model: sampling-only access to a game's transition law.
//!
//! Every batch for a state-action pair runs on its own ChaCha stream keyed by
//! `(master seed, pair, batch number)`, so estimates do not depend on the order
//! in which pairs are visited.

use std::borrow::Cow;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::game::{Player, QFunction, StochasticGame, Transition};
use crate::scalar::Scalar;

enum RowSampler {
    Point(usize),
    Uniform(usize),
    Alias {
        support: Vec<usize>,
        table: WeightedAliasIndex<f64>,
    },
}

impl RowSampler {
    fn build<F: Scalar>(n: usize, t: &Transition<F>) -> Self {
        match t {
            Transition::Uniform => RowSampler::Uniform(n),
            Transition::Sparse(entries) => {
                let live: Vec<(usize, f64)> = entries
                    .iter()
                    .map(|&(s, p)| (s, p.as_f64()))
                    .filter(|e| e.1 > 0.0)
                    .collect();
                if live.len() == 1 {
                    return RowSampler::Point(live[0].0);
                }
                let support = live.iter().map(|e| e.0).collect();
                let table = WeightedAliasIndex::new(live.iter().map(|e| e.1).collect())
                    .expect("validated rows have positive mass");
                RowSampler::Alias { support, table }
            }
        }
    }

    /// `None` means the row is deterministic and needs no randomness.
    fn point(&self) -> Option<usize> {
        match self {
            RowSampler::Point(t) => Some(*t),
            _ => None,
        }
    }

    #[inline]
    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        match self {
            RowSampler::Point(t) => *t,
            RowSampler::Uniform(n) => rng.random_range(0..*n),
            RowSampler::Alias { support, table } => support[table.sample(rng)],
        }
    }
}

/// Per-pair sample statistics of a value vector.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchEstimate<F> {
    /// Sample mean per pair, in pair order.
    pub mean: Vec<F>,
    /// Sample variance per pair, floored at zero; absent for difference batches.
    pub variance: Option<Vec<F>>,
    pub batch_size: usize,
}

/// Sampling façade over a game. Rewards, owners and discount are public;
/// transitions are reachable only through draws.
pub struct GenerativeModel<'g, F: Scalar> {
    game: Cow<'g, StochasticGame<F>>,
    master_seed: u64,
    samplers: Vec<RowSampler>,
    counters: Vec<AtomicU64>,
    batches: Vec<AtomicU64>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of an independent stream derived from `seed` and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix(splitmix(seed) ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

impl<'g, F: Scalar> GenerativeModel<'g, F> {
    pub fn new(game: &'g StochasticGame<F>, master_seed: u64) -> Self {
        Self::from_cow(Cow::Borrowed(game), master_seed)
    }

    fn from_cow(game: Cow<'g, StochasticGame<F>>, master_seed: u64) -> Self {
        let n = game.num_states();
        let samplers: Vec<RowSampler> = game
            .pairs()
            .map(|(s, a)| RowSampler::build(n, &game.action(s, a).transition))
            .collect();
        let pairs = samplers.len();
        GenerativeModel {
            game,
            master_seed,
            samplers,
            counters: (0..pairs).map(|_| AtomicU64::new(0)).collect(),
            batches: (0..pairs).map(|_| AtomicU64::new(0)).collect(),
        }
    }

    /// Model of the mirrored game (roles swapped, rewards `1 - r`) with the
    /// same transition law, fresh counters and an independent seed.
    pub fn mirrored(&self, master_seed: u64) -> Result<GenerativeModel<'static, F>> {
        Ok(GenerativeModel::from_cow(Cow::Owned(self.game.mirror()?), master_seed))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn num_states(&self) -> usize {
        self.game.num_states()
    }

    pub fn num_pairs(&self) -> usize {
        self.samplers.len()
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.game.num_actions(s)
    }

    pub fn owner(&self, s: usize) -> Player {
        self.game.owner(s)
    }

    pub fn reward(&self, s: usize, a: usize) -> F {
        self.game.reward(s, a)
    }

    pub fn gamma(&self) -> F {
        self.game.gamma()
    }

    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        self.game.pair_index(s, a)
    }

    pub fn rewards_in_unit_interval(&self) -> bool {
        self.game.rewards_in_unit_interval()
    }

    pub(crate) fn require_unit_rewards(&self) -> Result<()> {
        self.game.require_unit_rewards()
    }

    /// Q-function with this model's pair layout.
    pub fn q_filled(&self, x: F) -> QFunction<F> {
        QFunction::filled(&self.game, x)
    }

    fn stream(&self, pair: usize) -> ChaCha8Rng {
        let batch = self.batches[pair].fetch_add(1, Ordering::Relaxed);
        let key = derive_seed(derive_seed(self.master_seed, pair as u64), batch);
        ChaCha8Rng::seed_from_u64(key)
    }

    fn charge(&self, pair: usize, m: u64) {
        self.counters[pair].fetch_add(m, Ordering::Relaxed);
    }

    /// One next state from `P(·|s,a)`.
    pub fn sample_transition(&self, s: usize, a: usize) -> Result<usize> {
        if s >= self.num_states() || a >= self.num_actions(s) {
            return Err(Error::InvalidAction { state: s, action: a });
        }
        let p = self.pair_index(s, a);
        let mut rng = self.stream(p);
        self.charge(p, 1);
        Ok(self.samplers[p].draw(&mut rng))
    }

    fn check_batch(&self, m: usize, v: &[F]) -> Result<()> {
        if m == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        if v.len() != self.num_states() {
            return Err(Error::DimensionMismatch {
                what: "value vector",
                expected: self.num_states(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Per pair: mean and variance of `v` over `m` fresh next states.
    pub fn estimate_mean_and_var(&self, v: &[F], m: usize) -> Result<BatchEstimate<F>> {
        self.check_batch(m, v)?;
        let lo = v.iter().copied().fold(F::infinity(), F::min);
        let hi = v.iter().copied().fold(F::neg_infinity(), F::max);
        let mf = F::from_usize_lossy(m);
        let pairs = self.num_pairs();
        let mut mean = Vec::with_capacity(pairs);
        let mut variance = Vec::with_capacity(pairs);
        for p in 0..pairs {
            let mut rng = self.stream(p);
            self.charge(p, m as u64);
            let sampler = &self.samplers[p];
            if let Some(t) = sampler.point() {
                mean.push(v[t]);
                variance.push(F::zero());
                continue;
            }
            let (mut sum, mut sq) = (F::zero(), F::zero());
            for _ in 0..m {
                let x = v[sampler.draw(&mut rng)];
                sum = sum + x;
                sq = sq + x * x;
            }
            let mu = (sum / mf).max(lo).min(hi);
            mean.push(mu);
            variance.push((sq / mf - mu * mu).max(F::zero()));
        }
        Ok(BatchEstimate {
            mean,
            variance: Some(variance),
            batch_size: m,
        })
    }

    /// Per pair: mean of `v - v0` over `m` fresh next states.
    pub fn estimate_diff_mean(&self, v: &[F], v0: &[F], m: usize) -> Result<BatchEstimate<F>> {
        self.check_batch(m, v)?;
        self.check_batch(m, v0)?;
        let d: Vec<F> = v.iter().zip(v0).map(|(&a, &b)| a - b).collect();
        let lo = d.iter().copied().fold(F::infinity(), F::min);
        let hi = d.iter().copied().fold(F::neg_infinity(), F::max);
        let mf = F::from_usize_lossy(m);
        let mean = (0..self.num_pairs())
            .map(|p| {
                let mut rng = self.stream(p);
                self.charge(p, m as u64);
                let sampler = &self.samplers[p];
                if let Some(t) = sampler.point() {
                    return d[t];
                }
                let mut sum = F::zero();
                for _ in 0..m {
                    sum = sum + d[sampler.draw(&mut rng)];
                }
                (sum / mf).max(lo).min(hi)
            })
            .collect();
        Ok(BatchEstimate {
            mean,
            variance: None,
            batch_size: m,
        })
    }

    /// Total draws and the per-pair table.
    pub fn sample_count(&self) -> (u64, Vec<u64>) {
        let table: Vec<u64> = self
            .counters
            .iter()
            .map(|c| c.load(Ordering::Relaxed))
            .collect();
        (table.iter().sum(), table)
    }

    pub fn total_samples(&self) -> u64 {
        self.sample_count().0
    }
}
