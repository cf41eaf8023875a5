#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochgame::game::{Action, Player, StochasticGame};

/// Dense random game: alternating owners, rewards uniform on [0,1], each row
/// a normalized vector of uniform weights.
pub fn random_game(n: usize, k: usize, gamma: f64, seed: u64) -> StochasticGame<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let owners = (0..n).map(|s| if s % 2 == 0 { Player::Min } else { Player::Max }).collect();
    let actions = (0..n)
        .map(|_| {
            (0..k)
                .map(|_| {
                    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                    let tot: f64 = w.iter().sum();
                    Action::sparse(rng.random(), w.iter().enumerate().map(|(i, x)| (i, x / tot)).collect())
                })
                .collect()
        })
        .collect();
    StochasticGame::new(owners, actions, gamma).unwrap()
}

/// Random game whose actions each move to a single state.
pub fn deterministic_game(n: usize, k: usize, gamma: f64, seed: u64) -> StochasticGame<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let owners = (0..n).map(|s| if s % 2 == 0 { Player::Min } else { Player::Max }).collect();
    let actions = (0..n)
        .map(|_| (0..k).map(|_| Action::point(rng.random(), rng.random_range(0..n))).collect())
        .collect();
    StochasticGame::new(owners, actions, gamma).unwrap()
}

/// Half the states pay about 1 and half about 0, with skewed random rows,
/// so the value has a large spread under one transition.
pub fn split_reward_game(n: usize, gamma: f64, seed: u64) -> StochasticGame<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let owners = (0..n).map(|s| if s % 2 == 0 { Player::Min } else { Player::Max }).collect();
    let actions = (0..n)
        .map(|s| {
            (0..2)
                .map(|_| {
                    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
                    let tot: f64 = w.iter().sum();
                    let r = if s < n / 2 {
                        0.9 + 0.1 * rng.random::<f64>()
                    } else {
                        0.1 * rng.random::<f64>()
                    };
                    Action::sparse(r, w.iter().enumerate().map(|(i, x)| (i, x / tot)).collect())
                })
                .collect()
        })
        .collect();
    StochasticGame::new(owners, actions, gamma).unwrap()
}

/// Sparse random game with 1 to `k` actions per state and 1 to 3 successors
/// per action; rewards in [-1, 1].
pub fn sparse_game(n: usize, k: usize, gamma: f64, seed: u64) -> StochasticGame<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let owners = (0..n)
        .map(|_| if rng.random::<bool>() { Player::Min } else { Player::Max })
        .collect();
    let actions = (0..n)
        .map(|_| {
            (0..rng.random_range(1..=k))
                .map(|_| {
                    let m = rng.random_range(1..=3usize.min(n));
                    let w: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.05).collect();
                    let tot: f64 = w.iter().sum();
                    let entries = w.iter().map(|x| (rng.random_range(0..n), x / tot)).collect();
                    Action::sparse(rng.random_range(-1.0..=1.0), entries)
                })
                .collect()
        })
        .collect();
    StochasticGame::new(owners, actions, gamma).unwrap()
}
