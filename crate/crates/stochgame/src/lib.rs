//! Discounted two-player turn-based zero-sum stochastic games.
//!
//! Exact solvers (value, policy and strategy iteration), a seeded generative
//! model, variance-reduced Q-value iteration with both-player ε-optimal
//! strategies, certificate checks for its iterates, and hard instances for
//! policy and strategy iteration.
//!
//! Everything is generic over the scalar (`f32` or `f64`); the aliases below
//! fix `f64`, with `*32` variants for single precision.
//!
//! ```
//! use stochgame::{exact, qvi, Action, Game, Model, Player, QviConstants, Strategy};
//!
//! let game = Game::new(
//!     vec![Player::Min, Player::Max],
//!     vec![
//!         vec![Action::point(0.2, 1), Action::uniform(0.5)],
//!         vec![Action::point(0.9, 0), Action::point(0.1, 1)],
//!     ],
//!     0.5,
//! )
//! .unwrap();
//! let (sigma, _) = exact::strategy_iteration(&game, &Strategy::first_actions(&game)).unwrap();
//! let v_star = exact::evaluate(&game, &sigma).unwrap();
//!
//! let model = Model::new(&game, 42);
//! let res = qvi::solve(&model, 0.1, 0.1, &QviConstants::default()).unwrap();
//! assert!(res.v_hat.iter().zip(&v_star).all(|(a, b)| (a - b).abs() <= 0.1));
//! ```

pub mod checks;
pub mod error;
pub mod exact;
pub mod game;
pub mod hard;
pub mod io;
pub mod linalg;
pub mod qvi;
pub mod sampler;
pub mod scalar;

pub use checks::{CheckReport, Property, Violation};
pub use error::{Error, Result};
pub use exact::{RatioReport, SolveTrace, SolverEvent, StrategySource, TraceRecord};
pub use game::{Action, PartialStrategy, Player, Strategy, Transition, ValidationIssue, ValidationReport};
pub use qvi::{Direction, QviConstants, RunConstants, VsEntry};
pub use sampler::derive_seed;
pub use scalar::Scalar;

pub type Game = game::StochasticGame<f64>;
pub type Game32 = game::StochasticGame<f32>;
pub type QFunction = game::QFunction<f64>;
pub type QFunction32 = game::QFunction<f32>;
pub type ValueVector = game::ValueVector<f64>;
pub type ValueVector32 = game::ValueVector<f32>;
pub type Model<'g> = sampler::GenerativeModel<'g, f64>;
pub type Model32<'g> = sampler::GenerativeModel<'g, f32>;
pub type VsSequence = qvi::VsSequence<f64>;
pub type VsSequence32 = qvi::VsSequence<f32>;
pub type SolveResult = qvi::SolveResult<f64>;
