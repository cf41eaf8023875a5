//! File formats: games and value-strategy sequences as JSON, traces and
//! reports as CSV.
//!
//! Game JSON:
//! `{"gamma": g, "states": [{"owner": "min"|"max", "actions": [{"reward": r, "next": [{"s": i, "p": p}]}]}]}`,
//! with `"uniform": true` in place of `"next"` for a uniform row.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{RatioReport, SolveTrace, StrategyRatios};
use crate::game::{Action, Player, StochasticGame, Strategy, Transition};
use crate::qvi::RoundSummary;
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    gamma: f64,
    states: Vec<StateFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    owner: Player,
    actions: Vec<ActionFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionFile {
    reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    next: Option<Vec<EntryFile>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    uniform: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    s: usize,
    p: f64,
}

/// Parses and validates a game.
pub fn game_from_json<F: Scalar>(text: &str) -> Result<StochasticGame<F>> {
    let file: GameFile = serde_json::from_str(text)?;
    let mut owners = Vec::with_capacity(file.states.len());
    let mut actions = Vec::with_capacity(file.states.len());
    for (s, state) in file.states.into_iter().enumerate() {
        owners.push(state.owner);
        let row = state
            .actions
            .into_iter()
            .enumerate()
            .map(|(a, act)| match (act.next, act.uniform) {
                (Some(next), false) => Ok(Action::sparse(
                    F::lit(act.reward),
                    next.into_iter().map(|e| (e.s, F::lit(e.p))).collect(),
                )),
                (None, true) => Ok(Action::uniform(F::lit(act.reward))),
                _ => Err(Error::InvalidParameter(format!(
                    "action ({s},{a}) needs exactly one of \"next\" and \"uniform\": true"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        actions.push(row);
    }
    StochasticGame::new(owners, actions, F::lit(file.gamma))
}

pub fn game_to_json<F: Scalar>(game: &StochasticGame<F>) -> Result<String> {
    let states = (0..game.num_states())
        .map(|s| StateFile {
            owner: game.owner(s),
            actions: game
                .actions(s)
                .iter()
                .map(|act| match &act.transition {
                    Transition::Sparse(entries) => ActionFile {
                        reward: act.reward.as_f64(),
                        next: Some(entries.iter().map(|&(s, p)| EntryFile { s, p: p.as_f64() }).collect()),
                        uniform: false,
                    },
                    Transition::Uniform => ActionFile {
                        reward: act.reward.as_f64(),
                        next: None,
                        uniform: true,
                    },
                })
                .collect(),
        })
        .collect();
    let file = GameFile {
        gamma: game.gamma().as_f64(),
        states,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn read_game<F: Scalar>(path: &Path) -> Result<StochasticGame<F>> {
    game_from_json(&fs::read_to_string(path)?)
}

pub fn write_game<F: Scalar>(path: &Path, game: &StochasticGame<F>) -> Result<()> {
    fs::write(path, game_to_json(game)?)?;
    Ok(())
}

/// Reads any JSON document, e.g. a `VsSequence` or `QviConstants`.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Header of [`write_trace_csv`].
pub const TRACE_HEADER: [&str; 5] = ["iteration", "residual", "policy_evaluations", "num_changes", "changes"];

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    residual: f64,
    policy_evaluations: usize,
    num_changes: usize,
    changes: String,
}

/// `changes` lists `state:old>new` separated by `;`.
fn format_changes(changes: &[(usize, usize, usize)]) -> String {
    changes
        .iter()
        .map(|(s, a, b)| format!("{s}:{a}>{b}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// One row per trace record; `only_changes` drops records without flips.
pub fn write_trace_csv<F: Scalar, W: Write>(out: W, trace: &SolveTrace<F>, only_changes: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        if only_changes && r.changes.is_empty() {
            continue;
        }
        w.serialize(TraceRow {
            iteration: r.iteration,
            residual: r.residual.as_f64(),
            policy_evaluations: r.policy_evaluations,
            num_changes: r.changes.len(),
            changes: format_changes(&r.changes),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Header of [`RatioCsv`] rows.
pub const RATIO_HEADER: [&str; 8] = [
    "strategy",
    "actions",
    "converged",
    "delta_min",
    "delta_max",
    "c_min",
    "c_max",
    "limit_gap",
];

/// Per-strategy rows of a ratio scan. Skipped strategies leave the numeric
/// columns empty.
pub struct RatioCsv<W: Write> {
    writer: csv::Writer<W>,
    index: usize,
}

impl<W: Write> RatioCsv<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        writer.write_record(RATIO_HEADER)?;
        Ok(RatioCsv { writer, index: 0 })
    }

    pub fn row<F: Scalar>(&mut self, sigma: &Strategy, ratios: Option<&StrategyRatios<F>>) -> Result<()> {
        let actions = sigma.actions.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ");
        let nums = match ratios {
            Some(r) => [r.delta_min, r.delta_max, r.c_min, r.c_max, r.limit_gap].map(|x| x.as_f64().to_string()),
            None => Default::default(),
        };
        let mut rec = vec![self.index.to_string(), actions, ratios.is_some().to_string()];
        rec.extend(nums);
        self.writer.write_record(&rec)?;
        self.index += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Header of [`write_ratio_summary_csv`].
pub const RATIO_SUMMARY_HEADER: [&str; 9] = [
    "strategies_scanned",
    "skipped",
    "delta_min",
    "delta_max",
    "flux_ratio",
    "c_min",
    "c_max",
    "ergodicity_ratio",
    "max_limit_gap",
];

pub fn write_ratio_summary_csv<F: Scalar, W: Write>(out: W, report: &RatioReport<F>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATIO_SUMMARY_HEADER)?;
    let f = |x: F| x.as_f64().to_string();
    w.write_record([
        report.strategies_scanned.to_string(),
        report.skipped.to_string(),
        f(report.delta_min),
        f(report.delta_max),
        f(report.flux_ratio()),
        f(report.c_min),
        f(report.c_max),
        f(report.ergodicity_ratio()),
        f(report.max_limit_gap),
    ])?;
    w.flush()?;
    Ok(())
}

/// Header of [`write_rounds_csv`].
pub const ROUNDS_HEADER: [&str; 12] = [
    "player", "index", "u", "gamma", "beta", "delta", "rounds", "m1", "m2", "l", "alpha1", "samples",
];

/// One row per halving round of a QVI solve: constants and samples drawn.
pub fn write_rounds_csv<W: Write>(out: W, rounds: &[RoundSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROUNDS_HEADER)?;
    for r in rounds {
        let c = &r.constants;
        w.write_record([
            r.player.to_string(),
            r.index.to_string(),
            r.u.to_string(),
            c.gamma.to_string(),
            c.beta.to_string(),
            c.delta.to_string(),
            c.rounds.to_string(),
            c.m1.to_string(),
            c.m2.to_string(),
            c.l.to_string(),
            c.alpha1.to_string(),
            r.samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One point of an error-versus-batch-size sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub m1: usize,
    pub trials: usize,
    /// Mean over trials of `‖v - v*‖∞`.
    pub mean_error: f64,
    pub max_error: f64,
    pub log_m1: f64,
    pub log_mean_error: f64,
}

pub const SCALING_HEADER: [&str; 6] = ["m1", "trials", "mean_error", "max_error", "log_m1", "log_mean_error"];

pub fn write_scaling_csv<W: Write>(out: W, rows: &[ScalingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(SCALING_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ys` on `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
