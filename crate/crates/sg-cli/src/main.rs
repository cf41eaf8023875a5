//! `sg`: experiment harness for discounted turn-based stochastic games.
//!
//! Exit status: 0 when every requested check passes, 1 when a check fails or
//! a solver gives up, 2 on malformed input. Errors go to stderr as one JSON
//! object. `SG_LOG=info|debug` sets log verbosity.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use stochgame::checks::{
    best_response_value, check_mdvss_against, check_mivss_against, optimal_value,
};
use stochgame::exact::{
    greedy, policy_iteration, q_from_v, ratio_scan_observed, strategy_iteration, value_iteration,
};
use stochgame::hard::{build_hi1, build_hi2, default_hi2_rewards, verify_pi_path_hi1, verify_si_path_hi2, Hi2Rewards};
use stochgame::io::{self as sgio, fit_slope, RatioCsv, ScalingRow};
use stochgame::qvi::{qvi_run, solve};
use stochgame::sampler::GenerativeModel;
use stochgame::scalar::max_abs_diff;
use stochgame::{derive_seed, Direction, Error, Game, Player, QviConstants, StrategySource, VsSequence};

#[derive(Parser)]
#[command(name = "sg", version, about = "Solve, certify and stress-test turn-based stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a game exactly or with sampling-based QVI.
    Solve(SolveArgs),
    /// Build a hard instance and verify the predicted solver path.
    #[command(subcommand)]
    Hard(HardCommand),
    /// Flux and ergodicity ratios over enumerated or sampled strategies.
    Flux(FluxArgs),
    /// Certify a value-strategy sequence against a game.
    Check(CheckArgs),
    /// Terminal error of one QVI run against the initial batch size.
    Scaling(ScalingArgs),
}

#[derive(Subcommand)]
enum HardCommand {
    /// Policy iteration on HI1; emits the flip rows of the trace.
    Pi(HardPiArgs),
    /// Strategy iteration on HI2; emits the whole trace.
    Si(HardSiArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Game file (JSON).
    #[arg(long)]
    game: Option<PathBuf>,
    /// HI1 with T chain states.
    #[arg(long, value_name = "T")]
    hi1: Option<usize>,
    /// HI2 with T dummy states and default rewards.
    #[arg(long, value_name = "T")]
    hi2: Option<usize>,
}

impl Source {
    fn load(&self) -> stochgame::Result<Game> {
        if let Some(path) = &self.game {
            sgio::read_game(path)
        } else if let Some(t) = self.hi1 {
            Ok(build_hi1(t, 4.0)?.0)
        } else {
            let t = self.hi2.expect("clap enforces one source");
            Ok(build_hi2(t, &default_hi2_rewards(t)?)?.0)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Vi,
    Pi,
    Si,
    Qvi,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum, default_value = "si")]
    method: Method,
    /// Target accuracy; required in (0,1).
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Failure probability for qvi.
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Master seed; required by qvi.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent qvi runs, seeded from the master seed.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// JSON overrides of c1, c2, c3, c, C.
    #[arg(long)]
    constants: Option<PathBuf>,
    /// CSV trace: solver records, or per-round constants of the first qvi trial.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Decreasing sequences of the first qvi trial, as JSON.
    #[arg(long)]
    sequences: Option<PathBuf>,
    /// Compare each player's strategy with the exact best response.
    #[arg(long)]
    certify: bool,
}

#[derive(Args)]
struct HardPiArgs {
    #[arg(long = "T", value_name = "T")]
    t: usize,
    #[arg(long, default_value_t = 4.0)]
    beta_factor: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HardSiArgs {
    #[arg(long = "T", value_name = "T")]
    t: usize,
    /// Reward configuration (JSON); defaults depend on T.
    #[arg(long)]
    rewards: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FluxArgs {
    #[command(flatten)]
    source: Source,
    /// Sample this many strategies instead of enumerating; needs --seed.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-strategy CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    game: PathBuf,
    /// One sequence or an array of sequences (JSON).
    #[arg(long)]
    seq: PathBuf,
    /// Replace each sequence's own error bounds.
    #[arg(long)]
    eps: Option<f64>,
    /// CheckReport JSON; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Initial error bound; the run starts from v* + u.
    #[arg(long, default_value_t = 1.0)]
    u: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
    m1: Vec<usize>,
    #[arg(long)]
    constants: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure of a command, split by exit status.
enum Failure {
    /// Malformed input: exit 2.
    Input(String, String),
    /// A check failed or a solver gave up: exit 1.
    Check(String, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
        match e {
            Error::IterationCap { .. } | Error::NonConvergence { .. } | Error::EnumerationTooLarge { .. } => {
                Failure::Check(kind, e.to_string())
            }
            _ => Failure::Input(kind, e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input("Io".into(), e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input("Json".into(), e.to_string())
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input("InvalidArgument".into(), msg.into())
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SG_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Hard(HardCommand::Pi(a)) => run_hard_pi(a),
        Command::Hard(HardCommand::Si(a)) => run_hard_si(a),
        Command::Flux(a) => run_flux(a),
        Command::Check(a) => run_check(a),
        Command::Scaling(a) => run_scaling(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            let (code, kind, message) = match f {
                Failure::Input(k, m) => (2, k, m),
                Failure::Check(k, m) => (1, k, m),
            };
            let body = serde_json::json!({ "error": kind, "message": message });
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}

/// Writer for `path`, or stdout.
fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn check_unit(name: &str, x: f64) -> Result<(), Failure> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(input(format!("--{name} must lie in (0,1), got {x}")))
    }
}

fn load_constants(path: Option<&Path>) -> Result<QviConstants, Failure> {
    Ok(match path {
        Some(p) => sgio::read_json(p)?,
        None => QviConstants::default(),
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct ExactSummary<'a> {
    method: &'a str,
    value: Vec<f64>,
    strategy: Vec<usize>,
    iterations: usize,
    policy_evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Certificate>,
}

/// Exploitability of each player's part of a strategy.
#[derive(Serialize)]
struct Certificate {
    /// `max_s v^{π_min, best max}(s) - v*(s)`.
    min_gap: f64,
    /// `max_s v*(s) - v^{best min, π_max}(s)`.
    max_gap: f64,
    eps: f64,
    passed: bool,
}

fn certify(game: &Game, strategy: &stochgame::Strategy, eps: f64) -> Result<Certificate, Failure> {
    let v_star = optimal_value(game)?;
    let vmin = best_response_value(game, strategy, Player::Min)?;
    let vmax = best_response_value(game, strategy, Player::Max)?;
    let min_gap = vmin.iter().zip(&v_star).map(|(a, b)| a - b).fold(0.0, f64::max);
    let max_gap = v_star.iter().zip(&vmax).map(|(a, b)| a - b).fold(0.0, f64::max);
    Ok(Certificate {
        min_gap,
        max_gap,
        eps,
        passed: min_gap <= eps && max_gap <= eps,
    })
}

fn run_solve(a: SolveArgs) -> Outcome {
    check_unit("eps", a.eps)?;
    check_unit("delta", a.delta)?;
    let game = a.source.load()?;
    if a.method == Method::Qvi {
        return run_solve_qvi(&a, &game);
    }
    let (name, strategy, trace, value) = match a.method {
        Method::Vi => {
            let (v, s, t) = value_iteration(&game, a.eps)?;
            ("vi", s, t, v)
        }
        Method::Pi => {
            let (s, t) = policy_iteration(&game, &stochgame::Strategy::first_actions(&game), None)?;
            let v = stochgame::exact::evaluate(&game, &s)?;
            ("pi", s, t, v)
        }
        Method::Si => {
            let (s, t) = strategy_iteration(&game, &stochgame::Strategy::first_actions(&game))?;
            let v = stochgame::exact::evaluate(&game, &s)?;
            ("si", s, t, v)
        }
        Method::Qvi => unreachable!(),
    };
    let certificate = if a.certify {
        Some(certify(&game, &strategy, a.eps)?)
    } else {
        None
    };
    let passed = certificate.as_ref().is_none_or(|c| c.passed);
    if let Some(path) = &a.out {
        sgio::write_trace_csv(File::create(path)?, &trace, false)?;
    }
    print_json(&ExactSummary {
        method: name,
        value,
        strategy: strategy.actions,
        iterations: trace.records.len(),
        policy_evaluations: trace.policy_evaluations(),
        certificate,
    })?;
    Ok(passed)
}

#[derive(Serialize)]
struct QviSummary {
    trial: usize,
    seed: u64,
    total_samples: u64,
    v_hat: Vec<f64>,
    v_lower: Vec<f64>,
    strategy: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Certificate>,
}

fn run_solve_qvi(a: &SolveArgs, game: &Game) -> Outcome {
    let seed = a.seed.ok_or_else(|| input("qvi needs --seed"))?;
    if a.trials == 0 {
        return Err(input("--trials must be positive"));
    }
    let consts = load_constants(a.constants.as_deref())?;
    let mut passed = true;
    let mut rounds = Vec::new();
    let mut summaries = Vec::new();
    for trial in 0..a.trials {
        let trial_seed = if trial == 0 { seed } else { derive_seed(seed, trial as u64) };
        let model = GenerativeModel::new(game, trial_seed);
        let res = solve(&model, a.eps, a.delta, &consts)?;
        log::info!("trial {trial}: {} samples", res.total_samples);
        if trial == 0 {
            if let Some(path) = &a.sequences {
                sgio::write_json(path, &res.min_sequences)?;
            }
            rounds = res.rounds.clone();
        }
        let certificate = if a.certify {
            Some(certify(game, &res.strategy, a.eps)?)
        } else {
            None
        };
        passed &= certificate.as_ref().is_none_or(|c| c.passed);
        summaries.push(QviSummary {
            trial,
            seed: trial_seed,
            total_samples: res.total_samples,
            v_hat: res.v_hat,
            v_lower: res.v_lower,
            strategy: res.strategy.actions,
            certificate,
        });
    }
    if let Some(path) = &a.out {
        sgio::write_rounds_csv(File::create(path)?, &rounds)?;
    }
    print_json(&summaries)?;
    Ok(passed)
}

fn run_hard_pi(a: HardPiArgs) -> Outcome {
    let out = verify_pi_path_hi1(a.t, a.beta_factor)?;
    sgio::write_trace_csv(sink(a.out.as_deref())?, &out.trace, true)?;
    eprintln!(
        "HI1 T={} S'={}: {} improving iterations, {} evaluations; {}",
        a.t,
        out.meta.s_prime,
        out.iterations(),
        out.trace.policy_evaluations(),
        out.report
    );
    Ok(out.report.passed)
}

fn run_hard_si(a: HardSiArgs) -> Outcome {
    let rewards: Hi2Rewards = match &a.rewards {
        Some(p) => sgio::read_json(p)?,
        None => default_hi2_rewards(a.t)?,
    };
    let out = verify_si_path_hi2(a.t, &rewards)?;
    sgio::write_trace_csv(sink(a.out.as_deref())?, &out.trace, false)?;
    eprintln!(
        "HI2 T={} S'={}: {} evaluations ({} on the predicted path); {}",
        a.t, rewards.s_prime, out.total_evaluations, out.path_evaluations, out.report
    );
    Ok(out.report.passed)
}

fn run_flux(a: FluxArgs) -> Outcome {
    let game = a.source.load()?;
    let source = match a.samples {
        Some(count) => StrategySource::Sample {
            count,
            seed: a.seed.ok_or_else(|| input("--samples needs --seed"))?,
        },
        None => StrategySource::Enumerate,
    };
    let report = match &a.out {
        Some(path) => {
            let mut csv = RatioCsv::new(File::create(path)?)?;
            let mut err = None;
            let report = ratio_scan_observed(&game, source, |s, r| {
                if err.is_none() {
                    err = csv.row(s, r).err();
                }
            })?;
            if let Some(e) = err {
                return Err(e.into());
            }
            csv.finish()?;
            report
        }
        None => ratio_scan_observed(&game, source, |_, _| {})?,
    };
    sgio::write_ratio_summary_csv(io::stdout().lock(), &report)?;
    Ok(report.skipped == 0)
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum SequenceFile {
    One(VsSequence),
    Many(Vec<VsSequence>),
}

fn run_check(a: CheckArgs) -> Outcome {
    let game: Game = sgio::read_game(&a.game)?;
    let seqs = match sgio::read_json::<SequenceFile>(&a.seq)? {
        SequenceFile::One(s) => vec![s],
        SequenceFile::Many(v) => v,
    };
    let v_star = optimal_value(&game)?;
    let mut report = stochgame::CheckReport::from_violations(Vec::new());
    for (k, seq) in seqs.iter().enumerate() {
        let r = match seq.direction {
            Direction::Decreasing => check_mdvss_against(&game, seq, a.eps, &v_star)?,
            Direction::Increasing => check_mivss_against(&game, seq, a.eps, &v_star)?,
        };
        eprintln!("sequence {k} ({}): {r}", seq.direction.name());
        report = report.merge(r);
    }
    match &a.out {
        Some(path) => sgio::write_json(path, &report)?,
        None => print_json(&report)?,
    }
    Ok(report.passed)
}

fn run_scaling(a: ScalingArgs) -> Outcome {
    let seed = a.seed.ok_or_else(|| input("scaling needs --seed"))?;
    check_unit("delta", a.delta)?;
    if a.trials == 0 || a.m1.is_empty() {
        return Err(input("--trials and --m1 must be non-empty"));
    }
    let game = a.source.load()?;
    let consts = load_constants(a.constants.as_deref())?;
    let v_star = optimal_value(&game)?;
    let (_, sigma0) = greedy(&game, &q_from_v(&game, &v_star));
    let v0: Vec<f64> = v_star.iter().map(|x| x + a.u).collect();
    let base = consts.derive(game.gamma(), a.u, a.delta, game.num_pairs())?;
    let mut rows = Vec::new();
    for &m1 in &a.m1 {
        let run = base.with_m1(m1);
        let errors = (0..a.trials)
            .map(|t| {
                let model = GenerativeModel::new(&game, derive_seed(seed, t as u64));
                let seq = qvi_run(&model, &v0, &sigma0, &run, Direction::Decreasing)?;
                Ok(max_abs_diff(&seq.terminal().v, &v_star))
            })
            .collect::<stochgame::Result<Vec<f64>>>()?;
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        rows.push(ScalingRow {
            m1: run.m1,
            trials: a.trials,
            mean_error: mean,
            max_error: errors.iter().copied().fold(0.0, f64::max),
            log_m1: (run.m1 as f64).ln(),
            log_mean_error: mean.ln(),
        });
    }
    sgio::write_scaling_csv(sink(a.out.as_deref())?, &rows)?;
    if rows.len() > 1 {
        let xs: Vec<f64> = rows.iter().map(|r| r.log_m1).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.log_mean_error).collect();
        eprintln!("log-log slope {:.4}", fit_slope(&xs, &ys));
    }
    Ok(true)
}
