//! Comparison harness for the three learners.
//!
//! One game is generated from the config and solved exactly. Each algorithm
//! then runs `episodes` independent learning runs of `iterations` steps from
//! `Q_0 = 0`, and the error of an episode is `‖J* - val[Q_N(·)]‖`. Episode `k`
//! of every algorithm is seeded with `seed_base + k`, so all arms see the same
//! sampled transitions.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::exact::{solve_exact, IterationOptions, ValueFunction};
use crate::game::{w_star, GameSpec, MarkovGame};
use crate::learn::{run_learner, Coupling, LearnerConfig, LearnerMode, StepSchedule};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Minimax Q-learning, `w = 1`.
    Standard,
    /// Model-free adaptive `w_n`.
    Generalized,
    /// Fixed `w = w*` from the true model.
    GeneralizedOptimal,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Standard,
        Algorithm::Generalized,
        Algorithm::GeneralizedOptimal,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Self::Standard => "standard",
            Self::Generalized => "generalized",
            Self::GeneralizedOptimal => "generalized_optimal",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Standard => "Standard minimax Q-learning",
            Self::Generalized => "Generalized minimax Q-learning",
            Self::GeneralizedOptimal => "Generalized optimal minimax Q-learning",
        }
    }

    /// Published mean ± spread for 10, 20 and 50 states.
    pub fn reference(self, states: usize) -> Option<(f64, f64)> {
        let table: [(f64, f64); 3] = match self {
            Self::Standard => [(0.68, 0.07), (1.67, 0.13), (3.99, 0.11)],
            Self::Generalized => [(0.49, 0.08), (1.43, 0.18), (3.75, 0.12)],
            Self::GeneralizedOptimal => [(0.35, 0.08), (1.26, 0.19), (3.59, 0.14)],
        };
        match states {
            10 => Some(table[0]),
            20 => Some(table[1]),
            50 => Some(table[2]),
            _ => None,
        }
    }

    fn mode(self, w_star: f64) -> LearnerMode {
        match self {
            Self::Standard => LearnerMode::Standard,
            Self::Generalized => LearnerMode::Adaptive,
            Self::GeneralizedOptimal => LearnerMode::Fixed(w_star),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    #[default]
    L2,
    Max,
}

impl ErrorNorm {
    pub fn distance(self, a: &ValueFunction, b: &ValueFunction) -> f64 {
        match self {
            Self::L2 => a.l2_dist(b),
            Self::Max => a.max_dist(b),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// Where `zsg experiment` writes the CSV report unless `--out` is given.
    #[serde(default)]
    pub report: Option<PathBuf>,
    /// Directory receiving each episode's final Q-table as JSON.
    #[serde(default)]
    pub q_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub episodes: usize,
    pub iterations: usize,
    /// Defaults to `γ_n = 1/(n+1)`.
    #[serde(default = "StepSchedule::harmonic")]
    pub schedule: StepSchedule,
    #[serde(default = "default_coupling")]
    pub coupling: Coupling,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub norm: ErrorNorm,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub output: OutputPaths,
}

fn default_coupling() -> Coupling {
    Coupling::SharedStep
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

impl ExperimentConfig {
    /// Desk-scale comparison: 10 states, 5×5 actions, α = 0.6, 50 episodes of
    /// 1000 iterations with harmonic steps.
    ///
    /// At this horizon the `(n+1)^-0.6` learner default leaves every arm at its
    /// sampling-noise floor, where a larger relaxation factor scales the noise
    /// up. Under harmonic steps the dominant term is the initialization bias,
    /// which decays faster for smaller contraction factors.
    pub fn comparison(game_seed: u64) -> Self {
        Self {
            game: GameSpec {
                states: 10,
                actions_u: 5,
                actions_v: 5,
                alpha: 0.6,
                min_self_loop: 0.1,
                reward_range: (0.0, 1.0),
                seed: game_seed,
            },
            episodes: 50,
            iterations: 1000,
            schedule: StepSchedule::harmonic(),
            coupling: Coupling::SharedStep,
            algorithms: default_algorithms(),
            norm: ErrorNorm::L2,
            seed_base: 0,
            output: OutputPaths::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::ConfigInvalid("episodes must be >= 1".into()));
        }
        self.schedule.validate()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Seed of episode `k`, shared by every algorithm.
    pub fn episode_seed(&self, episode: usize) -> u64 {
        self.seed_base.wrapping_add(episode as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub episode: usize,
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    pub episodes: Vec<EpisodeOutcome>,
    /// Mean over completed episodes.
    pub mean: f64,
    /// Sample standard deviation (`E - 1` denominator); 0 with fewer than two
    /// completed episodes.
    pub std: f64,
    /// Summed per-episode wall-clock time. Not part of any serialized output.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl AlgorithmResult {
    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.episodes.iter().filter_map(|e| e.error)
    }

    pub fn failures(&self) -> usize {
        self.episodes.iter().filter(|e| e.failure.is_some()).count()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub states: usize,
    pub actions: (usize, usize),
    pub alpha: f64,
    pub w_star: f64,
    pub norm: ErrorNorm,
    pub iterations: usize,
    pub episodes: usize,
    pub j_star: ValueFunction,
    pub algorithms: Vec<AlgorithmResult>,
}

impl ExperimentReport {
    pub fn result(&self, alg: Algorithm) -> Option<&AlgorithmResult> {
        self.algorithms.iter().find(|r| r.algorithm == alg)
    }

    pub fn mean(&self, alg: Algorithm) -> Option<f64> {
        self.result(alg).map(|r| r.mean)
    }

    pub fn all_completed(&self) -> bool {
        self.algorithms.iter().all(|r| r.failures() == 0)
    }
}

/// `(mean, sample std)`; the std is 0 for fewer than two values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Everything shared by the episodes of one experiment.
pub struct Prepared {
    pub game: MarkovGame,
    pub j_star: ValueFunction,
    pub w_star: f64,
}

/// Generates and solves the experiment's game.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let game = cfg.game.generate()?;
    let exact = solve_exact(&game, &IterationOptions::default())?;
    let w_star = w_star(&game).get();
    Ok(Prepared {
        game,
        j_star: exact.j_star,
        w_star,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let prep = prepare(cfg)?;
    if let Some(dir) = &cfg.output.q_dir {
        std::fs::create_dir_all(dir)?;
    }

    let tasks: Vec<(Algorithm, usize)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| (0..cfg.episodes).map(move |e| (a, e)))
        .collect();
    let work = cfg.iterations.max(1) * prep.game.num_cells();
    let outcomes = par::map_indexed(tasks.len(), work * tasks.len(), |t| {
        let (alg, episode) = tasks[t];
        let start = Instant::now();
        let outcome = run_episode(cfg, &prep, alg, episode);
        (outcome, start.elapsed().as_secs_f64())
    });

    let mut algorithms = Vec::with_capacity(cfg.algorithms.len());
    let mut it = outcomes.into_iter();
    for &alg in &cfg.algorithms {
        let mut episodes = Vec::with_capacity(cfg.episodes);
        let mut wall = 0.0;
        for episode in 0..cfg.episodes {
            let (res, secs) = it.next().expect("one outcome per task");
            wall += secs;
            episodes.push(match res {
                Ok(error) => EpisodeOutcome {
                    episode,
                    error: Some(error),
                    failure: None,
                },
                Err(e) => EpisodeOutcome {
                    episode,
                    error: None,
                    failure: Some(e.to_string()),
                },
            });
        }
        let errs: Vec<f64> = episodes.iter().filter_map(|e| e.error).collect();
        let (mean, std) = mean_std(&errs);
        algorithms.push(AlgorithmResult {
            algorithm: alg,
            episodes,
            mean,
            std,
            wall_clock_secs: wall,
        });
    }

    Ok(ExperimentReport {
        states: prep.game.num_states(),
        actions: (prep.game.num_actions_u(), prep.game.num_actions_v()),
        alpha: prep.game.discount(),
        w_star: prep.w_star,
        norm: cfg.norm,
        iterations: cfg.iterations,
        episodes: cfg.episodes,
        j_star: prep.j_star,
        algorithms,
    })
}

/// Runs one episode and returns its error.
pub fn run_episode(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    alg: Algorithm,
    episode: usize,
) -> Result<f64> {
    let mut lc = LearnerConfig::new(
        alg.mode(prep.w_star),
        cfg.iterations,
        cfg.episode_seed(episode),
    );
    lc.schedule = cfg.schedule;
    lc.coupling = cfg.coupling;
    let trace = run_learner(&prep.game, &lc, None)?;
    if let Some(dir) = &cfg.output.q_dir {
        let path = dir.join(format!("{}_{episode}.json", alg.key()));
        std::fs::write(path, trace.final_q.to_json()?)?;
    }
    Ok(cfg.norm.distance(&prep.j_star, &trace.j_tilde))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "table" | "pretty" => Ok(Self::Table),
            "json" => Ok(Self::Json),
            _ => Err(Error::ConfigInvalid(format!("unknown report format `{s}`"))),
        }
    }
}

pub fn emit_report<W: Write + ?Sized>(
    report: &ExperimentReport,
    format: ReportFormat,
    out: &mut W,
) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Table => report_table(report),
        ReportFormat::Json => crate::json::to_string_pretty(report)? + "\n",
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

/// Per-episode rows, then a second header and one summary row per algorithm.
/// Failed episodes have an empty error field.
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut s = String::from("algorithm,episode,error\n");
    for r in &report.algorithms {
        for e in &r.episodes {
            let err = e.error.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{}", r.algorithm.key(), e.episode, err);
        }
    }
    if !report.algorithms.is_empty() {
        s.push_str("\nalgorithm,mean,std\n");
        for r in &report.algorithms {
            let _ = writeln!(s, "{},{},{}", r.algorithm.key(), r.mean, r.std);
        }
    }
    s
}

/// Six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Algorithms as rows, the state count as the column, published values
/// alongside when the state count has one.
pub fn report_table(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let norm = match report.norm {
        ErrorNorm::L2 => "L2",
        ErrorNorm::Max => "max",
    };
    let _ = writeln!(
        s,
        "Average error over {} episodes x {} iterations ({} norm; {}x{} actions, alpha = {}, w* = {})",
        report.episodes,
        report.iterations,
        norm,
        report.actions.0,
        report.actions.1,
        sig6(report.alpha),
        sig6(report.w_star)
    );
    let col = format!("{} states", report.states);
    let has_ref = report
        .algorithms
        .iter()
        .any(|r| r.algorithm.reference(report.states).is_some());
    let width = 40;
    let _ = write!(s, "| {:<width$} | {:<24} |", "Algorithm", col);
    if has_ref {
        let _ = write!(s, " {:<16} |", "published");
    }
    s.push('\n');
    let _ = write!(s, "|{}|{}|", "-".repeat(width + 2), "-".repeat(26));
    if has_ref {
        let _ = write!(s, "{}|", "-".repeat(18));
    }
    s.push('\n');
    for r in &report.algorithms {
        let cell = format!("{} ± {}", sig6(r.mean), sig6(r.std));
        let _ = write!(s, "| {:<width$} | {:<24} |", r.algorithm.label(), cell);
        if has_ref {
            let rc = r
                .algorithm
                .reference(report.states)
                .map(|(m, d)| format!("{m:.2} ± {d:.2}"))
                .unwrap_or_default();
            let _ = write!(s, " {:<16} |", rc);
        }
        s.push('\n');
    }
    s.push_str("(± is the sample standard deviation over episodes)\n");
    let failed: usize = report
        .algorithms
        .iter()
        .map(AlgorithmResult::failures)
        .sum();
    if failed > 0 {
        let _ = writeln!(
            s,
            "{failed} episode(s) failed and are excluded from the means"
        );
    }
    s
}
