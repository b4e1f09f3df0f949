//! Synchronous sample-based minimax Q-learning.
//!
//! Every iteration draws one successor per `(i, u, v)` cell and updates the
//! whole table:
//!
//! ```text
//! d(i,u,v)  = w (r(i,u,v) + α val[Q_n(Y_n(i,u,v))]) + (1 - w) val[Q_n(i)]
//! Q_{n+1}   = (1 - γ_n) Q_n + γ_n d
//! ```
//!
//! `w = 1` is standard minimax Q-learning. In adaptive mode `w` is replaced by
//! an estimate `w_n` driven by empirical self-loop frequencies, so no model
//! knowledge is needed.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exact::{state_solutions, state_values, sup_dist, QTable, ValueFunction};
use crate::game::MarkovGame;
use crate::matrix_game::MixedStrategy;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `a / (n + b)^exponent`
    Power,
    /// `a / (n + b)`
    Harmonic,
    /// `a`
    Constant,
}

/// Step-size sequences `γ_n` (Q-table) and `β_n` (slow `w_n` timescale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    /// `β_n = a / (n + b)^beta_exponent`.
    #[serde(default = "default_beta_exponent")]
    pub beta_exponent: f64,
}

fn one() -> f64 {
    1.0
}

fn default_exponent() -> f64 {
    0.6
}

fn default_beta_exponent() -> f64 {
    0.9
}

impl Default for StepSchedule {
    /// `γ_n = (n+1)^-0.6`, `β_n = (n+1)^-0.9`.
    fn default() -> Self {
        Self::power(0.6)
    }
}

impl StepSchedule {
    pub fn power(exponent: f64) -> Self {
        Self {
            kind: ScheduleKind::Power,
            a: 1.0,
            b: 1.0,
            exponent,
            beta_exponent: 0.9,
        }
    }

    pub fn harmonic() -> Self {
        Self {
            kind: ScheduleKind::Harmonic,
            exponent: 1.0,
            ..Self::power(1.0)
        }
    }

    pub fn constant(a: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            a,
            ..Self::default()
        }
    }

    pub fn gamma(&self, n: usize) -> f64 {
        let x = n as f64 + self.b;
        match self.kind {
            ScheduleKind::Power => self.a / x.powf(self.exponent),
            ScheduleKind::Harmonic => self.a / x,
            ScheduleKind::Constant => self.a,
        }
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.a / (n as f64 + self.b).powf(self.beta_exponent)
    }

    fn gamma_decay(&self) -> f64 {
        match self.kind {
            ScheduleKind::Power => self.exponent,
            ScheduleKind::Harmonic => 1.0,
            ScheduleKind::Constant => 0.0,
        }
    }

    /// Steps must lie in `(0, 1]`; decaying kinds must satisfy the
    /// Robbins–Monro conditions, which for `(n+b)^-e` means `e ∈ (0.5, 1]`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if !(self.a > 0.0 && self.a <= 1.0) {
            return bad(format!("step scale a = {} must lie in (0, 1]", self.a));
        }
        if !(self.b >= 1.0) {
            return bad(format!("step offset b = {} must be >= 1", self.b));
        }
        if self.kind == ScheduleKind::Power && !(self.exponent > 0.5 && self.exponent <= 1.0) {
            return bad(format!(
                "power exponent {} must lie in (0.5, 1]",
                self.exponent
            ));
        }
        if !(self.beta_exponent > 0.5 && self.beta_exponent <= 1.0) {
            return bad(format!(
                "beta exponent {} must lie in (0.5, 1]",
                self.beta_exponent
            ));
        }
        Ok(())
    }
}

impl FromStr for StepSchedule {
    type Err = Error;

    /// `power:E`, `harmonic`, or `constant:A`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').map_or((s, None), |(k, a)| (k, Some(a)));
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| {
                Error::ConfigInvalid(format!("schedule `{s}` needs a numeric argument"))
            })?
            .parse()
            .map_err(|_| Error::ConfigInvalid(format!("bad number in schedule `{s}`")))
        };
        let sched = match kind {
            "power" => Self::power(num(arg)?),
            "harmonic" if arg.is_none() => Self::harmonic(),
            "constant" => Self::constant(num(arg)?),
            _ => return Err(Error::ConfigInvalid(format!("unknown schedule `{s}`"))),
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// Per-cell successor counts `c[i][u][v][j]` and row totals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCounter {
    states: usize,
    counts: Vec<u64>,
    totals: Vec<u64>,
}

impl TransitionCounter {
    pub fn new(game: &MarkovGame) -> Self {
        let cells = game.num_cells();
        Self {
            states: game.num_states(),
            counts: vec![0; cells * game.num_states()],
            totals: vec![0; cells],
        }
    }

    /// Records one successor per cell.
    pub fn record(&mut self, successors: &[usize]) {
        debug_assert_eq!(successors.len(), self.totals.len());
        for (cell, &j) in successors.iter().enumerate() {
            self.counts[cell * self.states + j] += 1;
            self.totals[cell] += 1;
        }
    }

    pub fn count(&self, cell: usize, j: usize) -> u64 {
        self.counts[cell * self.states + j]
    }

    pub fn total(&self, cell: usize) -> u64 {
        self.totals[cell]
    }

    /// `p'(·|cell)`, or `None` for an unvisited cell.
    pub fn empirical_row(&self, cell: usize) -> Option<Vec<f64>> {
        let t = self.totals[cell];
        (t > 0).then(|| {
            self.counts[cell * self.states..(cell + 1) * self.states]
                .iter()
                .map(|&c| c as f64 / t as f64)
                .collect()
        })
    }

    /// `min over cells of p'(i|i,u,v)`; unvisited cells count as 0.
    pub fn min_self_loop(&self) -> f64 {
        let per_state = self.totals.len() / self.states;
        (0..self.totals.len())
            .map(|cell| {
                let t = self.totals[cell];
                if t == 0 {
                    0.0
                } else {
                    self.count(cell, cell / per_state) as f64 / t as f64
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerMode {
    /// `w = 1`.
    Standard,
    /// Fixed relaxation factor.
    Fixed(f64),
    /// Model-free `w_n` estimated from transition counts.
    Adaptive,
}

impl FromStr for LearnerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "adaptive" => Ok(Self::Adaptive),
            _ => match s.strip_prefix("fixed:").map(str::parse::<f64>) {
                Some(Ok(w)) => Ok(Self::Fixed(w)),
                _ => Err(Error::ConfigInvalid(format!(
                    "mode must be standard, adaptive or fixed:W (got `{s}`)"
                ))),
            },
        }
    }
}

impl fmt::Display for LearnerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Standard => f.write_str("standard"),
            Self::Fixed(w) => write!(f, "fixed:{w}"),
            Self::Adaptive => f.write_str("adaptive"),
        }
    }
}

/// How the adaptive `w_n` recursion is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Update `w_n` every iteration with `γ_n`.
    SharedStep,
    /// Update `w_n` every `period` iterations with the slower `β_n`.
    TwoTimescale { period: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub mode: LearnerMode,
    pub schedule: StepSchedule,
    pub coupling: Coupling,
    pub iterations: usize,
    /// Clamp every iterate to `[-B, B]` when set.
    pub projection_bound: Option<f64>,
    /// Starting table; zero when `None`.
    pub q_init: Option<QTable>,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(mode: LearnerMode, iterations: usize, seed: u64) -> Self {
        Self {
            mode,
            schedule: StepSchedule::default(),
            coupling: Coupling::SharedStep,
            iterations,
            projection_bound: None,
            q_init: None,
            seed,
        }
    }

    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        self.schedule.validate()?;
        if let LearnerMode::Fixed(w) = self.mode {
            let max = game.max_relaxation();
            if !(w > 0.0 && w <= max) {
                return Err(Error::RelaxationOutOfRange { w, max });
            }
        }
        if let Some(b) = self.projection_bound {
            if !(b >= game.value_bound()) {
                return Err(Error::ConfigInvalid(format!(
                    "projection bound {b} is below R/(1-alpha) = {}",
                    game.value_bound()
                )));
            }
        }
        if let Some(q) = &self.q_init {
            if !q.matches(game) {
                return Err(Error::ConfigInvalid(
                    "initial Q-table shape does not match the game".into(),
                ));
            }
        }
        if let Coupling::TwoTimescale { period } = self.coupling {
            if period < 2 {
                return Err(Error::ConfigInvalid(
                    "two-timescale period must be > 1".into(),
                ));
            }
            if self.schedule.beta_exponent <= self.schedule.gamma_decay() {
                return Err(Error::ConfigInvalid(format!(
                    "beta exponent {} must exceed the gamma decay rate {} so beta/gamma -> 0",
                    self.schedule.beta_exponent,
                    self.schedule.gamma_decay()
                )));
            }
        }
        Ok(())
    }
}

/// Diagnostics recorded at iteration `n` (before the `n`-th update).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub w: f64,
    /// `max_i |val[Q_n(i)] - J*(i)|` when a reference was supplied.
    pub error: Option<f64>,
    pub q_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    /// `N + 1` rows, for `n = 0..=N`.
    pub rows: Vec<TraceRow>,
    pub final_q: QTable,
    /// `J̃(i) = val[Q_N(i)]`.
    pub j_tilde: ValueFunction,
    pub policies: Vec<(MixedStrategy, MixedStrategy)>,
    pub final_w: f64,
    /// Transition counts (adaptive mode only).
    pub counter: Option<TransitionCounter>,
}

impl RunTrace {
    /// Trace as CSV with columns `n,w_n,error,q_norm`; a missing error is empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,w_n,error,q_norm\n");
        for r in &self.rows {
            let err = r.error.map(|e| e.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", r.n, r.w, err, r.q_norm));
        }
        out
    }
}

/// One successor `Y(i,u,v) ~ p(·|i,u,v)` per cell, drawn in cell order.
pub fn sample_transitions<R: RngCore + ?Sized>(game: &MarkovGame, rng: &mut R) -> Vec<usize> {
    (0..game.num_cells())
        .map(|cell| {
            let u: f64 = rng.gen();
            let row = game.row(cell);
            let mut acc = 0.0;
            let mut last_positive = 0;
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    acc += p;
                    last_positive = j;
                    if u < acc {
                        return j;
                    }
                }
            }
            // Rows sum to 1 up to rounding; mass lost to rounding goes to the
            // last reachable state.
            last_positive
        })
        .collect()
}

/// One synchronous update `Q_{n+1} = (1-γ)Q_n + γ d_{n+1}`.
pub fn learner_step(
    q: &QTable,
    successors: &[usize],
    w: f64,
    gamma: f64,
    game: &MarkovGame,
    projection_bound: Option<f64>,
) -> Result<QTable> {
    if !q.matches(game) || successors.len() != game.num_cells() {
        return Err(Error::DimensionMismatch(
            "Q-table or sample table does not match the game".into(),
        ));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::ConfigInvalid(format!(
            "step size {gamma} must lie in [0, 1]"
        )));
    }
    let vals = state_values(q)?;
    Ok(step_with_values(
        q,
        &vals,
        successors,
        w,
        gamma,
        game,
        projection_bound,
    ))
}

fn step_with_values(
    q: &QTable,
    vals: &[f64],
    successors: &[usize],
    w: f64,
    gamma: f64,
    game: &MarkovGame,
    projection_bound: Option<f64>,
) -> QTable {
    let alpha = game.discount();
    let mut next = q.clone();
    for (cell, slot) in next.as_mut_slice().iter_mut().enumerate() {
        let i = game.state_of(cell);
        let target =
            w * (game.rewards()[cell] + alpha * vals[successors[cell]]) + (1.0 - w) * vals[i];
        let mut updated = (1.0 - gamma) * *slot + gamma * target;
        if let Some(b) = projection_bound {
            updated = updated.clamp(-b, b);
        }
        *slot = updated;
    }
    next
}

/// `w_{n+1} = (1-step) w_n + step / (1 - α min p'(i|i,u,v))`, kept in
/// `[1, 1/(1-α)]`.
pub fn update_w(w: f64, counter: &TransitionCounter, alpha: f64, step: f64) -> f64 {
    let target = 1.0 / (1.0 - alpha * counter.min_self_loop());
    ((1.0 - step) * w + step * target).clamp(1.0, 1.0 / (1.0 - alpha))
}

/// Per-state optimal strategy pairs of `Q(i)`.
pub fn extract_policies(q: &QTable) -> Result<Vec<(MixedStrategy, MixedStrategy)>> {
    Ok(state_solutions(q)?
        .into_iter()
        .map(|s| (s.row_strategy, s.col_strategy))
        .collect())
}

/// Runs `config.iterations` synchronous iterations and records the trace.
///
/// `reference` is `J*`; when given, each trace row carries the sup-norm error
/// of `val[Q_n(·)]`.
pub fn run_learner(
    game: &MarkovGame,
    config: &LearnerConfig,
    reference: Option<&ValueFunction>,
) -> Result<RunTrace> {
    let violations = game.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidGame(violations));
    }
    config.validate(game)?;
    if let Some(r) = reference {
        if r.len() != game.num_states() {
            return Err(Error::DimensionMismatch(
                "reference value function length".into(),
            ));
        }
    }

    let alpha = game.discount();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut q = config
        .q_init
        .clone()
        .unwrap_or_else(|| QTable::zeros_like(game));
    let mut w = match config.mode {
        LearnerMode::Standard | LearnerMode::Adaptive => 1.0,
        LearnerMode::Fixed(w) => w,
    };
    let mut counter =
        matches!(config.mode, LearnerMode::Adaptive).then(|| TransitionCounter::new(game));
    let mut rows = Vec::with_capacity(config.iterations + 1);
    let row = |n: usize, w: f64, q: &QTable, vals: &[f64]| TraceRow {
        n,
        w,
        error: reference.map(|r| sup_dist(vals, &r.0)),
        q_norm: q.max_norm(),
    };

    for n in 0..config.iterations {
        let vals = state_values(&q)?;
        rows.push(row(n, w, &q, &vals));
        let successors = sample_transitions(game, &mut rng);
        let gamma = config.schedule.gamma(n).min(1.0);
        q = step_with_values(
            &q,
            &vals,
            &successors,
            w,
            gamma,
            game,
            config.projection_bound,
        );
        if let Some(counter) = counter.as_mut() {
            counter.record(&successors);
            match config.coupling {
                Coupling::SharedStep => w = update_w(w, counter, alpha, gamma),
                Coupling::TwoTimescale { period } => {
                    if (n + 1) % period == 0 {
                        w = update_w(w, counter, alpha, config.schedule.beta(n).min(1.0));
                    }
                }
            }
        }
    }

    let solutions = state_solutions(&q)?;
    let vals: Vec<f64> = solutions.iter().map(|s| s.value).collect();
    rows.push(row(config.iterations, w, &q, &vals));
    let policies = solutions
        .into_iter()
        .map(|s| (s.row_strategy, s.col_strategy))
        .collect();
    Ok(RunTrace {
        rows,
        final_q: q,
        j_tilde: ValueFunction(vals),
        policies,
        final_w: w,
        counter,
    })
}
