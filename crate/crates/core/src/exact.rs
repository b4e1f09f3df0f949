//! Model-based operators and their fixed points.
//!
//! `T` and `T_w` act on per-state value vectors, `H` and `H_w` on Q-tables.
//! Every sweep solves one matrix game per state and reuses that value for
//! every cell that refers to the state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{w_star, MarkovGame, RelaxationParam};
use crate::matrix_game::{solve_matrix_game, MatrixGameSolution, MixedStrategy, PayoffMatrix};
use crate::{par, Error, Result, DEFAULT_TOL};

/// Per-state scalar values `J(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(states: usize) -> Self {
        Self(vec![0.0; states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        sup_norm(&self.0)
    }

    pub fn max_dist(&self, other: &Self) -> f64 {
        sup_dist(&self.0, &other.0)
    }

    pub fn l2_dist(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Q-values indexed `[i][u][v]`, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QTableJson", into = "QTableJson")]
pub struct QTable {
    states: usize,
    actions_u: usize,
    actions_v: usize,
    data: Vec<f64>,
}

impl QTable {
    pub fn zeros(states: usize, actions_u: usize, actions_v: usize) -> Self {
        Self {
            states,
            actions_u,
            actions_v,
            data: vec![0.0; states * actions_u * actions_v],
        }
    }

    pub fn zeros_like(game: &MarkovGame) -> Self {
        Self::zeros(
            game.num_states(),
            game.num_actions_u(),
            game.num_actions_v(),
        )
    }

    pub fn from_flat(
        states: usize,
        actions_u: usize,
        actions_v: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != states * actions_u * actions_v {
            return Err(Error::DimensionMismatch(format!(
                "Q-table needs {} entries, got {}",
                states * actions_u * actions_v,
                data.len()
            )));
        }
        Ok(Self {
            states,
            actions_u,
            actions_v,
            data,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, u: usize, v: usize) -> f64 {
        self.data[(i * self.actions_u + u) * self.actions_v + v]
    }

    /// The `l × m` matrix game `Q(i)`.
    pub fn slice(&self, i: usize) -> PayoffMatrix {
        let len = self.actions_u * self.actions_v;
        PayoffMatrix::new(
            self.actions_u,
            self.actions_v,
            self.data[i * len..(i + 1) * len].to_vec(),
        )
    }

    pub fn max_norm(&self) -> f64 {
        sup_norm(&self.data)
    }

    pub fn max_dist(&self, other: &Self) -> f64 {
        sup_dist(&self.data, &other.data)
    }

    pub fn matches(&self, game: &MarkovGame) -> bool {
        self.states == game.num_states()
            && self.actions_u == game.num_actions_u()
            && self.actions_v == game.num_actions_v()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(self)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QTableJson {
    #[serde(rename = "M")]
    states: usize,
    l: usize,
    m: usize,
    q: Vec<Vec<Vec<f64>>>,
}

impl From<QTable> for QTableJson {
    fn from(t: QTable) -> Self {
        let q = t
            .data
            .chunks(t.actions_u * t.actions_v)
            .map(|s| s.chunks(t.actions_v).map(<[f64]>::to_vec).collect())
            .collect();
        QTableJson {
            states: t.states,
            l: t.actions_u,
            m: t.actions_v,
            q,
        }
    }
}

impl TryFrom<QTableJson> for QTable {
    type Error = Error;

    fn try_from(j: QTableJson) -> Result<Self> {
        if j.q.len() != j.states
            || j.q
                .iter()
                .any(|s| s.len() != j.l || s.iter().any(|r| r.len() != j.m))
        {
            return Err(Error::DimensionMismatch(format!(
                "q does not match M={}, l={}, m={}",
                j.states, j.l, j.m
            )));
        }
        let data = j.q.into_iter().flatten().flatten().collect();
        QTable::from_flat(j.states, j.l, j.m, data)
    }
}

pub(crate) fn sup_norm(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub(crate) fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Iteration count and residual history of a fixed-point run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iterations: usize,
    /// Sup-norm distance between successive iterates.
    pub residuals: Vec<f64>,
    pub final_residual: f64,
}

#[derive(Debug, Clone)]
pub struct IterationOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; zero when `None`.
    pub init: Option<Vec<f64>>,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            init: None,
        }
    }
}

impl IterationOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

fn check_game(game: &MarkovGame) -> Result<()> {
    let v = game.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidGame(v))
    }
}

fn check_w(game: &MarkovGame, w: f64) -> Result<f64> {
    RelaxationParam::checked(w, game).map(RelaxationParam::get)
}

/// `val[Q(i)]` for every state.
pub fn state_values(q: &QTable) -> Result<Vec<f64>> {
    let work = q.data.len();
    par::map_indexed(q.states, work, |i| {
        solve_matrix_game(&q.slice(i), DEFAULT_TOL).map(|s| s.value)
    })
    .into_iter()
    .collect()
}

/// Full matrix-game solutions of every state slice.
pub(crate) fn state_solutions(q: &QTable) -> Result<Vec<MatrixGameSolution>> {
    let work = q.data.len();
    par::map_indexed(q.states, work, |i| {
        solve_matrix_game(&q.slice(i), DEFAULT_TOL)
    })
    .into_iter()
    .collect()
}

/// `Q(i,u,v) = r(i,u,v) + α Σ_j p(j|i,u,v) J(j)`.
pub fn q_from_values(game: &MarkovGame, j: &[f64]) -> QTable {
    let alpha = game.discount();
    let data = (0..game.num_cells())
        .map(|c| game.rewards()[c] + alpha * dot(game.row(c), j))
        .collect();
    QTable {
        states: game.num_states(),
        actions_u: game.num_actions_u(),
        actions_v: game.num_actions_v(),
        data,
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(game: &MarkovGame, j: &ValueFunction) -> Result<()> {
    if j.len() == game.num_states() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "value function has {} entries, game has {} states",
            j.len(),
            game.num_states()
        )))
    }
}

fn check_q(game: &MarkovGame, q: &QTable) -> Result<()> {
    if q.matches(game) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(
            "Q-table shape does not match the game".into(),
        ))
    }
}

/// `(TJ)(i) = val[r(i,·,·) + α Σ_j p(j|i,·,·) J(j)]`.
pub fn apply_t(game: &MarkovGame, j: &ValueFunction) -> Result<ValueFunction> {
    check_len(game, j)?;
    state_values(&q_from_values(game, &j.0)).map(ValueFunction)
}

/// `T_w J = w·TJ + (1-w)·J`.
pub fn apply_t_w(game: &MarkovGame, j: &ValueFunction, w: f64) -> Result<ValueFunction> {
    let w = check_w(game, w)?;
    let tj = apply_t(game, j)?;
    Ok(ValueFunction(
        tj.0.iter()
            .zip(&j.0)
            .map(|(t, x)| w * t + (1.0 - w) * x)
            .collect(),
    ))
}

/// The relaxed min-max Q-operator
/// `(H_w Q)(i,u,v) = w(r + α Σ_j p(j|i,u,v) val[Q(j)]) + (1-w) val[Q(i)]`.
pub fn apply_h_w(game: &MarkovGame, q: &QTable, w: f64) -> Result<QTable> {
    let w = check_w(game, w)?;
    check_q(game, q)?;
    let vals = state_values(q)?;
    Ok(h_w_from_values(game, &vals, w))
}

/// Standard min-max Q-operator, `H = H_1`.
pub fn apply_h(game: &MarkovGame, q: &QTable) -> Result<QTable> {
    check_q(game, q)?;
    let vals = state_values(q)?;
    Ok(h_w_from_values(game, &vals, 1.0))
}

fn h_w_from_values(game: &MarkovGame, vals: &[f64], w: f64) -> QTable {
    let alpha = game.discount();
    let data = (0..game.num_cells())
        .map(|c| {
            let i = game.state_of(c);
            w * (game.rewards()[c] + alpha * dot(game.row(c), vals)) + (1.0 - w) * vals[i]
        })
        .collect();
    QTable {
        states: game.num_states(),
        actions_u: game.num_actions_u(),
        actions_v: game.num_actions_v(),
        data,
    }
}

/// Result of [`solve_exact`].
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub j_star: ValueFunction,
    pub q_star: QTable,
    /// `(row, column)` optimal strategies of `Q*(i)` per state.
    pub policies: Vec<(MixedStrategy, MixedStrategy)>,
    pub report: IterationReport,
}

/// Iterates `J ← T_w J` until successive iterates are within `opts.tol`.
pub fn relaxed_value_iteration(
    game: &MarkovGame,
    w: f64,
    opts: &IterationOptions,
) -> Result<(ValueFunction, IterationReport)> {
    check_game(game)?;
    let w = check_w(game, w)?;
    let mut j = initial_values(game.num_states(), opts)?;
    let mut residuals = Vec::new();
    for k in 1..=opts.max_iter {
        let next = if w == 1.0 {
            apply_t(game, &j)?
        } else {
            apply_t_w(game, &j, w)?
        };
        let res = next.max_dist(&j);
        residuals.push(res);
        j = next;
        if res <= opts.tol {
            return Ok((
                j,
                IterationReport {
                    iterations: k,
                    residuals,
                    final_residual: res,
                },
            ));
        }
    }
    let final_residual = residuals.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NoConvergence(Box::new(IterationReport {
        iterations: opts.max_iter,
        residuals,
        final_residual,
    })))
}

fn initial_values(states: usize, opts: &IterationOptions) -> Result<ValueFunction> {
    match &opts.init {
        None => Ok(ValueFunction::zeros(states)),
        Some(v) if v.len() == states => Ok(ValueFunction(v.clone())),
        Some(v) => Err(Error::DimensionMismatch(format!(
            "initial point has {} entries, expected {states}",
            v.len()
        ))),
    }
}

/// Min-max value function `J*`, `Q*`, and per-state optimal strategies by
/// standard value iteration.
pub fn solve_exact(game: &MarkovGame, opts: &IterationOptions) -> Result<ExactSolution> {
    let (j_star, report) = relaxed_value_iteration(game, 1.0, opts)?;
    let q_star = q_from_values(game, &j_star.0);
    let policies = state_solutions(&q_star)?
        .into_iter()
        .map(|s| (s.row_strategy, s.col_strategy))
        .collect();
    Ok(ExactSolution {
        j_star,
        q_star,
        policies,
        report,
    })
}

/// Fixed point `Q†_w` of `H_w`, by iterating `Q ← H_w Q`.
///
/// `opts.init`, when given, is the flat Q-table starting point.
pub fn q_dagger(
    game: &MarkovGame,
    w: f64,
    opts: &IterationOptions,
) -> Result<(QTable, IterationReport)> {
    check_game(game)?;
    let w = check_w(game, w)?;
    let mut q = match &opts.init {
        None => QTable::zeros_like(game),
        Some(v) => QTable::from_flat(
            game.num_states(),
            game.num_actions_u(),
            game.num_actions_v(),
            v.clone(),
        )?,
    };
    let mut residuals = Vec::new();
    for k in 1..=opts.max_iter {
        let vals = state_values(&q)?;
        let next = h_w_from_values(game, &vals, w);
        let res = next.max_dist(&q);
        residuals.push(res);
        q = next;
        if res <= opts.tol {
            return Ok((
                q,
                IterationReport {
                    iterations: k,
                    residuals,
                    final_residual: res,
                },
            ));
        }
    }
    let final_residual = residuals.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NoConvergence(Box::new(IterationReport {
        iterations: opts.max_iter,
        residuals,
        final_residual,
    })))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorChoice {
    T,
    TW,
    H,
    HW,
}

/// Largest observed `‖Op(P) - Op(Q)‖ / ‖P - Q‖` over random pairs.
///
/// Pairs are drawn uniformly from `[-2B, 2B]` with `B = max(1, R/(1-α))`.
/// For `T` and `H` the `w` argument is ignored.
pub fn contraction_probe(
    game: &MarkovGame,
    op: OperatorChoice,
    w: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_game(game)?;
    let w = match op {
        OperatorChoice::T | OperatorChoice::H => 1.0,
        OperatorChoice::TW | OperatorChoice::HW => check_w(game, w)?,
    };
    let scale = 2.0 * game.value_bound().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let ratio = match op {
            OperatorChoice::T | OperatorChoice::TW => {
                let n = game.num_states();
                let a = ValueFunction((0..n).map(|_| rng.gen_range(-scale..scale)).collect());
                let b = ValueFunction((0..n).map(|_| rng.gen_range(-scale..scale)).collect());
                let d = a.max_dist(&b);
                if d == 0.0 {
                    continue;
                }
                apply_t_w(game, &a, w)?.max_dist(&apply_t_w(game, &b, w)?) / d
            }
            OperatorChoice::H | OperatorChoice::HW => {
                let mut a = QTable::zeros_like(game);
                let mut b = QTable::zeros_like(game);
                a.data
                    .iter_mut()
                    .for_each(|x| *x = rng.gen_range(-scale..scale));
                b.data
                    .iter_mut()
                    .for_each(|x| *x = rng.gen_range(-scale..scale));
                let d = a.max_dist(&b);
                if d == 0.0 {
                    continue;
                }
                apply_h_w(game, &a, w)?.max_dist(&apply_h_w(game, &b, w)?) / d
            }
        };
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Contraction bound `1 - w + wα` for the relaxed operators (`α` for `w = 1`).
pub fn contraction_bound(game: &MarkovGame, w: f64) -> f64 {
    RelaxationParam(w).contraction_factor(game.discount())
}

/// `w*` for convenience alongside the operators.
pub fn optimal_relaxation(game: &MarkovGame) -> f64 {
    w_star(game).get()
}
