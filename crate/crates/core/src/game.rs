//! Markov game data model.
//!
//! Tensors are flat and row-major: transitions are laid out `[i][u][v][j]` so
//! each successor distribution is one contiguous row, rewards `[i][u][v]`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// Slack when checking `w ≤ w*`, so that `w_star(game)` itself always passes.
pub(crate) const RELAXATION_SLACK: f64 = 1e-12;

/// A finite two-player zero-sum discounted Markov game `(S, U, V, p, r, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    states: usize,
    actions_u: usize,
    actions_v: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
}

/// One broken invariant, with the offending indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyDimension,
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    DiscountOutOfRange(f64),
    NegativeProbability {
        i: usize,
        u: usize,
        v: usize,
        j: usize,
        p: f64,
    },
    RowSum {
        i: usize,
        u: usize,
        v: usize,
        sum: f64,
    },
    NonFiniteReward {
        i: usize,
        u: usize,
        v: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyDimension => write!(f, "state and action counts must be >= 1"),
            Violation::ShapeMismatch {
                what,
                expected,
                found,
            } => {
                write!(f, "{what} has {found} entries, expected {expected}")
            }
            Violation::DiscountOutOfRange(a) => {
                write!(f, "discount must be < 1 and >= 0 (got {a})")
            }
            Violation::NegativeProbability { i, u, v, j, p } => {
                write!(f, "p({j}|{i},{u},{v}) = {p} is negative or not finite")
            }
            Violation::RowSum { i, u, v, sum } => {
                write!(f, "transition row ({i},{u},{v}) sums to {sum}, not 1")
            }
            Violation::NonFiniteReward { i, u, v } => {
                write!(f, "reward r({i},{u},{v}) is not finite")
            }
        }
    }
}

impl MarkovGame {
    /// Builds and validates a game from flat row-major tensors.
    pub fn new(
        states: usize,
        actions_u: usize,
        actions_v: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        let game = Self {
            states,
            actions_u,
            actions_v,
            transition,
            reward,
            discount,
        };
        let violations = game.validate();
        if violations.is_empty() {
            Ok(game)
        } else {
            Err(Error::InvalidGame(violations))
        }
    }

    /// Builds a game without checking invariants. Callers are expected to run
    /// [`MarkovGame::validate`] themselves.
    pub fn new_unchecked(
        states: usize,
        actions_u: usize,
        actions_v: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
    ) -> Self {
        Self {
            states,
            actions_u,
            actions_v,
            transition,
            reward,
            discount,
        }
    }

    /// Every violated invariant; empty means the game is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let (s, l, m) = (self.states, self.actions_u, self.actions_v);
        if s == 0 || l == 0 || m == 0 {
            out.push(Violation::EmptyDimension);
            return out;
        }
        if !(0.0..1.0).contains(&self.discount) {
            out.push(Violation::DiscountOutOfRange(self.discount));
        }
        let cells = s * l * m;
        if self.reward.len() != cells {
            out.push(Violation::ShapeMismatch {
                what: "reward",
                expected: cells,
                found: self.reward.len(),
            });
        }
        if self.transition.len() != cells * s {
            out.push(Violation::ShapeMismatch {
                what: "transition",
                expected: cells * s,
                found: self.transition.len(),
            });
        }
        if !out
            .iter()
            .all(|v| matches!(v, Violation::DiscountOutOfRange(_)))
        {
            return out;
        }
        for cell in 0..cells {
            let (i, u, v) = self.unflatten(cell);
            if !self.reward[cell].is_finite() {
                out.push(Violation::NonFiniteReward { i, u, v });
            }
            let row = self.row(cell);
            for (j, &p) in row.iter().enumerate() {
                if !(p >= 0.0) || !p.is_finite() {
                    out.push(Violation::NegativeProbability { i, u, v, j, p });
                }
            }
            let sum: f64 = row.iter().sum();
            if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
                out.push(Violation::RowSum { i, u, v, sum });
            }
        }
        out
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn num_actions_u(&self) -> usize {
        self.actions_u
    }

    pub fn num_actions_v(&self) -> usize {
        self.actions_v
    }

    /// Number of `(i, u, v)` cells.
    pub fn num_cells(&self) -> usize {
        self.states * self.actions_u * self.actions_v
    }

    /// Cells per state, `l * m`.
    pub fn slice_len(&self) -> usize {
        self.actions_u * self.actions_v
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    #[inline]
    pub fn cell(&self, i: usize, u: usize, v: usize) -> usize {
        (i * self.actions_u + u) * self.actions_v + v
    }

    #[inline]
    pub fn unflatten(&self, cell: usize) -> (usize, usize, usize) {
        let v = cell % self.actions_v;
        let rest = cell / self.actions_v;
        (rest / self.actions_u, rest % self.actions_u, v)
    }

    /// State index of a flat cell.
    #[inline]
    pub fn state_of(&self, cell: usize) -> usize {
        cell / self.slice_len()
    }

    /// Successor distribution `p(·|i,u,v)` of a flat cell.
    #[inline]
    pub fn row(&self, cell: usize) -> &[f64] {
        &self.transition[cell * self.states..(cell + 1) * self.states]
    }

    #[inline]
    pub fn p(&self, j: usize, i: usize, u: usize, v: usize) -> f64 {
        self.transition[self.cell(i, u, v) * self.states + j]
    }

    #[inline]
    pub fn r(&self, i: usize, u: usize, v: usize) -> f64 {
        self.reward[self.cell(i, u, v)]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    /// `R = max |r(i,u,v)|`.
    pub fn reward_bound(&self) -> f64 {
        self.reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    /// `R / (1 - α)`, the bound on `J*` and `Q*`.
    pub fn value_bound(&self) -> f64 {
        self.reward_bound() / (1.0 - self.discount)
    }

    /// Self-loop probability `p(i|i,u,v)` of a flat cell.
    #[inline]
    pub fn self_loop(&self, cell: usize) -> f64 {
        self.row(cell)[self.state_of(cell)]
    }

    pub fn min_self_loop(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.self_loop(c))
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper limit `1/(1-α)` on any relaxation factor.
    pub fn max_relaxation(&self) -> f64 {
        1.0 / (1.0 - self.discount)
    }

    /// Reads a game from its JSON form and validates it.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: GameJson = serde_json::from_str(s)?;
        raw.try_into()
    }

    /// Single-line JSON with 17 significant digits per float.
    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(&GameJson::from(self))
    }
}

/// On-disk form: `{"M", "l", "m", "alpha", "p": [i][u][v][j], "r": [i][u][v]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameJson {
    #[serde(rename = "M")]
    states: usize,
    l: usize,
    m: usize,
    alpha: f64,
    p: Vec<Vec<Vec<Vec<f64>>>>,
    r: Vec<Vec<Vec<f64>>>,
}

impl From<&MarkovGame> for GameJson {
    fn from(g: &MarkovGame) -> Self {
        let (s, l, m) = (g.states, g.actions_u, g.actions_v);
        let p = (0..s)
            .map(|i| {
                (0..l)
                    .map(|u| (0..m).map(|v| g.row(g.cell(i, u, v)).to_vec()).collect())
                    .collect()
            })
            .collect();
        let r = (0..s)
            .map(|i| {
                (0..l)
                    .map(|u| (0..m).map(|v| g.r(i, u, v)).collect())
                    .collect()
            })
            .collect();
        GameJson {
            states: s,
            l,
            m,
            alpha: g.discount,
            p,
            r,
        }
    }
}

impl TryFrom<GameJson> for MarkovGame {
    type Error = Error;

    fn try_from(raw: GameJson) -> Result<Self> {
        let (s, l, m) = (raw.states, raw.l, raw.m);
        let shape_err = |what: &str| {
            Error::DimensionMismatch(format!("{what} does not match M={s}, l={l}, m={m}"))
        };
        if raw.p.len() != s
            || raw.p.iter().any(|a| {
                a.len() != l
                    || a.iter()
                        .any(|b| b.len() != m || b.iter().any(|c| c.len() != s))
            })
        {
            return Err(shape_err("p"));
        }
        if raw.r.len() != s
            || raw
                .r
                .iter()
                .any(|a| a.len() != l || a.iter().any(|b| b.len() != m))
        {
            return Err(shape_err("r"));
        }
        let transition = raw.p.into_iter().flatten().flatten().flatten().collect();
        let reward = raw.r.into_iter().flatten().flatten().collect();
        MarkovGame::new(s, l, m, transition, reward, raw.alpha)
    }
}

/// A relaxation factor `w` for the relaxed operators.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelaxationParam(pub f64);

impl RelaxationParam {
    pub fn get(self) -> f64 {
        self.0
    }

    /// Checks `0 < w ≤ w*(game)`.
    pub fn checked(w: f64, game: &MarkovGame) -> Result<Self> {
        let max = w_star(game).0;
        if w > 0.0 && w <= max + RELAXATION_SLACK {
            Ok(Self(w))
        } else {
            Err(Error::RelaxationOutOfRange { w, max })
        }
    }

    /// Contraction factor `1 - w + wα` of the relaxed operators.
    pub fn contraction_factor(self, discount: f64) -> f64 {
        1.0 - self.0 + self.0 * discount
    }
}

/// Largest admissible relaxation, `min over (i,u,v) of 1/(1 - α p(i|i,u,v))`.
pub fn w_star(game: &MarkovGame) -> RelaxationParam {
    RelaxationParam(1.0 / (1.0 - game.discount * game.min_self_loop()))
}

/// Parameters of a seeded random game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub states: usize,
    pub actions_u: usize,
    pub actions_v: usize,
    pub alpha: f64,
    #[serde(default = "default_min_self_loop")]
    pub min_self_loop: f64,
    #[serde(default = "default_reward_range")]
    pub reward_range: (f64, f64),
    pub seed: u64,
}

fn default_min_self_loop() -> f64 {
    0.1
}

fn default_reward_range() -> (f64, f64) {
    (0.0, 1.0)
}

impl GameSpec {
    pub fn generate(&self) -> Result<MarkovGame> {
        generate_random_game(
            self.states,
            self.actions_u,
            self.actions_v,
            self.alpha,
            self.min_self_loop,
            self.reward_range,
            self.seed,
        )
    }
}

/// Seeded random game whose self-loop probabilities are all at least
/// `min_self_loop`.
///
/// Each row draws `ξ, η ~ U[0,1)` and puts mass `s + ξ·(1-s)·η` on the
/// self-loop (`s = min_self_loop`); the rest is split over the other states in
/// proportion to fresh uniform draws. A single-state game always has self-loop
/// mass 1. Rewards are uniform on `[lo, hi]`.
pub fn generate_random_game(
    states: usize,
    actions_u: usize,
    actions_v: usize,
    alpha: f64,
    min_self_loop: f64,
    (lo, hi): (f64, f64),
    seed: u64,
) -> Result<MarkovGame> {
    if !(lo <= hi) {
        return Err(Error::InvalidRange(format!(
            "reward range [{lo}, {hi}] is empty"
        )));
    }
    if !(0.0..1.0).contains(&min_self_loop) {
        return Err(Error::InvalidRange(format!(
            "min_self_loop must lie in [0, 1), got {min_self_loop}"
        )));
    }
    if states == 0 || actions_u == 0 || actions_v == 0 {
        return Err(Error::InvalidGame(vec![Violation::EmptyDimension]));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = states * actions_u * actions_v;
    let mut transition = vec![0.0; cells * states];
    for cell in 0..cells {
        let i = cell / (actions_u * actions_v);
        let row = &mut transition[cell * states..(cell + 1) * states];
        if states == 1 {
            row[0] = 1.0;
            continue;
        }
        let xi: f64 = rng.gen();
        let eta: f64 = rng.gen();
        let self_mass = min_self_loop + xi * (1.0 - min_self_loop) * eta;
        let remainder = 1.0 - self_mass;
        let mut draws: Vec<f64> = (0..states - 1).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = draws.iter().sum();
        if total <= 0.0 {
            draws.iter_mut().for_each(|d| *d = 1.0);
        }
        let total: f64 = draws.iter().sum();
        let mut others = draws.into_iter();
        for (j, slot) in row.iter_mut().enumerate() {
            if j != i {
                *slot = remainder * others.next().unwrap() / total;
            }
        }
        // Put the rounding residue on the self-loop so the row sums to 1.
        let off: f64 = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, p)| p)
            .sum();
        row[i] = 1.0 - off;
    }
    let reward = (0..cells)
        .map(|_| lo + (hi - lo) * rng.gen::<f64>())
        .collect();
    MarkovGame::new(states, actions_u, actions_v, transition, reward, alpha)
}

/// The equivalent game `(S, U, V, q, w·r, 1 - w + wα)` whose standard minimax
/// Q-operator equals the relaxed operator `H_w` of `game`.
pub fn transform_game(game: &MarkovGame, w: RelaxationParam) -> Result<MarkovGame> {
    let w = RelaxationParam::checked(w.0, game)?.0;
    let alpha = game.discount;
    let alpha_bar = 1.0 - w + w * alpha;
    let s = game.states;
    let mut q = vec![0.0; game.transition.len()];
    for cell in 0..game.num_cells() {
        let i = game.state_of(cell);
        let p = game.row(cell);
        let out = &mut q[cell * s..(cell + 1) * s];
        if alpha_bar <= 0.0 {
            // Contraction factor is zero: all mass stays put.
            out[i] = 1.0;
            continue;
        }
        for j in 0..s {
            out[j] = if j == i {
                (1.0 - w + w * alpha * p[i]) / alpha_bar
            } else {
                w * alpha * p[j] / alpha_bar
            };
        }
        // Clamp tiny negatives at w = w* (the diagonal numerator is zero there).
        if out[i] < 0.0 {
            out[i] = 0.0;
        }
    }
    let reward = game.reward.iter().map(|r| w * r).collect();
    let alpha_bar = alpha_bar.max(0.0);
    let out = MarkovGame::new_unchecked(
        game.states,
        game.actions_u,
        game.actions_v,
        q,
        reward,
        alpha_bar,
    );
    let violations = out.validate();
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(Error::InvalidGame(violations))
    }
}
