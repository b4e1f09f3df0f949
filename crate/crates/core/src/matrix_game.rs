//! Exact values of finite zero-sum matrix games.
//!
//! The row player maximizes and the column player minimizes `xᵀAy`. The value
//! is found by shifting the matrix to strictly positive entries and solving
//! the column player's reciprocal-value LP
//!
//! ```text
//!     maximize  Σ_j y'_j   subject to   B y' ≤ 1,  y' ≥ 0
//! ```
//!
//! with a dense tableau simplex under Bland's rule. The row player's strategy
//! is read off the reduced costs of the slack columns (the LP dual), so one
//! solve yields both strategies.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default solver tolerance on the saddle-point residual.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Strategy weights below this are clamped to zero before renormalizing.
const WEIGHT_CLAMP: f64 = 1e-12;

/// Pivot/ratio threshold inside the tableau. Entries of the shifted matrix are
/// at least 1, so an absolute threshold is well scaled.
const PIVOT_EPS: f64 = 1e-11;

/// Pivot budget per unit of `rows + cols`.
const PIVOTS_PER_DIM: usize = 50;

/// Dense payoff matrix, row-major, payoffs to the row player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PayoffMatrix {
    /// Builds a matrix from row-major data. Panics if `data.len() != rows * cols`
    /// or either dimension is zero.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix must be at least 1x1");
        assert_eq!(data.len(), rows * cols, "data length must be rows * cols");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 {
            return Err(Error::DimensionMismatch(
                "matrix must be at least 1x1".into(),
            ));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        Ok(Self::new(m, n, rows.concat()))
    }

    /// The all-`c` matrix of the given shape.
    pub fn constant(rows: usize, cols: usize, c: f64) -> Self {
        Self::new(rows, cols, vec![c; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// `beta * A + k * E`.
    pub fn affine(&self, beta: f64, k: f64) -> Self {
        Self::new(
            self.rows,
            self.cols,
            self.data.iter().map(|a| beta * a + k).collect(),
        )
    }

    /// `-Aᵀ`, the same game seen from the other side.
    pub fn neg_transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(-self.get(i, j));
            }
        }
        Self::new(self.cols, self.rows, data)
    }
}

impl TryFrom<Vec<Vec<f64>>> for PayoffMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<PayoffMatrix> for Vec<Vec<f64>> {
    fn from(m: PayoffMatrix) -> Self {
        m.data.chunks(m.cols).map(<[f64]>::to_vec).collect()
    }
}

/// A probability vector over a player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedStrategy(pub Vec<f64>);

impl MixedStrategy {
    pub fn pure(len: usize, action: usize) -> Self {
        let mut w = vec![0.0; len];
        w[action] = 1.0;
        Self(w)
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Clamps tiny or negative weights to zero and rescales to sum to one.
    fn normalized(mut raw: Vec<f64>) -> Self {
        for w in raw.iter_mut() {
            if *w < WEIGHT_CLAMP {
                *w = 0.0;
            }
        }
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            raw.iter_mut().for_each(|w| *w /= total);
        } else {
            let n = raw.len() as f64;
            raw.iter_mut().for_each(|w| *w = 1.0 / n);
        }
        Self(raw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub row_strategy: MixedStrategy,
    pub col_strategy: MixedStrategy,
    /// `max(value - min_j (xᵀA)_j, max_i (Ay)_i - value)`.
    pub residual: f64,
}

/// Saddle-point defect of a candidate solution.
pub fn saddle_residual(a: &PayoffMatrix, value: f64, x: &[f64], y: &[f64]) -> f64 {
    let (m, n) = (a.rows(), a.cols());
    let guaranteed = (0..n)
        .map(|j| (0..m).map(|i| x[i] * a.get(i, j)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let conceded = (0..m)
        .map(|i| (0..n).map(|j| a.get(i, j) * y[j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    (value - guaranteed).max(conceded - value).max(0.0)
}

/// Solves `min_y max_x xᵀAy` exactly.
///
/// `tol` is the contract on the returned residual; the simplex itself works
/// at a fixed internal precision and `tol` only has to be positive.
pub fn solve_matrix_game(a: &PayoffMatrix, tol: f64) -> Result<MatrixGameSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidRange(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if let Some(pos) = a.data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry {
            row: pos / a.cols,
            col: pos % a.cols,
        });
    }

    let min = a.data.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 + (-min).max(0.0);

    let lp = Tableau::solve(a, shift)?;
    let value = 1.0 / lp.objective - shift;
    let row_strategy = MixedStrategy::normalized(lp.dual);
    let col_strategy = MixedStrategy::normalized(lp.primal);
    let residual = saddle_residual(a, value, &row_strategy.0, &col_strategy.0);

    Ok(MatrixGameSolution {
        value,
        row_strategy,
        col_strategy,
        residual,
    })
}

/// `val[A]` at the default tolerance.
pub fn val(a: &PayoffMatrix) -> Result<f64> {
    solve_matrix_game(a, DEFAULT_TOL).map(|s| s.value)
}

struct LpSolution {
    objective: f64,
    primal: Vec<f64>,
    dual: Vec<f64>,
}

/// Dense simplex tableau for `max 1ᵀy s.t. (A + shift)y ≤ 1, y ≥ 0`.
///
/// Layout: `m` constraint rows followed by the objective row, each of width
/// `n + m + 1` (structural columns, slack columns, right-hand side). The
/// objective row holds `z_j - c_j`, so the tableau is optimal once no entry
/// is negative.
struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn solve(a: &PayoffMatrix, shift: f64) -> Result<LpSolution> {
        let mut t = Self::new(a, shift);
        let budget = PIVOTS_PER_DIM * (t.m + t.n);
        let mut pivots = 0;
        while let Some(col) = t.entering() {
            // The objective is bounded (every entry of the shifted matrix is
            // positive), so a pivot row always exists.
            let row = t
                .leaving(col)
                .expect("bounded LP always has a ratio-test row");
            t.pivot(row, col);
            pivots += 1;
            if pivots > budget {
                return Err(Error::SolverStall { budget });
            }
        }
        Ok(t.extract())
    }

    fn new(a: &PayoffMatrix, shift: f64) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let width = n + m + 1;
        let mut cells = vec![0.0; (m + 1) * width];
        for i in 0..m {
            let row = &mut cells[i * width..(i + 1) * width];
            for (j, cell) in row[..n].iter_mut().enumerate() {
                *cell = a.get(i, j) + shift;
            }
            row[n + i] = 1.0;
            row[width - 1] = 1.0;
        }
        let obj = &mut cells[m * width..];
        obj[..n].iter_mut().for_each(|c| *c = -1.0);
        Self {
            m,
            n,
            width,
            cells,
            basis: (n..n + m).collect(),
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * self.width + c]
    }

    /// Bland: lowest-index column with a negative reduced cost.
    fn entering(&self) -> Option<usize> {
        (0..self.n + self.m).find(|&c| self.at(self.m, c) < -PIVOT_EPS)
    }

    /// Minimum-ratio row; ties go to the row whose basic variable has the
    /// lowest index (Bland).
    fn leaving(&self, col: usize) -> Option<usize> {
        let rhs = self.width - 1;
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.m {
            let coef = self.at(r, col);
            if coef <= PIVOT_EPS {
                continue;
            }
            let ratio = self.at(r, rhs) / coef;
            best = match best {
                None => Some((r, ratio)),
                Some((br, bratio)) => {
                    let scale = 1.0 + bratio.abs();
                    let smaller = ratio < bratio - PIVOT_EPS * scale;
                    let tie = ratio <= bratio + PIVOT_EPS * scale && self.basis[r] < self.basis[br];
                    if smaller || tie {
                        Some((r, ratio))
                    } else {
                        Some((br, bratio))
                    }
                }
            };
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.at(row, col);
        for c in 0..w {
            self.cells[row * w + c] /= p;
        }
        self.cells[row * w + col] = 1.0;
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let factor = self.at(r, col);
            if factor == 0.0 {
                continue;
            }
            for c in 0..w {
                let v = self.cells[row * w + c];
                if v != 0.0 {
                    self.cells[r * w + c] -= factor * v;
                }
            }
            self.cells[r * w + col] = 0.0;
        }
        self.basis[row] = col;
    }

    fn extract(&self) -> LpSolution {
        let rhs = self.width - 1;
        let mut primal = vec![0.0; self.n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                primal[b] = self.at(r, rhs).max(0.0);
            }
        }
        let dual = (0..self.m)
            .map(|i| self.at(self.m, self.n + i).max(0.0))
            .collect();
        LpSolution {
            objective: self.at(self.m, rhs),
            primal,
            dual,
        }
    }
}
