//! Brute-force matrix-game oracle, independent of the simplex solver.
//!
//! Each player's LP is solved by enumerating every vertex of its feasible
//! polyhedron: pick which inequality constraints are tight, solve the square
//! linear system by Gaussian elimination, keep the feasible solutions. The
//! row player's best vertex gives the lower value, the column player's the
//! upper value; the two must agree.

const FEAS: f64 = 1e-9;

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `max_x min_j (xᵀA)_j` over vertices. `a` is row-major `rows × cols`.
fn best_guarantee(a: &[Vec<f64>]) -> f64 {
    let (m, n) = (a.len(), a[0].len());
    // Unknowns: x_0..x_{m-1}, v. Inequalities: x_i >= 0 (i < m), (xᵀA)_j - v >= 0.
    let ineq = |k: usize| -> Vec<f64> {
        let mut row = vec![0.0; m + 1];
        if k < m {
            row[k] = 1.0;
        } else {
            for i in 0..m {
                row[i] = a[i][k - m];
            }
            row[m] = -1.0;
        }
        row
    };
    let mut best = f64::NEG_INFINITY;
    for tight in combinations(m + n, m) {
        let mut rows = vec![{
            let mut r = vec![1.0; m + 1];
            r[m] = 0.0;
            r
        }];
        let mut rhs = vec![1.0];
        for &k in &tight {
            rows.push(ineq(k));
            rhs.push(0.0);
        }
        let Some(sol) = solve_linear(rows, rhs) else {
            continue;
        };
        let feasible =
            (0..m + n).all(|k| ineq(k).iter().zip(&sol).map(|(c, s)| c * s).sum::<f64>() >= -FEAS);
        if feasible {
            best = best.max(sol[m]);
        }
    }
    best
}

fn neg_transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len())
        .map(|j| a.iter().map(|r| -r[j]).collect())
        .collect()
}

/// Lower and upper value of the game by vertex enumeration.
pub fn oracle_bounds(a: &[Vec<f64>]) -> (f64, f64) {
    let lower = best_guarantee(a);
    // Column player's problem is the row player's problem of -Aᵀ.
    let upper = -best_guarantee(&neg_transpose(a));
    (lower, upper)
}

/// Game value by brute force; panics if the two players' LPs disagree.
pub fn oracle_value(a: &[Vec<f64>]) -> f64 {
    let (lo, hi) = oracle_bounds(a);
    assert!(
        (lo - hi).abs() < 1e-9,
        "oracle routes disagree: {lo} vs {hi} for {a:?}"
    );
    0.5 * (lo + hi)
}

/// Closed form for 2×2 games without a pure saddle point.
pub fn two_by_two_mixed_value(a: [[f64; 2]; 2]) -> f64 {
    (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / (a[0][0] + a[1][1] - a[0][1] - a[1][0])
}
