use thiserror::Error;

use crate::exact::IterationReport;
use crate::game::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("payoff matrix has a non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("simplex exceeded its pivot budget of {budget}")]
    SolverStall { budget: usize },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("relaxation out of range: w = {w} must lie in (0, {max}]")]
    RelaxationOutOfRange { w: f64, max: f64 },

    #[error(
        "no convergence after {} iterations (residual {:.3e})",
        .0.iterations,
        .0.final_residual
    )]
    NoConvergence(Box<IterationReport>),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("invalid game: {}", format_violations(.0))]
    InvalidGame(Vec<Violation>),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    let shown: Vec<String> = v.iter().take(5).map(|x| x.to_string()).collect();
    if v.len() > 5 {
        format!("{} (and {} more)", shown.join("; "), v.len() - 5)
    } else {
        shown.join("; ")
    }
}
