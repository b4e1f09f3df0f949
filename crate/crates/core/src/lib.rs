//! Solvers for finite two-player zero-sum Markov games.
//!
//! The crate covers the exact side (matrix-game values by linear programming,
//! the min-max Bellman operators and their successively relaxed variants) and
//! the sample-based side (synchronous minimax Q-learning with a fixed or an
//! adaptively estimated relaxation factor), plus an experiment harness that
//! compares the learners on seeded random games.
//!
//! With the default `parallel` feature, per-state matrix-game solves inside an
//! operator sweep and independent experiment episodes run on the rayon pool.
//! Without it every loop runs sequentially; results are identical either way.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exact;
pub mod experiment;
pub mod game;
pub mod json;
pub mod learn;
pub mod matrix_game;
mod par;

pub use error::{Error, Result};
pub use exact::{
    apply_h, apply_h_w, apply_t, apply_t_w, contraction_probe, q_dagger, q_from_values,
    relaxed_value_iteration, solve_exact, state_values, ExactSolution, IterationOptions,
    IterationReport, OperatorChoice, QTable, ValueFunction,
};
pub use experiment::{
    emit_report, run_experiment, Algorithm, ErrorNorm, ExperimentConfig, ExperimentReport,
    ReportFormat,
};
pub use game::{
    generate_random_game, transform_game, w_star, GameSpec, MarkovGame, RelaxationParam, Violation,
};
pub use learn::{
    extract_policies, learner_step, run_learner, sample_transitions, update_w, Coupling,
    LearnerConfig, LearnerMode, RunTrace, ScheduleKind, StepSchedule, TraceRow, TransitionCounter,
};
pub use matrix_game::{
    solve_matrix_game, val, MatrixGameSolution, MixedStrategy, PayoffMatrix, DEFAULT_TOL,
};
