//! `zsg`: command-line front end for the zero-sum Markov game solvers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use zsg::experiment::{report_csv, report_table, sig6};
use zsg::{
    q_dagger, relaxed_value_iteration, run_experiment, run_learner, solve_exact, solve_matrix_game,
    w_star, Coupling, ExperimentConfig, IterationOptions, LearnerConfig, LearnerMode, MarkovGame,
    PayoffMatrix, ReportFormat, StepSchedule,
};

#[derive(Parser)]
#[command(
    name = "zsg",
    version,
    about = "Solve and learn two-player zero-sum Markov games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random game with positive self-loops.
    Generate(GenerateArgs),
    /// Solve a single matrix game read from a JSON array of rows.
    Matrix(MatrixArgs),
    /// Solve a game exactly and compare T against the relaxed T_w.
    Solve(SolveArgs),
    /// Run synchronous minimax Q-learning on a game.
    Learn(LearnArgs),
    /// Run the learner comparison described by a config file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    states: usize,
    /// Action counts of the two players, as `l,m`.
    #[arg(long, value_parser = parse_pair::<usize>)]
    actions: (usize, usize),
    #[arg(long)]
    alpha: f64,
    /// Lower bound on every self-loop probability.
    #[arg(long = "self-loop", default_value_t = 0.1)]
    self_loop: f64,
    /// Reward range as `lo,hi`.
    #[arg(long = "reward-range", value_parser = parse_pair::<f64>, default_value = "0,1")]
    reward_range: (f64, f64),
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long)]
    file: PathBuf,
    #[arg(long, default_value_t = zsg::DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    game: PathBuf,
    /// Relaxation factor: `auto` for w*, or a number in (0, w*].
    #[arg(long, default_value = "auto")]
    w: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 100_000)]
    max_iter: usize,
    /// Write J*, Q* and Q†_w as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    game: PathBuf,
    /// `standard`, `fixed:W` or `adaptive`.
    #[arg(long)]
    mode: String,
    #[arg(long)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `power:E`, `harmonic` or `constant:A`.
    #[arg(long, default_value = "power:0.6")]
    schedule: String,
    /// `shared` or `two-timescale:T`.
    #[arg(long, default_value = "shared")]
    coupling: String,
    /// Clamp iterates to [-B, B].
    #[arg(long)]
    projection: Option<f64>,
    /// Per-iteration CSV trace (n, w_n, error, q_norm).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Final Q-table as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV report path; overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the `--out` file: csv, table or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated values, got `{s}`"))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<T>()
            .map_err(|_| format!("bad value `{x}`"))
    };
    Ok((parse(a)?, parse(b)?))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_game(path: &Path) -> Result<MarkovGame> {
    MarkovGame::from_json(&read(path)?)
        .with_context(|| format!("invalid game file {}", path.display()))
}

fn fmt_strategy(w: &[f64]) -> String {
    let parts: Vec<String> = w.iter().map(|&x| sig6(x)).collect();
    format!("({})", parts.join(", "))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let game = zsg::generate_random_game(
        args.states,
        args.actions.0,
        args.actions.1,
        args.alpha,
        args.self_loop,
        args.reward_range,
        args.seed,
    )?;
    write(&args.out, &(game.to_json()? + "\n"))?;
    println!(
        "wrote {}: {} states, {}x{} actions, alpha = {}, w* = {}",
        args.out.display(),
        game.num_states(),
        game.num_actions_u(),
        game.num_actions_v(),
        sig6(game.discount()),
        sig6(w_star(&game).get())
    );
    Ok(())
}

fn matrix(args: MatrixArgs) -> Result<()> {
    let a: PayoffMatrix = serde_json::from_str(&read(&args.file)?).with_context(|| {
        format!(
            "{} is not a JSON array of equal-length rows",
            args.file.display()
        )
    })?;
    let s = solve_matrix_game(&a, args.tol)?;
    println!("value: {}", sig6(s.value));
    println!("row strategy: {}", fmt_strategy(s.row_strategy.weights()));
    println!(
        "column strategy: {}",
        fmt_strategy(s.col_strategy.weights())
    );
    println!("saddle residual: {:.3e}", s.residual);
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let w = match args.w.as_str() {
        "auto" => w_star(&game).get(),
        s => s
            .parse::<f64>()
            .with_context(|| format!("--w expects `auto` or a number, got `{s}`"))?,
    };
    let opts = IterationOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        init: None,
    };
    let exact = solve_exact(&game, &opts)?;
    let (_, relaxed) = relaxed_value_iteration(&game, w, &opts)?;
    let (qd, _) = q_dagger(&game, w, &opts)?;

    println!("J*:");
    for (i, v) in exact.j_star.0.iter().enumerate() {
        println!("  {i:>4}  {}", sig6(*v));
    }
    println!("w* = {}, w = {}", sig6(w_star(&game).get()), sig6(w));
    println!(
        "iterations to tol {:.1e}: T = {}, T_w = {}",
        args.tol, exact.report.iterations, relaxed.iterations
    );

    if let Some(out) = &args.out {
        let doc = serde_json::json!({
            "w": w,
            "iterations_t": exact.report.iterations,
            "iterations_t_w": relaxed.iterations,
            "j_star": exact.j_star,
            "q_star": exact.q_star,
            "q_dagger": qd,
        });
        write(out, &(zsg::json::to_string_pretty(&doc)? + "\n"))?;
    }
    Ok(())
}

fn parse_coupling(s: &str) -> Result<Coupling> {
    match s {
        "shared" => Ok(Coupling::SharedStep),
        _ => match s.strip_prefix("two-timescale:").map(str::parse::<usize>) {
            Some(Ok(period)) => Ok(Coupling::TwoTimescale { period }),
            _ => bail!("--coupling expects `shared` or `two-timescale:T`, got `{s}`"),
        },
    }
}

fn learn(args: LearnArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let mode: LearnerMode = args.mode.parse()?;
    let mut cfg = LearnerConfig::new(mode, args.iters, args.seed);
    cfg.schedule = args.schedule.parse::<StepSchedule>()?;
    cfg.coupling = parse_coupling(&args.coupling)?;
    cfg.projection_bound = args.projection;
    cfg.validate(&game)?;

    let exact = solve_exact(&game, &IterationOptions::default())?;
    let trace = run_learner(&game, &cfg, Some(&exact.j_star))?;

    if let Some(path) = &args.trace {
        write(path, &trace.to_csv())?;
    }
    if let Some(path) = &args.out {
        write(path, &(trace.final_q.to_json()? + "\n"))?;
    }
    let last = trace.rows.last().expect("trace has N + 1 rows");
    println!("mode {mode}, {} iterations, seed {}", args.iters, args.seed);
    println!("final w = {}", sig6(trace.final_w));
    println!(
        "sup-norm error of val[Q_N] vs J*: {}",
        sig6(last.error.unwrap_or(f64::NAN))
    );
    println!("{:>6}  {:>12}  {:>12}", "state", "J~", "J*");
    for (i, (a, b)) in trace.j_tilde.0.iter().zip(&exact.j_star.0).enumerate() {
        println!("{i:>6}  {:>12}  {:>12}", sig6(*a), sig6(*b));
    }
    Ok(())
}

/// Returns whether every episode completed.
fn experiment(args: ExperimentArgs) -> Result<bool> {
    let cfg = ExperimentConfig::from_json(&read(&args.config)?)
        .with_context(|| format!("invalid experiment config {}", args.config.display()))?;
    let format: ReportFormat = args.format.parse()?;
    let report = run_experiment(&cfg)?;

    let out = args.out.or_else(|| cfg.output.report.clone());
    if let Some(path) = out {
        let mut buf = Vec::new();
        zsg::emit_report(&report, format, &mut buf)?;
        fs::write(&path, buf).with_context(|| format!("cannot write {}", path.display()))?;
    } else if format == ReportFormat::Csv {
        print!("{}", report_csv(&report));
    }
    print!("{}", report_table(&report));
    for r in &report.algorithms {
        eprintln!(
            "{}: {:.2}s wall-clock",
            r.algorithm.key(),
            r.wall_clock_secs
        );
    }
    Ok(report.all_completed())
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("ZSG_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("ZSG_THREADS must be an integer, got `{raw}`"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Generate(a) => generate(a).map(|_| true),
        Command::Matrix(a) => matrix(a).map(|_| true),
        Command::Solve(a) => solve(a).map(|_| true),
        Command::Learn(a) => learn(a).map(|_| true),
        Command::Experiment(a) => experiment(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some episodes failed; see the report");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
