use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use log::{info, warn};

use lsmo::asd::{dedup, pareto_filter, run_asd, AsdOutcome, Candidate, CandidateSolver};
use lsmo::config::{LoadedConfig, Model, ProblemConfig, ProblemKind};
use lsmo::output::{
    ensure_dir, read_register, write_failures, write_levels, write_register, write_register_to, FAILURES_FILE,
    FRONTIER_FILE, LEVELS_FILE, REGISTER_FILE,
};
use lsmo::runner::FemSolver;
use lsmo::Error;

const OUTPUT_ENV: &str = "LSMO_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "lsmo", version, about = "Multi-objective level set topology optimization with adaptive weight refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the adaptive loop for a problem configuration.
    Run {
        config: PathBuf,
        /// Concurrent candidate runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a configuration and list the defaults it relies on.
    Validate { config: PathBuf },
    /// Deduplicate and Pareto-filter an existing register.
    Pareto {
        register: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Where to write the filtered rows; printed to stdout otherwise.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the adaptive loop on an analytic surrogate configuration.
    Surrogate {
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config { .. } | Error::Parse { .. }) => 2,
        _ => 1,
    }
}

fn load(path: &Path) -> anyhow::Result<LoadedConfig> {
    let loaded = ProblemConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config {
            key: "<file>".into(),
            message: format!("cannot read {}: {io}", path.display()),
        },
        other => other,
    })?;
    for key in &loaded.defaults_applied {
        warn!("{}: default applied for `{key}`", path.display());
    }
    Ok(loaded)
}

fn output_dir(config: &ProblemConfig) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
        return PathBuf::from(dir);
    }
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(config.problem.name()))
}

fn write_outcome(dir: &Path, outcome: &AsdOutcome) -> anyhow::Result<()> {
    write_register(&dir.join(REGISTER_FILE), &outcome.register)?;
    write_register(&dir.join(FRONTIER_FILE), &outcome.frontier)?;
    write_levels(&dir.join(LEVELS_FILE), &outcome.history)?;
    if !outcome.failures.is_empty() {
        write_failures(&dir.join(FAILURES_FILE), &outcome.failures)?;
    }
    Ok(())
}

fn summarize(outcome: &AsdOutcome, dir: &Path) {
    for l in &outcome.history {
        println!(
            "level {}: {} candidates, mean edge {:.5}, std {:.5}",
            l.level, l.candidates, l.mean, l.std
        );
    }
    println!(
        "{} candidates, {} failed, {} removed as duplicates, {} on the frontier",
        outcome.register.len(),
        outcome.failures.len(),
        outcome.dedup_removed,
        outcome.frontier.len()
    );
    println!("results in {}", dir.display());
}

fn run(path: &Path, jobs: usize, surrogate_only: bool) -> anyhow::Result<()> {
    let loaded = load(path)?;
    let config = &loaded.config;
    if surrogate_only && config.problem != ProblemKind::Surrogate {
        return Err(Error::Config {
            key: "problem".into(),
            message: format!("`surrogate` needs a surrogate configuration, got `{}`", config.problem.name()),
        }
        .into());
    }
    let dir = ensure_dir(&output_dir(config)).with_context(|| "cannot create output directory")?;
    let solver: Box<dyn CandidateSolver> = match config.model()? {
        Model::Fem(p) => Box::new(FemSolver::new(*p, config.run_config(), Some(dir.clone()))),
        Model::Surrogate(s) => Box::new(s),
    };
    std::fs::write(dir.join("config.toml"), config.to_toml()?)?;
    info!("{} with {} objectives, output in {}", config.problem.name(), solver.objective_count(), dir.display());
    let outcome = run_asd(
        solver.as_ref(),
        &config.asd.initial_weights,
        &config.asd_params(),
        jobs.max(1),
        |register, _| write_register(&dir.join(REGISTER_FILE), register),
    )?;
    write_outcome(&dir, &outcome)?;
    summarize(&outcome, &dir);
    Ok(())
}

fn validate(path: &Path) -> anyhow::Result<()> {
    let loaded = load(path)?;
    let c = &loaded.config;
    println!(
        "{}: problem `{}` with {} objectives and {} initial weights is valid",
        path.display(),
        c.problem.name(),
        c.objective_count(),
        c.asd.initial_weights.len()
    );
    for key in &loaded.defaults_applied {
        println!("  default applied: {key}");
    }
    Ok(())
}

fn pareto(register: &Path, tol: f64, output: Option<&Path>) -> anyhow::Result<()> {
    if !(tol >= 0.0) {
        anyhow::bail!(Error::Config { key: "--tol".into(), message: "must be non-negative".into() });
    }
    let rows = read_register(register)?;
    let objectives: Vec<Vec<f64>> = rows.iter().map(|c| c.objectives.clone()).collect();
    let kept = dedup(&objectives, tol);
    let survivors: Vec<Vec<f64>> = kept.iter().map(|&i| objectives[i].clone()).collect();
    let front: Vec<Candidate> = pareto_filter(&survivors).into_iter().map(|i| rows[kept[i]].clone()).collect();
    eprintln!(
        "{} rows, {} removed as duplicates, {} on the frontier",
        rows.len(),
        rows.len() - kept.len(),
        front.len()
    );
    match output {
        Some(p) => write_register(p, &front)?,
        None => write_register_to(std::io::stdout().lock(), &front)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, jobs } => run(config, *jobs, false),
        Command::Validate { config } => validate(config),
        Command::Pareto { register, tol, output } => pareto(register, *tol, output.as_deref()),
        Command::Surrogate { config, jobs } => run(config, *jobs, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
