//! Command-line front end.

pub mod check;
pub mod config;
pub mod io;
pub mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::{eval_benchmark, known_optimum};
use crate::decomposition::sample_random_tree;
use crate::engine::{edges_for_dim, stream_rng, Stream};
use crate::error::{Error, Result};
use config::{parse_seeds, ExperimentFile};
use io::Manifest;

#[derive(Debug, Parser)]
#[command(name = "rducb", version, about = "Bayesian optimisation with random tree decompositions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every configuration of an experiment file for every seed.
    Run(RunArgs),
    /// Run one of the built-in property checks.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Print a random tree decomposition.
    SampleTree(SampleTreeArgs),
    /// Evaluate a synthetic benchmark at one point.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment file (TOML), or a manifest.json from an earlier run.
    pub config: PathBuf,
    /// Seeds to run, overriding the file: `1..5`, `7` or `1,4,9`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, env = "RDUCB_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; runs are distributed across them.
    #[arg(long, env = "RDUCB_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Sampling frequency of every edge against 2E/(d(d-1)).
    EdgeUniformity {
        #[arg(long, default_value_t = 6)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        edges: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Information gain of tree kernels against the full-pairwise kernel.
    Infogain {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Message-passing maxima against brute-force enumeration.
    MpExactness {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct SampleTreeArgs {
    #[arg(long)]
    pub d: usize,
    /// Edge count; defaults to max(⌊d/5⌋, 1).
    #[arg(long)]
    pub edges: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reproduce the tree a run with this master seed used at round `t`.
    #[arg(long)]
    pub round: Option<u64>,
    /// Print `1,2;3` on one line instead of one component per line.
    #[arg(long)]
    pub compact: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub benchmark: String,
    /// Comma-separated coordinates, e.g. `--x=-2.9,0.5`.
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    /// Also print the known optimum for this dimension.
    #[arg(long)]
    pub optimum: bool,
}

fn load_experiment_text(path: &Path) -> Result<String> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(Manifest::read(path)?.resolved_config)
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<bool> {
    let text = load_experiment_text(&args.config)?;
    let file = ExperimentFile::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let seeds = args.seeds.as_deref().map(parse_seeds).transpose()?;
    let experiment = file.resolve(seeds, args.output_dir.clone(), args.jobs)?;
    let manifest = run::execute(&experiment, Some(&args.config))?;
    for r in &manifest.runs {
        for s in &r.seeds {
            match (&s.error, s.final_best_regret, s.final_best_y) {
                (Some(e), _, _) => writeln!(out, "{} seed {}: FAILED at round {}: {e}", r.name, s.seed, s.failed_round.unwrap_or(0))?,
                (None, Some(reg), _) => writeln!(out, "{} seed {}: best regret {reg}", r.name, s.seed)?,
                (None, None, Some(y)) => writeln!(out, "{} seed {}: best value {y}", r.name, s.seed)?,
                _ => writeln!(out, "{} seed {}: ok", r.name, s.seed)?,
            }
        }
    }
    writeln!(out, "manifest: {}", experiment.output_dir.join("manifest.json").display())?;
    Ok(manifest.ok)
}

fn cmd_check(cmd: &CheckCommand, out: &mut dyn Write) -> Result<bool> {
    let report = match *cmd {
        CheckCommand::EdgeUniformity { d, edges, samples, seed } => check::edge_uniformity(d, edges, samples, seed)?,
        CheckCommand::Infogain { d, points, trials, seed } => check::infogain(d, points, trials, seed)?,
        CheckCommand::MpExactness { trials, seed } => check::mp_exactness(trials, seed)?,
    };
    writeln!(out, "{report}")?;
    Ok(report.passed)
}

fn cmd_sample_tree(args: &SampleTreeArgs, out: &mut dyn Write) -> Result<bool> {
    let e = args.edges.unwrap_or_else(|| edges_for_dim(args.d));
    let g = match args.round {
        Some(t) => sample_random_tree(args.d, e, &mut stream_rng(args.seed, Stream::Tree, t))?,
        None => sample_random_tree(args.d, e, &mut ChaCha8Rng::seed_from_u64(args.seed))?,
    };
    if args.compact {
        writeln!(out, "{g}")?;
    } else {
        write!(out, "{}", g.to_lines())?;
    }
    Ok(true)
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<bool> {
    let x: Vec<f64> = args
        .x
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad coordinate `{v}`"))))
        .collect::<Result<_>>()?;
    writeln!(out, "{:?}", eval_benchmark(&args.benchmark, &x)?)?;
    if args.optimum {
        writeln!(out, "optimum {:?}", known_optimum(&args.benchmark, x.len())?)?;
    }
    Ok(true)
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 1 when a run or check failed, 2 on usage or input errors.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Check(c) => cmd_check(c, out),
        Command::SampleTree(a) => cmd_sample_tree(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}
