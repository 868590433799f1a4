//! `esrn` command-line driver.
//!
//! Exit codes: 0 success, 1 other failure, 2 config or parse error,
//! 3 evaluator error, 4 checkpoint error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use esrn::cost_model::{dense_baseline_cost, network_cost, CostError, CostReport, ResolutionSpec};
use esrn::evaluator::EvalError;
use esrn::evolution::{EvaluatorKind, MutationStrategy, ObjectiveMode, Search, SearchError};
use esrn::genome::Genome;
use esrn::persistence::{self, CheckpointError, ConfigLoadError, RunError};

#[derive(Parser)]
#[command(name = "esrn", version, about = "Credit-guided evolutionary search for super-resolution networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a search from a TOML manifest; flags override manifest values.
    Search(SearchArgs),
    /// Print the analytical cost of a genome as JSON.
    Cost(CostArgs),
    /// Continue a run from its checkpoint directory.
    Resume {
        dir: PathBuf,
        /// Stop once this generation is reached.
        #[arg(long)]
        stop_after: Option<u32>,
    },
    /// Export the Pareto ranking of a run's archive as CSV.
    Pareto { dir: PathBuf, out: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pareto,
    Constrained,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    Guided,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvaluatorArg {
    Surrogate,
    External,
}

#[derive(clap::Args)]
struct SearchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    max_params: Option<u64>,
    #[arg(long)]
    max_flops: Option<u64>,
    #[arg(long)]
    generations: Option<u32>,
    #[arg(long, value_enum)]
    mutation: Option<MutationArg>,
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorArg>,
    /// External evaluator command line, split on whitespace.
    #[arg(long)]
    evaluator_command: Option<String>,
    /// Run directory for the checkpoint, history and Pareto files.
    #[arg(long, default_value = "esrn-run")]
    out: PathBuf,
    /// Stop once this generation is reached, leaving a resumable checkpoint.
    #[arg(long)]
    stop_after: Option<u32>,
}

#[derive(clap::Args)]
struct CostArgs {
    /// Genome text encoding; omit with --table1-baseline.
    #[arg(required_unless_present = "table1_baseline")]
    genome: Option<String>,
    /// HR target as WIDTHxHEIGHT (default 1280x720).
    #[arg(long, value_parser = parse_hr)]
    hr: Option<(u32, u32)>,
    #[arg(long, default_value_t = 2)]
    scale: u32,
    /// Print the 4-block, 6-conv, 32-channel dense baseline instead.
    #[arg(long)]
    table1_baseline: bool,
}

fn parse_hr(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(w)?, parse(h)?))
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl ToString) -> Failure {
    Failure { code, message: message.to_string() }
}

impl From<ConfigLoadError> for Failure {
    fn from(e: ConfigLoadError) -> Self {
        fail(2, e)
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        fail(4, e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        fail(3, e)
    }
}

impl From<CostError> for Failure {
    fn from(e: CostError) -> Self {
        fail(2, e)
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        let code = match e {
            SearchError::Config(_) => 2,
            SearchError::Evaluator(_) | SearchError::InitialEvaluation { .. } => 3,
            _ => 1,
        };
        fail(code, e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Search(e) => e.into(),
            RunError::Checkpoint(e) => e.into(),
        }
    }
}

fn cmd_search(args: SearchArgs) -> Result<(), Failure> {
    let mut cfg = persistence::load_config(&args.config)?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.mode {
        cfg.mode = match v {
            ModeArg::Pareto => ObjectiveMode::Pareto,
            ModeArg::Constrained => ObjectiveMode::Constrained,
        };
    }
    if let Some(v) = args.mutation {
        cfg.mutation = match v {
            MutationArg::Guided => MutationStrategy::Guided,
            MutationArg::Random => MutationStrategy::Random,
        };
    }
    if let Some(v) = args.evaluator {
        cfg.evaluator = match v {
            EvaluatorArg::Surrogate => EvaluatorKind::Surrogate,
            EvaluatorArg::External => EvaluatorKind::External,
        };
    }
    cfg.max_params = args.max_params.or(cfg.max_params);
    cfg.max_flops = args.max_flops.or(cfg.max_flops);
    cfg.generations = args.generations.unwrap_or(cfg.generations);
    cfg.evaluator_command = args.evaluator_command.or(cfg.evaluator_command);
    persistence::apply_env_overrides(&mut cfg);
    cfg.validate().map_err(|e| fail(2, e))?;

    let mut backend = persistence::backend_for(&cfg)?;
    let mut search = Search::initialize(cfg, backend.as_mut())?;
    persistence::run_to_completion(&mut search, backend.as_mut(), &args.out, args.stop_after)?;
    report(&search, &args.out);
    Ok(())
}

fn cmd_resume(dir: &Path, stop_after: Option<u32>) -> Result<(), Failure> {
    let mut search = persistence::load_checkpoint(dir)?;
    if search.is_finished() {
        info!("run in {} already finished at generation {}", dir.display(), search.generation());
        return Ok(());
    }
    persistence::apply_env_overrides(&mut search.config);
    let mut backend = persistence::backend_for(&search.config)?;
    info!("resuming {} at generation {}", dir.display(), search.generation());
    persistence::run_to_completion(&mut search, backend.as_mut(), dir, stop_after)?;
    report(&search, dir);
    Ok(())
}

fn report(search: &Search, dir: &Path) {
    if let Some(last) = search.history.last() {
        println!(
            "generation {}: best {:.4} {}",
            last.gen, last.best, last.best_genome
        );
    }
    println!("run files in {}", dir.display());
}

fn cmd_pareto(dir: &Path, out: &Path) -> Result<(), Failure> {
    let search = persistence::load_checkpoint(dir)?;
    let rows = persistence::pareto_rows(&persistence::archive(&search));
    persistence::write_atomic(out, &persistence::pareto_csv(&rows))
        .map_err(|e| fail(1, format!("cannot write {}: {e}", out.display())))
}

#[derive(Serialize)]
struct BaselineJson {
    blocks: u32,
    layers: u32,
    growth: u32,
    hr: [u32; 2],
    scale: u32,
    #[serde(flatten)]
    cost: CostReport,
}

fn cmd_cost(args: CostArgs) -> Result<(), Failure> {
    let res = match args.hr {
        Some((w, h)) => ResolutionSpec::new(w, h, args.scale)?,
        None => ResolutionSpec::hd720(args.scale)?,
    };
    let json = if args.table1_baseline {
        warn!(
            "diagnostic only: the published dense baseline figures include a head and tail \
             whose widths are not specified; this uses the search network's head and tail"
        );
        let (blocks, layers, growth) = (4, 6, 32);
        let cost = dense_baseline_cost(blocks, layers, growth, &res)?;
        serde_json::to_string_pretty(&BaselineJson {
            blocks,
            layers,
            growth,
            hr: [res.hr_width, res.hr_height],
            scale: res.scale,
            cost,
        })
    } else {
        let text = args.genome.expect("clap enforces the genome argument");
        let genome = Genome::decode_text(&text, args.scale).map_err(|e| fail(2, e))?;
        let cost = network_cost(&genome, &res)?;
        serde_json::to_string_pretty(&cost.to_json(&res))
    };
    println!("{}", json.expect("cost reports serialize"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Search(args) => cmd_search(args),
        Command::Cost(args) => cmd_cost(args),
        Command::Resume { dir, stop_after } => cmd_resume(&dir, stop_after),
        Command::Pareto { dir, out } => cmd_pareto(&dir, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
