use clap::{Args, Parser, Subcommand, ValueEnum};
use qea_core::bao::FiniteBAO;
use qea_core::{Algebra, FiniteAlgebra};
use qea_core::experiment::{run_with_artifacts, ExperimentConfig};
use qea_core::terms::{check_equation, parse_equation, Strategy, DEFAULT_EXHAUSTIVE_CAP};
use serde_json::json;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qea", version, about = "Split algebras and representation checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured phases and write a JSON report.
    Run(RunArgs),
    /// Check an equation in a saved algebra.
    CheckEq(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the built algebras as JSON.
    #[arg(long)]
    artifacts: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Exhaustive,
    Sampled,
}

#[derive(Args)]
struct CheckArgs {
    /// A saved algebra (JSON tables, as written by `run --artifacts`).
    #[arg(long)]
    algebra: PathBuf,
    /// `lhs = rhs`, e.g. "c0(x0) = c0(c0(x0))".
    #[arg(long)]
    eq: String,
    #[arg(long, value_enum, default_value = "exhaustive")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    cap: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn emit(text: &str, to: Option<&Path>) -> Result<(), String> {
    match to {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.to_string()),
                _ => Ok(()),
            }
        }
    }
}

fn run(args: RunArgs) -> Result<bool, String> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?
        }
        (None, Some(name)) => ExperimentConfig::preset(name).map_err(|e| e.to_string())?,
        (None, None) => unreachable!("clap requires one"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let (report, artifacts) = run_with_artifacts(&cfg).map_err(|e| e.to_string())?;
    if let Some(dir) = &args.artifacts {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        for (name, alg) in &artifacts.algebras {
            let path = dir.join(format!("{name}.json"));
            let text = serde_json::to_string(alg).map_err(|e| e.to_string())?;
            fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
        }
    }
    let text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    emit(&text, args.report.as_deref())?;
    for p in report.phases.iter().filter(|p| !p.passed) {
        eprintln!("phase {:?} failed{}", p.phase, p.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default());
    }
    Ok(report.passed)
}

fn check(args: CheckArgs) -> Result<bool, String> {
    let text = fs::read_to_string(&args.algebra).map_err(|e| format!("{}: {e}", args.algebra.display()))?;
    let alg: FiniteBAO = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", args.algebra.display()))?;
    let (lhs, rhs) = parse_equation(&args.eq, alg.dimension(), alg.subst_bound()).map_err(|e| e.to_string())?;
    let strategy = match args.strategy {
        StrategyArg::Exhaustive => Strategy::Exhaustive,
        StrategyArg::Sampled => Strategy::Sampled {
            count: args.samples,
            seed: args.seed,
        },
    };
    let verdict = check_equation(&lhs, &rhs, &alg, strategy, args.cap).map_err(|e| e.to_string())?;
    let out = json!({
        "algebra": args.algebra.display().to_string(),
        "atoms": alg.atom_count(),
        "equation": format!("{lhs} = {rhs}"),
        "verdict": verdict,
    });
    emit(&serde_json::to_string_pretty(&out).map_err(|e| e.to_string())?, args.report.as_deref())?;
    Ok(verdict.holds())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::CheckEq(a) => check(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
