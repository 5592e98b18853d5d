use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parksim::figures;
use parksim::output::write_results;
use parksim::scenario::{run_points, Scenario};

const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "parksim", version, about = "Parking sensor network MAC simulator")]
struct Cli {
    /// Base seed; overrides the scenario value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Independent batches per sweep point; overrides the scenario value.
    #[arg(long, global = true)]
    batches: Option<u32>,
    /// Output directory [env: PARKSIM_OUT_DIR, default: results].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for batches.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run { scenario: PathBuf },
    /// Run the scenarios behind a catalogued figure.
    Reproduce { figure: String },
    /// List figure identifiers.
    ListFigures,
}

struct Failure {
    code: u8,
    message: String,
}

fn invalid(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.to_string(),
    }
}

fn runtime(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.to_string(),
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| std::env::var_os("PARKSIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn execute(cli: &Cli, scenario: &Scenario, dir: &Path) -> Result<(), Failure> {
    let seed = cli.seed.unwrap_or(scenario.seed);
    let batches = cli.batches.unwrap_or(scenario.batches);
    if batches == 0 {
        return Err(invalid("--batches must be >= 1"));
    }
    let prepared = scenario.prepare().map_err(invalid)?;
    eprintln!(
        "{}: {} point(s) x {} batch(es), seed {}",
        if scenario.name.is_empty() { "scenario" } else { &scenario.name },
        prepared.len(),
        batches,
        seed
    );
    let results = run_points(scenario, &prepared, seed, batches, cli.parallel).map_err(runtime)?;
    let written = write_results(dir, scenario, seed, batches, &results).map_err(runtime)?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main_inner(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::ListFigures => {
            print!("{}", figures::catalog_text());
            Ok(())
        }
        Command::Run { scenario } => {
            let s = Scenario::load(scenario).map_err(invalid)?;
            execute(cli, &s, &out_dir(cli))
        }
        Command::Reproduce { figure } => {
            let Some(fig) = figures::find(figure) else {
                return Err(invalid(format!(
                    "unknown figure `{figure}`; available figures:\n{}",
                    figures::catalog_text()
                )));
            };
            let root = out_dir(cli).join(fig.id);
            for s in fig.scenarios() {
                let dir = root.join(&s.name);
                std::fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
                std::fs::write(dir.join("scenario.toml"), s.to_toml())
                    .map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
                execute(cli, &s, &dir)?;
            }
            let spec = serde_json::to_string_pretty(fig).expect("figure serializes") + "\n";
            let path = root.join("figure.json");
            std::fs::write(&path, spec).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
