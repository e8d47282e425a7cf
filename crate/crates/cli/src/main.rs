use std::path::PathBuf;
use std::process::ExitCode;

use assp_cli::{
    advise_config, audit_config, compare_modes, load_config, run_experiment, CliError, Overrides,
};
use clap::{Args, Parser, Subcommand};

/// Output directory override, below `--out` and above the config.
const OUTPUT_DIR_ENV: &str = "ASSP_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "assp",
    version,
    about = "Asynchronous stochastic saddle-point experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed, write trace CSVs, the averaged series and a summary.
    Run(Common),
    /// Run synchronous and asynchronous variants and write an overlay.
    Compare(Common),
    /// Print the recommended step size and regularizer.
    Advise(Common),
    /// Print the estimated assumption constants.
    Audit(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Seed to run; repeat for several. Replaces `eval.seeds`.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum delay.
    #[arg(long)]
    tau: Option<usize>,
    /// Horizon.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Exit with code 4 when the invariant audit finds a violation.
    #[arg(long)]
    strict: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seeds: (!self.seeds.is_empty()).then(|| self.seeds.clone()),
            out: self
                .out
                .clone()
                .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from)),
            tau: self.tau,
            horizon: self.horizon,
        }
    }
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (Command::Run(c) | Command::Compare(c) | Command::Advise(c) | Command::Audit(c)) =
        &cli.command;
    let cfg = load_config(&c.config, &c.overrides())?;
    match &cli.command {
        Command::Run(_) => {
            let result = run_experiment(&cfg)?;
            let s = &result.summary;
            eprintln!(
                "wrote {} (F* = {}, final running suboptimality = {})",
                cfg.output.dir.display(),
                s.f_star,
                s.final_subopt_running
            );
            if c.strict && !s.audit.passed {
                return Err(CliError::AuditFailed(format!("{:?}", s.audit.counts)));
            }
        }
        Command::Compare(_) => {
            let result = compare_modes(&cfg)?;
            let s = &result.summary;
            eprintln!(
                "wrote {} (async/sync running suboptimality ratio = {})",
                cfg.output.dir.display(),
                s.subopt_ratio
            );
            if c.strict && !s.audit.passed {
                return Err(CliError::AuditFailed(format!("{:?}", s.audit.counts)));
            }
        }
        Command::Advise(_) => print_json(&advise_config(&cfg)?),
        Command::Audit(_) => print_json(&audit_config(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
