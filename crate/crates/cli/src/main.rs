use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddrs_cli::{load_curves, load_scenario, run, run_replications, CliError, Kind, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "ddrs", version, about = "Deposit-return network simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario of any kind.
    Run(Common),
    /// Week-long smart-bin load balancing.
    Bins(Common),
    /// Throughput-optimal split of a deposit.
    Solve(Common),
    /// Throughput over every split of a deposit on a grid.
    Sweep(Common),
    /// Decentralised AIMD reward allocation.
    Aimd {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        aimd: AimdFlags,
    },
    /// Closed-loop cup-level simulation with deposit control.
    Ddrs(Common),
    /// Load and check a scenario, printing it with defaults filled in.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML, or JSON with a .json extension).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this many consecutive seeds concurrently.
    #[arg(long)]
    replications: Option<usize>,
    /// Deposit in pence (initial deposit for ddrs).
    #[arg(long)]
    deposit: Option<f64>,
    /// File with `curves = [{ p0 = .., x90 = .. }, ..]`.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args, Default)]
struct AimdFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, conflicts_with = "auto_gamma")]
    gamma: Option<f64>,
    #[arg(long)]
    auto_gamma: bool,
    /// Maximum number of steps.
    #[arg(long)]
    iters: Option<usize>,
}

fn execute(kind: Option<Kind>, common: Common, aimd: AimdFlags) -> Result<(), CliError> {
    let scenario = match (&common.scenario, kind) {
        (Some(path), _) => load_scenario(path)?,
        (None, Some(k)) => Scenario::defaults(k),
        (None, None) => return Err(CliError::invalid("--scenario", "required for `run`")),
    };
    if let Some(k) = kind {
        if scenario.kind != k {
            return Err(CliError::invalid(
                "kind",
                format!("scenario is '{}' but the command is '{k}'", scenario.kind),
            ));
        }
    }
    let overrides = Overrides {
        seed: common.seed,
        out: common.out,
        deposit: common.deposit,
        alpha: aimd.alpha,
        beta: aimd.beta,
        gamma: aimd.gamma,
        auto_gamma: aimd.auto_gamma,
        iters: aimd.iters,
        curves: common.curves.as_deref().map(load_curves).transpose()?,
    };
    let scenario = overrides.apply(scenario)?;
    match common.replications {
        Some(n) => {
            for r in run_replications(&scenario, n)? {
                println!("seed {}: {}", r.seed, r.line);
            }
        }
        None => println!("{}", run(&scenario)?.line),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => execute(None, c, AimdFlags::default()),
        Command::Bins(c) => execute(Some(Kind::Bins), c, AimdFlags::default()),
        Command::Solve(c) => execute(Some(Kind::Solve), c, AimdFlags::default()),
        Command::Sweep(c) => execute(Some(Kind::Sweep), c, AimdFlags::default()),
        Command::Aimd { common, aimd } => execute(Some(Kind::Aimd), common, aimd),
        Command::Ddrs(c) => execute(Some(Kind::Ddrs), c, AimdFlags::default()),
        Command::Validate { scenario } => load_scenario(&scenario).and_then(|s| {
            let text = toml::to_string_pretty(&s).map_err(CliError::runtime)?;
            print!("{text}");
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
