use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pharmonic_rkc::scenario::{describe, list_scenarios, run_scenario, RunKind, Scenario};

#[derive(Parser)]
#[command(name = "rkc", version, about = "Perturbed p-harmonic maps between conformal surfaces: solve, continue, certify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the energy for the scenario's boundary data.
    Solve(RunArgs),
    /// Continue from p = 2 along the boundary and exponent path.
    Homotopy(RunArgs),
    /// Solve and run the injectivity certificate.
    Certify(RunArgs),
    /// Compare perturbed minimizers with the eps = 0 reference.
    SweepEps(RunArgs),
    /// Geodesic checks for the target metric.
    Geodesics(RunArgs),
    /// Print the bundled scenario names.
    List,
    /// Print the resolved configuration of a bundled scenario.
    Describe { name: String },
}

#[derive(Args)]
struct RunArgs {
    /// Bundled scenario name (alternative to --config).
    scenario: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Artifacts go to <out>/<scenario name>/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(kind: RunKind, args: RunArgs) -> pharmonic_rkc::Result<bool> {
    let mut s = match (&args.config, &args.scenario) {
        (Some(path), None) => Scenario::load(path)?,
        (None, Some(name)) => Scenario::bundled(name)?,
        _ => return Err(pharmonic_rkc::Error::Config("give exactly one of a scenario name or --config".into())),
    };
    s.run = kind;
    if let Some(n) = args.grid_n {
        s.grid.n = n;
    }
    if let Some(j) = args.jobs {
        s.sweep.jobs = j;
    }
    let out = run_scenario(&s)?;
    let dir = args.out.join(&s.name);
    out.write(&dir)?;
    eprintln!("{} -> {} ({})", s.name, dir.display(), if out.success { "pass" } else { "FAIL" });
    Ok(out.success)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            for name in list_scenarios() {
                println!("{name}");
            }
            Ok(true)
        }
        Command::Describe { name } => describe(&name).map(|text| {
            print!("{text}");
            true
        }),
        Command::Solve(a) => run(RunKind::Solve, a),
        Command::Homotopy(a) => run(RunKind::Homotopy, a),
        Command::Certify(a) => run(RunKind::Certify, a),
        Command::SweepEps(a) => run(RunKind::Sweep, a),
        Command::Geodesics(a) => run(RunKind::Geodesics, a),
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
