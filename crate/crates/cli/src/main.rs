mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stefan_core::config::{parse_config, RunConfig};

#[derive(Parser)]
#[command(
    name = "stefan",
    version,
    about = "Lattice laboratory for the regularized nonlocal two-phase Stefan problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named problem preset (melt1d, twophase1d, logbdy, constant1d).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory; overrides `output` from the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Seed for sampled audits; overrides `seed` from the configuration.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the problem and write a trajectory directory.
    Solve(Common),
    /// Oscillation ladders and log-modulus fits at the configured anchors.
    AnalyzeModulus {
        #[command(flatten)]
        common: Common,
        /// Analyze a trajectory directory written by `solve` instead of solving.
        #[arg(long, value_name = "DIR")]
        from: Option<PathBuf>,
    },
    /// Solve for every ε of the schedule and compare the family.
    Continuation(Common),
    /// Brute-force checks of the iteration lemmas.
    LemmaCheck(Common),
    /// Maximum principle, comparison, normalization, energy and density audits.
    Verify(Common),
    /// Tail values at the configured anchors and radii.
    Tail(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve(c)
            | Command::Continuation(c)
            | Command::LemmaCheck(c)
            | Command::Verify(c)
            | Command::Tail(c)
            | Command::AnalyzeModulus { common: c, .. } => c,
        }
    }
}

fn load_config(common: &Common) -> commands::CliResult<RunConfig> {
    let mut config = match (&common.config, &common.preset) {
        (Some(path), _) => parse_config(&std::fs::read_to_string(path)?)?,
        (None, Some(name)) => {
            stefan_core::config::preset(name)?;
            RunConfig::for_preset(name)
        }
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output = Some(out.display().to_string());
    }
    Ok(config)
}

fn run(cli: &Cli) -> commands::CliResult<serde_json::Value> {
    let common = cli.command.common();
    let config = load_config(common)?;
    let out = PathBuf::from(config.output.clone().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&out)?;
    match &cli.command {
        Command::Solve(_) => commands::run_solve(&config, &out),
        Command::AnalyzeModulus { from, .. } => commands::analyze_modulus(&config, &out, from.as_deref()),
        Command::Continuation(_) => commands::continuation(&config, &out),
        Command::LemmaCheck(_) => commands::lemma_check(&config, &out),
        Command::Verify(_) => commands::verify(&config, &out),
        Command::Tail(_) => commands::tail(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match cli.command.common().threads {
        Some(0) => {
            eprintln!(
                "{}",
                json!({"kind": "invalid-params", "message": "--threads must be at least 1"})
            );
            return ExitCode::from(2);
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{}", json!({"kind": "threads", "message": e.to_string()}));
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
