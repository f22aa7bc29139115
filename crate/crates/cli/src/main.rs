use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use ellopt::runner::{
    default_out_root, exit_code, find_preset, run, ExperimentConfig, RunOutcome, OUT_DIR_ENV, PRESETS,
};
use ellopt::Error;

/// Optimal coefficients, potentials and sources for elliptic problems.
#[derive(Parser)]
#[command(name = "ellopt", version)]
struct Cli {
    /// Number of experiments to run concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Override the solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments described by TOML config files.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Output root; each experiment writes to `<out>/<name>`.
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// Run named presets (`all` runs every preset).
    Preset {
        #[arg(required = true)]
        names: Vec<String>,
        /// Grid spacing.
        #[arg(long)]
        h: Option<f64>,
        /// Output root; each preset writes to `<out>/<name>`.
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// List the available presets.
    ListPresets,
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_toml(&text)
}

fn report(label: &str, result: &Result<RunOutcome, Error>) -> i32 {
    match result {
        Ok(outcome) => {
            println!("== {} -> {}", outcome.name, outcome.dir.display());
            print!("{}", outcome.summary);
            if !outcome.converged {
                eprintln!("{label}: solver stopped without converging");
            }
            outcome.exit_code()
        }
        Err(err) => {
            eprintln!("{label}: error: {err}");
            exit_code(err)
        }
    }
}

fn run_all(jobs: usize, configs: Vec<(String, Result<ExperimentConfig, Error>)>, root: PathBuf) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool,
        Err(err) => {
            eprintln!("error: cannot start worker pool: {err}");
            return 4;
        }
    };
    let results: Vec<_> = pool.install(|| {
        configs
            .into_par_iter()
            .map(|(label, config)| {
                let result = config.and_then(|c| run(&c, &root));
                (label, result)
            })
            .collect()
    });
    results.iter().map(|(label, result)| report(label, result)).max().unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let with_tol = |mut c: ExperimentConfig| {
        if let Some(tol) = cli.tol {
            c.tol = tol;
        }
        c
    };
    let code = match cli.command {
        Command::ListPresets => {
            let width = PRESETS.iter().map(|p| p.name.len()).max().unwrap_or(0);
            for p in PRESETS {
                println!("{:width$}  {}", p.name, p.description);
            }
            0
        }
        Command::Run { configs, out } => {
            let configs = configs
                .iter()
                .map(|path| (path.display().to_string(), load_config(path).map(with_tol)))
                .collect();
            run_all(cli.jobs, configs, out.unwrap_or_else(default_out_root))
        }
        Command::Preset { names, h, out } => {
            let names: Vec<String> = if names.iter().any(|n| n == "all") {
                PRESETS.iter().map(|p| p.name.to_string()).collect()
            } else {
                names
            };
            let configs = names
                .into_iter()
                .map(|name| {
                    let config = find_preset(&name)
                        .map(|p| with_tol(p.config(h)))
                        .ok_or_else(|| Error::Parse(format!("unknown preset `{name}` (see list-presets)")));
                    (name, config)
                })
                .collect();
            run_all(cli.jobs, configs, out.unwrap_or_else(default_out_root))
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
