use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use espkit::commands::{cmd_detect, cmd_evolve, cmd_fit, parse_window};
use espkit::error::{CliError, CliResult, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
use espkit::io::{read_file, to_json};
use espkit::repro::{cmd_repro, Target, DEFAULT_TOL_REL};
use espkit::load_config;
use espkit_core::analysis::{Parity, DEFAULT_CLASSIFY_WINDOW, DEFAULT_THRESHOLD};

#[derive(Parser)]
#[command(name = "espkit", version, about = "Spin-star entanglement trajectories and transition detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a trajectory from a JSON run configuration.
    Evolve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config value, e.g. `--set model.j=[1,0.5,1]`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        gnuplot_script: bool,
    },
    /// Regenerate a table or figure and compare it with the closed forms.
    Repro {
        target: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL_REL)]
        tol_rel: f64,
        #[arg(long)]
        gnuplot_script: bool,
    },
    /// Detect transitions in a stored trajectory CSV.
    Detect {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        min_duration: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_CLASSIFY_WINDOW)]
        window: f64,
    },
    /// Fit the short-time expansion of the minimum partial-transpose eigenvalue.
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "1e-3:1e-2")]
        window: String,
        #[arg(long, default_value = "even")]
        parity: String,
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
}

fn load(config: Option<&PathBuf>, overrides: &[String]) -> CliResult<espkit::RunConfig> {
    let text = match config {
        Some(p) => Some(
            String::from_utf8(read_file(p)?)
                .map_err(|_| CliError::Usage(format!("{}: not valid UTF-8", p.display())))?,
        ),
        None => None,
    };
    load_config(text.as_deref(), overrides)
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Evolve {
            config,
            overrides,
            out,
            gnuplot_script,
        } => {
            let mut cfg = load(config.as_ref(), &overrides)?;
            cfg.output.gnuplot_script |= gnuplot_script;
            let result = cmd_evolve(&cfg, &out)?;
            println!("{}", result.trajectory_path.display());
            println!("{}", result.manifest_path.display());
            Ok(EXIT_OK)
        }
        Command::Repro {
            target,
            out,
            tol_rel,
            gnuplot_script,
        } => {
            let target: Target = target.parse()?;
            let report = cmd_repro(target, &out, tol_rel, gnuplot_script)?;
            for c in &report.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if report.pass { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Detect {
            traj,
            threshold,
            min_duration,
            window,
        } => {
            let report = cmd_detect(&traj, threshold, min_duration, window)?;
            print!("{}", to_json(&report));
            Ok(EXIT_OK)
        }
        Command::Fit {
            config,
            window,
            parity,
            overrides,
        } => {
            let cfg = load(config.as_ref(), &overrides)?;
            let window = parse_window(&window)?;
            let parity: Parity = parity
                .parse()
                .map_err(|e: espkit_core::Error| CliError::Usage(e.to_string()))?;
            let report = cmd_fit(&cfg, window, parity)?;
            print!("{}", to_json(&report));
            Ok(if report.pass { EXIT_OK } else { EXIT_VALIDATION })
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
