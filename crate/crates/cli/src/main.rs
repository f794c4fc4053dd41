use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qcwave_cli::config::ExperimentConfig;
use qcwave_cli::presets;
use qcwave_cli::runner::{run_experiment, RunError, RunOutcome};

#[derive(Parser)]
#[command(name = "qcwave", version, about = "Linear and classical wave mechanics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file or a preset name.
    Run {
        /// Path to a TOML config, or the name of a built-in preset.
        config: String,
        /// Output directory (defaults to the config's `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the trajectory and measurement seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every config matching a glob pattern, in parallel.
    Sweep {
        /// Glob over config files, e.g. `experiments/*.toml`.
        pattern: String,
    },
    /// Inspect the built-in scenario catalog.
    Presets {
        #[command(subcommand)]
        command: PresetsCommand,
    },
}

#[derive(Subcommand)]
enum PresetsCommand {
    /// List every preset with a one-line summary.
    List,
    /// Print a preset's full config as TOML.
    Show { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, seed } => cmd_run(&config, out.as_deref(), seed),
        Command::Sweep { pattern } => cmd_sweep(&pattern),
        Command::Presets { command } => cmd_presets(command),
    };
    ExitCode::from(code)
}

fn load_config(name_or_path: &str) -> Result<ExperimentConfig, RunError> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        return ExperimentConfig::from_path(path).map_err(RunError::Config);
    }
    if let Some(cfg) = presets::preset(name_or_path) {
        return Ok(cfg);
    }
    ExperimentConfig::from_path(path).map_err(RunError::Config)
}

fn report(outcome: &RunOutcome) {
    let mut line = format!(
        "{}: {} -> {}",
        outcome.manifest_path.display(),
        outcome.status.as_str(),
        outcome.out_dir.display()
    );
    if let Some(detail) = &outcome.detail {
        line.push_str(&format!(" ({detail})"));
    }
    println!("{line}");
}

fn cmd_run(config: &str, out: Option<&Path>, seed: Option<u64>) -> u8 {
    let cfg = match load_config(config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code() as u8;
        }
    };
    match run_experiment(&cfg, out, seed) {
        Ok(outcome) => {
            report(&outcome);
            outcome.status.exit_code() as u8
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code() as u8
        }
    }
}

fn cmd_sweep(pattern: &str) -> u8 {
    let mut paths: Vec<PathBuf> = match glob::glob(pattern) {
        Ok(iter) => iter.filter_map(Result::ok).filter(|p| p.is_file()).collect(),
        Err(e) => {
            eprintln!("bad glob pattern: {e}");
            return 2;
        }
    };
    paths.sort();
    if paths.is_empty() {
        eprintln!("no configs match {pattern}");
        return 2;
    }

    let results: Vec<(PathBuf, u8)> = std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|path| {
                scope.spawn(move || {
                    let cfg = match ExperimentConfig::from_path(path) {
                        Ok(cfg) => cfg,
                        Err(e) => {
                            eprintln!("{}: {e}", path.display());
                            return (path.clone(), 2u8);
                        }
                    };
                    // Isolate each config in its own directory so parallel
                    // runs never share files.
                    let out_dir = sweep_out_dir(path, &cfg);
                    match run_experiment(&cfg, Some(&out_dir), None) {
                        Ok(outcome) => {
                            report(&outcome);
                            (path.clone(), outcome.status.exit_code() as u8)
                        }
                        Err(e) => {
                            eprintln!("{}: {e}", path.display());
                            (path.clone(), e.exit_code() as u8)
                        }
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    results.iter().map(|(_, code)| *code).max().unwrap_or(0)
}

fn sweep_out_dir(path: &Path, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = &cfg.output.dir {
        return PathBuf::from(dir);
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string());
    path.with_file_name(format!("{stem}.out"))
}

fn cmd_presets(command: PresetsCommand) -> u8 {
    match command {
        PresetsCommand::List => {
            for name in presets::names() {
                println!("{name:<24} {}", presets::summary(name));
            }
            0
        }
        PresetsCommand::Show { name } => match presets::preset(&name) {
            Some(cfg) => {
                print!("{}", cfg.to_toml());
                0
            }
            None => {
                eprintln!(
                    "unknown preset {name}; available: {}",
                    presets::names().join(", ")
                );
                2
            }
        },
    }
}
