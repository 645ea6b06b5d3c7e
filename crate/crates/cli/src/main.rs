use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use vodsim_cli::{emit, preset, run_experiment, CliError, ExperimentConfig, Format};

#[derive(Parser)]
#[command(name = "vodsim", version, about = "Run video transcoding scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Base seed; replication i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per sweep point.
    #[arg(long)]
    replications: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write results.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Print or save a built-in experiment config.
    Preset {
        name: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Write the config here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            format,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            overrides.apply(&mut cfg);
            let experiment = run_experiment(&cfg)?;
            for path in emit(&experiment, format, &out_dir)? {
                println!("{}", path.display());
            }
        }
        Command::Preset { name, overrides, out } => {
            let mut cfg = preset(&name)?;
            overrides.apply(&mut cfg);
            let text = cfg.to_toml()?;
            match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|source| CliError::Write { path: path.clone(), source })
                    .with_context(|| format!("saving preset `{name}`"))?,
                None => print!("{text}"),
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let scenarios = cfg.validate()?;
            let names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
            println!(
                "{}: ok ({} scenarios: {}; {} points x {} replications)",
                config.display(),
                names.len(),
                names.join(", "),
                cfg.points()?.len(),
                cfg.replications
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(2, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}
