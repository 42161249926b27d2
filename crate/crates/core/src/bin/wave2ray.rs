use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wave2ray::cli_io::{run, Experiment, RunConfig};

/// Husimi-data inverse scattering experiments.
#[derive(Parser, Debug)]
#[command(
    version,
    about,
    override_usage = "wave2ray <EXPERIMENT> --config <PATH> [--out <DIR>] [--threads N] [--seed S]\n       wave2ray --print-defaults <EXPERIMENT>"
)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum, required_unless_present = "print_defaults")]
    experiment: Option<Experiment>,

    /// TOML configuration; missing keys take the experiment defaults.
    #[arg(long, required_unless_present = "print_defaults")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, env = "WAVE2RAY_OUT_DIR")]
    out: Option<PathBuf>,

    /// Worker threads for per-source parallelism.
    #[arg(long, env = "WAVE2RAY_THREADS")]
    threads: Option<usize>,

    /// Seed for data noise.
    #[arg(long)]
    seed: Option<u64>,

    /// Print the default configuration of an experiment and exit.
    #[arg(long, value_enum, value_name = "EXPERIMENT", conflicts_with_all = ["experiment", "config"])]
    print_defaults: Option<Experiment>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(e) = cli.print_defaults {
        print!("{}", RunConfig::defaults(e).to_toml());
        return ExitCode::SUCCESS;
    }
    let (Some(experiment), Some(path)) = (cli.experiment, cli.config) else {
        unreachable!("clap enforces experiment and config");
    };
    let mut cfg = match RunConfig::load(&path, experiment) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("wave2ray: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match run(&cfg) {
        Ok(summary) => {
            log::info!("{} finished in {:.1} s, {} files in {}", experiment.name(), summary.wall_time, summary.files.len(), cfg.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("wave2ray: {e}");
            ExitCode::FAILURE
        }
    }
}
