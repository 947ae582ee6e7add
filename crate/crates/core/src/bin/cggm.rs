use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use colored_ggm::commands::{
    cmd_eval, cmd_export_dot, cmd_fit, cmd_replicate, cmd_simulate, cmd_tune, exit_code, RunConfig, EXIT_INPUT,
};
use colored_ggm::simulate::Family;

/// Colored graphical Gaussian model estimation.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate data from a star, cycle or grid model.
    Simulate(Flags),
    /// Fit with fixed hyperparameters.
    Fit(Flags),
    /// Select hyperparameters by composite-likelihood BIC.
    Tune(Flags),
    /// Monte Carlo study: simulate, tune and evaluate repeatedly.
    Replicate(Flags),
    /// Score an estimate against a truth file.
    Eval(Flags),
    /// Render the coloring of an estimate or truth file as DOT.
    ExportDot(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML or JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of variables (grid side length for the grid family).
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Data CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Truth JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Estimate JSON.
    #[arg(long)]
    estimate: Option<PathBuf>,
}

impl Flags {
    fn config(self) -> colored_ggm::Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok(base.merge(RunConfig {
            family: self.family,
            p: self.p,
            n: self.n,
            seed: self.seed,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            tau: self.tau,
            reps: self.reps,
            threads: self.threads,
            out: self.out,
            data: self.data,
            truth: self.truth,
            estimate: self.estimate,
            ..RunConfig::default()
        }))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    let (run, flags): (fn(&RunConfig) -> colored_ggm::Result<_>, Flags) = match cli.command {
        Command::Simulate(f) => (cmd_simulate, f),
        Command::Fit(f) => (cmd_fit, f),
        Command::Tune(f) => (cmd_tune, f),
        Command::Replicate(f) => (cmd_replicate, f),
        Command::Eval(f) => (cmd_eval, f),
        Command::ExportDot(f) => (cmd_export_dot, f),
    };
    match flags.config().and_then(|config| run(&config)) {
        Ok(output) => {
            for path in &output.written {
                println!("{}", path.display());
            }
            ExitCode::from(output.code as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
