use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hearvol_core::pipeline::{emit_table, Pipeline, PipelineConfig, Stage};
use hearvol_core::{Parallelism, Result};

#[derive(Parser)]
#[command(name = "hearvol", version, about = "Two-phase hearing-threshold pipeline on 3D volumes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run every stage single-threaded. Results are identical either way.
    #[arg(long)]
    serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// All stages, in order.
    Run(Common),
    /// Generate or load volumes, normalize and split.
    GenData(Common),
    /// Augmented copies of the training split.
    Augment(Common),
    /// Train the autoencoder.
    TrainPhase1(Common),
    /// Encode every volume into latent features.
    Encode(Common),
    /// Fit forest, boosted trees and MNN on the training features.
    TrainPhase2(Common),
    /// Score every model on the test split.
    Evaluate(Common),
    /// Render metrics.csv and the results table.
    Report(Common),
    /// Print a config with every default filled in.
    InitConfig {
        /// Number of synthetic phantoms.
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
}

fn pipeline(c: &Common) -> Result<Pipeline> {
    let p = Pipeline::load(&c.config, c.seed)?;
    if !c.serial {
        return Ok(p);
    }
    let mut config = p.config().clone();
    config.parallelism = Parallelism::Serial;
    Pipeline::new(config)
}

fn execute(cmd: Command) -> Result<()> {
    let (common, stage) = match cmd {
        Command::InitConfig { n, seed, output_dir } => {
            let c = PipelineConfig::synthetic(n, seed, output_dir);
            println!("{}", serde_json::to_string_pretty(&c)?);
            return Ok(());
        }
        Command::Run(c) => {
            let p = pipeline(&c)?;
            let report = p.run()?;
            print!("{}", emit_table(&report).0);
            println!(
                "mean baseline: PT500 {:.4} dB, PT4000 {:.4} dB; config {}",
                report.baseline.pt500_rmse, report.baseline.pt4000_rmse, report.config_hash
            );
            println!("outputs in {}", p.output_dir().display());
            return Ok(());
        }
        Command::GenData(c) => (c, Stage::GenData),
        Command::Augment(c) => (c, Stage::Augment),
        Command::TrainPhase1(c) => (c, Stage::TrainPhase1),
        Command::Encode(c) => (c, Stage::Encode),
        Command::TrainPhase2(c) => (c, Stage::TrainPhase2),
        Command::Evaluate(c) => (c, Stage::Evaluate),
        Command::Report(c) => (c, Stage::Report),
    };
    let p = pipeline(&common)?;
    p.run_stage(stage)?;
    if stage == Stage::Report {
        print!("{}", emit_table(&p.read_metrics()?).0);
    } else {
        println!("{stage} done ({})", p.output_dir().display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
