use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use worldllm::env::RenderStyle;
use worldllm::eval::TestSet;
use worldllm::orchestrator::{evaluate_run, export_plot_data, run, RunConfig, RunOptions};
use worldllm::par::Exec;

#[derive(Parser)]
#[command(name = "worldllm", version, about = "Hypothesis-guided world modelling in a text playground")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a run, or resume one.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Run directory to continue.
        #[arg(long, conflicts_with = "out")]
        resume: Option<PathBuf>,
        /// Run directory to create (default: runs/seed<SEED>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-evaluate a run's hypotheses on the test set.
    Eval {
        #[arg(long)]
        run: PathBuf,
        /// Render the test set in the alternative phrasing.
        #[arg(long)]
        generalization: bool,
    },
    /// Build the test set and write it as JSON lines.
    GenTestset {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Config supplying the scene and environment (defaults otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Export CSV series for plotting.
    PlotData {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Proposals per retention-rate window.
        #[arg(long, default_value_t = 25)]
        window: usize,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.command {
        Command::Run { config, seed, resume, out } => {
            let mut cfg = RunConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            cfg.seed = seed;
            let (dir, resume) = match resume {
                Some(dir) => (dir, true),
                None => (out.unwrap_or_else(|| PathBuf::from(format!("runs/seed{seed}"))), false),
            };
            let options = RunOptions { exec, resume, stop_after: None };
            let outcome = run(&cfg, &dir, &options)
                .with_context(|| format!("run in {} stopped; resume with --resume", dir.display()))?;
            println!(
                "{}: {} iterations completed\nfinal hypotheses:\n{}",
                outcome.run_dir.display(),
                outcome.completed,
                outcome.hypotheses.text
            );
        }
        Command::Eval { run, generalization } => {
            let style = if generalization {
                RenderStyle::Generalization
            } else {
                RenderStyle::Standard
            };
            let dir = evaluate_run(&run, style, exec)?;
            println!("reports written to {}", dir.display());
        }
        Command::GenTestset { seed, out, config } => {
            let cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            let ts = TestSet::build(seed, &cfg.env, &cfg.scene)?;
            if ts.records.is_empty() {
                bail!("empty test set");
            }
            ts.save_jsonl(&out)?;
            println!("{} records {:?} written to {}", ts.records.len(), ts.counts(), out.display());
        }
        Command::PlotData { run, out, window } => {
            export_plot_data(&run, &out, window)?;
            println!("plot data written to {}", out.display());
        }
    }
    Ok(())
}
