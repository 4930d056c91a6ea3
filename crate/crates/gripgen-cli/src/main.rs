use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gripgen_cli::analyze::{cmd_analyze, cmd_report};
use gripgen_cli::config::RunConfig;
use gripgen_cli::error::CliResult;
use gripgen_cli::evaluate::{cmd_evaluate, cmd_optimize_grasp};
use gripgen_cli::generate::cmd_generate;
use gripgen_cli::run::cmd_optimize_hand;

/// Procedural hand co-design: generate, evaluate, optimize, explain.
#[derive(Parser)]
#[command(name = "gripgen", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble one design (from a file or a sampled seed) and export
    /// URDF + meshes.
    Generate {
        /// Seed for sampling a design from the builtin space.
        #[arg(long)]
        seed: Option<u64>,
        /// Path to a design-point JSON file.
        #[arg(long)]
        design: Option<PathBuf>,
        /// Output directory (default derived from seed or file name).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Palm pad grid resolution.
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
    /// Optimize grasps for an exported hand across a tool set and print
    /// per-tool best scores plus the hand score.
    Evaluate {
        /// Hand directory (needs design.json and hand.urdf).
        #[arg(long)]
        hand: PathBuf,
        /// Comma-separated builtin tool names.
        #[arg(long, value_delimiter = ',', default_values_t = ["hammer".to_string(), "spoon".to_string(), "knife".to_string()])]
        tools: Vec<String>,
        /// Grasp trials per tool.
        #[arg(long, default_value_t = 60)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// K best grasps per tool entering the hand score.
        #[arg(long = "k-best", default_value_t = 3)]
        k_best: usize,
    },
    /// Optimize grasps for one hand/tool pair and write a journal.
    OptimizeGrasp {
        /// Hand directory (needs design.json and hand.urdf).
        #[arg(long)]
        hand: PathBuf,
        /// Builtin tool name.
        #[arg(long)]
        tool: String,
        #[arg(long, default_value_t = 60)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (default <hand>/grasp_<tool>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run (or resume) the outer design-optimization loop.
    OptimizeHand {
        /// Run directory; created if absent, resumed if it holds a journal.
        #[arg(long)]
        out: PathBuf,
        /// Config JSON file (defaults applied for missing fields).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override: master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override: outer trial budget.
        #[arg(long)]
        budget: Option<usize>,
        /// Override: batch size.
        #[arg(long)]
        batch: Option<usize>,
        /// Override: comma-separated tool names.
        #[arg(long, value_delimiter = ',')]
        tools: Option<Vec<String>>,
        /// Override: K best grasps per tool.
        #[arg(long = "k-best")]
        k_best: Option<usize>,
        /// Override: pad resolution.
        #[arg(long)]
        resolution: Option<usize>,
        /// Dotted-path config overrides, e.g. --set closing.mu=0.7.
        #[arg(long = "set")]
        set: Vec<String>,
        /// Worker threads for evaluating a batch.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Fit the Random-Forest surrogate on a run's journal and write
    /// report/{shap.csv, importance.csv, shap_long.csv}.
    Analyze {
        /// Run directory.
        #[arg(long)]
        run: PathBuf,
    },
    /// Print a run summary and verify its bookkeeping invariants.
    Report {
        /// Run directory.
        #[arg(long)]
        run: PathBuf,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { seed, design, out, resolution } => {
            cmd_generate(seed, design.as_deref(), out.as_deref(), resolution)
        }
        Command::Evaluate { hand, tools, budget, seed, k_best } => {
            cmd_evaluate(&hand, &tools, budget, seed, k_best)
        }
        Command::OptimizeGrasp { hand, tool, budget, seed, out } => {
            cmd_optimize_grasp(&hand, &tool, budget, seed, out.as_deref())
        }
        Command::OptimizeHand {
            out,
            config,
            seed,
            budget,
            batch,
            tools,
            k_best,
            resolution,
            set,
            jobs,
        } => {
            let mut cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = budget {
                cfg.budget = v;
            }
            if let Some(v) = batch {
                cfg.batch = v;
            }
            if let Some(v) = tools {
                cfg.tools = v;
            }
            if let Some(v) = k_best {
                cfg.k_best = v;
            }
            if let Some(v) = resolution {
                cfg.resolution = v;
            }
            for s in &set {
                cfg.apply_set(s)?;
            }
            cmd_optimize_hand(&out, &cfg, jobs)
        }
        Command::Analyze { run } => cmd_analyze(&run),
        Command::Report { run } => cmd_report(&run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
