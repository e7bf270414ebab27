//! Command-line harness: train single runs, run seeded suites, plot
//! aggregates, and replay trained policies.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use artx_core::env_ordeal::{Action, Environment, Layout, OrdealEnv};
use artx_core::harness::plot::emit_plots;
use artx_core::harness::{run_suite, run_training, ConfigError, HarnessError, RunConfig, Variant};
use artx_core::neural::{HiddenActivation, Mlp, OutputActivation};

#[derive(Parser)]
#[command(name = "artx", about = "Curiosity-driven RL with Fuzzy ART exploration bonuses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to a `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Override single keys, e.g. `--set ppo.lr=0.001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write metrics plus checkpoints.
    Train(ConfigArgs),
    /// Train every (variant, seed) pair and write the aggregate CSV.
    Suite {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated seeds, e.g. `--seeds 1,2,3`.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// Comma-separated variants from {art, art-hl, rnd, none}.
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<String>,
    },
    /// Render SVG charts from an aggregate CSV.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a trained policy and print an ASCII trajectory trace.
    Play {
        #[arg(long)]
        policy: PathBuf,
        /// Optional layout file; defaults to the bundled map.
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        max_steps: u32,
    },
}

fn parse_sets(sets: &[String]) -> Result<Vec<(String, String)>, ConfigError> {
    sets.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| ConfigError::Invalid(format!("--set expects KEY=VALUE, got `{s}`")))
        })
        .collect()
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig, ConfigError> {
    let overrides = parse_sets(&args.sets)?;
    RunConfig::load(&args.config, &overrides)
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => CliError::Config(c.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let cfg = load_config(&args)?;
            let summary = run_training(&cfg)?;
            println!(
                "best episode extrinsic {}; final-tenth mean extrinsic {:.4}, length {:.1}",
                summary.best_episode_extrinsic,
                summary.final_tenth_mean_extrinsic(),
                summary.final_tenth_mean_length()
            );
            println!("wrote {}", summary.metrics_path.display());
            println!("wrote {}", summary.policy_path.display());
            println!("wrote {}", summary.value_path.display());
            if let Some(p) = summary.art_snapshot_path {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Suite { config, seeds, variants } => {
            let cfg = load_config(&config)?;
            let variants: Vec<Variant> = variants
                .iter()
                .map(|v| {
                    Variant::parse(v).ok_or_else(|| {
                        CliError::Config(format!("unknown variant `{v}` (expected art, art-hl, rnd or none)"))
                    })
                })
                .collect::<Result<_, _>>()?;
            if seeds.is_empty() {
                return Err(CliError::Config("at least one seed is required".into()));
            }
            let summary = run_suite(&cfg, &seeds, &variants)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {}", summary.aggregate_path.display());
            Ok(())
        }
        Command::Plot { input, out } => {
            let written = emit_plots(&input, &out).map_err(|e| CliError::Runtime(e.to_string()))?;
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Play { policy, layout, max_steps } => {
            let mut net = Mlp::load(&policy, HiddenActivation::Tanh, OutputActivation::Softmax)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let layout = match layout {
                None => Layout::default_layout(),
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                    Layout::parse(&text).map_err(|e| CliError::Config(e.to_string()))?
                }
            };
            let mut env = OrdealEnv::new(layout);
            let mut result = env.reset(0);
            let mut total = 0.0;
            println!("step 0 ({})", env.state().room.name());
            print!("{}", env.render_ascii());
            for step in 1..=max_steps {
                let logits = net
                    .forward_logits(&result.obs.flatten())
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                let action_idx = logits
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                let action = Action::from_index(action_idx).expect("5-way policy");
                result = env.step(action).map_err(|e| CliError::Runtime(e.to_string()))?;
                total += result.extrinsic;
                println!(
                    "step {step} ({}) action {:?} reward {} total {}",
                    env.state().room.name(),
                    action,
                    result.extrinsic,
                    total
                );
                print!("{}", env.render_ascii());
                if result.done {
                    break;
                }
            }
            println!("episode over: score {total}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
