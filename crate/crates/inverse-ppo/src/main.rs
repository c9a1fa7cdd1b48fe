use clap::{Args, Parser, Subcommand, ValueEnum};
use inverse_ppo::harness::{
    cmd_ablate, cmd_eval, cmd_train, AblationMode, ExperimentConfig, HarnessError,
};
use inverse_ppo::mdp::{RewardWeights, TrackMode};
use inverse_ppo::trainer::{AdvantageMode, EntropyMode};
use std::path::PathBuf;
use std::process::ExitCode;

/// Inverse-PPO obstacle avoidance for fixed-wing UAVs in a 2D kinematic
/// world.
#[derive(Parser)]
#[command(name = "inverse-ppo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the depth autoencoder, then train the policy.
    Train(TrainArgs),
    /// Evaluate a checkpoint with greedy action selection.
    Eval(EvalArgs),
    /// Run a paired ablation study on one seed.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file(s); multiple scenarios round-robin per episode.
    #[arg(long, required = true)]
    scenario: Vec<PathBuf>,
    /// Master random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for CSVs, checkpoints, and plots.
    #[arg(long)]
    out: PathBuf,
    /// Training episode budget.
    #[arg(long)]
    episodes: Option<u64>,
    /// Transitions per policy update.
    #[arg(long)]
    batch: Option<usize>,
    /// Entropy bonus mode.
    #[arg(long, value_enum)]
    entropy_mode: Option<EntropyModeArg>,
    /// Coefficient for the fixed entropy mode.
    #[arg(long)]
    entropy_coeff: Option<f64>,
    /// Reward weights as `C1,C2,C3,C4`.
    #[arg(long)]
    reward_weights: Option<String>,
    /// Tracking-reward geometry.
    #[arg(long, value_enum)]
    track_mode: Option<TrackModeArg>,
    /// Parallel episode-collection workers; 1 is bit-exact deterministic.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Depth image size as `HxW` (default 16x32).
    #[arg(long)]
    depth_size: Option<String>,
    /// Episodes per evaluation run.
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Minibatch size within each update epoch.
    #[arg(long)]
    minibatch: Option<usize>,
    /// Optimizer learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Optimization epochs per collected batch.
    #[arg(long)]
    k_epochs: Option<usize>,
    /// Use generalized advantage estimation with this lambda instead of
    /// plain returns-minus-value.
    #[arg(long)]
    gae_lambda: Option<f64>,
    /// Start-pose jitter: yaw bound in radians.
    #[arg(long)]
    jitter_yaw: Option<f64>,
    /// Autoencoder pretraining optimizer steps.
    #[arg(long)]
    pretrain_steps: Option<usize>,
    /// Depth maps gathered for autoencoder pretraining.
    #[arg(long)]
    pretrain_maps: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Keep refining the encoder by reconstruction during RL.
    #[arg(long, default_value_t = false)]
    finetune_encoder: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which ablation to run.
    #[arg(long, value_enum)]
    mode: AblationModeArg,
}

#[derive(Copy, Clone, ValueEnum)]
enum EntropyModeArg {
    Adaptive,
    Fixed,
}

#[derive(Copy, Clone, ValueEnum)]
enum TrackModeArg {
    Literal,
    Heading,
}

#[derive(Copy, Clone, ValueEnum)]
enum AblationModeArg {
    Reward,
    Entropy,
}

fn apply_common(cfg: &mut ExperimentConfig, args: &CommonArgs) -> Result<(), HarnessError> {
    cfg.trainer.seed = args.seed;
    cfg.workers = args.workers.max(1);
    if let Some(episodes) = args.episodes {
        cfg.trainer.max_episodes = episodes;
    }
    if let Some(batch) = args.batch {
        if batch == 0 {
            return Err(HarnessError::Config("--batch must be at least 1".into()));
        }
        cfg.trainer.batch_size = batch;
        cfg.trainer.minibatch_size = cfg.trainer.minibatch_size.min(batch);
    }
    if let Some(mb) = args.minibatch {
        if mb == 0 {
            return Err(HarnessError::Config("--minibatch must be at least 1".into()));
        }
        cfg.trainer.minibatch_size = mb;
    }
    if let Some(lr) = args.lr {
        if !(lr > 0.0) {
            return Err(HarnessError::Config("--lr must be positive".into()));
        }
        cfg.trainer.learning_rate = lr;
    }
    if let Some(k) = args.k_epochs {
        if k == 0 {
            return Err(HarnessError::Config("--k-epochs must be at least 1".into()));
        }
        cfg.trainer.epochs = k;
    }
    if let Some(lambda) = args.gae_lambda {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(HarnessError::Config("--gae-lambda must lie in [0, 1]".into()));
        }
        cfg.trainer.advantage_mode = AdvantageMode::Gae { lambda };
    }
    if let Some(jy) = args.jitter_yaw {
        if !(0.0..=1.0).contains(&jy) {
            return Err(HarnessError::Config("--jitter-yaw must lie in [0, 1]".into()));
        }
        cfg.env.start_jitter.yaw = jy;
    }
    if let Some(steps) = args.pretrain_steps {
        cfg.pretrain.steps = steps;
    }
    if let Some(maps) = args.pretrain_maps {
        if maps == 0 {
            return Err(HarnessError::Config("--pretrain-maps must be at least 1".into()));
        }
        cfg.pretrain.maps = maps;
    }
    match (args.entropy_mode, args.entropy_coeff) {
        (Some(EntropyModeArg::Adaptive), None) => {
            cfg.trainer.entropy_mode = EntropyMode::Adaptive;
        }
        (Some(EntropyModeArg::Adaptive), Some(_)) => {
            return Err(HarnessError::Config(
                "--entropy-coeff only applies to --entropy-mode fixed".into(),
            ));
        }
        (Some(EntropyModeArg::Fixed), coeff) => {
            cfg.trainer.entropy_mode = EntropyMode::Fixed {
                coefficient: coeff.unwrap_or(0.01),
            };
        }
        (None, Some(_)) => {
            return Err(HarnessError::Config(
                "--entropy-coeff requires --entropy-mode fixed".into(),
            ));
        }
        (None, None) => {}
    }
    if let Some(spec) = &args.reward_weights {
        let parts: Vec<f64> = spec
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| {
                HarnessError::Config(format!(
                    "--reward-weights expects `C1,C2,C3,C4`, got `{spec}`"
                ))
            })?;
        if parts.len() != 4 {
            return Err(HarnessError::Config(format!(
                "--reward-weights expects 4 values, got {}",
                parts.len()
            )));
        }
        cfg.env.reward_weights = RewardWeights {
            c1: parts[0],
            c2: parts[1],
            c3: parts[2],
            c4: parts[3],
        };
    }
    if let Some(mode) = args.track_mode {
        cfg.env.track_mode = match mode {
            TrackModeArg::Literal => TrackMode::Literal,
            TrackModeArg::Heading => TrackMode::Heading,
        };
    }
    if let Some(size) = &args.depth_size {
        let (h, w) = size
            .split_once('x')
            .and_then(|(h, w)| {
                Some((h.trim().parse::<usize>().ok()?, w.trim().parse::<usize>().ok()?))
            })
            .ok_or_else(|| {
                HarnessError::Config(format!("--depth-size expects `HxW`, got `{size}`"))
            })?;
        if h < 4 || w < 4 {
            return Err(HarnessError::Config(
                "--depth-size must be at least 4x4 for the two-stage encoder".into(),
            ));
        }
        cfg.env.sensor.height = h;
        cfg.env.sensor.width = w;
    }
    if let Some(n) = args.eval_episodes {
        cfg.eval_episodes = n;
    }
    Ok(())
}

fn run() -> Result<(), HarnessError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let mut cfg =
                ExperimentConfig::new(args.common.scenario.clone(), args.common.out.clone());
            apply_common(&mut cfg, &args.common)?;
            cfg.finetune_encoder = args.finetune_encoder;
            let summary = cmd_train(&cfg)?;
            println!(
                "trained {} episodes; final-20 success rate {:.2}; checkpoint {}",
                summary.rows.len(),
                summary.tail_success_rate(20),
                summary.checkpoint_path.display()
            );
            Ok(())
        }
        Command::Eval(args) => {
            let mut cfg =
                ExperimentConfig::new(args.common.scenario.clone(), args.common.out.clone());
            apply_common(&mut cfg, &args.common)?;
            let summary = cmd_eval(&cfg, &args.checkpoint)?;
            println!(
                "evaluated {} episodes; success rate {:.3}; mean smoothness {:.4} rad; plots in {}",
                summary.rows.len(),
                summary.success_rate,
                summary.mean_smoothness,
                summary.svg_path.display()
            );
            Ok(())
        }
        Command::Ablate(args) => {
            let mut cfg =
                ExperimentConfig::new(args.common.scenario.clone(), args.common.out.clone());
            apply_common(&mut cfg, &args.common)?;
            let mode = match args.mode {
                AblationModeArg::Reward => AblationMode::Reward,
                AblationModeArg::Entropy => AblationMode::Entropy,
            };
            let summary = cmd_ablate(&cfg, mode)?;
            for (i, name) in summary.variants.iter().enumerate() {
                println!(
                    "{name}: final-100 mean return {:.3}, eval success {:.3}, eval smoothness {:.4}",
                    summary.final_returns[i], summary.eval_success[i], summary.eval_smoothness[i]
                );
            }
            println!("comparison written to {}", summary.comparison_path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
