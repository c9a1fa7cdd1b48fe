//! Experiment drivers behind the command-line interface: training with
//! autoencoder pretraining and periodic checkpoints, greedy-policy
//! evaluation with trajectory artifacts, and the two ablation studies.
//!
//! Artifact layout under the output directory:
//!
//! - `training.csv` — one row per training episode (schema below);
//! - `final.ckpt` / `checkpoint_ep*.ckpt` / `abort.ckpt` — checkpoints;
//! - `eval.csv`, `traj_ep*.csv`, `trajectories.svg` — evaluation outputs;
//! - `ablate_reward.csv` / `ablate_entropy.csv` (+ `_curves.csv`) —
//!   ablation comparisons, one column per trained configuration.

pub mod svg;

use crate::mdp::RewardWeights;
use crate::nn::{
    autoencoder_train_step, load_checkpoint, save_checkpoint, Adam, ArchConfig, CheckpointError,
    NetworkParameters,
};
use crate::rollout::{
    collect_batch, episode_rng, run_episode, ActionSelection, Env, EnvConfig, RolloutError,
};
use crate::trainer::{prepare_buffer, update, EntropyMode, LossReport, TrainError, TrainerConfig};
use crate::world::{load_scenario, DepthMap, ScenarioSpec, WorldError};
use rand::Rng;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const TRAINING_CSV_HEADER: &str =
    "episode,steps,return,success,smoothness,L_clip,L_vf,L_ent,L_inverse,entropy_coeff,ms_ratio,grad_norm";
pub const EVAL_CSV_HEADER: &str = "episode,steps,return,success,smoothness";
pub const TRAJECTORY_CSV_HEADER: &str =
    "step,substep,x,y,yaw,action,r_target,r_collision,r_dis,r_track,r_total";

const PRETRAIN_SALT: u64 = 0x9ae7_4a19_0000_0007;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Configuration problems: unreadable scenarios, bad overrides,
    /// mismatched checkpoints. CLI exit code 2.
    #[error("{0}")]
    Config(String),
    /// Runtime aborts: I/O failures mid-run, non-finite losses. CLI exit
    /// code 3.
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}

impl From<WorldError> for HarnessError {
    fn from(e: WorldError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<CheckpointError> for HarnessError {
    fn from(e: CheckpointError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(format!("I/O error: {e}"))
    }
}

impl From<RolloutError> for HarnessError {
    fn from(e: RolloutError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

impl From<TrainError> for HarnessError {
    fn from(e: TrainError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

/// Autoencoder pretraining budget.
#[derive(Copy, Clone, Debug)]
pub struct PretrainConfig {
    /// Depth maps gathered from random-policy rollouts.
    pub maps: usize,
    /// Reconstruction optimizer steps.
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            maps: 384,
            steps: 200,
            batch: 32,
            learning_rate: 1e-3,
        }
    }
}

/// Everything one experiment needs.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub scenario_paths: Vec<PathBuf>,
    pub trainer: TrainerConfig,
    pub env: EnvConfig,
    pub out_dir: PathBuf,
    pub eval_episodes: usize,
    pub workers: usize,
    /// Save a checkpoint whenever this many episodes have completed.
    pub checkpoint_every: u64,
    pub pretrain: PretrainConfig,
    /// Keep refining the encoder by reconstruction during RL training.
    pub finetune_encoder: bool,
}

impl ExperimentConfig {
    pub fn new(scenario_paths: Vec<PathBuf>, out_dir: PathBuf) -> Self {
        ExperimentConfig {
            scenario_paths,
            trainer: TrainerConfig::default(),
            env: EnvConfig::default(),
            out_dir,
            eval_episodes: 100,
            workers: 1,
            checkpoint_every: 1000,
            pretrain: PretrainConfig::default(),
            finetune_encoder: false,
        }
    }

    fn arch(&self) -> ArchConfig {
        ArchConfig::for_depth(self.env.sensor.height, self.env.sensor.width)
    }

    fn load_scenarios(&self) -> Result<Vec<ScenarioSpec>, HarnessError> {
        if self.scenario_paths.is_empty() {
            return Err(HarnessError::Config("no scenario given".into()));
        }
        self.scenario_paths
            .iter()
            .map(|p| {
                let text = fs::read_to_string(p).map_err(|e| {
                    HarnessError::Config(format!("cannot read scenario {}: {e}", p.display()))
                })?;
                load_scenario(&text)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))
            })
            .collect()
    }
}

/// One training-CSV row.
#[derive(Clone, Debug)]
pub struct EpisodeRow {
    pub episode: u64,
    pub steps: usize,
    pub ret: f64,
    pub success: bool,
    pub smoothness: f64,
    pub report: LossReport,
}

impl EpisodeRow {
    fn to_csv(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.steps,
            self.ret,
            self.success as u8,
            self.smoothness,
            r.l_clip,
            r.l_vf,
            r.l_ent,
            r.l_inverse,
            r.entropy_coeff,
            r.ms_ratio,
            r.grad_norm
        )
    }
}

/// Completed training run.
#[derive(Debug)]
pub struct TrainSummary {
    pub rows: Vec<EpisodeRow>,
    pub params: NetworkParameters,
    pub csv_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub pretrain_final_loss: f64,
}

impl TrainSummary {
    /// Success rate over the last `n` episodes.
    pub fn tail_success_rate(&self, n: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|r| r.success).count() as f64 / tail.len() as f64
    }

    /// Mean undiscounted return over the last `n` episodes.
    pub fn tail_mean_return(&self, n: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|r| r.ret).sum::<f64>() / tail.len() as f64
    }
}

/// Gather depth maps by flying random actions, then pretrain the
/// autoencoder by reconstruction. Returns the final loss.
fn pretrain_autoencoder(
    specs: &[ScenarioSpec],
    cfg: &ExperimentConfig,
    params: &mut NetworkParameters,
) -> Result<f64, HarnessError> {
    let mut maps: Vec<DepthMap> = Vec::with_capacity(cfg.pretrain.maps);
    let mut episode_index = 0u64;
    while maps.len() < cfg.pretrain.maps {
        let spec = &specs[(episode_index % specs.len() as u64) as usize];
        let mut rng = episode_rng(cfg.trainer.seed ^ PRETRAIN_SALT, episode_index);
        let mut env = Env::new(spec, &cfg.env);
        env.reset(&mut rng);
        loop {
            let (depth, _) = env.observe()?;
            maps.push(depth);
            if maps.len() >= cfg.pretrain.maps {
                break;
            }
            let action = rng.gen_range(0..crate::mdp::ACTION_COUNT);
            let outcome = env.step(action)?;
            if outcome.done {
                break;
            }
        }
        episode_index += 1;
    }

    let mut opt = Adam::for_selected(params, cfg.pretrain.learning_rate, |n| {
        n.starts_with("enc.") || n.starts_with("dec.")
    });
    let mut rng = episode_rng(cfg.trainer.seed ^ PRETRAIN_SALT, u64::MAX);
    let mut loss = f64::NAN;
    for _ in 0..cfg.pretrain.steps {
        let batch: Vec<&DepthMap> = (0..cfg.pretrain.batch)
            .map(|_| &maps[rng.gen_range(0..maps.len())])
            .collect();
        loss = autoencoder_train_step(params, &mut opt, &batch)
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    }
    Ok(loss)
}

/// The full training pipeline: pretraining, the collect/update loop,
/// incremental CSV rows, periodic and final checkpoints.
pub fn run_training(cfg: &ExperimentConfig) -> Result<TrainSummary, HarnessError> {
    cfg.trainer.validate().map_err(HarnessError::Config)?;
    let specs = cfg.load_scenarios()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("training.csv");
    let mut csv = fs::File::create(&csv_path)?;
    writeln!(csv, "{TRAINING_CSV_HEADER}")?;

    let mut params = NetworkParameters::init(cfg.arch(), cfg.trainer.seed);
    let pretrain_final_loss = pretrain_autoencoder(&specs, cfg, &mut params)?;

    let mut optimizer = Adam::for_selected(&params, cfg.trainer.learning_rate, |n| {
        n.starts_with("pi.") || n.starts_with("vf.")
    });
    let mut finetune_opt = cfg.finetune_encoder.then(|| {
        Adam::for_selected(&params, cfg.pretrain.learning_rate, |n| {
            n.starts_with("enc.") || n.starts_with("dec.")
        })
    });

    let mut rows: Vec<EpisodeRow> = Vec::new();
    let mut episodes_done = 0u64;
    let mut next_checkpoint = cfg.checkpoint_every;

    let abort = |csv: &mut fs::File,
                 params: &NetworkParameters,
                 cfg: &ExperimentConfig,
                 err: TrainError|
     -> HarnessError {
        let _ = csv.flush();
        let _ = save_checkpoint(params, &cfg.out_dir.join("abort.ckpt"));
        HarnessError::Runtime(err.to_string())
    };

    while episodes_done < cfg.trainer.max_episodes {
        let mut buffer = collect_batch(
            &specs,
            &cfg.env,
            &params,
            cfg.trainer.batch_size,
            cfg.trainer.seed,
            episodes_done,
            cfg.workers,
            cfg.finetune_encoder,
        )?;
        prepare_buffer(&mut buffer, &cfg.trainer);
        let reports = match update(&buffer, &mut params, &mut optimizer, &cfg.trainer, None) {
            Ok(reports) => reports,
            Err(e) => return Err(abort(&mut csv, &params, cfg, e)),
        };
        let last_report = *reports.last().expect("at least one epoch");

        if let Some(ae_opt) = finetune_opt.as_mut() {
            let depth_refs: Vec<&DepthMap> = buffer.depths.iter().collect();
            for chunk in depth_refs.chunks(cfg.pretrain.batch.max(1)).take(4) {
                autoencoder_train_step(&mut params, ae_opt, chunk)
                    .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            }
        }

        for i in 0..buffer.episode_count {
            let (start, end) = buffer.episode_bounds[i];
            let row = EpisodeRow {
                episode: episodes_done + i as u64,
                steps: buffer.episode_steps[i],
                ret: buffer.episode_returns[i],
                success: buffer.transitions[end - 1].success_episode && end > start,
                smoothness: buffer.episode_smoothness[i],
                report: last_report,
            };
            writeln!(csv, "{}", row.to_csv())?;
            rows.push(row);
        }
        episodes_done += buffer.episode_count as u64;
        csv.flush()?;

        if episodes_done >= next_checkpoint && episodes_done < cfg.trainer.max_episodes {
            save_checkpoint(
                &params,
                &cfg.out_dir.join(format!("checkpoint_ep{episodes_done}.ckpt")),
            )
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            next_checkpoint += cfg.checkpoint_every;
        }
    }

    let checkpoint_path = cfg.out_dir.join("final.ckpt");
    save_checkpoint(&params, &checkpoint_path)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    csv.flush()?;

    Ok(TrainSummary {
        rows,
        params,
        csv_path,
        checkpoint_path,
        pretrain_final_loss,
    })
}

/// `train` command.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainSummary, HarnessError> {
    run_training(cfg)
}

/// One evaluated episode.
#[derive(Clone, Debug)]
pub struct EvalRow {
    pub episode: u64,
    pub steps: usize,
    pub ret: f64,
    pub success: bool,
    pub smoothness: f64,
}

#[derive(Debug)]
pub struct EvalSummary {
    pub rows: Vec<EvalRow>,
    pub success_rate: f64,
    pub mean_smoothness: f64,
    pub mean_return: f64,
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
}

const EVAL_SALT: u64 = 0xE7A1_0000_0000_0001;

/// Evaluate a parameter set: greedy action selection over
/// `cfg.eval_episodes` jittered episodes; writes the eval CSV, per-episode
/// trajectory dumps, and the SVG plot.
pub fn evaluate_params(
    cfg: &ExperimentConfig,
    params: &NetworkParameters,
) -> Result<EvalSummary, HarnessError> {
    let specs = cfg.load_scenarios()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("eval.csv");
    let mut csv = fs::File::create(&csv_path)?;
    writeln!(csv, "{EVAL_CSV_HEADER}")?;

    let mut rows = Vec::with_capacity(cfg.eval_episodes);
    let mut paths: Vec<svg::EpisodePath> = Vec::with_capacity(cfg.eval_episodes);

    for i in 0..cfg.eval_episodes as u64 {
        let spec = &specs[(i % specs.len() as u64) as usize];
        let mut env = Env::new(spec, &cfg.env);
        let mut rng = episode_rng(cfg.trainer.seed ^ EVAL_SALT, i);
        let record = run_episode(&mut env, params, &mut rng, ActionSelection::Greedy, false)?;

        let mut traj = String::new();
        writeln!(&mut traj, "{TRAJECTORY_CSV_HEADER}").unwrap();
        let mut points = vec![record.start];
        for (step, d) in record.decisions.iter().enumerate() {
            for (substep, (p, yaw)) in d.sub_path.iter().zip(&d.sub_yaw).enumerate() {
                writeln!(
                    &mut traj,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    step + 1,
                    substep + 1,
                    p.x,
                    p.y,
                    yaw,
                    d.action,
                    d.reward.r_target,
                    d.reward.r_collision,
                    d.reward.r_dis,
                    d.reward.r_track,
                    d.reward.r_total
                )
                .unwrap();
            }
            points.extend(d.sub_path.iter().copied());
        }
        fs::write(cfg.out_dir.join(format!("traj_ep{i:03}.csv")), traj)?;

        let row = EvalRow {
            episode: i,
            steps: record.steps,
            ret: record.total_reward,
            success: record.success,
            smoothness: record.smoothness,
        };
        writeln!(
            csv,
            "{},{},{},{},{}",
            row.episode, row.steps, row.ret, row.success as u8, row.smoothness
        )?;
        paths.push(svg::EpisodePath {
            points,
            success: record.success,
        });
        rows.push(row);
    }
    csv.flush()?;

    let svg_path = cfg.out_dir.join("trajectories.svg");
    fs::write(&svg_path, svg::trajectories_svg(&specs[0], &paths))?;

    let n = rows.len().max(1) as f64;
    Ok(EvalSummary {
        success_rate: rows.iter().filter(|r| r.success).count() as f64 / n,
        mean_smoothness: rows.iter().map(|r| r.smoothness).sum::<f64>() / n,
        mean_return: rows.iter().map(|r| r.ret).sum::<f64>() / n,
        rows,
        csv_path,
        svg_path,
    })
}

/// `eval` command: load a checkpoint and evaluate it. The checkpoint file
/// is never written to.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<EvalSummary, HarnessError> {
    let params = load_checkpoint(checkpoint)?;
    let expected = cfg.arch();
    if params.arch() != &expected {
        return Err(HarnessError::Config(format!(
            "checkpoint/scenario mismatch: checkpoint encodes {}x{} depth input, configuration expects {}x{}",
            params.arch().depth_height,
            params.arch().depth_width,
            expected.depth_height,
            expected.depth_width
        )));
    }
    evaluate_params(cfg, &params)
}

/// Which ablation study to run.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum AblationMode {
    Reward,
    Entropy,
}

#[derive(Debug)]
pub struct AblateSummary {
    pub comparison_path: PathBuf,
    /// Column labels, in CSV order.
    pub variants: Vec<String>,
    /// Final-100-episode mean training return per variant.
    pub final_returns: Vec<f64>,
    /// Greedy-eval mean smoothness per variant (reward mode).
    pub eval_smoothness: Vec<f64>,
    /// Greedy-eval success rate per variant.
    pub eval_success: Vec<f64>,
}

/// `ablate` command: paired training runs on identical seeds.
pub fn cmd_ablate(cfg: &ExperimentConfig, mode: AblationMode) -> Result<AblateSummary, HarnessError> {
    fs::create_dir_all(&cfg.out_dir)?;
    match mode {
        AblationMode::Reward => {
            let variants = [
                ("distance_only", RewardWeights::distance_only()),
                ("full_reward", RewardWeights::default()),
            ];
            let mut summaries = Vec::new();
            for (name, weights) in &variants {
                let mut sub = cfg.clone();
                sub.env.reward_weights = *weights;
                sub.out_dir = cfg.out_dir.join(format!("reward_{name}"));
                let train = run_training(&sub)?;
                let eval = evaluate_params(&sub, &train.params)?;
                summaries.push((name.to_string(), train, eval));
            }

            let comparison_path = cfg.out_dir.join("ablate_reward.csv");
            let mut out = String::new();
            writeln!(&mut out, "metric,distance_only,full_reward").unwrap();
            writeln!(
                &mut out,
                "eval_mean_smoothness,{},{}",
                summaries[0].2.mean_smoothness, summaries[1].2.mean_smoothness
            )
            .unwrap();
            writeln!(
                &mut out,
                "eval_success_rate,{},{}",
                summaries[0].2.success_rate, summaries[1].2.success_rate
            )
            .unwrap();
            writeln!(
                &mut out,
                "train_final100_mean_return,{},{}",
                summaries[0].1.tail_mean_return(100),
                summaries[1].1.tail_mean_return(100)
            )
            .unwrap();
            fs::write(&comparison_path, out)?;

            Ok(AblateSummary {
                comparison_path,
                variants: summaries.iter().map(|(n, _, _)| n.clone()).collect(),
                final_returns: summaries.iter().map(|(_, t, _)| t.tail_mean_return(100)).collect(),
                eval_smoothness: summaries.iter().map(|(_, _, e)| e.mean_smoothness).collect(),
                eval_success: summaries.iter().map(|(_, _, e)| e.success_rate).collect(),
            })
        }
        AblationMode::Entropy => {
            let variants = [
                ("fixed_0.01", EntropyMode::Fixed { coefficient: 0.01 }),
                ("fixed_0.001", EntropyMode::Fixed { coefficient: 0.001 }),
                ("adaptive", EntropyMode::Adaptive),
            ];
            let mut summaries = Vec::new();
            for (name, mode) in &variants {
                let mut sub = cfg.clone();
                sub.trainer.entropy_mode = *mode;
                sub.out_dir = cfg.out_dir.join(format!("entropy_{name}"));
                let train = run_training(&sub)?;
                let eval = evaluate_params(&sub, &train.params)?;
                summaries.push((name.to_string(), train, eval));
            }

            // Per-episode reward curves side by side.
            let curves_path = cfg.out_dir.join("ablate_entropy_curves.csv");
            let min_len = summaries.iter().map(|(_, t, _)| t.rows.len()).min().unwrap();
            let mut curves = String::new();
            writeln!(&mut curves, "episode,fixed_0.01,fixed_0.001,adaptive").unwrap();
            for i in 0..min_len {
                writeln!(
                    &mut curves,
                    "{},{},{},{}",
                    i, summaries[0].1.rows[i].ret, summaries[1].1.rows[i].ret, summaries[2].1.rows[i].ret
                )
                .unwrap();
            }
            fs::write(&curves_path, curves)?;

            let comparison_path = cfg.out_dir.join("ablate_entropy.csv");
            let mut out = String::new();
            writeln!(&mut out, "metric,fixed_0.01,fixed_0.001,adaptive").unwrap();
            writeln!(
                &mut out,
                "train_final100_mean_return,{},{},{}",
                summaries[0].1.tail_mean_return(100),
                summaries[1].1.tail_mean_return(100),
                summaries[2].1.tail_mean_return(100)
            )
            .unwrap();
            writeln!(
                &mut out,
                "eval_success_rate,{},{},{}",
                summaries[0].2.success_rate, summaries[1].2.success_rate, summaries[2].2.success_rate
            )
            .unwrap();
            fs::write(&comparison_path, out)?;

            Ok(AblateSummary {
                comparison_path,
                variants: summaries.iter().map(|(n, _, _)| n.clone()).collect(),
                final_returns: summaries.iter().map(|(_, t, _)| t.tail_mean_return(100)).collect(),
                eval_smoothness: summaries.iter().map(|(_, _, e)| e.mean_smoothness).collect(),
                eval_success: summaries.iter().map(|(_, _, e)| e.success_rate).collect(),
            })
        }
    }
}
