//! Integration tests for the experiment drivers: CSV artifacts, checkpoint
//! handling, determinism, and the ablation layouts.

use inverse_ppo::harness::{
    cmd_ablate, cmd_eval, cmd_train, AblationMode, ExperimentConfig, HarnessError, PretrainConfig,
    EVAL_CSV_HEADER, TRAINING_CSV_HEADER,
};
use inverse_ppo::nn::{save_checkpoint, ArchConfig, NetworkParameters};
use inverse_ppo::trainer::AdvantageMode;
use std::fs;
use std::path::PathBuf;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

/// A tiny-budget config for fast integration runs.
fn tiny_config(out: PathBuf, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(vec![scenario_path("open_field.txt")], out);
    cfg.trainer.seed = seed;
    cfg.trainer.max_episodes = 6;
    cfg.trainer.batch_size = 16;
    cfg.trainer.minibatch_size = 8;
    cfg.pretrain = PretrainConfig {
        maps: 24,
        steps: 4,
        batch: 8,
        learning_rate: 1e-3,
    };
    cfg.eval_episodes = 8;
    cfg
}

#[test]
fn one_episode_budget_writes_one_row_and_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().to_path_buf(), 0);
    cfg.trainer.max_episodes = 1;
    cfg.trainer.batch_size = 1;
    cfg.trainer.minibatch_size = 1;

    let summary = cmd_train(&cfg).unwrap();
    assert_eq!(summary.rows.len(), 1);

    let csv = fs::read_to_string(&summary.csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TRAINING_CSV_HEADER);
    assert_eq!(lines.len(), 2);
    assert!(summary.checkpoint_path.exists());

    // Rows parse back losslessly.
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), TRAINING_CSV_HEADER.split(',').count());
    let ret: f64 = fields[2].parse().unwrap();
    assert_eq!(ret, summary.rows[0].ret);
    let episode: u64 = fields[0].parse().unwrap();
    assert_eq!(episode, 0);
}

#[test]
fn same_seed_training_is_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = cmd_train(&tiny_config(dir_a.path().to_path_buf(), 42)).unwrap();
    let b = cmd_train(&tiny_config(dir_b.path().to_path_buf(), 42)).unwrap();

    assert_eq!(
        fs::read(&a.csv_path).unwrap(),
        fs::read(&b.csv_path).unwrap()
    );
    assert_eq!(
        fs::read(&a.checkpoint_path).unwrap(),
        fs::read(&b.checkpoint_path).unwrap()
    );

    // A different seed diverges.
    let dir_c = tempfile::tempdir().unwrap();
    let c = cmd_train(&tiny_config(dir_c.path().to_path_buf(), 43)).unwrap();
    assert_ne!(
        fs::read(&a.csv_path).unwrap(),
        fs::read(&c.csv_path).unwrap()
    );
}

#[test]
fn eval_writes_artifacts_and_never_mutates_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path().join("run"), 7);
    let train = cmd_train(&cfg).unwrap();
    let ckpt_before = fs::read(&train.checkpoint_path).unwrap();

    let mut eval_cfg = cfg.clone();
    eval_cfg.out_dir = dir.path().join("eval");
    let eval = cmd_eval(&eval_cfg, &train.checkpoint_path).unwrap();

    assert_eq!(fs::read(&train.checkpoint_path).unwrap(), ckpt_before);
    assert_eq!(eval.rows.len(), 8);

    // Success-rate arithmetic equals a recount from the raw CSV.
    let csv = fs::read_to_string(&eval.csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], EVAL_CSV_HEADER);
    let successes = lines[1..]
        .iter()
        .filter(|l| l.split(',').nth(3).unwrap() == "1")
        .count();
    assert_eq!(eval.success_rate, successes as f64 / 8.0);

    // One polyline per episode in the SVG, plus trajectory dumps.
    let svg = fs::read_to_string(&eval.svg_path).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 8);
    for i in 0..8 {
        assert!(eval_cfg.out_dir.join(format!("traj_ep{i:03}.csv")).exists());
    }
}

#[test]
fn eval_rejects_mismatched_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    // Checkpoint trained for a different depth-map size.
    let params = NetworkParameters::init(ArchConfig::for_depth(8, 8), 0);
    let ckpt = dir.path().join("other.ckpt");
    save_checkpoint(&params, &ckpt).unwrap();

    let cfg = tiny_config(dir.path().join("eval"), 0);
    match cmd_eval(&cfg, &ckpt) {
        Err(HarnessError::Config(msg)) => assert!(msg.contains("mismatch")),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn eval_rejects_corrupted_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path().join("run"), 3);
    let train = cmd_train(&cfg).unwrap();
    let mut bytes = fs::read(&train.checkpoint_path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, bytes).unwrap();

    let mut eval_cfg = cfg.clone();
    eval_cfg.out_dir = dir.path().join("eval");
    match cmd_eval(&eval_cfg, &bad) {
        Err(HarnessError::Config(msg)) => assert!(msg.to_lowercase().contains("crc")),
        other => panic!("expected CRC config error, got {other:?}"),
    }
}

#[test]
fn missing_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().to_path_buf(), 0);
    cfg.scenario_paths = vec![PathBuf::from("/nonexistent/nowhere.txt")];
    match cmd_train(&cfg) {
        Err(HarnessError::Config(_)) => {}
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn reward_ablation_has_two_config_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().to_path_buf(), 5);
    cfg.trainer.max_episodes = 4;
    cfg.eval_episodes = 4;
    let summary = cmd_ablate(&cfg, AblationMode::Reward).unwrap();
    assert_eq!(summary.variants, vec!["distance_only", "full_reward"]);

    let csv = fs::read_to_string(&summary.comparison_path).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "metric,distance_only,full_reward");
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').count(), 3);
    }
}

#[test]
fn entropy_ablation_has_three_config_columns_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().to_path_buf(), 6);
    cfg.trainer.max_episodes = 4;
    cfg.eval_episodes = 4;
    let summary = cmd_ablate(&cfg, AblationMode::Entropy).unwrap();
    assert_eq!(summary.variants, vec!["fixed_0.01", "fixed_0.001", "adaptive"]);

    let csv = fs::read_to_string(&summary.comparison_path).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "metric,fixed_0.01,fixed_0.001,adaptive");
    for line in csv.lines().skip(1) {
        assert_eq!(line.split(',').count(), 4);
    }

    let curves = fs::read_to_string(summary.comparison_path.with_file_name("ablate_entropy_curves.csv")).unwrap();
    assert_eq!(curves.lines().next().unwrap(), "episode,fixed_0.01,fixed_0.001,adaptive");
    assert!(curves.lines().count() > 1);
}

#[test]
fn parallel_workers_complete_with_whole_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().to_path_buf(), 8);
    cfg.workers = 3;
    let summary = cmd_train(&cfg).unwrap();
    assert!(summary.rows.len() as u64 >= cfg.trainer.max_episodes);
    // Episode indices are contiguous from zero.
    for (i, row) in summary.rows.iter().enumerate() {
        assert_eq!(row.episode, i as u64);
    }
}

#[test]
fn multi_scenario_training_round_robins() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().to_path_buf(), 9);
    cfg.scenario_paths = vec![
        scenario_path("open_field.txt"),
        scenario_path("corridor5.txt"),
    ];
    cfg.trainer.max_episodes = 4;
    let summary = cmd_train(&cfg).unwrap();
    assert!(summary.rows.len() >= 4);
}

#[test]
fn gae_mode_trains_too() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().to_path_buf(), 10);
    cfg.trainer.advantage_mode = AdvantageMode::Gae { lambda: 0.9 };
    let summary = cmd_train(&cfg).unwrap();
    assert!(!summary.rows.is_empty());
    assert!(summary.pretrain_final_loss.is_finite());
}

#[test]
fn non_finite_loss_aborts_preserving_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().to_path_buf(), 11);
    // A catastrophic learning rate blows the parameters up after the first
    // minibatch step; the next minibatch sees a non-finite loss.
    cfg.trainer.learning_rate = 1e160;
    cfg.trainer.max_episodes = 12;
    match cmd_train(&cfg) {
        Err(HarnessError::Runtime(msg)) => {
            assert!(msg.contains("non-finite"), "message: {msg}");
            assert!(cfg.out_dir.join("abort.ckpt").exists());
            assert!(cfg.out_dir.join("training.csv").exists());
        }
        other => panic!("expected runtime abort, got {other:?}"),
    }
}

#[test]
fn random_policy_baseline_on_corridor_is_weak() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path().to_path_buf(), 0);
    cfg.scenario_paths = vec![scenario_path("corridor5.txt")];
    cfg.eval_episodes = 40;
    let params = NetworkParameters::init(
        ArchConfig::for_depth(cfg.env.sensor.height, cfg.env.sensor.width),
        999,
    );
    let eval = inverse_ppo::harness::evaluate_params(&cfg, &params).unwrap();
    assert!(
        eval.success_rate <= 0.2,
        "random policy unexpectedly strong: {}",
        eval.success_rate
    );
}
