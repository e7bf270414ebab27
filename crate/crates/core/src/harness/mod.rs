//! Training harness: wires env -> encoder -> curiosity -> PPO, logs metrics,
//! writes checkpoints, and runs seeded multi-variant suites.

pub mod config;
pub mod metrics;
pub mod plot;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::curiosity::{ArtBonus, BonusProvider, CuriosityError, RndBonus};
use crate::encoder::{Encoder, EncoderError};
use crate::env_ordeal::{Action, Environment, EnvError, Layout, OrdealEnv};
use crate::fuzzy_art::{ArtError, ArtModel, ArtParams};
use crate::neural::{AdamState, HiddenActivation, Mlp, NetError, OutputActivation};
use crate::obs::OBS_LEN;
use crate::ppo::{act, ppo_update, PpoError, RolloutBuffer, Transition};
use crate::rng::{stream_rng, Stream};

pub use config::{ConfigError, CuriosityKind, RunConfig};
pub use metrics::{read_metrics_csv, MetricsError, MetricsRow, CSV_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Art(#[from] ArtError),
    #[error(transparent)]
    Curiosity(#[from] CuriosityError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("I/O error for {path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Sizes used for the policy/value networks and the RND pair.
const HIDDEN: usize = 64;
const RND_HIDDEN: usize = 64;
const RND_OUT: usize = 32;
const N_ACTIONS: usize = 5;

/// What a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<MetricsRow>,
    pub metrics_path: PathBuf,
    pub policy_path: PathBuf,
    pub value_path: PathBuf,
    pub art_snapshot_path: Option<PathBuf>,
    /// Highest single-episode extrinsic total seen during training.
    pub best_episode_extrinsic: f64,
}

impl RunSummary {
    /// Mean of `mean_episode_extrinsic` over the last tenth of iterations.
    pub fn final_tenth_mean_extrinsic(&self) -> f64 {
        mean_over_final_tenth(&self.rows, |r| r.mean_episode_extrinsic)
    }

    /// Mean of `mean_episode_length` over the last tenth of iterations.
    pub fn final_tenth_mean_length(&self) -> f64 {
        mean_over_final_tenth(&self.rows, |r| r.mean_episode_length)
    }
}

fn mean_over_final_tenth(rows: &[MetricsRow], f: impl Fn(&MetricsRow) -> f64) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let tail = (rows.len() / 10).max(1);
    let slice = &rows[rows.len() - tail..];
    slice.iter().map(f).sum::<f64>() / slice.len() as f64
}

fn build_provider(cfg: &RunConfig) -> Result<BonusProvider, HarnessError> {
    let encoder = Encoder::new(cfg.encoder_spec())?;
    match cfg.curiosity_kind {
        CuriosityKind::None => Ok(BonusProvider::None),
        CuriosityKind::Art => {
            let params = ArtParams {
                alpha: cfg.art_alpha,
                rho: cfg.effective_rho(),
                beta: cfg.art_beta,
                category_cap: cfg.art_category_cap,
                ..ArtParams::default()
            };
            let model = ArtModel::new(encoder.output_dim(), params)?;
            Ok(BonusProvider::Art(Box::new(ArtBonus::new(model, encoder, cfg.curiosity_k)?)))
        }
        CuriosityKind::Rnd => {
            let sizes = [encoder.output_dim(), RND_HIDDEN, RND_OUT];
            let target = Mlp::new(
                &sizes,
                HiddenActivation::Relu,
                OutputActivation::Linear,
                &mut stream_rng(cfg.seed, Stream::RndTargetInit),
            )?;
            let predictor = Mlp::new(
                &sizes,
                HiddenActivation::Relu,
                OutputActivation::Linear,
                &mut stream_rng(cfg.seed, Stream::RndPredictorInit),
            )?;
            Ok(BonusProvider::Rnd(Box::new(RndBonus::new(
                target,
                predictor,
                encoder,
                cfg.curiosity_k,
                cfg.curiosity_rnd_lr,
            )?)))
        }
    }
}

fn build_env(cfg: &RunConfig) -> Result<OrdealEnv, HarnessError> {
    let layout = match &cfg.env_layout {
        None => Layout::default_layout(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            Layout::parse(&text)?
        }
    };
    Ok(OrdealEnv::new(layout))
}

/// Trains on the Ordeal environment described by the config.
pub fn run_training(cfg: &RunConfig) -> Result<RunSummary, HarnessError> {
    let env = build_env(cfg)?;
    run_training_with_env(cfg, env)
}

/// Trains on a caller-supplied environment (stub worlds in tests).
pub fn run_training_with_env(
    cfg: &RunConfig,
    mut env: impl Environment,
) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let metrics_path = cfg.out_dir.join("metrics.csv");
    let mut csv = fs::File::create(&metrics_path).map_err(|e| io_err(&metrics_path, e))?;
    writeln!(csv, "{CSV_HEADER}").map_err(|e| io_err(&metrics_path, e))?;

    let mut provider = build_provider(cfg)?;
    let mut policy = Mlp::new(
        &[OBS_LEN, HIDDEN, HIDDEN, N_ACTIONS],
        HiddenActivation::Tanh,
        OutputActivation::Softmax,
        &mut stream_rng(cfg.seed, Stream::PolicyInit),
    )?;
    let mut value_net = Mlp::new(
        &[OBS_LEN, HIDDEN, HIDDEN, 1],
        HiddenActivation::Tanh,
        OutputActivation::Linear,
        &mut stream_rng(cfg.seed, Stream::ValueInit),
    )?;
    let mut policy_adam = AdamState::new(&policy, cfg.ppo.lr);
    let mut value_adam = AdamState::new(&value_net, cfg.ppo.lr);
    let mut sample_rng = stream_rng(cfg.seed, Stream::Sampling);
    let mut minibatch_rng = stream_rng(cfg.seed, Stream::Minibatch);

    let steps_per_rollout = cfg.ppo.steps_per_rollout;
    let iterations = cfg.total_env_steps / steps_per_rollout as u64;

    let mut obs = env.reset(cfg.seed).obs;
    let mut rows = Vec::with_capacity(iterations as usize);
    let mut episodes_completed = 0u64;
    let mut best_episode = f64::NEG_INFINITY;
    let (mut ep_ext, mut ep_int, mut ep_len) = (0.0f64, 0.0f64, 0u64);

    for iteration in 1..=iterations {
        let mut buffer = RolloutBuffer::with_capacity(steps_per_rollout);
        let mut finished: Vec<(f64, f64, u64)> = Vec::new();
        for _ in 0..steps_per_rollout {
            let input = obs.flatten();
            let (action, log_prob, value) = act(&mut policy, &mut value_net, &input, &mut sample_rng)?;
            let result = env.step(Action::from_index(action).expect("policy emits 5 actions"))?;
            // The bonus scores the observation the action produced.
            let intrinsic = provider.bonus(&result.obs)?;
            // Step-cap cuts bootstrap the final observation's value so the
            // invisible episode clock stays out of the value targets.
            let next_value = if result.truncated { value_net.forward(&result.obs.flatten())?[0] } else { 0.0 };
            buffer.push(Transition {
                obs: input,
                action,
                log_prob,
                value,
                extrinsic: result.extrinsic,
                intrinsic,
                done: result.done,
                truncated: result.truncated,
                next_value,
            });
            ep_ext += result.extrinsic;
            ep_int += intrinsic;
            ep_len += 1;
            if result.done {
                episodes_completed += 1;
                best_episode = best_episode.max(ep_ext);
                finished.push((ep_ext, ep_int, ep_len));
                (ep_ext, ep_int, ep_len) = (0.0, 0.0, 0);
                obs = env.reset(cfg.seed).obs;
            } else {
                obs = result.obs;
            }
        }
        let bootstrap = if buffer.transitions().last().map(|t| t.done).unwrap_or(true) {
            0.0
        } else {
            value_net.forward(&obs.flatten())?[0]
        };
        buffer.finalize(bootstrap, cfg.ppo.gamma, cfg.ppo.lambda_gae)?;
        let stats = ppo_update(
            &buffer,
            &mut policy,
            &mut value_net,
            &mut policy_adam,
            &mut value_adam,
            &cfg.ppo,
            &mut minibatch_rng,
        )?;

        let n_fin = finished.len() as f64;
        let (mean_ext, mean_int, mean_len) = if finished.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            (
                finished.iter().map(|e| e.0).sum::<f64>() / n_fin,
                finished.iter().map(|e| e.1).sum::<f64>() / n_fin,
                finished.iter().map(|e| e.2 as f64).sum::<f64>() / n_fin,
            )
        };
        let row = MetricsRow {
            iteration,
            env_steps: iteration * steps_per_rollout as u64,
            episodes_completed,
            mean_episode_extrinsic: mean_ext,
            mean_episode_intrinsic: mean_int,
            mean_episode_length: mean_len,
            art_category_count: provider.art_category_count().map_or(-1, |c| c as i64),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
        };
        writeln!(csv, "{}", row.to_csv_line()).map_err(|e| io_err(&metrics_path, e))?;
        csv.flush().map_err(|e| io_err(&metrics_path, e))?;
        if cfg.log_interval > 0 && iteration % cfg.log_interval == 0 {
            eprintln!(
                "iter {iteration}/{iterations} steps {} episodes {} ext {:.3} int {:.3} len {:.1} cat {}",
                row.env_steps,
                row.episodes_completed,
                row.mean_episode_extrinsic,
                row.mean_episode_intrinsic,
                row.mean_episode_length,
                row.art_category_count,
            );
        }
        rows.push(row);
    }

    let policy_path = cfg.out_dir.join("policy.ckpt");
    let value_path = cfg.out_dir.join("value.ckpt");
    policy.save(&policy_path)?;
    value_net.save(&value_path)?;
    let art_snapshot_path = match provider.art() {
        Some(art) => {
            let path = cfg.out_dir.join("art.snapshot");
            art.model().save_snapshot(&path)?;
            Some(path)
        }
        None => None,
    };

    Ok(RunSummary {
        rows,
        metrics_path,
        policy_path,
        value_path,
        art_snapshot_path,
        best_episode_extrinsic: if best_episode.is_finite() { best_episode } else { 0.0 },
    })
}

/// Named configuration presets compared by the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// ART bonus through the static projection head.
    Art,
    /// ART bonus on the raw binary observation.
    ArtHl,
    Rnd,
    None,
}

impl Variant {
    pub fn parse(name: &str) -> Option<Variant> {
        match name {
            "art" => Some(Variant::Art),
            "art-hl" => Some(Variant::ArtHl),
            "rnd" => Some(Variant::Rnd),
            "none" => Some(Variant::None),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Art => "art",
            Variant::ArtHl => "art-hl",
            Variant::Rnd => "rnd",
            Variant::None => "none",
        }
    }

    /// Applies this preset on top of a base config.
    pub fn apply(self, cfg: &mut RunConfig) {
        use crate::encoder::EncoderMode;
        match self {
            Variant::Art => {
                cfg.curiosity_kind = CuriosityKind::Art;
                cfg.encoder_mode = EncoderMode::StaticHead;
            }
            Variant::ArtHl => {
                cfg.curiosity_kind = CuriosityKind::Art;
                cfg.encoder_mode = EncoderMode::Headless;
            }
            Variant::Rnd => {
                cfg.curiosity_kind = CuriosityKind::Rnd;
                cfg.encoder_mode = EncoderMode::Headless;
            }
            Variant::None => {
                cfg.curiosity_kind = CuriosityKind::None;
                cfg.encoder_mode = EncoderMode::Headless;
            }
        }
    }
}

pub const AGGREGATE_HEADER: &str = "variant,iteration,env_steps,mean_extrinsic,std_extrinsic,\
mean_intrinsic,std_intrinsic,mean_length,std_length,mean_categories,std_categories";

#[derive(Debug, Clone)]
pub struct SuiteSummary {
    pub aggregate_path: PathBuf,
    pub run_dirs: Vec<(Variant, u64, PathBuf)>,
    pub warnings: Vec<String>,
}

/// Runs every (variant, seed) pair and aggregates per-iteration means and
/// sample standard deviations into one CSV. Failed runs are recorded as
/// warning lines and skipped in the aggregate.
pub fn run_suite(base: &RunConfig, seeds: &[u64], variants: &[Variant]) -> Result<SuiteSummary, HarnessError> {
    fs::create_dir_all(&base.out_dir).map_err(|e| io_err(&base.out_dir, e))?;
    let mut warnings = Vec::new();
    let mut run_dirs = Vec::new();
    let mut out = String::new();
    let _ = writeln!(out, "{AGGREGATE_HEADER}");

    for &variant in variants {
        let mut per_seed_rows: Vec<Vec<MetricsRow>> = Vec::new();
        for &seed in seeds {
            let mut cfg = base.clone();
            variant.apply(&mut cfg);
            cfg.seed = seed;
            cfg.out_dir = base.out_dir.join("runs").join(format!("{}-seed{}", variant.name(), seed));
            run_dirs.push((variant, seed, cfg.out_dir.clone()));
            match run_training(&cfg) {
                Ok(summary) => per_seed_rows.push(summary.rows),
                Err(e) => warnings.push(format!("run {} seed {} failed: {e}", variant.name(), seed)),
            }
        }
        if per_seed_rows.is_empty() {
            continue;
        }
        let n_iters = per_seed_rows.iter().map(Vec::len).min().unwrap_or(0);
        for i in 0..n_iters {
            let rows: Vec<&MetricsRow> = per_seed_rows.iter().map(|r| &r[i]).collect();
            let stat = |f: &dyn Fn(&MetricsRow) -> f64| mean_std(rows.iter().map(|r| f(r)));
            let (m_ext, s_ext) = stat(&|r| r.mean_episode_extrinsic);
            let (m_int, s_int) = stat(&|r| r.mean_episode_intrinsic);
            let (m_len, s_len) = stat(&|r| r.mean_episode_length);
            let (m_cat, s_cat) = stat(&|r| r.art_category_count as f64);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                variant.name(),
                rows[0].iteration,
                rows[0].env_steps,
                m_ext,
                s_ext,
                m_int,
                s_int,
                m_len,
                s_len,
                m_cat,
                s_cat,
            );
        }
    }
    for w in &warnings {
        let _ = writeln!(out, "# WARNING: {w}");
    }
    let aggregate_path = base.out_dir.join("aggregate.csv");
    fs::write(&aggregate_path, out).map_err(|e| io_err(&aggregate_path, e))?;
    Ok(SuiteSummary { aggregate_path, run_dirs, warnings })
}

/// Mean and sample standard deviation (n - 1); std is 0 below two samples.
fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = values.collect();
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_ordeal::StepResult;
    use crate::obs::Observation;

    fn tiny_cfg(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig {
            total_env_steps: 256,
            out_dir: dir.to_path_buf(),
            log_interval: 0,
            ..RunConfig::default()
        };
        cfg.ppo.steps_per_rollout = 128;
        cfg.ppo.minibatch_size = 64;
        cfg.ppo.epochs_per_update = 2;
        cfg
    }

    fn tmp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("artx-harness-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    /// A 3-observation cycling stub world that never terminates on its own.
    struct StubEnv {
        observations: Vec<Observation>,
        t: usize,
    }

    impl StubEnv {
        fn new() -> StubEnv {
            let mut rng = stream_rng(99, Stream::Env);
            StubEnv { observations: (0..3).map(|_| Observation::random(&mut rng)).collect(), t: 0 }
        }
    }

    impl Environment for StubEnv {
        fn reset(&mut self, _seed: u64) -> StepResult {
            self.t = 0;
            StepResult { obs: self.observations[0], extrinsic: 0.0, done: false, truncated: false }
        }

        fn step(&mut self, _action: Action) -> Result<StepResult, EnvError> {
            self.t += 1;
            Ok(StepResult {
                obs: self.observations[self.t % 3],
                extrinsic: 0.0,
                done: self.t % 32 == 0,
                truncated: false,
            })
        }
    }

    #[test]
    fn none_run_writes_zero_intrinsic_csv() {
        let dir = tmp_dir("none");
        let mut cfg = tiny_cfg(&dir);
        cfg.total_env_steps = 128; // one iteration
        cfg.curiosity_kind = CuriosityKind::None;
        let summary = run_training(&cfg).unwrap();
        assert_eq!(summary.rows.len(), 1);
        assert_eq!(summary.rows[0].mean_episode_intrinsic, 0.0);
        assert_eq!(summary.rows[0].art_category_count, -1);
        let read_back = read_metrics_csv(&summary.metrics_path).unwrap();
        assert_eq!(read_back, summary.rows);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn identical_config_and_seed_reproduce_csv_bytes() {
        let dir_a = tmp_dir("det-a");
        let dir_b = tmp_dir("det-b");
        let a = run_training(&tiny_cfg(&dir_a)).unwrap();
        let b = run_training(&tiny_cfg(&dir_b)).unwrap();
        let bytes_a = fs::read(&a.metrics_path).unwrap();
        let bytes_b = fs::read(&b.metrics_path).unwrap();
        assert_eq!(bytes_a, bytes_b);
        let _ = fs::remove_dir_all(&dir_a);
        let _ = fs::remove_dir_all(&dir_b);
    }

    #[test]
    fn art_on_stub_env_counts_three_categories() {
        let dir = tmp_dir("stub");
        let mut cfg = tiny_cfg(&dir);
        cfg.total_env_steps = 128;
        cfg.ppo.steps_per_rollout = 128;
        cfg.curiosity_kind = CuriosityKind::Art;
        let summary = run_training_with_env(&cfg, StubEnv::new()).unwrap();
        assert_eq!(summary.rows[0].art_category_count, 3);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn suite_aggregate_matches_hand_average() {
        let dir = tmp_dir("suite");
        let mut base = tiny_cfg(&dir);
        base.total_env_steps = 128;
        let seeds = [1u64, 2, 3];
        let summary = run_suite(&base, &seeds, &[Variant::None]).unwrap();
        assert!(summary.warnings.is_empty());
        // Recompute the mean from the three per-run CSVs.
        let mut per_run = Vec::new();
        for (_, _, run_dir) in &summary.run_dirs {
            per_run.push(read_metrics_csv(&run_dir.join("metrics.csv")).unwrap());
        }
        let hand_mean = per_run.iter().map(|r| r[0].mean_episode_extrinsic).sum::<f64>() / 3.0;
        let text = fs::read_to_string(&summary.aggregate_path).unwrap();
        let row = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], "none");
        let agg_mean: f64 = fields[3].parse().unwrap();
        assert!((agg_mean - hand_mean).abs() < 1e-12);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn single_seed_suite_has_zero_std() {
        let dir = tmp_dir("suite1");
        let mut base = tiny_cfg(&dir);
        base.total_env_steps = 128;
        let summary = run_suite(&base, &[5], &[Variant::None]).unwrap();
        let text = fs::read_to_string(&summary.aggregate_path).unwrap();
        for line in text.lines().skip(1).filter(|l| !l.starts_with('#')) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[4].parse::<f64>().unwrap(), 0.0);
            assert_eq!(fields[6].parse::<f64>().unwrap(), 0.0);
        }
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn mean_std_uses_sample_denominator() {
        let (m, s) = mean_std([1.0, 2.0, 3.0].into_iter());
        assert!((m - 2.0).abs() < 1e-15);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_std([7.0].into_iter()), (7.0, 0.0));
    }
}
