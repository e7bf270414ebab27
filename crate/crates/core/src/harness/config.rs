//! Run configuration: a flat `key = value` text format with dotted keys,
//! overridable from the command line with `--set key=value".

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::encoder::{EncoderMode, EncoderSpec};
use crate::ppo::PpoConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("config I/O error for {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuriosityKind {
    Art,
    Rnd,
    None,
}

impl CuriosityKind {
    pub fn name(self) -> &'static str {
        match self {
            CuriosityKind::Art => "art",
            CuriosityKind::Rnd => "rnd",
            CuriosityKind::None => "none",
        }
    }
}

/// Everything a single training run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub total_env_steps: u64,
    pub log_interval: u64,
    pub out_dir: PathBuf,
    /// Layout file; `None` uses the bundled default map.
    pub env_layout: Option<PathBuf>,
    pub encoder_mode: EncoderMode,
    pub encoder_head_dim: usize,
    /// Projection seed for the static head; `None` follows the run seed.
    pub encoder_seed: Option<u64>,
    pub curiosity_kind: CuriosityKind,
    pub curiosity_k: f64,
    pub curiosity_rnd_lr: f64,
    pub art_alpha: f64,
    /// `None` resolves by encoder mode: 1.0 headless, 0.9 static head.
    pub art_rho: Option<f64>,
    pub art_beta: f64,
    pub art_category_cap: Option<usize>,
    pub ppo: PpoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            total_env_steps: 200_000,
            log_interval: 10,
            out_dir: PathBuf::from("out"),
            env_layout: None,
            encoder_mode: EncoderMode::Headless,
            encoder_head_dim: 16,
            encoder_seed: None,
            curiosity_kind: CuriosityKind::Art,
            curiosity_k: 0.1,
            curiosity_rnd_lr: 1e-3,
            art_alpha: 0.01,
            art_rho: None,
            art_beta: 1.0,
            art_category_cap: None,
            ppo: PpoConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a config file and applies `--set` overrides, then the
    /// `ARTX_OUT_DIR` environment override.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut kv = parse_kv(&text)?;
        for (k, v) in overrides {
            kv.insert(k.clone(), v.clone());
        }
        let mut cfg = RunConfig::from_kv(&kv)?;
        if let Ok(dir) = std::env::var("ARTX_OUT_DIR") {
            if !dir.is_empty() {
                cfg.out_dir = PathBuf::from(dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        for (key, value) in kv {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| ConfigError::InvalidValue { key: key.into(), message };
        macro_rules! parse {
            ($key:expr, $value:expr) => {
                $value.parse().map_err(|e| bad($key, format!("{e}")))?
            };
        }
        match key {
            "seed" => self.seed = parse!(key, value),
            "total_env_steps" => self.total_env_steps = parse!(key, value),
            "log_interval" => self.log_interval = parse!(key, value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "env.layout" => {
                self.env_layout = if value.is_empty() { None } else { Some(PathBuf::from(value)) }
            }
            "encoder.mode" => {
                self.encoder_mode = match value {
                    "headless" => EncoderMode::Headless,
                    "static_head" => EncoderMode::StaticHead,
                    other => {
                        return Err(bad(key, format!("`{other}` is not `headless` or `static_head`")))
                    }
                }
            }
            "encoder.head_dim" => self.encoder_head_dim = parse!(key, value),
            "encoder.seed" => self.encoder_seed = Some(parse!(key, value)),
            "curiosity.kind" => {
                self.curiosity_kind = match value {
                    "art" => CuriosityKind::Art,
                    "rnd" => CuriosityKind::Rnd,
                    "none" => CuriosityKind::None,
                    other => return Err(bad(key, format!("`{other}` is not `art`, `rnd` or `none`"))),
                }
            }
            "curiosity.k" => self.curiosity_k = parse!(key, value),
            "curiosity.rnd_lr" => self.curiosity_rnd_lr = parse!(key, value),
            "art.alpha" => self.art_alpha = parse!(key, value),
            "art.rho" => self.art_rho = Some(parse!(key, value)),
            "art.beta" => self.art_beta = parse!(key, value),
            "art.category_cap" => {
                self.art_category_cap = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(parse!(key, value))
                }
            }
            "ppo.gamma" => self.ppo.gamma = parse!(key, value),
            "ppo.lambda_gae" => self.ppo.lambda_gae = parse!(key, value),
            "ppo.clip_epsilon" => self.ppo.clip_epsilon = parse!(key, value),
            "ppo.epochs_per_update" => self.ppo.epochs_per_update = parse!(key, value),
            "ppo.minibatch_size" => self.ppo.minibatch_size = parse!(key, value),
            "ppo.steps_per_rollout" => self.ppo.steps_per_rollout = parse!(key, value),
            "ppo.value_coef" => self.ppo.value_coef = parse!(key, value),
            "ppo.entropy_coef" => self.ppo.entropy_coef = parse!(key, value),
            "ppo.lr" => self.ppo.lr = parse!(key, value),
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.total_env_steps < self.ppo.steps_per_rollout as u64 {
            return Err(ConfigError::Invalid(format!(
                "total_env_steps ({}) must be at least ppo.steps_per_rollout ({})",
                self.total_env_steps, self.ppo.steps_per_rollout
            )));
        }
        if self.ppo.steps_per_rollout == 0 || self.ppo.minibatch_size == 0 || self.ppo.epochs_per_update == 0 {
            return Err(ConfigError::Invalid("ppo sizes must be positive".into()));
        }
        if let Some(path) = &self.env_layout {
            if !path.exists() {
                return Err(ConfigError::Io {
                    path: path.display().to_string(),
                    message: "layout file not found".into(),
                });
            }
        }
        Ok(())
    }

    /// Effective vigilance: explicit value, or the per-mode default.
    pub fn effective_rho(&self) -> f64 {
        self.art_rho.unwrap_or(match self.encoder_mode {
            EncoderMode::Headless => 1.0,
            EncoderMode::StaticHead => 0.9,
        })
    }

    pub fn encoder_spec(&self) -> EncoderSpec {
        EncoderSpec {
            mode: self.encoder_mode,
            head_dim: self.encoder_head_dim,
            seed: self.encoder_seed.unwrap_or(self.seed),
        }
    }
}

/// `key = value` lines; `#` starts a full-line comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let text = "# run settings\nseed = 7\nppo.gamma = 0.95\ncuriosity.kind = rnd\n\n";
        let kv = parse_kv(text).unwrap();
        let cfg = RunConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.ppo.gamma, 0.95);
        assert_eq!(cfg.curiosity_kind, CuriosityKind::Rnd);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let kv = parse_kv("ppo.gama = 0.9\n").unwrap();
        assert_eq!(RunConfig::from_kv(&kv).unwrap_err(), ConfigError::UnknownKey("ppo.gama".into()));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = parse_kv("seed = 1\nnot a pair\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn rho_defaults_follow_encoder_mode() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.effective_rho(), 1.0);
        cfg.encoder_mode = EncoderMode::StaticHead;
        assert_eq!(cfg.effective_rho(), 0.9);
        cfg.art_rho = Some(0.5);
        assert_eq!(cfg.effective_rho(), 0.5);
    }

    #[test]
    fn budget_must_cover_one_rollout() {
        let mut cfg = RunConfig { total_env_steps: 10, ..RunConfig::default() };
        cfg.ppo.steps_per_rollout = 64;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }
}
