//! Per-iteration training metrics and their CSV form.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metrics parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("metrics I/O error for {path}: {message}")]
    Io { path: String, message: String },
}

/// The exact CSV column order.
pub const CSV_HEADER: &str = "iteration,env_steps,episodes_completed,mean_episode_extrinsic,\
mean_episode_intrinsic,mean_episode_length,art_category_count,policy_loss,value_loss,entropy,clip_fraction";

/// One row per PPO iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub env_steps: u64,
    pub episodes_completed: u64,
    pub mean_episode_extrinsic: f64,
    pub mean_episode_intrinsic: f64,
    pub mean_episode_length: f64,
    /// -1 for runs without an ART provider.
    pub art_category_count: i64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.env_steps,
            self.episodes_completed,
            self.mean_episode_extrinsic,
            self.mean_episode_intrinsic,
            self.mean_episode_length,
            self.art_category_count,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.clip_fraction,
        )
    }

    pub fn parse_csv_line(line: &str, line_no: usize) -> Result<MetricsRow, MetricsError> {
        let err = |message: String| MetricsError::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(err(format!("expected 11 fields, got {}", fields.len())));
        }
        fn field<T: std::str::FromStr>(s: &str, name: &str, line_no: usize) -> Result<T, MetricsError> {
            s.parse().map_err(|_| MetricsError::Parse {
                line: line_no,
                message: format!("bad {name} `{s}`"),
            })
        }
        Ok(MetricsRow {
            iteration: field(fields[0], "iteration", line_no)?,
            env_steps: field(fields[1], "env_steps", line_no)?,
            episodes_completed: field(fields[2], "episodes_completed", line_no)?,
            mean_episode_extrinsic: field(fields[3], "mean_episode_extrinsic", line_no)?,
            mean_episode_intrinsic: field(fields[4], "mean_episode_intrinsic", line_no)?,
            mean_episode_length: field(fields[5], "mean_episode_length", line_no)?,
            art_category_count: field(fields[6], "art_category_count", line_no)?,
            policy_loss: field(fields[7], "policy_loss", line_no)?,
            value_loss: field(fields[8], "value_loss", line_no)?,
            entropy: field(fields[9], "entropy", line_no)?,
            clip_fraction: field(fields[10], "clip_fraction", line_no)?,
        })
    }
}

/// Reads a metrics CSV written by the trainer.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|e| MetricsError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, other)) => {
            return Err(MetricsError::Parse { line: 1, message: format!("unexpected header `{other}`") })
        }
        None => return Err(MetricsError::Parse { line: 1, message: "empty file".into() }),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| MetricsRow::parse_csv_line(line, idx + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> MetricsRow {
        MetricsRow {
            iteration: 3,
            env_steps: 6144,
            episodes_completed: 17,
            mean_episode_extrinsic: 0.25,
            mean_episode_intrinsic: 1.75,
            mean_episode_length: 123.5,
            art_category_count: 42,
            policy_loss: -0.01,
            value_loss: 0.3,
            entropy: 1.55,
            clip_fraction: 0.125,
        }
    }

    #[test]
    fn header_matches_field_order() {
        let fields: Vec<&str> = CSV_HEADER.split(',').collect();
        assert_eq!(
            fields,
            vec![
                "iteration",
                "env_steps",
                "episodes_completed",
                "mean_episode_extrinsic",
                "mean_episode_intrinsic",
                "mean_episode_length",
                "art_category_count",
                "policy_loss",
                "value_loss",
                "entropy",
                "clip_fraction"
            ]
        );
    }

    #[test]
    fn csv_line_round_trips() {
        let r = row();
        let parsed = MetricsRow::parse_csv_line(&r.to_csv_line(), 2).unwrap();
        assert_eq!(parsed, r);
    }

    #[test]
    fn parse_error_names_line() {
        let err = MetricsRow::parse_csv_line("1,2,3", 9).unwrap_err();
        assert!(matches!(err, MetricsError::Parse { line: 9, .. }));
    }
}
