//! `key = value` run configuration, one setting per line, `#` comments.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::network::Architecture;
use crate::training::{LossKind, TrainConfig};

pub const KEYS: [&str; 12] = [
    "arch",
    "loss",
    "learning_rate",
    "beta1",
    "beta2",
    "adam_epsilon",
    "batch_size",
    "max_iterations",
    "seed",
    "checkpoint_interval",
    "output_dir",
    "stop_loss",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub arch: Architecture,
    pub loss: LossKind,
    pub train: TrainConfig,
    /// Checkpoints and the metrics log go here.
    pub output_dir: PathBuf,
    /// Ends training early once the loss reaches this value.
    pub stop_loss: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            arch: Architecture::default(),
            loss: LossKind::default(),
            train: TrainConfig::default(),
            output_dir: PathBuf::from("run"),
            stop_loss: None,
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e: T::Err| Error::Config {
        key: key.to_string(),
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                message: format!("line {} is not `key = value`", i + 1),
            })?;
            let (key, val) = (key.trim(), val.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config {
                    key: key.to_string(),
                    message: format!("unknown key (valid keys: {})", KEYS.join(", ")),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    key: key.to_string(),
                    message: "set more than once".into(),
                });
            }
            let t = &mut cfg.train;
            match key {
                "arch" => cfg.arch = value(key, val)?,
                "loss" => cfg.loss = value(key, val)?,
                "learning_rate" => t.learning_rate = value(key, val)?,
                "beta1" => t.beta1 = value(key, val)?,
                "beta2" => t.beta2 = value(key, val)?,
                "adam_epsilon" => t.adam_epsilon = value(key, val)?,
                "batch_size" => t.batch_size = value(key, val)?,
                "max_iterations" => t.max_iterations = value(key, val)?,
                "seed" => t.seed = value(key, val)?,
                "checkpoint_interval" => t.checkpoint_interval = value(key, val)?,
                "output_dir" => cfg.output_dir = PathBuf::from(val),
                "stop_loss" => cfg.stop_loss = Some(value(key, val)?),
                _ => unreachable!("key list checked above"),
            }
        }
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// Parses a config file; a relative `output_dir` resolves against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if cfg.output_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    /// One-line summary printed at the start of a run.
    pub fn header(&self) -> String {
        let t = &self.train;
        format!(
            "arch={} loss={} lr={} beta1={} beta2={} eps={:e} batch={} iters={} seed={} checkpoint_interval={}",
            self.arch,
            self.loss,
            t.learning_rate,
            t.beta1,
            t.beta2,
            t.adam_epsilon,
            t.batch_size,
            t.max_iterations,
            t.seed,
            t.checkpoint_interval
        )
    }
}
