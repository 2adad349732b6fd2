//! Run configuration for the `train` command, stored as flat `key=value` text.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::boosting::{StepRule, TrainConfig};
use crate::data::LabelMode;
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::sampling::SelectionRule;

pub const DEFAULT_QUANTILES: usize = 100;
pub const DEFAULT_SPLIT_FRACTION: f64 = 0.8;
pub const DEFAULT_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model_out: Option<PathBuf>,
    pub loss: String,
    pub loss_param: Option<f64>,
    pub rule: String,
    pub t: Option<usize>,
    /// `line` or `const`
    pub step: String,
    pub rho: Option<f64>,
    pub iters: usize,
    pub quantiles: usize,
    pub seed: u64,
    pub split_frac: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            out: None,
            model_out: None,
            loss: "logistic".into(),
            loss_param: None,
            rule: "type0".into(),
            t: None,
            step: "line".into(),
            rho: None,
            iters: DEFAULT_ITERATIONS,
            quantiles: DEFAULT_QUANTILES,
            seed: 0,
            split_frac: DEFAULT_SPLIT_FRACTION,
        }
    }
}

const KEYS: [&str; 14] = [
    "train",
    "test",
    "out",
    "model_out",
    "loss",
    "loss_param",
    "rule",
    "t",
    "step",
    "rho",
    "iters",
    "quantiles",
    "seed",
    "split_frac",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Sets one field from its textual form; an empty value clears optional fields.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "train" => self.train = path(value),
            "test" => self.test = path(value),
            "out" => self.out = path(value),
            "model_out" => self.model_out = path(value),
            "loss" => self.loss = value.to_string(),
            "loss_param" => self.loss_param = optional(key, value)?,
            "rule" => self.rule = value.to_string(),
            "t" => self.t = optional(key, value)?,
            "step" => self.step = value.to_string(),
            "rho" => self.rho = optional(key, value)?,
            "iters" => self.iters = parse(key, value)?,
            "quantiles" => self.quantiles = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "split_frac" => self.split_frac = parse(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "train" => show_path(&self.train),
            "test" => show_path(&self.test),
            "out" => show_path(&self.out),
            "model_out" => show_path(&self.model_out),
            "loss" => self.loss.clone(),
            "loss_param" => show(&self.loss_param),
            "rule" => self.rule.clone(),
            "t" => show(&self.t),
            "step" => self.step.clone(),
            "rho" => show(&self.rho),
            "iters" => self.iters.to_string(),
            "quantiles" => self.quantiles.to_string(),
            "seed" => self.seed.to_string(),
            "split_frac" => self.split_frac.to_string(),
            _ => return None,
        })
    }

    /// Blank lines and lines starting with `#` are ignored.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_kv(&text)
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).unwrap_or_default());
        }
        out
    }

    pub fn loss_spec(&self) -> Result<LossSpec> {
        LossSpec::from_kind(&self.loss, self.loss_param)
    }

    pub fn selection_rule(&self) -> Result<SelectionRule> {
        SelectionRule::from_kind(&self.rule, self.t)
    }

    /// `const` without ρ means ρ = 1/σ.
    pub fn step_rule(&self) -> Result<StepRule> {
        match (self.step.as_str(), self.rho) {
            ("line", _) => Ok(StepRule::LineSearch),
            ("const", Some(rho)) => Ok(StepRule::Constant(rho)),
            ("const", None) => StepRule::inverse_smoothness(&self.loss_spec()?),
            (other, _) => Err(Error::InvalidArgument(format!("unknown step rule {other:?}"))),
        }
    }

    pub fn label_mode(&self) -> LabelMode {
        match self.loss.as_str() {
            "squared" | "huber" => LabelMode::Regression,
            _ => LabelMode::Classification,
        }
    }

    /// Checks everything that can be checked before data is loaded.
    pub fn train_config(&self) -> Result<TrainConfig> {
        if self.train.is_none() {
            return Err(Error::InvalidArgument("no training file given".into()));
        }
        if self.quantiles < 2 {
            return Err(Error::InvalidArgument(format!("quantiles must be >= 2, got {}", self.quantiles)));
        }
        if self.test.is_none() && !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return Err(Error::InvalidArgument(format!("split_frac must be in (0, 1), got {}", self.split_frac)));
        }
        Ok(TrainConfig {
            loss: self.loss_spec()?,
            rule: self.selection_rule()?,
            step: self.step_rule()?,
            iterations: self.iters,
            seed: self.seed,
        })
    }
}
