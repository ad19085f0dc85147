//! Pipeline configuration as a plain `key = value` file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::amplify::TransformKind;
use crate::capture::{ToyModelConfig, DEFAULT_EPS, DEFAULT_L_MAX};
use crate::error::{DamError, Result};
use crate::maskgen::{DEFAULT_MU, DEFAULT_TAU};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub l_max: usize,
    pub eps: f64,
    pub transform: TransformKind,
    pub tau: f64,
    pub mu: f64,
    pub model: ToyModelConfig,
    pub seed: u64,
    pub self_attend: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            l_max: DEFAULT_L_MAX,
            eps: DEFAULT_EPS,
            transform: TransformKind::default(),
            tau: DEFAULT_TAU,
            mu: DEFAULT_MU,
            model: ToyModelConfig::default(),
            seed: 0,
            self_attend: true,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Some(true),
        "false" | "off" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_max < 1 {
            return Err(DamError::Config("l_max must be at least 1".into()));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(DamError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(DamError::Config(format!("tau must be non-negative, got {}", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(DamError::Config(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        if let Some(l) = self.transform.lambda() {
            if !l.is_finite() {
                return Err(DamError::Config("lambda must be finite".into()));
            }
        }
        self.model.validate()
    }

    /// Sets one key; the same keys [`PipelineConfig::render`] emits.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || DamError::Config(format!("bad value for {key}: '{value}'"));
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let count = |v: &str| v.parse::<usize>().map_err(|_| bad());
        match key {
            "l_max" => self.l_max = count(value)?,
            "eps" => self.eps = num(value)?,
            "transform" => {
                let lambda = self.transform.lambda();
                let kind: TransformKind = value.parse()?;
                self.transform = lambda.map_or(kind, |l| kind.with_lambda(l));
            }
            "lambda" => self.transform = self.transform.with_lambda(num(value)?),
            "tau" => self.tau = num(value)?,
            "mu" => self.mu = num(value)?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "self_attend" => self.self_attend = parse_bool(value).ok_or_else(bad)?,
            "n_layers" => self.model.n_layers = count(value)?,
            "n_heads" => self.model.n_heads = count(value)?,
            "d_model" => self.model.d_model = count(value)?,
            "vocab_size" => self.model.vocab_size = count(value)?,
            "model_seed" => self.model.seed = value.parse().map_err(|_| bad())?,
            "distance_bias" => self.model.distance_bias = parse_bool(value).ok_or_else(bad)?,
            _ => return Err(DamError::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "l_max = {}", self.l_max);
        let _ = writeln!(s, "eps = {:e}", self.eps);
        let _ = writeln!(s, "transform = {}", self.transform);
        if let Some(l) = self.transform.lambda() {
            let _ = writeln!(s, "lambda = {l}");
        }
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "mu = {}", self.mu);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "self_attend = {}", self.self_attend);
        let m = &self.model;
        let _ = writeln!(s, "n_layers = {}", m.n_layers);
        let _ = writeln!(s, "n_heads = {}", m.n_heads);
        let _ = writeln!(s, "d_model = {}", m.d_model);
        let _ = writeln!(s, "vocab_size = {}", m.vocab_size);
        let _ = writeln!(s, "model_seed = {}", m.seed);
        let _ = writeln!(s, "distance_bias = {}", m.distance_bias);
        s
    }

    /// Parses a config file body over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DamError::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut cfg = PipelineConfig::default();
        // transform before lambda so the lambda lands on the chosen kind
        if let Some(t) = kv.remove("transform") {
            cfg.set("transform", &t)?;
        }
        for (k, v) in &kv {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DamError::io(path, e))?;
        Self::parse(&text)
    }
}
