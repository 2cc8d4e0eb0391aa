//! Run configuration: defaults, a flat `key = value` config-file parser, and
//! CLI-style overrides.
//!
//! Config files hold one `key = value` pair per line; `#` starts a comment and
//! blank lines are ignored. Keys mirror the [`TrainConfig`] field names
//! exactly, and unknown keys are rejected so typos fail loudly.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which alignment signal regularizes training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Fréchet-mean pooled alignment on the ball.
    Pooled,
    /// Token-level attention alignment on the ball.
    Token,
    /// Pooled alignment with curvature frozen near zero (flat baseline).
    EuclideanPooled,
    /// Token alignment with curvature frozen near zero (flat baseline).
    EuclideanToken,
    /// Cross-entropy only; the alignment loss is identically zero.
    None,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Pooled => "pooled",
            Strategy::Token => "token",
            Strategy::EuclideanPooled => "euclidean_pooled",
            Strategy::EuclideanToken => "euclidean_token",
            Strategy::None => "none",
        }
    }

    /// Flat baselines freeze curvature at c = 1e−3 and keep it fixed.
    pub fn is_euclidean(self) -> bool {
        matches!(self, Strategy::EuclideanPooled | Strategy::EuclideanToken)
    }

    /// Whether the alignment loss uses per-token attention contexts.
    pub fn is_token(self) -> bool {
        matches!(self, Strategy::Token | Strategy::EuclideanToken)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Strategy::Pooled),
            "token" => Ok(Strategy::Token),
            "euclidean_pooled" => Ok(Strategy::EuclideanPooled),
            "euclidean_token" => Ok(Strategy::EuclideanToken),
            "none" => Ok(Strategy::None),
            other => Err(Error::Config(format!(
                "unknown strategy: {other} (expected pooled, token, euclidean_pooled, euclidean_token, or none)"
            ))),
        }
    }
}

/// All knobs for data generation, training, ablations, and export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    // Run identity.
    pub seed: u64,
    pub strategy: Strategy,
    pub dataset: String,
    pub out_dir: String,

    // Synthetic data.
    pub labels: usize,
    pub samples_per_class: usize,
    pub frames: usize,
    /// Generator jitter applied to prototype motions.
    pub gen_noise: f64,

    // Model widths.
    pub d_gcn: usize,
    pub d_model: usize,
    pub d_hyp: usize,

    // Hyperbolic head.
    pub init_c: f64,
    pub learnable_c: bool,
    pub alpha_init: f64,
    pub smoothing: f64,
    /// Initial contrastive temperature τ₀.
    pub tau0: f64,
    /// Initial contrastive margin.
    pub margin: f64,
    /// Softmax temperature for radius-based part weights.
    pub weight_temperature: f64,

    // Optimization.
    pub lr: f64,
    pub hyp_lr: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_epochs: f64,
    pub min_lr: f64,

    // Evaluation.
    /// Gaussian noise added to keypoints at evaluation time only.
    pub eval_noise: f64,

    // Plumbing.
    pub use_norm: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            strategy: Strategy::Token,
            dataset: "data/synth.jsonl".into(),
            out_dir: "runs".into(),
            labels: 20,
            samples_per_class: 40,
            frames: 32,
            gen_noise: 0.02,
            d_gcn: 32,
            d_model: 32,
            d_hyp: 64,
            init_c: 1.5,
            learnable_c: true,
            alpha_init: 0.7,
            smoothing: 0.2,
            tau0: 0.5,
            margin: 0.0,
            weight_temperature: 1.0,
            lr: 3e-5,
            hyp_lr: 1e-3,
            weight_decay: 0.01,
            grad_clip: 1.0,
            epochs: 20,
            batch_size: 32,
            warmup_epochs: 5.0,
            min_lr: 1e-6,
            eval_noise: 0.0,
            use_norm: true,
        }
    }
}

impl TrainConfig {
    /// Parse a flat `key = value` file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                )));
            };
            cfg.set(key.trim(), value.trim()).map_err(|e| {
                Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value for {key}: {value}")))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "strategy" => self.strategy = value.parse()?,
            "dataset" => self.dataset = value.to_string(),
            "out_dir" => self.out_dir = value.to_string(),
            "labels" => self.labels = num(key, value)?,
            "samples_per_class" => self.samples_per_class = num(key, value)?,
            "frames" => self.frames = num(key, value)?,
            "gen_noise" => self.gen_noise = num(key, value)?,
            "d_gcn" => self.d_gcn = num(key, value)?,
            "d_model" => self.d_model = num(key, value)?,
            "d_hyp" => self.d_hyp = num(key, value)?,
            "init_c" => self.init_c = num(key, value)?,
            "learnable_c" => self.learnable_c = num(key, value)?,
            "alpha_init" => self.alpha_init = num(key, value)?,
            "smoothing" => self.smoothing = num(key, value)?,
            "tau0" => self.tau0 = num(key, value)?,
            "margin" => self.margin = num(key, value)?,
            "weight_temperature" => self.weight_temperature = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "hyp_lr" => self.hyp_lr = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "grad_clip" => self.grad_clip = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "warmup_epochs" => self.warmup_epochs = num(key, value)?,
            "min_lr" => self.min_lr = num(key, value)?,
            "eval_noise" => self.eval_noise = num(key, value)?,
            "use_norm" => self.use_norm = num(key, value)?,
            other => return Err(Error::Config(format!("unknown config key: {other}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        }
        if self.labels < 2 {
            return Err(Error::Config(format!("labels must be >= 2, got {}", self.labels)));
        }
        if self.frames < 4 {
            return Err(Error::Config(format!("frames must be >= 4, got {}", self.frames)));
        }
        for (name, v) in [
            ("samples_per_class", self.samples_per_class),
            ("d_gcn", self.d_gcn),
            ("d_model", self.d_model),
            ("d_hyp", self.d_hyp),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        positive("init_c", self.init_c)?;
        positive("tau0", self.tau0)?;
        positive("weight_temperature", self.weight_temperature)?;
        positive("lr", self.lr)?;
        positive("hyp_lr", self.hyp_lr)?;
        positive("grad_clip", self.grad_clip)?;
        positive("min_lr", self.min_lr)?;
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::Config(format!(
                "smoothing must lie in [0, 1), got {}",
                self.smoothing
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha_init) || self.alpha_init == 0.0 {
            return Err(Error::Config(format!(
                "alpha_init must lie in (0, 1], got {}",
                self.alpha_init
            )));
        }
        for (name, v) in [
            ("gen_noise", self.gen_noise),
            ("eval_noise", self.eval_noise),
            ("weight_decay", self.weight_decay),
            ("warmup_epochs", self.warmup_epochs),
            ("margin", self.margin),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// JSON form for embedding into checkpoints and metrics headers.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_value(v.clone())?;
        cfg.validate()?;
        Ok(cfg)
    }
}
