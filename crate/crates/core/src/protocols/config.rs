use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MetaBaseline,
    CmnLite,
    OtamLite,
    Baseline,
    BaselinePlus,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MetaBaseline,
        Method::CmnLite,
        Method::OtamLite,
        Method::Baseline,
        Method::BaselinePlus,
    ];

    /// Trained by cross-entropy over base classes and adapted with a new head.
    pub fn is_classifier(self) -> bool {
        matches!(self, Method::Baseline | Method::BaselinePlus)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::MetaBaseline => "meta-baseline",
            Method::CmnLite => "cmn-lite",
            Method::OtamLite => "otam-lite",
            Method::Baseline => "baseline",
            Method::BaselinePlus => "baseline-plus",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Scratch,
    Pretrained,
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scratch" => Ok(Init::Scratch),
            "pretrained" => Ok(Init::Pretrained),
            other => Err(Error::Config(format!("unknown init {other:?}"))),
        }
    }
}

/// Everything that determines how a model is trained and adapted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub method: Method,
    pub n_way: usize,
    pub k_shot: usize,
    /// Multiplier on metric similarities before the softmax.
    pub temperature: f64,
    pub embed_dim: usize,
    pub saliency_heads: usize,
    pub lr_base: f64,
    pub lr_adapt: f64,
    pub iters_adapt: usize,
    /// Dropout before the base classifier; used by baseline-plus only.
    pub dropout_p: f64,
    pub init: Init,
    pub seed: u64,
    pub dtw_normalize: bool,
    pub batch_size: usize,
    pub epochs: usize,
    /// Meta-training episodes per epoch.
    pub episodes_per_epoch: usize,
    /// Validation episodes scored after every epoch for model selection.
    pub val_episodes: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub pretrain_epochs: usize,
}

impl MethodConfig {
    pub fn new(method: Method, init: Init) -> Self {
        Self {
            method,
            n_way: 5,
            k_shot: 1,
            temperature: 10.0,
            embed_dim: 16,
            saliency_heads: 4,
            lr_base: default_base_lr(method, init),
            lr_adapt: 1e-2,
            iters_adapt: 100,
            dropout_p: 0.5,
            init,
            seed: 0,
            dtw_normalize: false,
            batch_size: 32,
            epochs: 100,
            episodes_per_epoch: 200,
            val_episodes: 200,
            patience: 30,
            pretrain_epochs: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_way < 2 || self.k_shot == 0 {
            return bad(format!("{}-way {}-shot task", self.n_way, self.k_shot));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be positive", self.temperature));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout_p));
        }
        if self.embed_dim == 0 || self.saliency_heads == 0 || self.batch_size == 0 {
            return bad("embed_dim, saliency_heads and batch_size must be positive".into());
        }
        if !(self.lr_base > 0.0 && self.lr_adapt > 0.0) {
            return bad("learning rates must be positive".into());
        }
        Ok(())
    }

    /// Dropout rate actually applied during base training.
    pub fn train_dropout(&self) -> f64 {
        if self.method == Method::BaselinePlus {
            self.dropout_p
        } else {
            0.0
        }
    }

    /// Short hex digest of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// 1e-3 from scratch; with pretrained weights 1e-4 for classifier methods and
/// 1e-5 for metric methods.
pub fn default_base_lr(method: Method, init: Init) -> f64 {
    match (init, method.is_classifier()) {
        (Init::Scratch, _) => 1e-3,
        (Init::Pretrained, true) => 1e-4,
        (Init::Pretrained, false) => 1e-5,
    }
}
