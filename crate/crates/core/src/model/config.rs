use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Flag, KeyValues};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Similarity {
    Cosine,
}

impl FromStr for Similarity {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "cosine" => Ok(Self::Cosine),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cosine => f.write_str("cosine"),
        }
    }
}

/// Which sub-modules are active. All on is the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Group <-> student fusion of frame encodings.
    pub reciprocal: bool,
    /// Similarity-driven per-frame graph; off leaves each node isolated.
    pub dyngraph: bool,
    /// Absence-perceived attention in group-side fusion; off uses a plain mean
    /// over all members, absent ones included.
    pub attention_agg: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            reciprocal: true,
            dyngraph: true,
            attention_agg: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding and hidden size; node features have width `2 * d`.
    pub d: usize,
    pub gcn_layers: usize,
    pub attn_layers: usize,
    /// Student neighbours per node; `None` means `min(3, |o| - 1)`.
    pub top_k: Option<usize>,
    pub heads: usize,
    /// Build the frame-t query from a snapshot with response encodings zeroed.
    pub strict_no_leak: bool,
    pub similarity: Similarity,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 256,
            gcn_layers: 2,
            attn_layers: 4,
            top_k: None,
            heads: 1,
            strict_no_leak: true,
            similarity: Similarity::Cosine,
            ablation: Ablation::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.d < 2 || self.d % 2 != 0 {
            return Err(ConfigError::Invalid(format!("d must be even and >= 2, got {}", self.d)));
        }
        if self.gcn_layers == 0 || self.attn_layers == 0 {
            return Err(ConfigError::Invalid("gcn_layers and attn_layers must be >= 1".into()));
        }
        if self.top_k == Some(0) {
            return Err(ConfigError::Invalid("top_k must be >= 1".into()));
        }
        if self.heads == 0 || self.d % self.heads != 0 {
            return Err(ConfigError::Invalid(format!(
                "heads ({}) must divide d ({})",
                self.heads, self.d
            )));
        }
        Ok(())
    }

    pub fn top_k_for(&self, group_size: usize) -> usize {
        self.top_k
            .unwrap_or_else(|| 3.min(group_size.saturating_sub(1)).max(1))
    }

    /// Reads the model keys from `kv`; unknown keys are left for other
    /// consumers.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<(), ConfigError> {
        kv.read("d", &mut self.d)?;
        kv.read("gcn_layers", &mut self.gcn_layers)?;
        kv.read("attn_layers", &mut self.attn_layers)?;
        kv.read("heads", &mut self.heads)?;
        if let Some(v) = kv.get("top_k") {
            self.top_k = match v {
                "auto" => None,
                _ => Some(v.parse().map_err(|_| ConfigError::BadValue {
                    key: "top_k".into(),
                    value: v.into(),
                })?),
            };
        }
        let mut flag = Flag(self.strict_no_leak);
        kv.read("strict_no_leak", &mut flag)?;
        self.strict_no_leak = flag.0;
        kv.read("similarity", &mut self.similarity)?;
        for (key, slot) in [
            ("reciprocal", &mut self.ablation.reciprocal),
            ("dyngraph", &mut self.ablation.dyngraph),
            ("attention_agg", &mut self.ablation.attention_agg),
        ] {
            let mut flag = Flag(*slot);
            kv.read(key, &mut flag)?;
            *slot = flag.0;
        }
        self.validate()
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("d", self.d);
        kv.set("gcn_layers", self.gcn_layers);
        kv.set("attn_layers", self.attn_layers);
        kv.set(
            "top_k",
            self.top_k.map_or_else(|| "auto".to_string(), |k| k.to_string()),
        );
        kv.set("heads", self.heads);
        kv.set("strict_no_leak", on_off(self.strict_no_leak));
        kv.set("similarity", self.similarity);
        kv.set("reciprocal", on_off(self.ablation.reciprocal));
        kv.set("dyngraph", on_off(self.ablation.dyngraph));
        kv.set("attention_agg", on_off(self.ablation.attention_agg));
        kv
    }
}

pub(crate) fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}
