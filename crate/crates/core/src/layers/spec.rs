use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LayerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "unigcn")]
    UniGcn,
    #[serde(rename = "unigat")]
    UniGat,
    #[serde(rename = "unigin")]
    UniGin,
    #[serde(rename = "unisage")]
    UniSage,
    #[serde(rename = "unigcnii")]
    UniGcnii,
    #[serde(rename = "unigcn_star")]
    UniGcnStar,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::UniGcn,
        Variant::UniGat,
        Variant::UniGin,
        Variant::UniSage,
        Variant::UniGcnii,
        Variant::UniGcnStar,
    ];

    /// GCN-style degree normalization and attention need `{i}` in every `E_i`;
    /// GIN and SAGE aggregate over the raw incident edges.
    pub fn default_self_loops(self) -> bool {
        !matches!(self, Variant::UniGin | Variant::UniSage)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::UniGcn => "unigcn",
            Variant::UniGat => "unigat",
            Variant::UniGin => "unigin",
            Variant::UniSage => "unisage",
            Variant::UniGcnii => "unigcnii",
            Variant::UniGcnStar => "unigcn_star",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = LayerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unigcn" | "gcn" => Ok(Variant::UniGcn),
            "unigat" | "gat" => Ok(Variant::UniGat),
            "unigin" | "gin" => Ok(Variant::UniGin),
            "unisage" | "sage" => Ok(Variant::UniSage),
            "unigcnii" | "gcnii" => Ok(Variant::UniGcnii),
            "unigcn*" | "unigcn_star" | "unigcnstar" => Ok(Variant::UniGcnStar),
            other => Err(LayerError::InvalidSpec(format!("unknown model variant '{other}'"))),
        }
    }
}

/// Everything needed to rebuild a network from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Number of message passing layers.
    pub num_layers: usize,
    pub input_dim: usize,
    /// Per-head width for `UniGat`.
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub heads: usize,
    pub dropout: f64,
    /// Dropout on the raw input features; `None` uses `dropout`.
    #[serde(default)]
    pub input_dropout: Option<f64>,
    pub attention_dropout: f64,
    pub epsilon_learnable: bool,
    pub alpha: f64,
    pub lambda: f64,
    pub use_norm: bool,
    /// Overrides the variant's self-loop preprocessing when set.
    #[serde(default)]
    pub self_loops: Option<bool>,
    pub seed: u64,
}

impl ModelSpec {
    /// Reference hyperparameters for `variant`: hidden 8 with 8 heads and
    /// attention dropout 0.6 for `UniGat`; hidden 64 with dropout 0.6 for the
    /// other shallow models; hidden 64 with dropout 0.2 for `UniGcnii`.
    pub fn new(variant: Variant, input_dim: usize, num_classes: usize) -> Self {
        let (hidden_dim, heads, dropout) = match variant {
            Variant::UniGat => (8, 8, 0.6),
            Variant::UniGcnii => (64, 1, 0.2),
            _ => (64, 1, 0.6),
        };
        ModelSpec {
            variant,
            num_layers: 2,
            input_dim,
            hidden_dim,
            num_classes,
            heads,
            dropout,
            input_dropout: None,
            attention_dropout: 0.6,
            epsilon_learnable: true,
            alpha: 0.1,
            lambda: 0.5,
            use_norm: true,
            self_loops: None,
            seed: 0,
        }
    }

    pub fn uses_self_loops(&self) -> bool {
        self.self_loops.unwrap_or(self.variant.default_self_loops())
    }

    pub fn input_dropout(&self) -> f64 {
        self.input_dropout.unwrap_or(self.dropout)
    }

    /// `beta_l = ln(lambda / l + 1)` for 1-based layer index `l`.
    pub fn gcnii_beta(&self, layer: usize) -> f64 {
        (self.lambda / layer as f64 + 1.0).ln()
    }

    pub fn validate(&self) -> Result<(), LayerError> {
        let bad = |msg: String| Err(LayerError::InvalidSpec(msg));
        if self.num_layers == 0 {
            return bad("num_layers must be at least 1".into());
        }
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.heads == 0 {
            return bad("heads must be at least 1".into());
        }
        for (name, p) in [
            ("dropout", self.dropout),
            ("input_dropout", self.input_dropout()),
            ("attention_dropout", self.attention_dropout),
        ] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1)"));
            }
        }
        if self.variant == Variant::UniGcnii {
            if !(self.alpha > 0.0 && self.alpha < 1.0) {
                return bad(format!("alpha = {} outside (0, 1)", self.alpha));
            }
            if self.lambda <= 0.0 {
                return bad(format!("lambda = {} must be positive", self.lambda));
            }
        }
        Ok(())
    }
}
