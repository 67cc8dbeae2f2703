use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::TargetPolicy;

/// What the context encoder feeds the decoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    None,
    /// Mean of the encoded recipe ingredients (source included).
    #[default]
    Ingredients,
    /// Precomputed title embedding.
    Title,
    /// Ingredient mean followed by the title embedding.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GismoConfig {
    pub gin_layers: usize,
    /// Width of the input node features.
    pub feature_dim: usize,
    /// Width of the encoded ingredient embeddings.
    pub embed_dim: usize,
    /// Number of linear layers in the decoder MLP.
    pub decoder_layers: usize,
    pub decoder_hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub dropout_in_encoder: bool,
    pub dropout_in_decoder: bool,
    pub max_epochs: usize,
    pub patience: usize,
    /// Negatives per positive tuple.
    pub negatives: usize,
    pub batch_size: usize,
    pub context_mode: ContextMode,
    /// When false the GIN stack is skipped and raw features go to the decoder.
    pub use_graph: bool,
    /// Probability of swapping source and target of a training tuple.
    pub swap_prob: f64,
    pub seed: u64,
    /// Width of title embeddings; required by the `title` and `both` modes.
    pub title_dim: usize,
    /// Injected input features stay fixed when true.
    pub freeze_features: bool,
    /// Weight of the L2 pull-back toward injected features when fine-tuning them.
    pub feature_l2: f64,
    /// Validation ranking policy used for early stopping.
    pub target_policy: TargetPolicy,
}

impl Default for GismoConfig {
    fn default() -> Self {
        GismoConfig {
            gin_layers: 2,
            feature_dim: 300,
            embed_dim: 300,
            decoder_layers: 3,
            decoder_hidden: 300,
            lr: 5e-5,
            weight_decay: 1e-4,
            dropout: 0.25,
            dropout_in_encoder: true,
            dropout_in_decoder: true,
            max_epochs: 1000,
            patience: 50,
            negatives: 50,
            batch_size: 512,
            context_mode: ContextMode::Ingredients,
            use_graph: true,
            swap_prob: 0.0,
            seed: 0,
            title_dim: 0,
            freeze_features: false,
            feature_l2: 0.0,
            target_policy: TargetPolicy::Filtered,
        }
    }
}

impl GismoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, v) in [
            ("gin_layers", self.gin_layers),
            ("feature_dim", self.feature_dim),
            ("embed_dim", self.embed_dim),
            ("decoder_layers", self.decoder_layers),
            ("decoder_hidden", self.decoder_hidden),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(0.0..=1.0).contains(&self.swap_prob) {
            return bad(format!("swap_prob must be in [0, 1], got {}", self.swap_prob));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.feature_l2 >= 0.0) {
            return bad("weight_decay and feature_l2 must be non-negative".into());
        }
        if matches!(self.context_mode, ContextMode::Title | ContextMode::Both) && self.title_dim == 0 {
            return bad("title context needs title_dim > 0".into());
        }
        Ok(())
    }

    /// Width of the encoded ingredient rows the decoder reads.
    pub fn encoded_dim(&self) -> usize {
        if self.use_graph {
            self.embed_dim
        } else {
            self.feature_dim
        }
    }

    pub fn context_dim(&self) -> usize {
        match self.context_mode {
            ContextMode::None => 0,
            ContextMode::Ingredients => self.encoded_dim(),
            ContextMode::Title => self.title_dim,
            ContextMode::Both => self.encoded_dim() + self.title_dim,
        }
    }

    pub fn decoder_input_dim(&self) -> usize {
        2 * self.encoded_dim() + self.context_dim()
    }
}
