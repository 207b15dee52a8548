//! Transformer encoder-decoder with exact backpropagation.
//!
//! The architecture follows the BART/mBART lineage: GeLU activations,
//! `N(0, 0.02)` weight initialization, learned positional embeddings with
//! two reserved offset positions, post-norm sublayers plus one extra
//! layer-normalization on top of both the encoder and the decoder, and a
//! token embedding shared between encoder input, decoder input, and the
//! output projection.

mod checkpoint;
mod net;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use net::{
    cross_entropy, decoder_logits, encode_source, forward, gelu, loss_and_gradients,
    EncoderStates, ModelError,
};
pub use params::{
    AttentionParams, DecoderLayerParams, EncoderLayerParams, LayerNormParams, Parameters, Scalar,
    TensorMut, TensorRef,
};

use serde::{Deserialize, Serialize};

/// Positions 0 and 1 of the positional embedding tables are reserved;
/// token `i` reads position `i + POSITION_OFFSET`.
pub const POSITION_OFFSET: usize = 2;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// The "large" preset: 12/12 layers, width 1024, 16 heads, FFN 4096.
    pub fn paper_large(vocab_size: usize) -> Self {
        ModelConfig {
            encoder_layers: 12,
            decoder_layers: 12,
            d_model: 1024,
            heads: 16,
            ffn_dim: 4096,
            vocab_size,
            max_positions: 1024,
            dropout: 0.1,
        }
    }

    /// Desk-scale preset for tests and smoke runs.
    pub fn tiny(vocab_size: usize) -> Self {
        ModelConfig {
            encoder_layers: 2,
            decoder_layers: 2,
            d_model: 64,
            heads: 4,
            ffn_dim: 256,
            vocab_size,
            max_positions: 128,
            dropout: 0.0,
        }
    }

    /// Looks up a named preset.
    pub fn preset(name: &str, vocab_size: usize) -> Option<Self> {
        match name {
            "paper-large" => Some(Self::paper_large(vocab_size)),
            "tiny" => Some(Self::tiny(vocab_size)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.d_model % self.heads != 0 {
            return Err(format!(
                "d_model {} not divisible by heads {}",
                self.d_model, self.heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.vocab_size == 0 || self.d_model == 0 || self.max_positions == 0 {
            return Err("zero-sized dimension".to_string());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }
}

/// Exact number of scalar parameters, with the tied embedding counted
/// once.
pub fn parameter_count(config: &ModelConfig) -> u64 {
    let d = config.d_model as u64;
    let f = config.ffn_dim as u64;
    let v = config.vocab_size as u64;
    let p = (config.max_positions + POSITION_OFFSET) as u64;

    let attention = 4 * (d * d + d);
    let layer_norm = 2 * d;
    let ffn = d * f + f + f * d + d;
    let encoder_layer = attention + ffn + 2 * layer_norm;
    let decoder_layer = 2 * attention + ffn + 3 * layer_norm;

    v * d
        + 2 * (p * d)
        + config.encoder_layers as u64 * encoder_layer
        + config.decoder_layers as u64 * decoder_layer
        + 2 * layer_norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_large_counts_match_published_sizes() {
        let large_64k = parameter_count(&ModelConfig::paper_large(64_000));
        let large_40k = parameter_count(&ModelConfig::paper_large(40_000));

        let rel = |count: u64, target: f64| (count as f64 - target).abs() / target;
        assert!(
            rel(large_64k, 420e6) < 0.015,
            "64K vocab count {large_64k} not within 1.5% of 420M"
        );
        assert!(
            rel(large_40k, 396e6) < 0.015,
            "40K vocab count {large_40k} not within 1.5% of 396M"
        );

        // Under tying, vocabulary growth touches only the embedding.
        assert_eq!(large_64k - large_40k, 24_000 * 1024);
    }

    #[test]
    fn tiny_count_matches_hand_sum() {
        let config = ModelConfig::tiny(100);
        // Hand sum over tensor shapes of the tiny preset:
        //   embedding            100 x 64        = 6400
        //   positions            2 x (130 x 64)  = 16640
        //   attention            4 x (64x64 + 64) = 16640
        //   layer norm           128
        //   ffn                  64x256 + 256 + 256x64 + 64 = 33088
        //   encoder layer        16640 + 33088 + 2x128 = 49984
        //   decoder layer        2x16640 + 33088 + 3x128 = 66752
        //   total = 6400 + 16640 + 2x49984 + 2x66752 + 2x128
        let expected = 6400 + 16640 + 2 * 49984 + 2 * 66752 + 256;
        assert_eq!(parameter_count(&config), expected);
    }

    #[test]
    fn preset_lookup() {
        assert!(ModelConfig::preset("paper-large", 64_000).is_some());
        assert!(ModelConfig::preset("tiny", 100).is_some());
        assert!(ModelConfig::preset("huge", 100).is_none());
    }

    #[test]
    fn validate_rejects_bad_head_split() {
        let mut config = ModelConfig::tiny(100);
        config.heads = 5;
        assert!(config.validate().is_err());
    }
}
